#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparseweak/grid.hpp"
#include "sparseweak/sparse.hpp"
#include "sparseweak/young.hpp"

namespace sparseweak {

/// ||g||_{L^{1,inf}(w)} = sup_{lambda>0} lambda w({g > lambda}).
///
/// For piecewise-constant g the supremum is max over positive values v of g
/// of v w({g >= v}) (approached as lambda increases to v). One sort of the
/// cells by g, then a cumulative sweep of the w-measure.
double weak_norm(const GridFunction& g, const GridFunction& w);

/// w({lambda1 2^j < g <= lambda1 2^{j+1}}) for j = 0, 1, ... up to the band
/// holding max g. The bands partition {g > lambda1}.
std::vector<double> band_measures(const GridFunction& g, const GridFunction& w, double lambda1);

/// max over integers j of 2^j w({2^j < g <= 2^{j+1}}), a lower bound for the
/// weak norm built from single bands.
double band_sup(const GridFunction& g, const GridFunction& w);

/// Which maximal function removes the large-average region from the band.
enum class RemovalOperator {
  fractional_maximal,  ///< {M_alpha f > 1/lambda1}
  hardy_littlewood,    ///< {M f > 1/lambda1}
};

/// 1 - lambda1 * lambda0^{1 - alpha/d}.
double bottom_factor(double lambda0, double lambda1, double alpha, int dim);

/// Requires lambda1 > 2, (1/lambda1) sum_{k>=1} 2^k / lambda1^k < 1 and
/// lambda1 lambda0^{1-alpha/d} < 1; throws PreconditionError naming the
/// first condition that fails.
void check_parameter_conditions(double lambda0, double lambda1, double alpha, int dim);

struct ExceptionalSet {
  CellSet cells;
  double lambda1 = 4.0;
  double band_low = 4.0;   ///< exclusive
  double band_high = 8.0;  ///< inclusive
  RemovalOperator removal = RemovalOperator::fractional_maximal;
};

/// {lambda1 < A^S_{alpha,nu} f <= 2 lambda1} minus the removal set. The
/// parameter conditions are checked against s.lambda0.
ExceptionalSet exceptional_set(const GridFunction& f, const GridFunction& w, const SparseFamily& s, double alpha,
                               double nu, double lambda1,
                               RemovalOperator removal = RemovalOperator::fractional_maximal);

/// One row of the per-level ledger for the key lemma.
struct LemmaEntry {
  int k = 0;
  std::size_t cubes = 0;          ///< |S_k|
  std::size_t layers = 0;         ///< number of nonempty S_{k,v}
  double lhs = 0.0;               ///< integral over eps of A^{S_k} f w
  double layer_bound = 0.0;       ///< (2^k / lambda1^k) w(eps)
  double direct = 0.0;            ///< sum_Q <f>_Q w(eps cap Q)
  double layer_part = 0.0;        ///< layer-part sum over the E_{Q'}
  double bottom_part = 0.0;       ///< sum_Q <f>_Q w(eps cap Q_u)
  double conjugate_inverse = 0.0; ///< psi^{-1}(2^{2^k})
  double c_k = 0.0;               ///< (lhs - layer_bound)_+ psi^{-1}(2^{2^k}) / integral f M_alpha(M_phi w)
  bool layer_ok = true;           ///< layer_part <= layer_bound
  bool coverage_ok = true;        ///< lhs <= direct <= layer_part + bottom_part
  std::size_t bottom_checked = 0;
  std::size_t bottom_violations = 0;  ///< cubes with <f chi_E>_Q < factor <f>_Q
  double bottom_min_margin = 0.0;     ///< min of <f chi_E>_Q / <f>_Q - factor
};

/// Ledger entries for every nonempty S_k, given a precomputed exceptional
/// set and the bound integral R = integral of f M_alpha(M_phi w).
std::vector<LemmaEntry> lemma_ledger(const GridFunction& f, const GridFunction& w, const SparseFamily& s,
                                     const YoungFunction& phi, double alpha, double nu, double lambda1,
                                     const ExceptionalSet& eps, double bound_integral);

/// Single-level entry; computes eps and R itself. nu >= 1 is required.
LemmaEntry lemma_check(int k, const GridFunction& f, const GridFunction& w, const SparseFamily& s,
                       const YoungFunction& phi, double alpha, double nu, double lambda0, double lambda1);

/// integral of f * weight over the root cube (pairwise cell sum).
double weighted_integral(const GridFunction& f, const GridFunction& weight);

struct ExperimentSettings {
  int dim = 1;
  int resolution = 10;
  YoungSpec phi{YoungKind::loglog, 2.0, 1.0, {}};
  double alpha = 0.5;
  double nu = 1.0;
  double lambda1 = 4.0;
  SparseGeneratorParams sparse{1, 1, 10, 1.0 / 32.0, 2, 2, 60, std::nullopt};
  std::optional<SparseFamily> family;  ///< fixed family instead of the generator
  GeneratorSpec f_gen{"random-uniform", 0, {}};
  GeneratorSpec w_gen{"random-uniform", 0, {}};
  std::optional<GridFunction> f_input;  ///< fixed f instead of f_gen
  std::optional<GridFunction> w_input;  ///< fixed w instead of w_gen
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  ///< 0 = SPARSEWEAK_THREADS / hardware
  RemovalOperator removal = RemovalOperator::fractional_maximal;
  bool lemma = true;        ///< compute the per-level ledger
};

/// One trial of the weak-type experiment.
struct WeakTypeReport {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double lhs = 0.0;             ///< weak_norm(A f, w)
  double rhs = 0.0;             ///< c_phi * integral f M_alpha(M_phi w)
  double ratio = 0.0;
  double bound_integral = 0.0;  ///< integral f M_alpha(M_phi w)
  double band_sup = 0.0;
  std::size_t family_size = 0;
  double w_eps = 0.0;           ///< w(eps)
  double assembly_bound = 0.0;  ///< (1/lambda1) sum_k (layer_part + bottom_part)
  bool assembly_ok = true;      ///< w(eps) <= assembly_bound
  std::vector<LemmaEntry> ledger;
};

struct Aggregate {
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  double p95_ratio = 0.0;
  double c_phi = 0.0;
};

struct ExperimentReport {
  ExperimentSettings settings;
  CPhiResult c_phi;
  std::vector<WeakTypeReport> trials;
  Aggregate aggregate;
};

Aggregate aggregate_ratios(const std::vector<WeakTypeReport>& trials, double c_phi_value);

/// Runs `trials` seeded trials. Trial i uses seed derive_seed(seed, i); the
/// result is identical for every thread count. Throws ComputationRefused when
/// c_phi diverges and PreconditionError for invalid parameters.
ExperimentReport run_experiment(const ExperimentSettings& settings);

/// Everything run_experiment() checks before computing; throws on failure.
void validate_experiment(const ExperimentSettings& settings);

struct SanitySettings {
  int dim = 1;
  int resolution = 8;
  std::size_t trials = 100;
  std::uint64_t seed = 3;
  double alpha = 0.5;
  double delta = 1.0;
  GeneratorSpec f_gen{"random-uniform", 0, {}};
  GeneratorSpec w_gen{"spike", 0, {{"count", 8.0}, {"height", 50.0}, {"base", 0.1}}};
  std::vector<int> adversarial_levels{6, 8, 10};
  int adversarial_steps = 200;
  int adversarial_spikes = 4;
  SparseGeneratorParams adversarial_sparse{1, 1, 0, 0.5, 2, 1, 64, std::nullopt};
  std::size_t threads = 0;
};

/// One row of the adversarial trend table.
struct TrendRow {
  int resolution = 0;
  std::size_t family_size = 0;
  double initial_ratio = 0.0;
  double best_ratio = 0.0;
  int accepted = 0;
};

struct SanityReport {
  std::vector<double> fs_ratios;
  double fs_max_ratio = 0.0;
  std::size_t monotonicity_cells = 0;
  std::size_t monotonicity_violations = 0;
  std::vector<TrendRow> trend;
};

/// Fixed-format text table (17 significant digits).
std::string format_trend_table(const std::vector<TrendRow>& rows);

/// (a) ratios weak_norm(M f, w) / integral f M w over random trials,
/// (b) pointwise check M_alpha(M_{loglog} w) >= M_alpha(M w),
/// (c) hill climbing over spike placements in w for
///     weak_norm(A f, w) / integral f M_alpha w, one row per resolution.
///     Exploratory; nothing about (c) is asserted beyond determinism.
SanityReport sanity_suite(const SanitySettings& settings);

}  // namespace sparseweak
