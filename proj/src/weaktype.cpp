#include "sparseweak/weaktype.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sparseweak/errors.hpp"
#include "sparseweak/format.hpp"
#include "sparseweak/maximal.hpp"
#include "sparseweak/parallel.hpp"
#include "sparseweak/random.hpp"

namespace sparseweak {
namespace {

constexpr double kRelTol = 1e-12;

void require_same_grid(const GridFunction& a, const GridFunction& b) {
  if (!a.same_grid(b)) throw std::domain_error("functions live on different grids");
}

bool leq_tol(double a, double b) { return a <= b + kRelTol * std::max(std::abs(a), std::abs(b)) + 1e-300; }

GeneratorSpec seeded(const GeneratorSpec& spec, std::uint64_t trial_seed, std::uint64_t stream) {
  GeneratorSpec out = spec;
  out.seed = derive_seed(trial_seed ^ spec.seed, stream);
  return out;
}

}  // namespace

double weak_norm(const GridFunction& g, const GridFunction& w) {
  require_same_grid(g, w);
  std::vector<std::uint32_t> order;
  order.reserve(g.size());
  for (std::uint32_t c = 0; c < g.size(); ++c) {
    if (g[c] > 0.0) order.push_back(c);
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return g[a] != g[b] ? g[a] > g[b] : a < b;
  });
  double best = 0.0;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    cumulative += w[order[i]];
    const bool group_end = i + 1 == order.size() || g[order[i + 1]] != g[order[i]];
    if (group_end) best = std::max(best, g[order[i]] * cumulative);
  }
  return best * g.cell_volume();
}

std::vector<double> band_measures(const GridFunction& g, const GridFunction& w, double lambda1) {
  require_same_grid(g, w);
  if (!(lambda1 > 0.0)) throw std::domain_error("band_measures: lambda1 must be > 0");
  std::vector<std::vector<double>> per_band;
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (!(g[c] > lambda1)) continue;
    int j = static_cast<int>(std::floor(std::log2(g[c] / lambda1)));
    while (j > 0 && g[c] <= std::ldexp(lambda1, j)) --j;
    while (g[c] > std::ldexp(lambda1, j + 1)) ++j;
    if (per_band.size() <= static_cast<std::size_t>(j)) per_band.resize(static_cast<std::size_t>(j) + 1);
    per_band[static_cast<std::size_t>(j)].push_back(w[c]);
  }
  std::vector<double> out;
  out.reserve(per_band.size());
  for (const auto& xs : per_band) out.push_back(pairwise_sum(xs) * g.cell_volume());
  return out;
}

double band_sup(const GridFunction& g, const GridFunction& w) {
  require_same_grid(g, w);
  double lo = std::numeric_limits<double>::infinity();
  for (double v : g.values()) {
    if (v > 0.0) lo = std::min(lo, v);
  }
  if (!std::isfinite(lo)) return 0.0;
  const double base = std::ldexp(1.0, static_cast<int>(std::floor(std::log2(lo))) - 1);
  const auto bands = band_measures(g, w, base);
  double best = 0.0;
  for (std::size_t j = 0; j < bands.size(); ++j) best = std::max(best, std::ldexp(base, static_cast<int>(j)) * bands[j]);
  return best;
}

double bottom_factor(double lambda0, double lambda1, double alpha, int dim) {
  return 1.0 - lambda1 * std::pow(lambda0, 1.0 - alpha / dim);
}

void check_parameter_conditions(double lambda0, double lambda1, double alpha, int dim) {
  validate_alpha(alpha, dim);
  if (!(lambda0 > 0.0 && lambda0 < 1.0)) throw PreconditionError("parameter condition failed: 0 < lambda0 < 1");
  if (!(lambda1 > 2.0) || !std::isfinite(lambda1)) {
    throw PreconditionError("parameter condition failed: lambda1 > 2 (lambda1 = " + format_real(lambda1) + ")");
  }
  // (1/lambda1) sum_{k>=1} (2/lambda1)^k = 2 / (lambda1 (lambda1 - 2)).
  const double series = 2.0 / (lambda1 * (lambda1 - 2.0));
  if (!(series < 1.0)) {
    throw PreconditionError("parameter condition failed: (1/lambda1) sum 2^k/lambda1^k < 1 (value " +
                            format_real(series) + ")");
  }
  const double product = lambda1 * std::pow(lambda0, 1.0 - alpha / dim);
  if (!(product < 1.0)) {
    throw PreconditionError("parameter condition failed: lambda1 * lambda0^(1-alpha/d) < 1 (value " +
                            format_real(product) + ")");
  }
}

ExceptionalSet exceptional_set(const GridFunction& f, const GridFunction& w, const SparseFamily& s, double alpha,
                               double nu, double lambda1, RemovalOperator removal) {
  require_same_grid(f, w);
  check_parameter_conditions(s.lambda0, lambda1, alpha, f.dim());
  const auto a = sparse_operator(f, s, alpha, nu);
  const auto m = dyadic_frac_maximal(f, removal == RemovalOperator::fractional_maximal ? alpha : 0.0);
  ExceptionalSet out;
  out.lambda1 = lambda1;
  out.band_low = lambda1;
  out.band_high = 2.0 * lambda1;
  out.removal = removal;
  const double ceiling = 1.0 / lambda1;
  for (std::uint32_t c = 0; c < f.size(); ++c) {
    if (a[c] > out.band_low && a[c] <= out.band_high && !(m[c] > ceiling)) out.cells.push_back(c);
  }
  return out;
}

double weighted_integral(const GridFunction& f, const GridFunction& weight) {
  require_same_grid(f, weight);
  std::vector<double> xs(f.size());
  for (std::size_t c = 0; c < f.size(); ++c) xs[c] = f[c] * weight[c];
  return pairwise_sum(xs) * f.cell_volume();
}

std::vector<LemmaEntry> lemma_ledger(const GridFunction& f, const GridFunction& w, const SparseFamily& s,
                                     const YoungFunction& phi, double alpha, double nu, double lambda1,
                                     const ExceptionalSet& eps, double bound_integral) {
  require_same_grid(f, w);
  if (!(nu >= 1.0)) throw PreconditionError("lemma check requires nu >= 1");
  if (phi.kind() == YoungKind::linear) {
    throw ComputationRefused("lemma check: psi^{-1} is not defined for the linear Young function");
  }
  const int dim = f.dim();
  const int resolution = f.resolution();
  const double cell = f.cell_volume();
  const CubePyramid pyramid(f);
  const double factor = bottom_factor(s.lambda0, lambda1, alpha, dim);

  std::vector<char> in_eps(f.size(), 0);
  for (auto c : eps.cells) in_eps[c] = 1;
  const double w_eps = measure(w, eps.cells);
  auto w_eps_of = [&](const CellSet& cells) {
    std::vector<double> xs;
    for (auto c : cells) {
      if (in_eps[c]) xs.push_back(w[c]);
    }
    return pairwise_sum(xs) * cell;
  };

  std::vector<LemmaEntry> out;
  for (const auto& [k, members] : level_sets(s, f, alpha, lambda1)) {
    LemmaEntry e;
    e.k = k;
    e.cubes = members.size();
    const auto layers = layer_decompose(members);
    e.layers = layers.size();

    const SparseFamily sk = make_family(dim, resolution, members, s.lambda0);
    const auto a = sparse_operator(f, sk, alpha, nu);
    std::vector<double> xs;
    for (auto c : eps.cells) xs.push_back(a[c] * w[c]);
    e.lhs = pairwise_sum(xs) * cell;
    e.layer_bound = std::pow(2.0 / lambda1, k) * w_eps;

    const auto forest = build_forest(sk.cubes);
    std::vector<double> avg;
    for (const auto& q : sk.cubes) avg.push_back(pyramid.frac_average(q, alpha));
    const std::uint64_t u = bottom_depth(k);
    e.bottom_min_margin = std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < sk.cubes.size(); ++i) {
      const auto& q = sk.cubes[i];
      const auto sets = decomposition_sets(layers, q, k, resolution);
      const double w_e = w_eps_of(sets.e_set);
      e.direct += avg[i] * w_eps_of(cells_of(q, resolution));
      e.bottom_part += avg[i] * w_eps_of(sets.bottom);
      // E_Q' is charged once for Q' itself and each of its u - 1 nearest
      // S_k ancestors (they sit in the u layers above it).
      double charged = 0.0;
      int anc = static_cast<int>(i);
      for (std::uint64_t l = 0; l < u && anc >= 0; ++l) {
        charged += avg[static_cast<std::size_t>(anc)];
        anc = forest.parent[static_cast<std::size_t>(anc)];
      }
      e.layer_part += charged * w_e;

      double raw = 0.0;
      for (auto c : sets.e_set) raw += f[c];
      const double avg_e = fractional_average_from_sum(raw, q.level(), dim, resolution, alpha);
      ++e.bottom_checked;
      e.bottom_min_margin = std::min(e.bottom_min_margin, avg_e / avg[i] - factor);
      if (avg_e < factor * avg[i] - kRelTol * avg[i]) ++e.bottom_violations;
    }
    e.layer_ok = leq_tol(e.layer_part, e.layer_bound);
    e.coverage_ok = leq_tol(e.lhs, e.direct) && leq_tol(e.direct, e.layer_part + e.bottom_part);
    e.conjugate_inverse = conjugate_inverse(phi, std::ldexp(1.0, k));
    const double excess = std::max(0.0, e.lhs - e.layer_bound);
    if (excess > 0.0) {
      e.c_k = bound_integral > 0.0 ? excess * e.conjugate_inverse / bound_integral
                                   : std::numeric_limits<double>::infinity();
    }
    out.push_back(e);
  }
  return out;
}

LemmaEntry lemma_check(int k, const GridFunction& f, const GridFunction& w, const SparseFamily& s,
                       const YoungFunction& phi, double alpha, double nu, double lambda0, double lambda1) {
  if (!(nu >= 1.0)) throw PreconditionError("lemma check requires nu >= 1");
  SparseFamily family = s;
  family.lambda0 = lambda0;
  const auto eps = exceptional_set(f, w, family, alpha, nu, lambda1);
  const double bound = weighted_integral(f, iterated_bound_weight(w, phi, alpha));
  for (const auto& e : lemma_ledger(f, w, family, phi, alpha, nu, lambda1, eps, bound)) {
    if (e.k == k) return e;
  }
  LemmaEntry empty;
  empty.k = k;
  return empty;
}

Aggregate aggregate_ratios(const std::vector<WeakTypeReport>& trials, double c_phi_value) {
  Aggregate agg;
  agg.c_phi = c_phi_value;
  if (trials.empty()) return agg;
  std::vector<double> ratios;
  for (const auto& t : trials) ratios.push_back(t.ratio);
  std::sort(ratios.begin(), ratios.end());
  agg.max_ratio = ratios.back();
  agg.mean_ratio = pairwise_sum(ratios) / static_cast<double>(ratios.size());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(ratios.size())));
  agg.p95_ratio = ratios[std::max<std::size_t>(rank, 1) - 1];
  return agg;
}

void validate_experiment(const ExperimentSettings& st) {
  validate_grid_shape(st.dim, st.resolution);
  validate_alpha(st.alpha, st.dim);
  if (!(st.nu >= 1.0) || !std::isfinite(st.nu)) throw PreconditionError("weak-type experiment requires nu >= 1");
  (void)builtin_young(st.phi);
  const double lambda0 = st.family ? st.family->lambda0 : st.sparse.lambda0;
  if (st.family && (st.family->dim != st.dim || st.family->resolution != st.resolution)) {
    throw PreconditionError("explicit family does not match the grid (d, L)");
  }
  for (const auto* input : {&st.f_input, &st.w_input}) {
    if (*input && ((*input)->dim() != st.dim || (*input)->resolution() != st.resolution)) {
      throw PreconditionError("input function does not match the grid (d, L)");
    }
  }
  if (!st.family) {
    if (st.sparse.n_regular < 1) throw PreconditionError("sparse generator: N must be >= 1");
    if (st.sparse.level_gap < 1) throw PreconditionError("sparse generator: level_gap must be >= 1");
    if (st.sparse.target_size < 1) throw PreconditionError("sparse generator: size must be >= 1");
  }
  if (st.lemma) {
    check_parameter_conditions(lambda0, st.lambda1, st.alpha, st.dim);
  } else if (!(lambda0 > 0.0 && lambda0 < 1.0)) {
    throw PreconditionError("lambda0 must lie in (0, 1)");
  }
}

ExperimentReport run_experiment(const ExperimentSettings& st) {
  validate_experiment(st);
  const auto phi = builtin_young(st.phi);
  ExperimentReport report;
  report.settings = st;
  report.c_phi = c_phi(phi);
  if (report.c_phi.divergent) {
    throw ComputationRefused(std::string("c_phi diverges for the ") + to_string(phi.kind()) +
                             " Young function (partial sum " + format_real(report.c_phi.value) + " after " +
                             std::to_string(report.c_phi.terms) + " terms); the weak-type hypothesis fails");
  }
  const double cphi = report.c_phi.value;

  report.trials.resize(st.trials);
  parallel_for(st.trials, resolve_threads(st.threads), [&](std::size_t i) {
    WeakTypeReport& t = report.trials[i];
    t.trial = i;
    t.seed = derive_seed(st.seed, i);
    const auto f = st.f_input ? *st.f_input : generate_grid_function(st.dim, st.resolution, seeded(st.f_gen, t.seed, 1));
    const auto w = st.w_input ? *st.w_input : generate_grid_function(st.dim, st.resolution, seeded(st.w_gen, t.seed, 2));
    SparseFamily family;
    if (st.family) {
      family = *st.family;
    } else {
      SparseGeneratorParams gp = st.sparse;
      gp.seed = derive_seed(t.seed, 3);
      gp.dim = st.dim;
      gp.resolution = st.resolution;
      family = generate_sparse(gp).family;
    }
    t.family_size = family.cubes.size();

    const auto a = sparse_operator(f, family, st.alpha, st.nu);
    t.lhs = weak_norm(a, w);
    t.band_sup = band_sup(a, w);
    t.bound_integral = weighted_integral(f, iterated_bound_weight(w, phi, st.alpha));
    t.rhs = cphi * t.bound_integral;
    if (t.rhs > 0.0) {
      t.ratio = t.lhs / t.rhs;
    } else {
      t.ratio = t.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }

    if (st.lemma) {
      const auto eps = exceptional_set(f, w, family, st.alpha, st.nu, st.lambda1, st.removal);
      t.w_eps = measure(w, eps.cells);
      t.ledger = lemma_ledger(f, w, family, phi, st.alpha, st.nu, st.lambda1, eps, t.bound_integral);
      double sum = 0.0;
      for (const auto& e : t.ledger) sum += e.layer_part + e.bottom_part;
      t.assembly_bound = sum / st.lambda1;
      t.assembly_ok = leq_tol(t.w_eps, t.assembly_bound);
    }
  });
  report.aggregate = aggregate_ratios(report.trials, cphi);
  return report;
}

// Sanity suite ---------------------------------------------------------------

std::string format_trend_table(const std::vector<TrendRow>& rows) {
  std::string out = "L family_size initial_ratio best_ratio accepted\n";
  for (const auto& r : rows) {
    out += std::to_string(r.resolution) + " " + std::to_string(r.family_size) + " " + format_real(r.initial_ratio) +
           " " + format_real(r.best_ratio) + " " + std::to_string(r.accepted) + "\n";
  }
  return out;
}

SanityReport sanity_suite(const SanitySettings& st) {
  validate_grid_shape(st.dim, st.resolution);
  validate_alpha(st.alpha, st.dim);
  if (!(st.delta > 0.0)) throw PreconditionError("sanity suite: delta must be > 0");
  if (st.adversarial_spikes < 1) throw PreconditionError("sanity suite: adversarial_spikes must be >= 1");
  SanityReport report;
  const std::size_t threads = resolve_threads(st.threads);
  const auto loglog = loglog_young(st.delta);
  const auto linear = linear_young();

  // (a) Fefferman-Stein ratios and (b) composed-weight monotonicity.
  report.fs_ratios.resize(st.trials);
  std::vector<std::size_t> violations(st.trials, 0);
  parallel_for(st.trials, threads, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(st.seed, i);
    const auto f = generate_grid_function(st.dim, st.resolution, seeded(st.f_gen, seed, 1));
    const auto w = generate_grid_function(st.dim, st.resolution, seeded(st.w_gen, seed, 2));
    const double lhs = weak_norm(dyadic_frac_maximal(f, 0.0), w);
    const double rhs = weighted_integral(f, dyadic_frac_maximal(w, 0.0));
    report.fs_ratios[i] = rhs > 0.0 ? lhs / rhs : 0.0;

    const auto big = iterated_bound_weight(w, loglog, st.alpha);
    const auto small = iterated_bound_weight(w, linear, st.alpha);
    for (std::size_t c = 0; c < w.size(); ++c) {
      if (big[c] < small[c]) ++violations[i];
    }
  });
  for (double r : report.fs_ratios) report.fs_max_ratio = std::max(report.fs_max_ratio, r);
  report.monotonicity_cells = st.trials * (std::size_t{1} << (st.dim * st.resolution));
  report.monotonicity_violations = std::accumulate(violations.begin(), violations.end(), std::size_t{0});

  // (c) Adversarial spike placement, one row per resolution.
  for (int level : st.adversarial_levels) {
    validate_grid_shape(st.dim, level);
    const std::uint64_t seed = derive_seed(st.seed, 1000 + static_cast<std::uint64_t>(level));
    SparseGeneratorParams gp = st.adversarial_sparse;
    gp.seed = derive_seed(seed, 3);
    gp.dim = st.dim;
    gp.resolution = level;
    const auto family = generate_sparse(gp).family;
    const auto f = generate_grid_function(st.dim, level, seeded(st.f_gen, seed, 1));
    const auto a = sparse_operator(f, family, st.alpha, 1.0);
    const std::size_t n = std::size_t{1} << (st.dim * level);
    Rng rng(derive_seed(seed, 4));

    std::vector<std::size_t> spikes;
    for (int i = 0; i < st.adversarial_spikes; ++i) spikes.push_back(rng.below(n));
    auto ratio_for = [&](const std::vector<std::size_t>& where) {
      std::vector<double> v(n, 1e-3);
      for (auto c : where) v[c] = 1.0;
      const GridFunction w(st.dim, level, std::move(v));
      const double denom = weighted_integral(f, dyadic_frac_maximal(w, st.alpha));
      return denom > 0.0 ? weak_norm(a, w) / denom : 0.0;
    };

    TrendRow row;
    row.resolution = level;
    row.family_size = family.cubes.size();
    row.initial_ratio = ratio_for(spikes);
    double best = row.initial_ratio;
    for (int step = 0; step < st.adversarial_steps; ++step) {
      auto candidate = spikes;
      candidate[rng.below(candidate.size())] = rng.below(n);
      const double r = ratio_for(candidate);
      if (r > best) {
        best = r;
        spikes = std::move(candidate);
        ++row.accepted;
      }
    }
    row.best_ratio = best;
    report.trend.push_back(row);
  }
  return report;
}

}  // namespace sparseweak
