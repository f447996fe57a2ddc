#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparseweak/grid.hpp"

namespace sparseweak {

/// A finite set of dyadic cubes of one grid together with its sparseness
/// parameter lambda0 and, optionally, a regularity bound N.
struct SparseFamily {
  int dim = 1;
  int resolution = 0;
  std::vector<DyadicCube> cubes;  ///< sorted by (level, code), no duplicates
  double lambda0 = 0.5;
  std::optional<int> n_regular;
};

/// Sorts and deduplicates `cubes` and checks they live in the (dim, L) grid.
SparseFamily make_family(int dim, int resolution, std::vector<DyadicCube> cubes, double lambda0,
                         std::optional<int> n_regular = std::nullopt);

/// Parent/children links among family members: the family parent of a cube
/// is its smallest strict ancestor that belongs to the family.
struct FamilyForest {
  std::vector<int> parent;                 ///< -1 for maximal cubes
  std::vector<std::vector<int>> children;  ///< Ch_S(Q), ascending member order
  std::vector<int> depth;                  ///< number of strict family ancestors
};

/// `cubes` must be sorted by level (as in SparseFamily).
FamilyForest build_forest(std::span<const DyadicCube> cubes);

/// How the packing condition is read.
///   carleson_sum:  sum_{P in S, P subset Q} |P| <= |Q| / lambda0
///   union_volume:  |union_{P in S, P subset Q} P| <= |Q| / lambda0
enum class PackingMode { carleson_sum, union_volume };

struct SparseCheck {
  bool pass = true;
  double worst_ratio = 0.0;  ///< max_Q (packed volume) / |Q|
  double bound = 0.0;        ///< 1 / lambda0
  std::optional<DyadicCube> worst_cube;
};

SparseCheck verify_sparse(const SparseFamily& s, PackingMode mode = PackingMode::carleson_sum);

struct RegularityCheck {
  bool pass = true;
  std::size_t worst_count = 0;
  std::optional<DyadicCube> worst_cube;
};

/// Every cube has at most N children in the family.
RegularityCheck verify_n_regular(const SparseFamily& s, int n);

struct SparseGeneratorParams {
  std::uint64_t seed = 1;
  int dim = 1;
  int resolution = 10;
  double lambda0 = 0.5;
  int n_regular = 2;
  int level_gap = 2;
  std::size_t target_size = 50;
  /// Optional cap on sum_{P in Ch_S(Q)} |P| / |Q| for every Q.
  std::optional<double> child_fraction;
};

struct GeneratedFamily {
  SparseFamily family;
  bool partial = false;  ///< budget ran out before target_size
};

/// Seeded top-down construction. From each accepted cube (breadth first) it
/// draws between 1 and N distinct descendants level_gap levels down and keeps
/// each one only if the running packing budget |A| / lambda0 of every family
/// ancestor A (and the child_fraction cap, when set) still holds.
GeneratedFamily generate_sparse(const SparseGeneratorParams& params);

/// A^S_{alpha,nu} f = (sum_{Q in S} <f>_{alpha,Q}^nu chi_Q)^{1/nu}, per cell.
GridFunction sparse_operator(const GridFunction& f, const SparseFamily& s, double alpha, double nu);

/// <f>_{alpha,Q} for every member, in member order.
std::vector<double> family_averages(const GridFunction& f, const SparseFamily& s, double alpha);

using LevelSets = std::map<int, std::vector<DyadicCube>>;

/// Buckets S_k = {Q : lambda1^{-k-1} < <f>_{alpha,Q} <= lambda1^{-k}}, k >= 1.
/// Cubes with average above 1/lambda1 or equal to zero are dropped.
LevelSets level_sets(const SparseFamily& s, const GridFunction& f, double alpha, double lambda1);

/// Bucket index k of a positive average, using the half-open convention above.
int level_index(double average, double lambda1);

/// Layers of a finite cube set: layer 0 holds the maximal cubes, layer v+1
/// the maximal cubes of what remains after removing layers 0..v.
std::vector<std::vector<DyadicCube>> layer_decompose(std::span<const DyadicCube> cubes);

struct DecompositionSets {
  CellSet e_set;   ///< E_Q: Q minus its next-layer descendants
  CellSet bottom;  ///< Q_u: union of the descendants exactly u = 2^k layers down
};

/// E_Q and Q_u for Q in some layer of `layers`. Throws std::domain_error if
/// Q is in no layer.
DecompositionSets decomposition_sets(const std::vector<std::vector<DyadicCube>>& layers, const DyadicCube& q, int k,
                                     int resolution);

/// 2^k saturating at 2^62 (no layer stack is ever that deep).
std::uint64_t bottom_depth(int k);

/// The full stratification of a family for one function.
struct LayerDecomposition {
  double lambda1 = 4.0;
  LevelSets levels;                                              ///< k -> S_k
  std::map<std::pair<int, int>, std::vector<DyadicCube>> layers; ///< (k, v) -> S_{k,v}
  std::map<DyadicCube, CellSet> e_sets;                          ///< Q -> E_Q
  std::map<int, std::uint64_t> u;                                ///< k -> 2^k
};

LayerDecomposition decompose(const SparseFamily& s, const GridFunction& f, double alpha, double lambda1);

/// Geometric decay of bottom sets. For depth j = 1, 2, ... the largest
/// |Q_j| / |Q| over the cubes of S_k is recorded, and a least-squares fit of
/// log(ratio) against j gives the per-layer decay factor.
struct BottomDecay {
  std::vector<double> worst_ratio;  ///< index j-1
  double fitted_ratio = 0.0;        ///< exp(slope); 0 when fewer than two points
};

BottomDecay bottom_decay(const std::vector<std::vector<DyadicCube>>& layers, int resolution);

/// Text format: header "d L lambda0 N" (N = 0 when unset), one cube per line
/// as "level i_1 ... i_d".
SparseFamily parse_family(const std::string& text);
SparseFamily read_family(const std::string& path);
std::string format_family(const SparseFamily& s);
void write_family(const std::string& path, const SparseFamily& s);

}  // namespace sparseweak
