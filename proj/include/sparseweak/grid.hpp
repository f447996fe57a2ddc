#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sparseweak {

/// Largest number of finest cells, as a power of two (2^{L d} <= 2^24).
inline constexpr int kMaxCellBits = 24;

/// Sorted, duplicate-free finest-cell indices.
using CellSet = std::vector<std::uint32_t>;

/// Sum of a sequence by recursive halving; fixed association order.
double pairwise_sum(std::span<const double> xs);

/// A cube of the dyadic grid of the root cube [0,1)^d.
///
/// The cube at level l with integer index (i_1, ..., i_d), 0 <= i_j < 2^l, is
/// prod_j [i_j 2^-l, (i_j + 1) 2^-l). Internally the index is packed into a
/// lexicographic code: coordinate j occupies l bits and i_1 is the most
/// significant. At the finest level this code is the cell index used by
/// GridFunction.
class DyadicCube {
 public:
  DyadicCube(int dim, int level, std::uint64_t code);

  static DyadicCube root(int dim) { return {dim, 0, 0}; }
  static DyadicCube from_index(int level, std::span<const std::uint32_t> index);

  int dim() const { return dim_; }
  int level() const { return level_; }
  std::uint64_t code() const { return code_; }
  std::vector<std::uint32_t> index() const;

  /// 2^{-level * dim}; exact.
  double volume() const;

  std::optional<DyadicCube> parent() const;
  /// The 2^d children in lexicographic order. Throws std::domain_error when
  /// the children would exceed the resolution cap.
  std::vector<DyadicCube> children() const;
  /// Ancestor (or self) at `level` <= this->level().
  DyadicCube ancestor(int level) const;
  /// True iff other is a subset of *this.
  bool contains(const DyadicCube& other) const;

  /// Packed (level, code) key, unique within one dimension.
  std::uint64_t key() const { return (static_cast<std::uint64_t>(level_) << 32) | code_; }

  std::string to_string() const;

  auto operator<=>(const DyadicCube&) const = default;

 private:
  int dim_;
  int level_;
  std::uint64_t code_;
};

/// Code of the parent of the cube (level, code).
std::uint64_t parent_code(int dim, int level, std::uint64_t code);
/// Code of child `offset` (0 <= offset < 2^d, lexicographic) of (level, code).
std::uint64_t child_code(int dim, int level, std::uint64_t code, unsigned offset);
/// Code of the level-`to` ancestor of the level-`from` cube `code`.
std::uint64_t ancestor_code(int dim, int from, int to, std::uint64_t code);

/// Nonnegative function, constant on each finest cell of a resolution-L grid.
class GridFunction {
 public:
  GridFunction(int dim, int resolution, std::vector<double> values);
  static GridFunction constant(int dim, int resolution, double value);

  int dim() const { return dim_; }
  int resolution() const { return resolution_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t cell) const { return values_[cell]; }
  /// 2^{-L d}.
  double cell_volume() const;

  bool same_grid(const GridFunction& other) const {
    return dim_ == other.dim_ && resolution_ == other.resolution_;
  }

  GridFunction scaled(double factor) const;

 private:
  int dim_;
  int resolution_;
  std::vector<double> values_;
};

/// Throws std::domain_error unless d >= 1, L >= 0 and L d <= kMaxCellBits.
void validate_grid_shape(int dim, int resolution);

/// Finest cells of Q at resolution L, ascending.
CellSet cells_of(const DyadicCube& q, int resolution);

/// Integral of f over Q. Sums child by child down to the cells, so the value
/// is bitwise identical to the corresponding CubePyramid entry.
double integrate(const GridFunction& f, const DyadicCube& q);

/// <f>_{alpha,Q} = |Q|^{alpha/d - 1} * integral of f over Q, 0 <= alpha < d.
double frac_average(const GridFunction& f, const DyadicCube& q, double alpha);

/// The weighted measure sum_{cells} w(cell) 2^{-L d}.
double measure(const GridFunction& w, const CellSet& cells);

/// Throws std::domain_error unless 0 <= alpha < d.
void validate_alpha(double alpha, int dim);

/// Converts a raw cell-value sum over a level-`level` cube into the
/// fractional average. Shared by every code path that forms averages.
double fractional_average_from_sum(double raw_sum, int level, int dim, int resolution, double alpha);

/// Per-level raw cell sums of f for every dyadic cube, built bottom-up.
class CubePyramid {
 public:
  explicit CubePyramid(const GridFunction& f);

  int dim() const { return dim_; }
  int resolution() const { return resolution_; }
  /// Raw (unscaled) sums of the cubes of one level, in code order.
  std::span<const double> level(int l) const { return sums_[static_cast<std::size_t>(l)]; }
  double raw_sum(const DyadicCube& q) const;
  double integral(const DyadicCube& q) const;
  double frac_average(const DyadicCube& q, double alpha) const;

 private:
  int dim_;
  int resolution_;
  std::vector<std::vector<double>> sums_;
};

/// Named generator for test and experiment inputs.
///   constant:        params value (default 1)
///   random-uniform:  params lo (0), hi (1)
///   spike:           params count (1), height (1), base (0); optional
///                    cell (fixed position of a single spike)
struct GeneratorSpec {
  std::string name = "constant";
  std::uint64_t seed = 0;
  std::map<std::string, double> params;
};

GridFunction generate_grid_function(int dim, int resolution, const GeneratorSpec& spec);

/// Text format: header line "d L", then 2^{L d} values in cell order.
GridFunction read_grid_function(const std::string& path);
GridFunction parse_grid_function(const std::string& text);
void write_grid_function(const std::string& path, const GridFunction& f);
std::string format_grid_function(const GridFunction& f);

}  // namespace sparseweak
