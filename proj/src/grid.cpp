#include "sparseweak/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sparseweak/format.hpp"
#include "sparseweak/random.hpp"

namespace sparseweak {
namespace {

std::uint64_t coord_mask(int level) { return (std::uint64_t{1} << level) - 1; }

std::uint32_t coordinate(int dim, int level, std::uint64_t code, int j) {
  return static_cast<std::uint32_t>((code >> ((dim - 1 - j) * level)) & coord_mask(level));
}

double double_at(double raw_sum, int bits) { return std::ldexp(raw_sum, -bits); }

double sum_cells_of(const GridFunction& f, int dim, int level, std::uint64_t code) {
  if (level == f.resolution()) return f[code];
  double s = 0.0;
  const unsigned n_children = 1u << dim;
  for (unsigned b = 0; b < n_children; ++b) s += sum_cells_of(f, dim, level + 1, child_code(dim, level, code, b));
  return s;
}

void check_cube_in_grid(const DyadicCube& q, int dim, int resolution) {
  if (q.dim() != dim) throw std::domain_error("cube dimension does not match grid dimension");
  if (q.level() > resolution) throw std::domain_error("cube level exceeds grid resolution");
}

}  // namespace

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// DyadicCube ---------------------------------------------------------------

DyadicCube::DyadicCube(int dim, int level, std::uint64_t code) : dim_(dim), level_(level), code_(code) {
  if (dim < 1) throw std::domain_error("cube dimension must be >= 1");
  if (level < 0 || level * dim > kMaxCellBits) throw std::domain_error("cube level out of range");
  if (code >> (level * dim) != 0) throw std::domain_error("cube index out of range");
}

DyadicCube DyadicCube::from_index(int level, std::span<const std::uint32_t> index) {
  const int dim = static_cast<int>(index.size());
  if (dim < 1) throw std::domain_error("cube index must have at least one coordinate");
  if (level < 0 || level * dim > kMaxCellBits) throw std::domain_error("cube level out of range");
  std::uint64_t code = 0;
  for (std::uint32_t i : index) {
    if (i >> level != 0) throw std::domain_error("cube index out of range");
    code = (code << level) | i;
  }
  return {dim, level, code};
}

std::vector<std::uint32_t> DyadicCube::index() const {
  std::vector<std::uint32_t> out(static_cast<std::size_t>(dim_));
  for (int j = 0; j < dim_; ++j) out[static_cast<std::size_t>(j)] = coordinate(dim_, level_, code_, j);
  return out;
}

double DyadicCube::volume() const { return std::ldexp(1.0, -level_ * dim_); }

std::optional<DyadicCube> DyadicCube::parent() const {
  if (level_ == 0) return std::nullopt;
  return DyadicCube(dim_, level_ - 1, parent_code(dim_, level_, code_));
}

std::vector<DyadicCube> DyadicCube::children() const {
  if ((level_ + 1) * dim_ > kMaxCellBits) throw std::domain_error("children exceed the resolution cap");
  std::vector<DyadicCube> out;
  const unsigned n = 1u << dim_;
  out.reserve(n);
  for (unsigned b = 0; b < n; ++b) out.emplace_back(dim_, level_ + 1, child_code(dim_, level_, code_, b));
  return out;
}

DyadicCube DyadicCube::ancestor(int level) const {
  if (level < 0 || level > level_) throw std::domain_error("ancestor level out of range");
  return {dim_, level, ancestor_code(dim_, level_, level, code_)};
}

bool DyadicCube::contains(const DyadicCube& other) const {
  if (other.dim_ != dim_ || other.level_ < level_) return false;
  return ancestor_code(dim_, other.level_, level_, other.code_) == code_;
}

std::string DyadicCube::to_string() const {
  std::string s = std::to_string(level_);
  for (auto i : index()) s += " " + std::to_string(i);
  return s;
}

std::uint64_t parent_code(int dim, int level, std::uint64_t code) {
  return ancestor_code(dim, level, level - 1, code);
}

std::uint64_t ancestor_code(int dim, int from, int to, std::uint64_t code) {
  if (dim == 1) return code >> (from - to);
  const int shift = from - to;
  std::uint64_t out = 0;
  for (int j = 0; j < dim; ++j) out = (out << to) | (coordinate(dim, from, code, j) >> shift);
  return out;
}

std::uint64_t child_code(int dim, int level, std::uint64_t code, unsigned offset) {
  if (dim == 1) return (code << 1) | offset;
  std::uint64_t out = 0;
  for (int j = 0; j < dim; ++j) {
    const std::uint64_t bit = (offset >> (dim - 1 - j)) & 1u;
    out = (out << (level + 1)) | ((std::uint64_t{coordinate(dim, level, code, j)} << 1) | bit);
  }
  return out;
}

// GridFunction -------------------------------------------------------------

void validate_grid_shape(int dim, int resolution) {
  if (dim < 1) throw std::domain_error("grid dimension must be >= 1");
  if (resolution < 0) throw std::domain_error("grid resolution must be >= 0");
  if (resolution * dim > kMaxCellBits) {
    throw std::domain_error("grid exceeds 2^24 cells (L*d = " + std::to_string(resolution * dim) + ")");
  }
}

GridFunction::GridFunction(int dim, int resolution, std::vector<double> values)
    : dim_(dim), resolution_(resolution), values_(std::move(values)) {
  validate_grid_shape(dim, resolution);
  if (values_.size() != (std::size_t{1} << (resolution * dim))) {
    throw std::domain_error("grid function needs 2^{L d} = " + std::to_string(std::size_t{1} << (resolution * dim)) +
                            " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw std::domain_error("grid function values must be finite and >= 0");
  }
}

GridFunction GridFunction::constant(int dim, int resolution, double value) {
  validate_grid_shape(dim, resolution);
  return {dim, resolution, std::vector<double>(std::size_t{1} << (resolution * dim), value)};
}

double GridFunction::cell_volume() const { return std::ldexp(1.0, -resolution_ * dim_); }

GridFunction GridFunction::scaled(double factor) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= factor;
  return {dim_, resolution_, std::move(v)};
}

CellSet cells_of(const DyadicCube& q, int resolution) {
  if (q.level() > resolution) throw std::domain_error("cube level exceeds grid resolution");
  const int dim = q.dim();
  const int span_bits = resolution - q.level();
  CellSet out;
  out.reserve(std::size_t{1} << (span_bits * dim));
  if (dim == 1) {
    const auto first = static_cast<std::uint32_t>(q.code() << span_bits);
    for (std::uint32_t c = 0; c < (1u << span_bits); ++c) out.push_back(first + c);
    return out;
  }
  // Walk the offset vectors in lexicographic order; that is ascending cell order.
  const auto base = q.index();
  const std::uint64_t per = std::uint64_t{1} << span_bits;
  std::vector<std::uint64_t> offset(static_cast<std::size_t>(dim), 0);
  for (;;) {
    std::uint64_t code = 0;
    for (int j = 0; j < dim; ++j) {
      code = (code << resolution) | ((std::uint64_t{base[static_cast<std::size_t>(j)]} << span_bits) + offset[static_cast<std::size_t>(j)]);
    }
    out.push_back(static_cast<std::uint32_t>(code));
    int j = dim - 1;
    while (j >= 0 && ++offset[static_cast<std::size_t>(j)] == per) offset[static_cast<std::size_t>(j--)] = 0;
    if (j < 0) break;
  }
  return out;
}

void validate_alpha(double alpha, int dim) {
  if (!(alpha >= 0.0) || !(alpha < static_cast<double>(dim))) {
    throw std::domain_error("alpha must satisfy 0 <= alpha < d");
  }
}

double fractional_average_from_sum(double raw_sum, int level, int dim, int resolution, double alpha) {
  const double integral = double_at(raw_sum, resolution * dim);
  if (alpha == 0.0) return std::ldexp(integral, level * dim);
  return std::exp2(static_cast<double>(level) * (static_cast<double>(dim) - alpha)) * integral;
}

double integrate(const GridFunction& f, const DyadicCube& q) {
  check_cube_in_grid(q, f.dim(), f.resolution());
  return double_at(sum_cells_of(f, f.dim(), q.level(), q.code()), f.resolution() * f.dim());
}

double frac_average(const GridFunction& f, const DyadicCube& q, double alpha) {
  validate_alpha(alpha, f.dim());
  check_cube_in_grid(q, f.dim(), f.resolution());
  return fractional_average_from_sum(sum_cells_of(f, f.dim(), q.level(), q.code()), q.level(), f.dim(),
                                     f.resolution(), alpha);
}

double measure(const GridFunction& w, const CellSet& cells) {
  std::vector<double> xs;
  xs.reserve(cells.size());
  for (auto c : cells) {
    if (c >= w.size()) throw std::domain_error("cell index out of range");
    xs.push_back(w[c]);
  }
  return pairwise_sum(xs) * w.cell_volume();
}

// CubePyramid --------------------------------------------------------------

CubePyramid::CubePyramid(const GridFunction& f) : dim_(f.dim()), resolution_(f.resolution()) {
  sums_.resize(static_cast<std::size_t>(resolution_) + 1);
  sums_.back().assign(f.values().begin(), f.values().end());
  const unsigned n_children = 1u << dim_;
  for (int l = resolution_ - 1; l >= 0; --l) {
    const auto& below = sums_[static_cast<std::size_t>(l) + 1];
    auto& here = sums_[static_cast<std::size_t>(l)];
    here.resize(std::size_t{1} << (l * dim_));
    for (std::uint64_t c = 0; c < here.size(); ++c) {
      double s = 0.0;
      for (unsigned b = 0; b < n_children; ++b) s += below[child_code(dim_, l, c, b)];
      here[c] = s;
    }
  }
}

double CubePyramid::raw_sum(const DyadicCube& q) const {
  check_cube_in_grid(q, dim_, resolution_);
  return sums_[static_cast<std::size_t>(q.level())][q.code()];
}

double CubePyramid::integral(const DyadicCube& q) const { return double_at(raw_sum(q), resolution_ * dim_); }

double CubePyramid::frac_average(const DyadicCube& q, double alpha) const {
  return fractional_average_from_sum(raw_sum(q), q.level(), dim_, resolution_, alpha);
}

// Generators and text format ------------------------------------------------

GridFunction generate_grid_function(int dim, int resolution, const GeneratorSpec& spec) {
  validate_grid_shape(dim, resolution);
  const std::size_t n = std::size_t{1} << (resolution * dim);
  auto param = [&](const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
  };
  Rng rng(spec.seed);
  std::vector<double> v(n);
  if (spec.name == "constant") {
    std::fill(v.begin(), v.end(), param("value", 1.0));
  } else if (spec.name == "random-uniform") {
    const double lo = param("lo", 0.0);
    const double hi = param("hi", 1.0);
    if (!(lo >= 0.0) || !(hi >= lo)) throw std::domain_error("random-uniform needs 0 <= lo <= hi");
    for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  } else if (spec.name == "spike") {
    std::fill(v.begin(), v.end(), param("base", 0.0));
    const double height = param("height", 1.0);
    if (spec.params.contains("cell")) {
      const auto cell = static_cast<std::size_t>(param("cell", 0.0));
      if (cell >= n) throw std::domain_error("spike cell out of range");
      v[cell] = height;
    } else {
      const auto count = static_cast<std::uint64_t>(param("count", 1.0));
      for (std::uint64_t i = 0; i < count; ++i) v[rng.below(n)] = height;
    }
  } else {
    throw std::invalid_argument("unknown generator '" + spec.name + "'");
  }
  return {dim, resolution, std::move(v)};
}

GridFunction parse_grid_function(const std::string& text) {
  std::istringstream in(text);
  int dim = 0;
  int resolution = 0;
  if (!(in >> dim >> resolution)) throw std::invalid_argument("grid function: missing 'd L' header");
  validate_grid_shape(dim, resolution);
  const std::size_t n = std::size_t{1} << (resolution * dim);
  std::vector<double> v;
  v.reserve(n);
  double x = 0.0;
  while (in >> x) v.push_back(x);
  if (!in.eof()) throw std::invalid_argument("grid function: malformed value");
  return {dim, resolution, std::move(v)};
}

GridFunction read_grid_function(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open grid function file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_grid_function(buf.str());
}

std::string format_grid_function(const GridFunction& f) {
  std::string out = std::to_string(f.dim()) + " " + std::to_string(f.resolution()) + "\n";
  for (double v : f.values()) out += format_real(v) + "\n";
  return out;
}

void write_grid_function(const std::string& path, const GridFunction& f) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << format_grid_function(f);
}

}  // namespace sparseweak
