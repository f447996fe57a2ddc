#include "sparseweak/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "sparseweak/errors.hpp"
#include "sparseweak/format.hpp"
#include "sparseweak/random.hpp"

namespace sparseweak {
namespace {

void check_lambda0(double lambda0) {
  if (!(lambda0 > 0.0 && lambda0 < 1.0)) throw std::domain_error("lambda0 must lie in (0, 1)");
}

void check_members(const SparseFamily& s) {
  validate_grid_shape(s.dim, s.resolution);
  for (const auto& q : s.cubes) {
    if (q.dim() != s.dim || q.level() > s.resolution) {
      throw std::domain_error("cube " + q.to_string() + " does not belong to the family grid");
    }
  }
}

void paint(std::vector<double>& cells, const DyadicCube& q, int resolution, double value) {
  if (q.dim() == 1) {
    const std::size_t width = std::size_t{1} << (resolution - q.level());
    std::fill_n(cells.begin() + static_cast<std::ptrdiff_t>(q.code() * width), width, value);
    return;
  }
  for (auto c : cells_of(q, resolution)) cells[c] = value;
}

CellSet union_of_cells(const std::vector<DyadicCube>& cubes, int resolution) {
  CellSet out;
  for (const auto& p : cubes) {
    auto cells = cells_of(p, resolution);
    out.insert(out.end(), cells.begin(), cells.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

SparseFamily make_family(int dim, int resolution, std::vector<DyadicCube> cubes, double lambda0,
                         std::optional<int> n_regular) {
  check_lambda0(lambda0);
  if (n_regular && *n_regular < 1) throw std::domain_error("N must be >= 1");
  std::sort(cubes.begin(), cubes.end());
  cubes.erase(std::unique(cubes.begin(), cubes.end()), cubes.end());
  SparseFamily s{dim, resolution, std::move(cubes), lambda0, n_regular};
  check_members(s);
  return s;
}

FamilyForest build_forest(std::span<const DyadicCube> cubes) {
  FamilyForest forest;
  const std::size_t n = cubes.size();
  forest.parent.assign(n, -1);
  forest.children.assign(n, {});
  forest.depth.assign(n, 0);
  std::unordered_map<std::uint64_t, int> position;
  position.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) position.emplace(cubes[i].key(), static_cast<int>(i));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& q = cubes[i];
    for (int l = q.level() - 1; l >= 0; --l) {
      const DyadicCube a(q.dim(), l, ancestor_code(q.dim(), q.level(), l, q.code()));
      auto it = position.find(a.key());
      if (it != position.end()) {
        forest.parent[i] = it->second;
        break;
      }
    }
  }
  // Members are sorted by level, so a parent always precedes its children.
  for (std::size_t i = 0; i < n; ++i) {
    const int p = forest.parent[i];
    if (p < 0) continue;
    forest.children[static_cast<std::size_t>(p)].push_back(static_cast<int>(i));
    forest.depth[i] = forest.depth[static_cast<std::size_t>(p)] + 1;
  }
  return forest;
}

SparseCheck verify_sparse(const SparseFamily& s, PackingMode mode) {
  check_lambda0(s.lambda0);
  check_members(s);
  SparseCheck out;
  out.bound = 1.0 / s.lambda0;
  const auto forest = build_forest(s.cubes);
  const std::size_t n = s.cubes.size();
  std::vector<double> packed(n);
  for (std::size_t i = 0; i < n; ++i) packed[i] = s.cubes[i].volume();
  if (mode == PackingMode::carleson_sum) {
    for (std::size_t i = n; i-- > 0;) {
      const int p = forest.parent[i];
      if (p >= 0) packed[static_cast<std::size_t>(p)] += packed[i];
    }
  }
  // union_volume: the members inside Q are covered by Q itself, so the union
  // has volume |Q| and `packed` already holds it.
  for (std::size_t i = 0; i < n; ++i) {
    const double ratio = packed[i] / s.cubes[i].volume();
    if (ratio > out.worst_ratio) {
      out.worst_ratio = ratio;
      out.worst_cube = s.cubes[i];
    }
  }
  out.pass = out.worst_ratio <= out.bound;
  return out;
}

RegularityCheck verify_n_regular(const SparseFamily& s, int n) {
  if (n < 1) throw std::domain_error("N must be >= 1");
  check_members(s);
  RegularityCheck out;
  const auto forest = build_forest(s.cubes);
  for (std::size_t i = 0; i < s.cubes.size(); ++i) {
    const std::size_t count = forest.children[i].size();
    if (count > out.worst_count || !out.worst_cube) {
      out.worst_count = count;
      out.worst_cube = s.cubes[i];
    }
  }
  out.pass = out.worst_count <= static_cast<std::size_t>(n);
  return out;
}

GeneratedFamily generate_sparse(const SparseGeneratorParams& p) {
  validate_grid_shape(p.dim, p.resolution);
  if (p.n_regular < 1) throw PreconditionError("generate_sparse: N must be >= 1");
  if (p.level_gap < 1) throw PreconditionError("generate_sparse: level_gap must be >= 1");
  if (p.target_size < 1) throw PreconditionError("generate_sparse: target_size must be >= 1");
  if (!(p.lambda0 > 0.0 && p.lambda0 < 1.0)) throw PreconditionError("generate_sparse: lambda0 must lie in (0, 1)");
  if (p.child_fraction && !(*p.child_fraction > 0.0 && *p.child_fraction <= 1.0)) {
    throw PreconditionError("generate_sparse: child_fraction must lie in (0, 1]");
  }

  Rng rng(p.seed);
  std::vector<DyadicCube> cubes{DyadicCube::root(p.dim)};
  std::vector<int> parent{-1};
  std::vector<double> packed{1.0};    // running Carleson sum per member
  std::vector<double> child_used{0.0};
  std::deque<int> queue{0};

  while (!queue.empty() && cubes.size() < p.target_size) {
    const int qi = queue.front();
    queue.pop_front();
    const DyadicCube q = cubes[static_cast<std::size_t>(qi)];
    const int level = q.level() + p.level_gap;
    if (level > p.resolution) continue;

    const std::uint64_t n_desc = std::uint64_t{1} << (p.level_gap * p.dim);
    const std::uint64_t count = std::min<std::uint64_t>(1 + rng.below(static_cast<std::uint64_t>(p.n_regular)), n_desc);
    std::vector<std::uint64_t> picks;
    while (picks.size() < count) {
      const std::uint64_t r = rng.below(n_desc);
      if (std::find(picks.begin(), picks.end(), r) == picks.end()) picks.push_back(r);
    }

    const double vol = std::ldexp(1.0, -level * p.dim);
    for (std::uint64_t r : picks) {
      if (cubes.size() >= p.target_size) break;
      if (p.child_fraction && child_used[static_cast<std::size_t>(qi)] + vol > *p.child_fraction * q.volume()) continue;
      bool fits = true;
      for (int a = qi; a >= 0; a = parent[static_cast<std::size_t>(a)]) {
        const auto ai = static_cast<std::size_t>(a);
        if (packed[ai] + vol > cubes[ai].volume() / p.lambda0) {
          fits = false;
          break;
        }
      }
      if (!fits) continue;

      // Descendant r: per coordinate, level_gap offset bits taken from r.
      std::uint64_t code = 0;
      const auto base = q.index();
      for (int j = 0; j < p.dim; ++j) {
        const std::uint64_t off = (r >> ((p.dim - 1 - j) * p.level_gap)) & ((std::uint64_t{1} << p.level_gap) - 1);
        code = (code << level) | ((std::uint64_t{base[static_cast<std::size_t>(j)]} << p.level_gap) | off);
      }
      for (int a = qi; a >= 0; a = parent[static_cast<std::size_t>(a)]) packed[static_cast<std::size_t>(a)] += vol;
      child_used[static_cast<std::size_t>(qi)] += vol;
      cubes.emplace_back(p.dim, level, code);
      parent.push_back(qi);
      packed.push_back(vol);
      child_used.push_back(0.0);
      queue.push_back(static_cast<int>(cubes.size() - 1));
    }
  }

  GeneratedFamily out;
  out.partial = cubes.size() < p.target_size;
  out.family = make_family(p.dim, p.resolution, std::move(cubes), p.lambda0, p.n_regular);
  return out;
}

std::vector<double> family_averages(const GridFunction& f, const SparseFamily& s, double alpha) {
  validate_alpha(alpha, f.dim());
  if (f.dim() != s.dim || f.resolution() != s.resolution) {
    throw std::domain_error("function and family live on different grids");
  }
  const CubePyramid pyramid(f);
  std::vector<double> out;
  out.reserve(s.cubes.size());
  for (const auto& q : s.cubes) out.push_back(pyramid.frac_average(q, alpha));
  return out;
}

GridFunction sparse_operator(const GridFunction& f, const SparseFamily& s, double alpha, double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw std::domain_error("nu must be > 0");
  const auto averages = family_averages(f, s, alpha);
  const auto forest = build_forest(s.cubes);
  std::vector<double> acc(s.cubes.size());
  for (std::size_t i = 0; i < s.cubes.size(); ++i) {
    const double term = nu == 1.0 ? averages[i] : std::pow(averages[i], nu);
    const int p = forest.parent[i];
    acc[i] = p < 0 ? term : acc[static_cast<std::size_t>(p)] + term;
  }
  std::vector<double> cells(f.size(), 0.0);
  // Shallow cubes first; deeper members overwrite with their longer sums.
  for (std::size_t i = 0; i < s.cubes.size(); ++i) paint(cells, s.cubes[i], s.resolution, acc[i]);
  if (nu != 1.0) {
    for (double& v : cells) v = std::pow(v, 1.0 / nu);
  }
  return {f.dim(), f.resolution(), std::move(cells)};
}

int level_index(double average, double lambda1) {
  if (!(average > 0.0)) throw std::domain_error("level_index needs a positive average");
  int k = static_cast<int>(std::floor(-std::log(average) / std::log(lambda1)));
  while (average > std::pow(lambda1, -k)) --k;
  while (average <= std::pow(lambda1, -k - 1)) ++k;
  return k;
}

LevelSets level_sets(const SparseFamily& s, const GridFunction& f, double alpha, double lambda1) {
  if (!(lambda1 > 2.0) || !std::isfinite(lambda1)) throw PreconditionError("level_sets: lambda1 must exceed 2");
  const auto averages = family_averages(f, s, alpha);
  const double ceiling = 1.0 / lambda1;
  LevelSets out;
  for (std::size_t i = 0; i < s.cubes.size(); ++i) {
    const double a = averages[i];
    if (a == 0.0 || a > ceiling) continue;
    out[level_index(a, lambda1)].push_back(s.cubes[i]);
  }
  return out;
}

std::vector<std::vector<DyadicCube>> layer_decompose(std::span<const DyadicCube> cubes) {
  std::vector<DyadicCube> sorted(cubes.begin(), cubes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  // Cubes containing a given point form a chain, so peeling maximal elements
  // v times leaves exactly the cubes with v strict ancestors in the set.
  const auto forest = build_forest(sorted);
  std::vector<std::vector<DyadicCube>> layers;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto v = static_cast<std::size_t>(forest.depth[i]);
    if (layers.size() <= v) layers.resize(v + 1);
    layers[v].push_back(sorted[i]);
  }
  return layers;
}

std::uint64_t bottom_depth(int k) {
  if (k < 0) throw std::domain_error("k must be >= 0");
  return k >= 62 ? std::uint64_t{1} << 62 : std::uint64_t{1} << k;
}

DecompositionSets decomposition_sets(const std::vector<std::vector<DyadicCube>>& layers, const DyadicCube& q, int k,
                                     int resolution) {
  std::size_t v = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (std::find(layers[i].begin(), layers[i].end(), q) != layers[i].end()) {
      v = i;
      break;
    }
  }
  if (v == layers.size()) throw std::domain_error("cube " + q.to_string() + " is in no layer");

  auto inside = [&](std::size_t layer) {
    std::vector<DyadicCube> out;
    if (layer >= layers.size()) return out;
    for (const auto& p : layers[layer]) {
      if (q.contains(p)) out.push_back(p);
    }
    return out;
  };

  DecompositionSets out;
  const auto all = cells_of(q, resolution);
  const auto removed = union_of_cells(inside(v + 1), resolution);
  std::set_difference(all.begin(), all.end(), removed.begin(), removed.end(), std::back_inserter(out.e_set));
  const std::uint64_t u = bottom_depth(k);
  if (u < layers.size() - v) out.bottom = union_of_cells(inside(v + static_cast<std::size_t>(u)), resolution);
  return out;
}

LayerDecomposition decompose(const SparseFamily& s, const GridFunction& f, double alpha, double lambda1) {
  LayerDecomposition out;
  out.lambda1 = lambda1;
  out.levels = level_sets(s, f, alpha, lambda1);
  for (const auto& [k, members] : out.levels) {
    const auto layers = layer_decompose(members);
    for (std::size_t v = 0; v < layers.size(); ++v) {
      out.layers[{k, static_cast<int>(v)}] = layers[v];
      for (const auto& q : layers[v]) out.e_sets[q] = decomposition_sets(layers, q, k, s.resolution).e_set;
    }
    out.u[k] = bottom_depth(k);
  }
  return out;
}

BottomDecay bottom_decay(const std::vector<std::vector<DyadicCube>>& layers, int /*resolution*/) {
  BottomDecay out;
  for (std::size_t j = 1; j < layers.size(); ++j) {
    double worst = 0.0;
    for (std::size_t v = 0; v + j < layers.size(); ++v) {
      for (const auto& q : layers[v]) {
        double covered = 0.0;
        for (const auto& p : layers[v + j]) {
          if (q.contains(p)) covered += p.volume();
        }
        worst = std::max(worst, covered / q.volume());
      }
    }
    out.worst_ratio.push_back(worst);
  }
  // Least squares of log(ratio) on depth over the positive ratios.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < out.worst_ratio.size(); ++i) {
    if (out.worst_ratio[i] <= 0.0) continue;
    const double x = static_cast<double>(i + 1);
    const double y = std::log(out.worst_ratio[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n >= 2) out.fitted_ratio = std::exp((n * sxy - sx * sy) / (n * sxx - sx * sx));
  return out;
}

SparseFamily parse_family(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("family: missing header");
  std::istringstream h(header);
  int dim = 0;
  int resolution = 0;
  double lambda0 = 0.0;
  int n = 0;
  if (!(h >> dim >> resolution >> lambda0 >> n)) throw std::invalid_argument("family: header must be 'd L lambda0 N'");
  validate_grid_shape(dim, resolution);
  std::vector<DyadicCube> cubes;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    int level = 0;
    if (!(row >> level)) continue;  // blank line
    std::vector<std::uint32_t> index;
    std::uint64_t i = 0;
    while (row >> i) index.push_back(static_cast<std::uint32_t>(i));
    if (static_cast<int>(index.size()) != dim) throw std::invalid_argument("family: cube line needs level and d indices");
    cubes.push_back(DyadicCube::from_index(level, index));
  }
  return make_family(dim, resolution, std::move(cubes), lambda0, n > 0 ? std::optional<int>(n) : std::nullopt);
}

SparseFamily read_family(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open family file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_family(buf.str());
}

std::string format_family(const SparseFamily& s) {
  std::string out = std::to_string(s.dim) + " " + std::to_string(s.resolution) + " " + format_real(s.lambda0) + " " +
                    std::to_string(s.n_regular.value_or(0)) + "\n";
  for (const auto& q : s.cubes) out += q.to_string() + "\n";
  return out;
}

void write_family(const std::string& path, const SparseFamily& s) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << format_family(s);
}

}  // namespace sparseweak
