#include "sparseweak/maximal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sparseweak {
namespace {

constexpr int kLuxemburgIterations = 80;

// Running maximum from the root down; `per_level[l][code]` holds the value
// attached to each cube.
GridFunction top_down_max(int dim, int resolution, const std::vector<std::vector<double>>& per_level) {
  std::vector<double> running = per_level[0];
  for (int l = 1; l <= resolution; ++l) {
    const auto& here = per_level[static_cast<std::size_t>(l)];
    std::vector<double> next(here.size());
    for (std::uint64_t c = 0; c < here.size(); ++c) {
      next[c] = std::max(running[parent_code(dim, l, c)], here[c]);
    }
    running = std::move(next);
  }
  return {dim, resolution, std::move(running)};
}

std::vector<double> gather(const GridFunction& w, const DyadicCube& q) {
  if (q.dim() == 1) {
    const std::size_t width = std::size_t{1} << (w.resolution() - q.level());
    const auto first = w.values().begin() + static_cast<std::ptrdiff_t>(q.code() * width);
    return {first, first + static_cast<std::ptrdiff_t>(width)};
  }
  std::vector<double> out;
  for (auto c : cells_of(q, w.resolution())) out.push_back(w[c]);
  return out;
}

}  // namespace

void OperatorParams::validate(int dim) const {
  validate_alpha(alpha, dim);
  if (!(nu > 0.0) || !std::isfinite(nu)) throw std::domain_error("nu must be > 0");
}

GridFunction dyadic_frac_maximal(const GridFunction& f, double alpha) {
  validate_alpha(alpha, f.dim());
  const CubePyramid pyramid(f);
  std::vector<std::vector<double>> averages(static_cast<std::size_t>(f.resolution()) + 1);
  for (int l = 0; l <= f.resolution(); ++l) {
    const auto sums = pyramid.level(l);
    auto& out = averages[static_cast<std::size_t>(l)];
    out.resize(sums.size());
    for (std::size_t c = 0; c < sums.size(); ++c) {
      out[c] = fractional_average_from_sum(sums[c], l, f.dim(), f.resolution(), alpha);
    }
  }
  return top_down_max(f.dim(), f.resolution(), averages);
}

double luxemburg_norm_of(std::span<const double> cells, const YoungFunction& phi, double phi_inverse_one) {
  if (cells.empty()) return 0.0;
  const double top = *std::max_element(cells.begin(), cells.end());
  if (top == 0.0) return 0.0;
  const double n = static_cast<double>(cells.size());
  const double mean = pairwise_sum(cells) / n;

  std::vector<double> scratch(cells.size());
  // mean phi(w / lambda) - 1, decreasing in lambda.
  auto excess = [&](double lambda) {
    for (std::size_t i = 0; i < cells.size(); ++i) scratch[i] = phi(cells[i] / lambda);
    return pairwise_sum(scratch) / n - 1.0;
  };

  // Jensen gives phi(mean / lambda*) <= 1 <= phi(max / lambda*), which
  // brackets lambda* in [mean / a, max / a] with a = phi^{-1}(1).
  double lo = mean / phi_inverse_one;
  double hi = top / phi_inverse_one;
  while (excess(lo) < 0.0 && lo > 0.0) lo *= 0.5;
  while (excess(hi) > 0.0) hi *= 2.0;
  for (int i = 0; i < kLuxemburgIterations; ++i) {
    const double mid = lo * std::sqrt(hi / lo);
    if (!(mid > lo && mid < hi)) break;
    if (excess(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double luxemburg_norm(const GridFunction& w, const DyadicCube& q, const YoungFunction& phi) {
  if (q.dim() != w.dim()) throw std::domain_error("cube dimension does not match grid dimension");
  if (q.level() > w.resolution()) throw std::domain_error("cube level exceeds grid resolution");
  const auto cells = gather(w, q);
  return luxemburg_norm_of(cells, phi, phi_inverse(phi, 1.0));
}

GridFunction orlicz_maximal(const GridFunction& w, const YoungFunction& phi) {
  const double a = phi_inverse(phi, 1.0);
  std::vector<std::vector<double>> norms(static_cast<std::size_t>(w.resolution()) + 1);
  for (int l = 0; l <= w.resolution(); ++l) {
    auto& out = norms[static_cast<std::size_t>(l)];
    out.resize(std::size_t{1} << (l * w.dim()));
    for (std::uint64_t c = 0; c < out.size(); ++c) {
      const auto cells = gather(w, DyadicCube(w.dim(), l, c));
      out[c] = luxemburg_norm_of(cells, phi, a);
    }
  }
  return top_down_max(w.dim(), w.resolution(), norms);
}

GridFunction iterated_bound_weight(const GridFunction& w, const YoungFunction& phi, double alpha) {
  validate_alpha(alpha, w.dim());
  return dyadic_frac_maximal(orlicz_maximal(w, phi), alpha);
}

}  // namespace sparseweak
