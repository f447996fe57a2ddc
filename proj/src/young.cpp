#include "sparseweak/young.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sparseweak {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxBisection = 4000;
constexpr int kCPhiMaxTerms = 64;
constexpr double kDivergenceFloor = 1e-3;

double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// ln(e + e^tau) without overflow.
double log_e_plus_exp(double tau) {
  const double hi = std::max(1.0, tau);
  return hi + std::log1p(std::exp(-std::abs(tau - 1.0)));
}

// loglog kind parametrized by tau = ln t at the maximizer of s t - phi(t):
// slope s(tau) = phi'(t) and ln psi(s(tau)). Both increase with tau.
double loglog_slope(double delta, double tau) {
  const double big_l = log_e_plus_exp(tau);
  const double sigma = 1.0 / (1.0 + std::exp(1.0 - tau));  // t / (e + t)
  return std::pow(big_l, delta) + delta * std::pow(big_l, delta - 1.0) * sigma;
}

double loglog_log_psi(double delta, double tau) {
  const double big_l = log_e_plus_exp(tau);
  return std::log(delta) + tau + (delta - 1.0) * std::log(big_l) - log1pexp(1.0 - tau);
}

// Smallest tau (to double resolution) with g(tau) >= target, g increasing.
template <class G>
double bisect_increasing(G&& g, double target) {
  double lo = -1.0;
  while (g(lo) >= target) {
    lo *= 2.0;
    if (lo < -1e6) break;
  }
  double hi = 1.0;
  while (g(hi) < target) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw std::domain_error("conjugate bracket overflow");
  }
  for (int i = 0; i < kMaxBisection; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double power_log2_conjugate_constant(double p) {
  // psi(s) = C s^{p'} with C = (1 - 1/p) p^{-1/(p-1)}.
  return std::log2((p - 1.0) / p) - std::log2(p) / (p - 1.0);
}

void require_argument(double t, const char* what) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::domain_error(std::string(what) + ": argument must be finite and >= 0");
  }
}

struct InverseResult {
  double log2_value;
  bool saturated;  // psi is bounded below the requested level
};

InverseResult conjugate_inverse_impl(const YoungFunction& phi, double log2_y) {
  if (!(log2_y > 0.0) || !std::isfinite(log2_y)) {
    throw std::domain_error("conjugate_inverse: log2(y) must be finite and > 0");
  }
  const auto& spec = phi.spec();
  switch (phi.kind()) {
    case YoungKind::power: {
      const double dual = spec.p / (spec.p - 1.0);
      return {(log2_y - power_log2_conjugate_constant(spec.p)) / dual, false};
    }
    case YoungKind::loglog: {
      const double target = log2_y * std::numbers::ln2;
      const double tau = bisect_increasing(
          [&](double x) { return loglog_log_psi(spec.delta, x); }, target);
      return {std::log2(loglog_slope(spec.delta, tau)), false};
    }
    case YoungKind::linear:
      throw std::domain_error(
          "conjugate_inverse: linear Young function has bounded conjugate range "
          "(psi jumps from 0 to infinity at s = 1)");
    case YoungKind::table: {
      const double top_slope = phi.derivative(spec.table.back().first);
      const double psi_top = conjugate(phi, top_slope);
      if (psi_top <= 0.0 || std::log2(psi_top) < log2_y) return {std::log2(top_slope), true};
      const double y = std::exp2(log2_y);
      double lo = 0.0;
      double hi = top_slope;
      for (int i = 0; i < kMaxBisection; ++i) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (conjugate(phi, mid) >= y) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      return {std::log2(hi), false};
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

const char* to_string(YoungKind kind) {
  switch (kind) {
    case YoungKind::power: return "power";
    case YoungKind::loglog: return "loglog";
    case YoungKind::linear: return "linear";
    case YoungKind::table: return "table";
  }
  return "?";
}

YoungFunction::YoungFunction(YoungSpec spec, double domain_cap)
    : kind_(spec.kind), spec_(std::move(spec)), domain_cap_(domain_cap) {
  if (kind_ == YoungKind::table) {
    double prev_t = 0.0;
    double prev_v = 0.0;
    for (const auto& [t, v] : spec_.table) {
      slopes_.push_back((v - prev_v) / (t - prev_t));
      prev_t = t;
      prev_v = v;
    }
  }
}

double YoungFunction::operator()(double t) const {
  switch (kind_) {
    case YoungKind::power:
      return std::pow(t, spec_.p);
    case YoungKind::loglog: {
      const double big_l = std::log(std::numbers::e + t);
      return spec_.delta == 1.0 ? t * big_l : t * std::pow(big_l, spec_.delta);
    }
    case YoungKind::linear:
      return t;
    case YoungKind::table: {
      const auto& pts = spec_.table;
      auto it = std::upper_bound(pts.begin(), pts.end(), t,
                                 [](double x, const auto& pt) { return x < pt.first; });
      const auto seg = static_cast<std::size_t>(it - pts.begin());
      if (seg == pts.size()) return pts.back().second + slopes_.back() * (t - pts.back().first);
      const double t0 = seg == 0 ? 0.0 : pts[seg - 1].first;
      const double v0 = seg == 0 ? 0.0 : pts[seg - 1].second;
      return v0 + slopes_[seg] * (t - t0);
    }
  }
  return 0.0;
}

double YoungFunction::derivative(double t) const {
  switch (kind_) {
    case YoungKind::power:
      return spec_.p * std::pow(t, spec_.p - 1.0);
    case YoungKind::loglog: {
      const double big_l = std::log(std::numbers::e + t);
      return std::pow(big_l, spec_.delta) +
             spec_.delta * t * std::pow(big_l, spec_.delta - 1.0) / (std::numbers::e + t);
    }
    case YoungKind::linear:
      return 1.0;
    case YoungKind::table: {
      const auto& pts = spec_.table;
      auto it = std::upper_bound(pts.begin(), pts.end(), t,
                                 [](double x, const auto& pt) { return x < pt.first; });
      const auto seg = static_cast<std::size_t>(it - pts.begin());
      return seg == pts.size() ? slopes_.back() : slopes_[seg];
    }
  }
  return 0.0;
}

YoungFunction builtin_young(const YoungSpec& spec) {
  YoungSpec s = spec;
  switch (s.kind) {
    case YoungKind::power:
      if (!(s.p > 1.0) || !std::isfinite(s.p)) {
        throw std::invalid_argument("power Young function needs p > 1 (got " + std::to_string(s.p) + ")");
      }
      break;
    case YoungKind::loglog:
      if (!(s.delta > 0.0) || !std::isfinite(s.delta)) {
        throw std::invalid_argument("loglog Young function needs delta > 0");
      }
      break;
    case YoungKind::linear:
      break;
    case YoungKind::table: {
      if (!s.table.empty() && s.table.front().first == 0.0) {
        if (s.table.front().second != 0.0) throw std::invalid_argument("table: phi(0) must be 0");
        s.table.erase(s.table.begin());
      }
      if (s.table.empty()) throw std::invalid_argument("table: needs at least one point with t > 0");
      double prev_t = 0.0;
      double prev_v = 0.0;
      double prev_slope = 0.0;
      for (const auto& [t, v] : s.table) {
        if (!std::isfinite(t) || !std::isfinite(v) || !(t > prev_t) || v < 0.0) {
          throw std::invalid_argument("table: abscissae must increase strictly and values be >= 0");
        }
        const double slope = (v - prev_v) / (t - prev_t);
        if (slope < prev_slope * (1.0 - 1e-12)) throw std::invalid_argument("table: not convex");
        prev_t = t;
        prev_v = v;
        prev_slope = slope;
      }
      if (!(prev_slope > 0.0)) throw std::invalid_argument("table: final slope must be positive");
      break;
    }
  }
  YoungFunction phi(std::move(s), YoungFunction::kDefaultDomainCap);
  if (!satisfies_young_invariants(phi)) {
    throw std::invalid_argument(std::string("Young function invariants fail for kind ") + to_string(spec.kind));
  }
  return phi;
}

double eval_phi(const YoungFunction& phi, double t) {
  require_argument(t, "eval_phi");
  return phi(t);
}

double phi_inverse(const YoungFunction& phi, double y) {
  if (!(y > 0.0) || !std::isfinite(y)) throw std::domain_error("phi_inverse: y must be finite and > 0");
  double lo = 0.0;
  double hi = 1.0;
  while (phi(hi) < y) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < kMaxBisection; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (phi(mid) >= y) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double log_conjugate(const YoungFunction& phi, double s) {
  if (!(s > 0.0) || std::isnan(s)) throw std::domain_error("log_conjugate: s must be > 0");
  const auto& spec = phi.spec();
  switch (phi.kind()) {
    case YoungKind::power: {
      const double dual = spec.p / (spec.p - 1.0);
      return (dual * std::log2(s) + power_log2_conjugate_constant(spec.p)) * std::numbers::ln2;
    }
    case YoungKind::loglog: {
      if (s <= 1.0) return -kInf;
      const double tau = bisect_increasing([&](double x) { return loglog_slope(spec.delta, x); }, s);
      return loglog_log_psi(spec.delta, tau);
    }
    default:
      return std::log(conjugate(phi, s));
  }
}

double conjugate(const YoungFunction& phi, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::domain_error("conjugate: s must be finite and > 0");
  switch (phi.kind()) {
    case YoungKind::linear:
      return s <= 1.0 ? 0.0 : kInf;
    case YoungKind::table: {
      // The supremum of a concave piecewise-linear map sits at a vertex.
      const auto& pts = phi.spec().table;
      if (s > phi.derivative(pts.back().first)) return kInf;
      double best = 0.0;
      for (const auto& [t, v] : pts) best = std::max(best, s * t - v);
      return best;
    }
    default:
      break;
  }
  // h(t) = s t - phi(t) is concave with h'(t) = s - phi'(t); grow the bracket
  // [0, hi] until h' changes sign, then bisect on the sign of h'.
  if (s <= phi.derivative(0.0)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (s - phi.derivative(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > phi.domain_cap()) return std::exp(log_conjugate(phi, s));
  }
  for (int i = 0; i < kMaxBisection; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (s - phi.derivative(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double best = std::max(s * lo - phi(lo), s * hi - phi(hi));
  return std::max(0.0, best);
}

double conjugate_inverse_log2(const YoungFunction& phi, double log2_y) {
  return conjugate_inverse_impl(phi, log2_y).log2_value;
}

double conjugate_inverse(const YoungFunction& phi, double log2_y) {
  return std::exp2(conjugate_inverse_log2(phi, log2_y));
}

CPhiResult c_phi(const YoungFunction& phi, double tol) {
  if (!(tol > 0.0) || !std::isfinite(tol)) throw std::domain_error("c_phi: tol must be > 0");
  CPhiResult out;
  if (phi.kind() == YoungKind::linear) {
    // psi^{-1} is identically 1, so every term equals 1.
    out.value = 1.0;
    out.terms = 1;
    out.divergent = true;
    return out;
  }
  double term = 0.0;
  for (int k = 1; k <= kCPhiMaxTerms; ++k) {
    const auto inv = conjugate_inverse_impl(phi, std::ldexp(1.0, k));
    term = std::exp2(-inv.log2_value);
    out.value += term;
    out.terms = k;
    if (inv.saturated) {
      // Every later term equals this one.
      out.divergent = true;
      return out;
    }
    if (term < tol * out.value) return out;
  }
  if (term >= kDivergenceFloor) {
    out.divergent = true;
  } else {
    out.truncated = true;
  }
  return out;
}

bool satisfies_young_invariants(const YoungFunction& phi, int samples) {
  if (phi(0.0) != 0.0) return false;
  std::vector<double> ts{0.0};
  for (int i = 0; i < samples; ++i) {
    ts.push_back(std::pow(10.0, -6.0 + 12.0 * i / std::max(1, samples - 1)));
  }
  std::vector<double> vs;
  vs.reserve(ts.size());
  for (double t : ts) vs.push_back(phi(t));
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (!(vs[i] >= vs[i - 1])) return false;
  }
  for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
    const double chord = vs[i - 1] + (vs[i + 1] - vs[i - 1]) * (ts[i] - ts[i - 1]) / (ts[i + 1] - ts[i - 1]);
    if (vs[i] > chord + 1e-12 * (1.0 + std::abs(chord))) return false;
    const double mid = 0.5 * (ts[i - 1] + ts[i + 1]);
    if (phi(mid) > 0.5 * (vs[i - 1] + vs[i + 1]) + 1e-12 * (1.0 + vs[i + 1])) return false;
  }
  return true;
}

}  // namespace sparseweak
