#pragma once

#include <span>
#include <utility>
#include <vector>

namespace sparseweak {

enum class YoungKind {
  power,   ///< t^p, p > 1
  loglog,  ///< t * log(e + t)^delta, delta > 0
  linear,  ///< t; conjugate is 0 on [0,1] and +inf beyond
  table,   ///< convex piecewise-linear interpolant through (0,0) and the table
};

const char* to_string(YoungKind kind);

/// Catalog parameters for builtin_young(). Unused fields are ignored.
struct YoungSpec {
  YoungKind kind = YoungKind::power;
  double p = 2.0;
  double delta = 1.0;
  std::vector<std::pair<double, double>> table;
};

/// A convex, nondecreasing phi: [0, inf) -> [0, inf) with phi(0) = 0.
///
/// Instances are immutable. Construct through builtin_young(), which checks
/// the parameter constraints and samples the monotonicity/convexity
/// invariants before handing the function out.
class YoungFunction {
 public:
  static constexpr double kDefaultDomainCap = 1e150;

  YoungKind kind() const { return kind_; }
  const YoungSpec& spec() const { return spec_; }
  /// Above this argument, conjugation switches to log-domain formulas.
  double domain_cap() const { return domain_cap_; }
  /// True when psi is not finite valued (phi grows only linearly).
  bool degenerate() const { return kind_ == YoungKind::linear || kind_ == YoungKind::table; }

  double operator()(double t) const;
  /// Right derivative phi'(t+).
  double derivative(double t) const;

 private:
  friend YoungFunction builtin_young(const YoungSpec& spec);
  YoungFunction(YoungSpec spec, double domain_cap);

  YoungKind kind_;
  YoungSpec spec_;
  double domain_cap_;
  std::vector<double> slopes_;  // table kind: slope of each segment
};

/// Validating constructor for every catalog kind.
YoungFunction builtin_young(const YoungSpec& spec);

inline YoungFunction power_young(double p) { return builtin_young({YoungKind::power, p, 1.0, {}}); }
inline YoungFunction loglog_young(double delta) {
  return builtin_young({YoungKind::loglog, 2.0, delta, {}});
}
inline YoungFunction linear_young() { return builtin_young({YoungKind::linear, 2.0, 1.0, {}}); }

/// phi(t); throws std::domain_error for negative or non-finite t.
double eval_phi(const YoungFunction& phi, double t);

/// Smallest t with phi(t) >= y, for y > 0.
double phi_inverse(const YoungFunction& phi, double y);

/// Complementary function psi(s) = sup_{t>0} (s t - phi(t)), s > 0.
/// Returns +infinity where the supremum is unbounded (linear growth).
double conjugate(const YoungFunction& phi, double s);

/// Natural log of psi(s); finite even where psi itself overflows a double.
/// Catalog kinds only (power, loglog); returns -inf where psi(s) = 0.
double log_conjugate(const YoungFunction& phi, double s);

/// log2 of psi^{-1}(y) given log2(y) > 0. The argument y itself is never
/// formed, so y = 2^(2^64) is fine. Throws std::domain_error for the linear
/// kind, whose conjugate jumps from 0 to infinity at s = 1.
double conjugate_inverse_log2(const YoungFunction& phi, double log2_y);

/// psi^{-1}(y) given log2(y); may be +inf when the result overflows.
double conjugate_inverse(const YoungFunction& phi, double log2_y);

struct CPhiResult {
  double value = 0.0;     ///< partial sum of 1 / psi^{-1}(2^(2^k))
  int terms = 0;          ///< K, number of terms summed
  bool divergent = false; ///< terms stay bounded below (hypothesis fails)
  bool truncated = false; ///< stopped at K = 64 before the tolerance test
};

/// Partial sums of sum_{k>=1} 1 / psi^{-1}(2^(2^k)) until a term falls below
/// tol * sum or 64 terms are used.
CPhiResult c_phi(const YoungFunction& phi, double tol = 1e-9);

/// Samples the Young-function invariants (phi(0) = 0, nondecreasing,
/// midpoint convexity) on `samples` log-spaced points. Returns false on the
/// first violation.
bool satisfies_young_invariants(const YoungFunction& phi, int samples = 1000);

}  // namespace sparseweak
