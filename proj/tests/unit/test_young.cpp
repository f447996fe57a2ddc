#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "oracles/brute.hpp"
#include "sparseweak/young.hpp"

using namespace sparseweak;

namespace {

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); }

// Reference values from tests/oracles/loglog_oracle.py (60-digit mpmath,
// conjugate solved directly in t). psi^{-1}(2^(2^k)) for k in kOracleK.
constexpr int kOracleK[] = {1, 2, 5, 10, 20, 40, 64};
struct LoglogOracle {
  double delta;
  double inverse[7];
  int terms;           // K reached by c_phi at tol 1e-9
  double partial_sum;  // oracle sum of the first K terms
};
constexpr LoglogOracle kLoglog[] = {
    {0.25,
     {1.4909707176112317, 1.597467251486082, 2.280042979869926, 5.174816029711078, 29.19834341062082,
      934.3429691298658, 59797.95002386209},
     64,
     5.222558299100931},
    {0.5,
     {1.9615782446701358, 2.2989445191619042, 5.048054102535256, 26.735023555468004, 852.5408725514654,
      872996.7839580987, 3575794827.0563083},
     58,
     2.260256402360089},
    {1.0,
     {2.8318273427996337, 3.9197028180766864, 23.180709778551147, 710.782712893384, 726818.4980028252,
      762123384786.8104, 1.2786308645202655e+19},
     31,
     0.9310587218168426},
    {2.0,
     {4.329609949273254, 7.344995065419344, 381.83692128453487, 494960.31425551546, 528244502772.45465,
      5.8083205359614575e+23, 1.6348968877038418e+38},
     17,
     0.4310941517897424},
};

std::vector<YoungFunction> catalog() {
  return {power_young(1.5), power_young(2.0), power_young(3.0), loglog_young(0.5), loglog_young(1.0),
          loglog_young(2.0)};
}

}  // namespace

TEST_CASE("eval_phi examples") {
  CHECK(eval_phi(power_young(2), 0.0) == 0.0);
  CHECK(eval_phi(power_young(2), 3.0) == 9.0);
  CHECK(eval_phi(loglog_young(1), 0.0) == 0.0);
  CHECK(eval_phi(loglog_young(1), 1.0) == doctest::Approx(std::log(std::exp(1.0) + 1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(eval_phi(power_young(2), -1.0), std::domain_error);
  CHECK_THROWS_AS(eval_phi(power_young(2), std::numeric_limits<double>::infinity()), std::domain_error);
  CHECK_THROWS_AS(eval_phi(power_young(2), std::nan("")), std::domain_error);
}

TEST_CASE("conjugate examples") {
  CHECK(rel_close(conjugate(power_young(2), 2.0), 1.0, 1e-12));
  CHECK(rel_close(conjugate(power_young(2), 0.001), 2.5e-7, 1e-9));
  CHECK(conjugate(linear_young(), 0.5) == 0.0);
  CHECK(conjugate(linear_young(), 1.0) == 0.0);
  CHECK(std::isinf(conjugate(linear_young(), 2.0)));
}

TEST_CASE("conjugate_inverse examples") {
  CHECK(rel_close(conjugate_inverse(power_young(2), 2.0), 4.0, 1e-12));
  CHECK(rel_close(conjugate_inverse(power_young(2), 16.0), 512.0, 1e-12));
  const double big = conjugate_inverse(loglog_young(1), std::ldexp(1.0, 20));
  CHECK(rel_close(big, 726818.4980028252, 1e-9));
  // Leading asymptotics ln(y) = 2^20 ln 2.
  CHECK(std::abs(big / (std::ldexp(1.0, 20) * std::log(2.0)) - 1.0) < 1e-5);
  CHECK_THROWS_AS(conjugate_inverse(linear_young(), 4.0), std::domain_error);
  CHECK_THROWS_AS(conjugate_inverse(power_young(2), 0.0), std::domain_error);
  CHECK_THROWS_AS(conjugate_inverse(power_young(2), -3.0), std::domain_error);
}

TEST_CASE("conjugate_inverse log domain reaches k = 64") {
  const double l = conjugate_inverse_log2(loglog_young(1), std::ldexp(1.0, 64));
  CHECK(std::isfinite(l));
  CHECK(rel_close(std::exp2(l), 1.2786308645202655e+19, 1e-9));
  // power p: log2 psi^{-1} is affine in log2 y with slope 1/p'.
  const double a = conjugate_inverse_log2(power_young(3), 1000.0);
  const double b = conjugate_inverse_log2(power_young(3), 2000.0);
  CHECK(rel_close(b - a, 1000.0 * 2.0 / 3.0, 1e-12));
}

TEST_CASE("loglog conjugate inverse matches the high-precision oracle") {
  for (const auto& o : kLoglog) {
    const auto phi = loglog_young(o.delta);
    for (int i = 0; i < 7; ++i) {
      INFO("delta " << o.delta << " k " << kOracleK[i]);
      CHECK(rel_close(conjugate_inverse(phi, std::ldexp(1.0, kOracleK[i])), o.inverse[i], 1e-9));
    }
  }
}

TEST_CASE("c_phi power p = 2") {
  const auto r = c_phi(power_young(2), 1e-9);
  CHECK(!r.divergent);
  CHECK(std::abs(r.value - 0.4082108) < 1e-6);
  // Terms 2^{-(1 + 2^{k-1})}; the partial sum through the same K is exact.
  double exact = 0.0;
  for (int k = 1; k <= r.terms; ++k) exact += std::ldexp(1.0, -(1 + (1 << (k - 1))));
  CHECK(rel_close(r.value, exact, 1e-15));
}

TEST_CASE("c_phi loglog matches the oracle partial sums") {
  for (const auto& o : kLoglog) {
    INFO("delta " << o.delta);
    const auto r = c_phi(loglog_young(o.delta), 1e-9);
    CHECK(!r.divergent);
    CHECK(r.terms == o.terms);
    CHECK(r.truncated == (o.terms == 64));
    CHECK(rel_close(r.value, o.partial_sum, 1e-12));
  }
}

TEST_CASE("c_phi divergence") {
  const auto lin = c_phi(linear_young());
  CHECK(lin.divergent);
  const auto table = c_phi(builtin_young({YoungKind::table, 2, 1, {{1.0, 1.0}, {2.0, 3.0}}}));
  CHECK(table.divergent);
  CHECK_THROWS_AS(c_phi(power_young(2), 0.0), std::domain_error);
}

TEST_CASE("c_phi is monotone along the catalog order") {
  // linear <= loglog 1 <= loglog 2 pointwise, so c_phi decreases.
  const auto l1 = c_phi(loglog_young(1.0));
  const auto l2 = c_phi(loglog_young(2.0));
  CHECK(c_phi(linear_young()).divergent);
  CHECK(l1.value >= l2.value);
  CHECK(c_phi(loglog_young(0.5)).value >= l1.value);
}

TEST_CASE("builtin_young validation") {
  CHECK_NOTHROW(power_young(2));
  CHECK_THROWS(power_young(1.0));
  CHECK_THROWS(power_young(0.5));
  CHECK_NOTHROW(loglog_young(0.5));
  CHECK_THROWS(loglog_young(0.0));
  CHECK_THROWS(loglog_young(-1.0));
  // Non-convex table: slopes 2 then 1.
  CHECK_THROWS(builtin_young({YoungKind::table, 2, 1, {{1.0, 2.0}, {2.0, 3.0}}}));
  // Decreasing abscissae.
  CHECK_THROWS(builtin_young({YoungKind::table, 2, 1, {{2.0, 2.0}, {1.0, 3.0}}}));
  CHECK_THROWS(builtin_young({YoungKind::table, 2, 1, {}}));
  CHECK(linear_young().degenerate());
  CHECK(!power_young(2).degenerate());
}

TEST_CASE("catalog functions satisfy the Young invariants") {
  for (const auto& phi : catalog()) CHECK(satisfies_young_invariants(phi));
  CHECK(satisfies_young_invariants(linear_young()));
}

TEST_CASE("power conjugate matches the closed form on [1e-3, 1e3]") {
  for (double p : {1.5, 2.0, 3.0}) {
    const double q = p / (p - 1.0);
    for (int i = 0; i <= 60; ++i) {
      const double s = std::pow(10.0, -3.0 + 6.0 * i / 60.0);
      const double closed = std::pow(s, q) / (q * std::pow(p, q / p));
      INFO("p " << p << " s " << s);
      CHECK(rel_close(conjugate(power_young(p), s), closed, 1e-9));
    }
  }
}

TEST_CASE("power conjugate agrees with a golden-section Legendre transform") {
  for (double p : {1.5, 3.0}) {
    for (double s : {0.01, 0.7, 5.0}) {
      const double ref = static_cast<double>(oracle::power_conjugate(p, s));
      CHECK(rel_close(conjugate(power_young(p), s), ref, 1e-9));
    }
  }
}

TEST_CASE("Fenchel-Young inequality") {
  for (const auto& phi : catalog()) {
    for (int i = 0; i <= 30; ++i) {
      const double s = std::pow(10.0, -2.0 + 4.0 * i / 30.0);
      const double psi = conjugate(phi, s);
      for (int j = 0; j <= 30; ++j) {
        const double t = std::pow(10.0, -3.0 + 6.0 * j / 30.0);
        CHECK(s * t <= phi(t) + psi + 1e-8 * (1.0 + s * t));
      }
    }
  }
}

TEST_CASE("conjugate inverse round trip") {
  for (const auto& phi : catalog()) {
    for (int i = 0; i < 20; ++i) {
      const double log2_y = std::pow(2.0, -3.0 + 9.0 * i / 19.0);  // y from ~1.09 to 2^64
      const double s = conjugate_inverse(phi, log2_y);
      const double back = std::log2(conjugate(phi, s));
      INFO(to_string(phi.kind()) << " log2 y " << log2_y);
      CHECK(std::abs(std::exp2(back - log2_y) - 1.0) < 1e-7);
    }
  }
}

TEST_CASE("table kind") {
  const auto phi = builtin_young({YoungKind::table, 2, 1, {{1.0, 1.0}, {2.0, 3.0}, {3.0, 7.0}}});
  CHECK(phi(0.5) == 0.5);
  CHECK(phi(1.5) == 2.0);
  CHECK(phi(4.0) == 11.0);  // last slope continues
  // sup over vertices: s = 3 -> max(3 - 1, 6 - 3, 9 - 7) = 3.
  CHECK(conjugate(phi, 3.0) == 3.0);
  CHECK(std::isinf(conjugate(phi, 4.5)));
  CHECK(satisfies_young_invariants(phi));
}
