#pragma once

#include <span>

#include "sparseweak/grid.hpp"
#include "sparseweak/young.hpp"

namespace sparseweak {

/// Parameters shared by the maximal and sparse operators.
struct OperatorParams {
  double alpha = 0.0;  ///< fractional order, 0 <= alpha < d
  double nu = 1.0;     ///< sparse aggregation exponent, nu > 0
  YoungFunction phi = linear_young();

  /// Throws std::domain_error on out-of-range alpha or nu.
  void validate(int dim) const;
};

/// Dyadic fractional maximal function
///   M_alpha f(x) = max over dyadic Q containing x of <f>_{alpha,Q},
/// where Q ranges from the root cube down to the cell itself. One bottom-up
/// pass forms the cube sums; one top-down pass carries the running maximum.
GridFunction dyadic_frac_maximal(const GridFunction& f, double alpha);

/// Luxemburg average ||w||_{phi,Q} = inf{lambda > 0 : mean_Q phi(w / lambda) <= 1}.
double luxemburg_norm(const GridFunction& w, const DyadicCube& q, const YoungFunction& phi);

/// Luxemburg average of the values `cells` (one per finest cell of a cube).
/// `phi_inverse_one` is phi^{-1}(1), used to bracket the root.
double luxemburg_norm_of(std::span<const double> cells, const YoungFunction& phi, double phi_inverse_one);

/// Orlicz maximal function M_{phi(L)} w: per cell, the largest Luxemburg
/// average over the dyadic cubes containing it.
GridFunction orlicz_maximal(const GridFunction& w, const YoungFunction& phi);

/// The weight M_alpha(M_{phi(L)} w) on the right side of the weak-type bound.
GridFunction iterated_bound_weight(const GridFunction& w, const YoungFunction& phi, double alpha);

}  // namespace sparseweak
