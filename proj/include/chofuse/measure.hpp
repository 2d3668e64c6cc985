#pragma once

#include <Eigen/Dense>

#include <vector>

#include "chofuse/errors.hpp"

namespace chofuse {

// Fuzzy densities g^i, one per information source (base classifier).
// Valid entries are finite and lie in (0, 1].
using Densities = Eigen::VectorXd;

// Per-source degrees of support for one class, values in [0, 1].
using SupportVector = Eigen::VectorXd;

// When |sum(g) - 1| falls below this, the measure is treated as additive
// (lambda = 0) instead of solving a near-degenerate polynomial.
inline constexpr double kLambdaSnapTol = 1e-9;

// Solves prod_i(1 + lambda * g_i) = lambda + 1 for the unique root
// lambda > -1. Returns exactly 0 when sum(g) is within kLambdaSnapTol of 1.
// The root is positive when sum(g) < 1 and lies in (-1, 0) when sum(g) > 1.
double solve_lambda(const Eigen::Ref<const Densities>& densities);

// A Sugeno lambda-measure: fuzzy densities plus the solved lambda.
// Answers worth queries for any subset of sources. The empty set has worth
// exactly 0 and the full set has worth 1.
class LambdaMeasure {
 public:
  // Validates the densities and solves for lambda. A single source is
  // degenerate: the boundary condition g(X) = 1 pins the lone singleton's
  // worth to 1 regardless of the supplied density.
  static LambdaMeasure fit(const Eigen::Ref<const Densities>& densities);

  double lambda() const { return lambda_; }
  const Densities& densities() const { return densities_; }
  Eigen::Index source_count() const { return densities_.size(); }

  // Worth of a subset given as distinct source indices:
  // (prod_{i in subset}(1 + lambda g_i) - 1) / lambda, or the plain density
  // sum when lambda is 0.
  double subset_worth(const std::vector<Eigen::Index>& subset) const;

 private:
  LambdaMeasure(Densities densities, double lambda);

  friend double choquet_integral(const Eigen::Ref<const SupportVector>&,
                                 const LambdaMeasure&);

  Densities densities_;
  Eigen::VectorXd log_terms_;  // log1p(lambda * g_i); empty when lambda == 0
  double lambda_ = 0.0;
};

// Choquet integral of the supports against the measure: the ascending-sort
// telescoping sum. The result lies in [min(f), max(f)] and a constant input
// is returned unchanged.
double choquet_integral(const Eigen::Ref<const SupportVector>& supports,
                        const LambdaMeasure& measure);

}  // namespace chofuse
