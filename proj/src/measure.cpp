#include "chofuse/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace chofuse {

namespace {

constexpr double kLambdaTol = 1e-12;
constexpr int kMaxBisect = 200;
constexpr int kMaxBracketGrowth = 200;

void check_densities(const Eigen::Ref<const Densities>& g) {
  if (g.size() < 1) throw DataError("densities: need at least one source");
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double v = g[i];
    if (!std::isfinite(v) || v <= 0.0 || v > 1.0)
      throw DataError("densities: entry " + std::to_string(i) +
                      " outside (0, 1]");
  }
}

// (prod(1 + lam g_i) - 1)/lam - 1, continued by its limit sum(g) - 1 at
// lam = 0. The log1p/expm1 route keeps the value accurate when lam is tiny.
double full_worth_gap(const Eigen::Ref<const Densities>& g, double lam) {
  if (lam == 0.0) return g.sum() - 1.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) s += std::log1p(lam * g[i]);
  return std::expm1(s) / lam - 1.0;
}

}  // namespace

double solve_lambda(const Eigen::Ref<const Densities>& densities) {
  check_densities(densities);
  const double total = densities.sum();
  if (std::abs(total - 1.0) <= kLambdaSnapTol) return 0.0;
  // With one source the polynomial is linear and 0 is its only root.
  if (densities.size() == 1) return 0.0;

  double lo, hi;
  if (total > 1.0) {
    lo = -1.0 + 1e-12;
    hi = 0.0;
  } else {
    lo = 0.0;
    hi = 1.0;
    int growth = 0;
    while (full_worth_gap(densities, hi) < 0.0) {
      hi *= 2.0;
      if (++growth > kMaxBracketGrowth)
        throw NumericalError("solve_lambda: bracket expansion failed");
    }
  }

  const double gap_lo = full_worth_gap(densities, lo);
  const double gap_hi = full_worth_gap(densities, hi);
  if (gap_lo == 0.0) return lo;
  if (gap_hi == 0.0) return hi;
  if (gap_lo > 0.0 || gap_hi < 0.0)
    throw NumericalError(
        "solve_lambda: root not bracketed; densities admit no lambda > -1");

  for (int iter = 0; iter < kMaxBisect && hi - lo > kLambdaTol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double gap = full_worth_gap(densities, mid);
    if (gap == 0.0) return mid;
    (gap < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

LambdaMeasure::LambdaMeasure(Densities densities, double lambda)
    : densities_(std::move(densities)), lambda_(lambda) {
  if (lambda_ != 0.0) {
    log_terms_.resize(densities_.size());
    for (Eigen::Index i = 0; i < densities_.size(); ++i)
      log_terms_[i] = std::log1p(lambda_ * densities_[i]);
  }
}

LambdaMeasure LambdaMeasure::fit(const Eigen::Ref<const Densities>& densities) {
  check_densities(densities);
  if (densities.size() == 1) {
    Densities unit(1);
    unit[0] = 1.0;
    return LambdaMeasure(std::move(unit), 0.0);
  }
  const double lambda = solve_lambda(densities);
  return LambdaMeasure(densities, lambda);
}

double LambdaMeasure::subset_worth(
    const std::vector<Eigen::Index>& subset) const {
  if (subset.empty()) return 0.0;
  double acc = 0.0;
  for (const Eigen::Index i : subset) {
    if (i < 0 || i >= densities_.size())
      throw std::invalid_argument("subset_worth: source index out of range");
    acc += lambda_ == 0.0 ? densities_[i] : log_terms_[i];
  }
  return lambda_ == 0.0 ? acc : std::expm1(acc) / lambda_;
}

double choquet_integral(const Eigen::Ref<const SupportVector>& supports,
                        const LambdaMeasure& measure) {
  const Eigen::Index n = measure.source_count();
  if (supports.size() != n)
    throw std::invalid_argument(
        "choquet_integral: support/measure source counts differ");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return supports[a] < supports[b] || (supports[a] == supports[b] && a < b);
  });

  // worth of the tail set {order[i], ..., order[n-1]}; the full set is
  // pinned to 1 by the boundary condition, and every worth is clamped into
  // [0, 1] so the layer-cake sum below stays inside [min f, max f].
  std::vector<double> tail_worth(static_cast<std::size_t>(n));
  tail_worth[0] = 1.0;
  const double lambda = measure.lambda();
  double suffix = 0.0;
  for (Eigen::Index i = n - 1; i >= 1; --i) {
    suffix += lambda == 0.0 ? measure.densities_[order[i]]
                            : measure.log_terms_[order[i]];
    const double worth = lambda == 0.0 ? suffix : std::expm1(suffix) / lambda;
    tail_worth[static_cast<std::size_t>(i)] = std::clamp(worth, 0.0, 1.0);
  }

  double integral = 0.0;
  double prev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = supports[order[i]];
    integral += (f - prev) * tail_worth[static_cast<std::size_t>(i)];
    prev = f;
  }
  return integral;
}

}  // namespace chofuse
