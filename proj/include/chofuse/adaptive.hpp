#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "chofuse/errors.hpp"

namespace chofuse {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Row-normalized confusion matrix: probs(j, k) is the fraction of
// true-class-j training samples the classifier labelled k. Rows built from
// an empty count row are all zero and flagged degenerate.
struct ProbabilityMatrix {
  Eigen::MatrixXd probs;
  std::vector<bool> degenerate_rows;

  int class_count() const { return static_cast<int>(probs.rows()); }
};

// Joint prediction statistics over ordered classifier pairs:
// at(i, m, j, k) is the fraction of true-class-j training samples that
// classifier i labelled k while classifier m labelled them j.
class PairwiseJointTable {
 public:
  PairwiseJointTable(int source_count, int class_count);

  double at(int i, int m, int j, int k) const {
    return tables_[pair_index(i, m)](j, k);
  }
  double& at(int i, int m, int j, int k) {
    return tables_[pair_index(i, m)](j, k);
  }

  int source_count() const { return sources_; }
  int class_count() const { return classes_; }

  // true classes with no training samples
  std::vector<bool> degenerate_classes;

 private:
  std::size_t pair_index(int i, int m) const;

  int sources_ = 0;
  int classes_ = 0;
  std::vector<Eigen::MatrixXd> tables_;
};

struct AdaptiveConfig {
  double w1 = 0.9;
  double w2 = 0.6;
  double epsilon = 1e-4;
  double density_floor = 1e-4;

  void validate() const;  // throws DataError when out of range
};

// densities(i, j) = fuzzy density of classifier i for class j
using DensityTable = Eigen::MatrixXd;

// Confusion counts: counts(j1, j2) = samples of true class j1 predicted j2.
CountMatrix build_confusion(const Eigen::Ref<const Eigen::VectorXi>& predictions,
                            const Eigen::Ref<const Eigen::VectorXi>& true_labels,
                            int class_count);

ProbabilityMatrix row_normalize(const CountMatrix& counts);

// Preliminary densities g[i][j] = diagonal of classifier i's probability
// matrix, clamped into [density_floor, 1].
DensityTable initial_densities(const std::vector<ProbabilityMatrix>& pms,
                               double density_floor = 1e-4);

// predictions is sources x samples.
PairwiseJointTable build_pairwise_tables(
    const Eigen::Ref<const Eigen::MatrixXi>& predictions,
    const Eigen::Ref<const Eigen::VectorXi>& true_labels, int class_count);

// Down-weighting of classifier i for class j when it disagrees with
// classifier m: 1 on agreement, otherwise (p_jj - T)/p_jj clamped into
// [epsilon, 1].
double delta_factor(const ProbabilityMatrix& pm_i,
                    const PairwiseJointTable& table, int i, int m, int j,
                    int k1, int k2, const AdaptiveConfig& cfg);

// Error-rate comparison when both classifiers contradict the class
// hypothesis: 1 when classifier i errs no more often, the error-rate ratio
// when it errs more, epsilon when m's rate is zero. Returns 1 whenever the
// hypothesis matches either prediction or the predictions agree.
double gamma_factor(const ProbabilityMatrix& pm_i,
                    const ProbabilityMatrix& pm_m, int j, int k1, int k2,
                    const AdaptiveConfig& cfg);

// Per-sample density update: g*[i][j] = g[i][j] * (prod delta)^w1 *
// (prod gamma)^w2, clamped into [density_floor, 1]. Unanimous predictions
// leave the table bit-identical.
DensityTable adapt_densities(const DensityTable& densities,
                             const Eigen::Ref<const Eigen::VectorXi>& sample_predictions,
                             const std::vector<ProbabilityMatrix>& pms,
                             const PairwiseJointTable& table,
                             const AdaptiveConfig& cfg);

}  // namespace chofuse
