#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "chofuse/adaptive.hpp"
#include "chofuse/data.hpp"
#include "chofuse/learners.hpp"

namespace chofuse {

// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
// correctly, ties counting one half. Computed from average ranks.
double auc(const Eigen::Ref<const Eigen::VectorXd>& scores,
           const Eigen::Ref<const Eigen::VectorXi>& labels);

// sqrt(TPR * TNR) with class 1 positive.
double g_mean(const Eigen::Ref<const Eigen::VectorXi>& predictions,
              const Eigen::Ref<const Eigen::VectorXi>& labels);

// Deterministic stratified fold assignment; returns per-fold test indices.
std::vector<std::vector<int>> stratified_folds(
    const Eigen::Ref<const Eigen::VectorXi>& labels, int folds,
    std::uint64_t seed);

struct PipelineConfig {
  std::vector<LearnerKind> learners{LearnerKind::kGradientBoosting,
                                    LearnerKind::kAdaBoost,
                                    LearnerKind::kLogistic};
  LogisticConfig logistic;
  AdaBoostConfig adaboost;
  GradientBoostingConfig gradient_boosting;
  AdaptiveConfig adaptive;
  // undersample the training split to 1:1 before fitting
  bool rus = true;
  // when set, fit learners on part of the balanced split and build the
  // confusion/pairwise tables on the held-out remainder
  bool calibration_split = false;
  double calibration_fraction = 0.25;
  int workers = 1;

  nlohmann::json to_json() const;
};

struct MethodReport {
  std::string method;
  std::vector<double> fold_auc;    // percent
  std::vector<double> fold_gmean;  // percent
  double mean_auc = 0.0;
  double mean_gmean = 0.0;
  CountMatrix confusion;  // aggregated over test folds
};

struct FoldSummary {
  int test_size = 0;
  int train_size = 0;  // after balancing
  int train_positives = 0;
  int train_negatives = 0;
};

struct EvalReport {
  std::vector<MethodReport> methods;
  std::vector<FoldSummary> folds;
  int fold_count = 0;
  std::uint64_t seed = 0;
  nlohmann::json config_snapshot;

  const MethodReport* find(const std::string& method) const;
  nlohmann::json to_json() const;
  std::string table_text() const;  // methods x {AUC, G-mean}
  std::string table_csv() const;
  std::string fold_curves_csv() const;  // method,fold,auc,gmean
};

// Stratified k-fold evaluation of the base learners, Choquet fusion,
// majority voting and both OWA extremes. Balancing, fitting and table
// construction happen inside each fold's training split only.
EvalReport cross_validate(const Dataset& ds, int folds,
                          const PipelineConfig& cfg, std::uint64_t seed);

struct GridSearchResult {
  double best_w1 = 0.0;
  double best_w2 = 0.0;
  std::vector<double> w1_grid;
  std::vector<double> w2_grid;
  Eigen::MatrixXd mean_auc;  // percent, w1 rows x w2 columns

  nlohmann::json to_json() const;
  std::string table_csv() const;
};

// Cross-validated fused AUC at every (w1, w2) pair; the argmax with ties
// going to the lexicographically smaller pair. Learners and tables are
// fitted once per fold and shared across the grid.
GridSearchResult grid_search_weights(const Dataset& ds, int folds,
                                     const std::vector<double>& w1_grid,
                                     const std::vector<double>& w2_grid,
                                     const PipelineConfig& cfg,
                                     std::uint64_t seed);

}  // namespace chofuse
