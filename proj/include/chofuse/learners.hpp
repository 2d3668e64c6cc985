#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

#include "chofuse/errors.hpp"

namespace chofuse {

struct LogisticConfig {
  double learning_rate = 0.1;
  double l2 = 1e-4;
  int max_iter = 500;
  double tol = 1e-6;
};

struct AdaBoostConfig {
  int rounds = 100;
  double epsilon_clip = 1e-10;
};

struct GradientBoostingConfig {
  int rounds = 100;
  double shrinkage = 0.1;
  int max_depth = 3;
  int min_leaf = 5;
};

enum class LearnerKind { kLogistic, kAdaBoost, kGradientBoosting };

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& name);

// Common face of the three base classifiers. Supports are N x 2 probability
// rows (negative class first).
class Learner {
 public:
  virtual ~Learner() = default;
  virtual LearnerKind kind() const = 0;
  virtual Eigen::Index feature_count() const = 0;
  virtual Eigen::MatrixXd predict_supports(
      const Eigen::Ref<const Eigen::MatrixXd>& features) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

// argmax per support row, ties to the lower class index
Eigen::VectorXi hard_labels(const Eigen::Ref<const Eigen::MatrixXd>& supports);

// ---------------------------------------------------------------------------

class LogisticModel final : public Learner {
 public:
  LearnerKind kind() const override { return LearnerKind::kLogistic; }
  Eigen::Index feature_count() const override { return weights_.size(); }
  Eigen::MatrixXd predict_supports(
      const Eigen::Ref<const Eigen::MatrixXd>& features) const override;
  nlohmann::json to_json() const override;

  const Eigen::VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }
  // regularized training loss at the start of every gradient step
  const std::vector<double>& loss_history() const { return loss_history_; }

 private:
  friend LogisticModel fit_logistic(
      const Eigen::Ref<const Eigen::MatrixXd>&,
      const Eigen::Ref<const Eigen::VectorXi>&, const LogisticConfig&);
  friend std::unique_ptr<Learner> learner_from_json(const nlohmann::json&);

  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  LogisticConfig config_;
  std::vector<double> loss_history_;
};

// Depth-1 decision rule: x[feature] < threshold picks the left score.
struct Stump {
  int feature = 0;
  double threshold = 0.0;
  double left_score = -1.0;
  double right_score = 1.0;
  double stage_weight = 0.0;

  double apply(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return x[feature] < threshold ? left_score : right_score;
  }
};

class AdaBoostModel final : public Learner {
 public:
  LearnerKind kind() const override { return LearnerKind::kAdaBoost; }
  Eigen::Index feature_count() const override { return feature_count_; }
  Eigen::MatrixXd predict_supports(
      const Eigen::Ref<const Eigen::MatrixXd>& features) const override;
  nlohmann::json to_json() const override;

  const std::vector<Stump>& stumps() const { return stumps_; }
  // weighted stump errors, one per accepted boosting round
  const std::vector<double>& round_errors() const { return round_errors_; }

 private:
  friend AdaBoostModel fit_adaboost(const Eigen::Ref<const Eigen::MatrixXd>&,
                                    const Eigen::Ref<const Eigen::VectorXi>&,
                                    const AdaBoostConfig&);
  friend std::unique_ptr<Learner> learner_from_json(const nlohmann::json&);

  std::vector<Stump> stumps_;
  std::vector<double> round_errors_;
  Eigen::Index feature_count_ = 0;
  AdaBoostConfig config_;
};

// Binary regression tree stored as a flat node array.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const TreeNode& node = nodes[static_cast<std::size_t>(at)];
      at = x[node.feature] < node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }
};

class GradientBoostingModel final : public Learner {
 public:
  LearnerKind kind() const override { return LearnerKind::kGradientBoosting; }
  Eigen::Index feature_count() const override { return feature_count_; }
  Eigen::MatrixXd predict_supports(
      const Eigen::Ref<const Eigen::MatrixXd>& features) const override;
  nlohmann::json to_json() const override;

  double base_score() const { return base_score_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  // training loss at the prior and after each stage
  const std::vector<double>& loss_history() const { return loss_history_; }

 private:
  friend GradientBoostingModel fit_gradient_boosting(
      const Eigen::Ref<const Eigen::MatrixXd>&,
      const Eigen::Ref<const Eigen::VectorXi>&,
      const GradientBoostingConfig&);
  friend std::unique_ptr<Learner> learner_from_json(const nlohmann::json&);

  double base_score_ = 0.0;
  std::vector<RegressionTree> trees_;
  std::vector<double> loss_history_;
  Eigen::Index feature_count_ = 0;
  GradientBoostingConfig config_;
};

// ---------------------------------------------------------------------------

LogisticModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& features,
                           const Eigen::Ref<const Eigen::VectorXi>& labels,
                           const LogisticConfig& config = {});

AdaBoostModel fit_adaboost(const Eigen::Ref<const Eigen::MatrixXd>& features,
                           const Eigen::Ref<const Eigen::VectorXi>& labels,
                           const AdaBoostConfig& config = {});

GradientBoostingModel fit_gradient_boosting(
    const Eigen::Ref<const Eigen::MatrixXd>& features,
    const Eigen::Ref<const Eigen::VectorXi>& labels,
    const GradientBoostingConfig& config = {});

// Rebuilds any learner from its versioned JSON document.
std::unique_ptr<Learner> learner_from_json(const nlohmann::json& doc);

}  // namespace chofuse
