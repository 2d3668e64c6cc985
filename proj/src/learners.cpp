#include "chofuse/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace chofuse {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
}

void check_training_inputs(const Eigen::Ref<const Eigen::MatrixXd>& features,
                           const Eigen::Ref<const Eigen::VectorXi>& labels) {
  if (features.rows() != labels.size())
    throw std::invalid_argument("fit: feature/label row counts differ");
  if (features.rows() < 2) throw DataError("fit: need at least two samples");
  if (features.cols() < 1) throw DataError("fit: need at least one feature");
  if (!features.allFinite()) throw DataError("fit: non-finite feature value");
  int pos = 0, neg = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      ++pos;
    else if (labels[i] == 0)
      ++neg;
    else
      throw DataError("fit: labels must be 0 or 1");
  }
  if (pos == 0 || neg == 0)
    throw DataError("fit: degenerate labels, both classes required");
}

Eigen::MatrixXd supports_from_positive(const Eigen::VectorXd& positive) {
  Eigen::MatrixXd supports(positive.size(), 2);
  supports.col(1) = positive;
  supports.col(0) = 1.0 - positive.array();
  return supports;
}

}  // namespace

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kLogistic: return "logistic";
    case LearnerKind::kAdaBoost: return "adaboost";
    case LearnerKind::kGradientBoosting: return "gradient_boosting";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(const std::string& name) {
  if (name == "logistic") return LearnerKind::kLogistic;
  if (name == "adaboost") return LearnerKind::kAdaBoost;
  if (name == "gradient_boosting") return LearnerKind::kGradientBoosting;
  throw DataError("unknown learner kind: " + name);
}

Eigen::VectorXi hard_labels(const Eigen::Ref<const Eigen::MatrixXd>& supports) {
  Eigen::VectorXi labels(supports.rows());
  for (Eigen::Index s = 0; s < supports.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < supports.cols(); ++j)
      if (supports(s, j) > supports(s, best)) best = j;
    labels[s] = static_cast<int>(best);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

LogisticModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& features,
                           const Eigen::Ref<const Eigen::VectorXi>& labels,
                           const LogisticConfig& config) {
  check_training_inputs(features, labels);
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  const Eigen::VectorXd y = labels.cast<double>();

  LogisticModel model;
  model.config_ = config;
  model.weights_ = Eigen::VectorXd::Zero(d);
  model.bias_ = 0.0;

  for (int iter = 0; iter < config.max_iter; ++iter) {
    const Eigen::VectorXd z =
        (features * model.weights_).array() + model.bias_;
    Eigen::VectorXd p(n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(z[i]);
      loss += softplus(z[i]) - y[i] * z[i];
    }
    loss = loss / static_cast<double>(n) +
           0.5 * config.l2 * model.weights_.squaredNorm();
    model.loss_history_.push_back(loss);

    const Eigen::VectorXd residual = p - y;
    const Eigen::VectorXd grad_w =
        features.transpose() * residual / static_cast<double>(n) +
        config.l2 * model.weights_;
    const double grad_b = residual.mean();
    const double grad_max =
        std::max(grad_w.cwiseAbs().maxCoeff(), std::abs(grad_b));
    if (grad_max < config.tol) break;

    model.weights_ -= config.learning_rate * grad_w;
    model.bias_ -= config.learning_rate * grad_b;
  }
  return model;
}

Eigen::MatrixXd LogisticModel::predict_supports(
    const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  if (features.cols() != weights_.size())
    throw std::invalid_argument("logistic predict: feature count mismatch");
  Eigen::VectorXd positive(features.rows());
  const Eigen::VectorXd z = (features * weights_).array() + bias_;
  for (Eigen::Index i = 0; i < z.size(); ++i) positive[i] = sigmoid(z[i]);
  return supports_from_positive(positive);
}

nlohmann::json LogisticModel::to_json() const {
  return {{"format_version", 1},
          {"kind", to_string(kind())},
          {"config",
           {{"learning_rate", config_.learning_rate},
            {"l2", config_.l2},
            {"max_iter", config_.max_iter},
            {"tol", config_.tol}}},
          {"parameters",
           {{"weights", std::vector<double>(weights_.begin(), weights_.end())},
            {"bias", bias_}}}};
}

// ---------------------------------------------------------------------------
// AdaBoost over decision stumps
// ---------------------------------------------------------------------------

namespace {

struct StumpSearch {
  Stump stump;
  double error = 1.0;  // weighted error; 1 when no split exists
};

// Exhaustive scan over (feature, threshold, orientation). Each feature is
// swept once in sorted order, accumulating class weights left of the cut;
// both orientations come from the same sweep since the weights are
// normalized. Cut candidates are the midpoints between consecutive distinct
// values plus the minimum itself, which sends every sample right and acts as
// an intercept; without it a sum of stumps always has m(-inf) = -m(+inf) and
// interval concepts stay unlearnable.
StumpSearch best_stump(const Eigen::Ref<const Eigen::MatrixXd>& features,
                       const Eigen::VectorXd& signed_labels,
                       const Eigen::VectorXd& weights,
                       const std::vector<std::vector<int>>& sorted_idx) {
  StumpSearch best;
  const Eigen::Index d = features.cols();
  double weight_pos = 0.0;
  for (Eigen::Index i = 0; i < signed_labels.size(); ++i)
    if (signed_labels[i] > 0) weight_pos += weights[i];
  const double weight_neg = weights.sum() - weight_pos;

  for (Eigen::Index f = 0; f < d; ++f) {
    const auto& order = sorted_idx[static_cast<std::size_t>(f)];
    const double bottom = features(order.front(), f);
    if (weight_neg < best.error) {
      best.error = weight_neg;
      best.stump = {static_cast<int>(f), bottom, -1.0, 1.0, 0.0};
    }
    if (weight_pos < best.error) {
      best.error = weight_pos;
      best.stump = {static_cast<int>(f), bottom, 1.0, -1.0, 0.0};
    }
    double pos_left = 0.0, neg_left = 0.0;
    for (std::size_t at = 0; at < order.size();) {
      const double value = features(order[at], f);
      while (at < order.size() && features(order[at], f) == value) {
        if (signed_labels[order[at]] > 0)
          pos_left += weights[order[at]];
        else
          neg_left += weights[order[at]];
        ++at;
      }
      if (at == order.size()) break;  // no distinct value to the right
      const double threshold = 0.5 * (value + features(order[at], f));
      // left -1 / right +1: wrong on positives left and negatives right
      const double err_a = pos_left + (weight_neg - neg_left);
      const double err_b = (weight_pos + weight_neg) - err_a;
      if (err_a < best.error) {
        best.error = err_a;
        best.stump = {static_cast<int>(f), threshold, -1.0, 1.0, 0.0};
      }
      if (err_b < best.error) {
        best.error = err_b;
        best.stump = {static_cast<int>(f), threshold, 1.0, -1.0, 0.0};
      }
    }
  }
  return best;
}

}  // namespace

AdaBoostModel fit_adaboost(const Eigen::Ref<const Eigen::MatrixXd>& features,
                           const Eigen::Ref<const Eigen::VectorXi>& labels,
                           const AdaBoostConfig& config) {
  check_training_inputs(features, labels);
  if (config.rounds < 1) throw std::invalid_argument("adaboost: rounds must be >= 1");

  const Eigen::Index n = features.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1.0 : -1.0;

  std::vector<std::vector<int>> sorted_idx(
      static_cast<std::size_t>(features.cols()));
  for (Eigen::Index f = 0; f < features.cols(); ++f) {
    auto& order = sorted_idx[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return features(a, f) < features(b, f) ||
             (features(a, f) == features(b, f) && a < b);
    });
  }

  AdaBoostModel model;
  model.config_ = config;
  model.feature_count_ = features.cols();
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

  for (int round = 0; round < config.rounds; ++round) {
    StumpSearch found = best_stump(features, y, weights, sorted_idx);
    if (found.error >= 0.5) break;  // no weak-learner advantage left
    const double err =
        std::clamp(found.error, config.epsilon_clip, 1.0 - config.epsilon_clip);
    found.stump.stage_weight = 0.5 * std::log((1.0 - err) / err);
    model.stumps_.push_back(found.stump);
    model.round_errors_.push_back(found.error);

    for (Eigen::Index i = 0; i < n; ++i)
      weights[i] *= std::exp(-found.stump.stage_weight * y[i] *
                             found.stump.apply(features.row(i)));
    weights /= weights.sum();
  }
  return model;
}

Eigen::MatrixXd AdaBoostModel::predict_supports(
    const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  if (features.cols() != feature_count_)
    throw std::invalid_argument("adaboost predict: feature count mismatch");
  double total_weight = 0.0;
  for (const Stump& stump : stumps_) total_weight += stump.stage_weight;

  Eigen::VectorXd positive(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    double margin = 0.0;
    for (const Stump& stump : stumps_)
      margin += stump.stage_weight * stump.apply(features.row(i));
    positive[i] =
        total_weight > 0.0 ? sigmoid(2.0 * margin / total_weight) : 0.5;
  }
  return supports_from_positive(positive);
}

nlohmann::json AdaBoostModel::to_json() const {
  nlohmann::json stumps = nlohmann::json::array();
  for (const Stump& s : stumps_)
    stumps.push_back({{"feature", s.feature},
                      {"threshold", s.threshold},
                      {"left", s.left_score},
                      {"right", s.right_score},
                      {"weight", s.stage_weight}});
  return {{"format_version", 1},
          {"kind", to_string(kind())},
          {"config",
           {{"rounds", config_.rounds}, {"epsilon_clip", config_.epsilon_clip}}},
          {"parameters",
           {{"feature_count", feature_count_}, {"stumps", stumps}}}};
}

// ---------------------------------------------------------------------------
// Gradient boosting with small regression trees
// ---------------------------------------------------------------------------

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::Ref<const Eigen::MatrixXd>& features,
              const Eigen::VectorXd& residuals, const Eigen::VectorXd& hessians,
              const GradientBoostingConfig& config)
      : features_(features),
        residuals_(residuals),
        hessians_(hessians),
        config_(config) {}

  RegressionTree build() {
    RegressionTree tree;
    std::vector<int> all(static_cast<std::size_t>(features_.rows()));
    std::iota(all.begin(), all.end(), 0);
    grow(tree, all, 0);
    return tree;
  }

 private:
  int grow(RegressionTree& tree, const std::vector<int>& idx, int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = 1e-12;
    if (depth < config_.max_depth &&
        static_cast<int>(idx.size()) >= 2 * config_.min_leaf)
      find_split(idx, best_feature, best_threshold, best_gain);

    if (best_feature < 0) {
      tree.nodes[static_cast<std::size_t>(node_id)].value = leaf_value(idx);
      return node_id;
    }

    std::vector<int> left, right;
    for (int i : idx)
      (features_(i, best_feature) < best_threshold ? left : right).push_back(i);
    const int left_id = grow(tree, left, depth + 1);
    const int right_id = grow(tree, right, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }

  // Newton step per leaf: sum of residuals over sum of hessians, guarded.
  double leaf_value(const std::vector<int>& idx) const {
    double num = 0.0, den = 0.0;
    for (int i : idx) {
      num += residuals_[i];
      den += hessians_[i];
    }
    return num / std::max(den, 1e-12);
  }

  void find_split(const std::vector<int>& idx, int& best_feature,
                  double& best_threshold, double& best_gain) const {
    const double total = std::accumulate(
        idx.begin(), idx.end(), 0.0,
        [&](double acc, int i) { return acc + residuals_[i]; });
    const double n = static_cast<double>(idx.size());
    const double base = total * total / n;

    for (Eigen::Index f = 0; f < features_.cols(); ++f) {
      std::vector<int> order = idx;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return features_(a, f) < features_(b, f) ||
               (features_(a, f) == features_(b, f) && a < b);
      });
      double left_sum = 0.0;
      std::size_t at = 0;
      while (at < order.size()) {
        const double value = features_(order[at], f);
        while (at < order.size() && features_(order[at], f) == value) {
          left_sum += residuals_[order[at]];
          ++at;
        }
        if (at == order.size()) break;
        const auto n_left = static_cast<int>(at);
        const auto n_right = static_cast<int>(order.size()) - n_left;
        if (n_left < config_.min_leaf || n_right < config_.min_leaf) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / n_left +
                            right_sum * right_sum / n_right - base;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (value + features_(order[at], f));
        }
      }
    }
  }

  const Eigen::Ref<const Eigen::MatrixXd>& features_;
  const Eigen::VectorXd& residuals_;
  const Eigen::VectorXd& hessians_;
  const GradientBoostingConfig& config_;
};

}  // namespace

GradientBoostingModel fit_gradient_boosting(
    const Eigen::Ref<const Eigen::MatrixXd>& features,
    const Eigen::Ref<const Eigen::VectorXi>& labels,
    const GradientBoostingConfig& config) {
  check_training_inputs(features, labels);
  if (config.rounds < 0)
    throw std::invalid_argument("gradient boosting: rounds must be >= 0");
  if (config.max_depth < 1 || config.min_leaf < 1)
    throw std::invalid_argument("gradient boosting: bad tree limits");

  const Eigen::Index n = features.rows();
  Eigen::VectorXd y(n);
  double positives = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = labels[i];
    positives += y[i];
  }

  GradientBoostingModel model;
  model.config_ = config;
  model.feature_count_ = features.cols();
  model.base_score_ =
      std::log(positives / (static_cast<double>(n) - positives));

  Eigen::VectorXd scores = Eigen::VectorXd::Constant(n, model.base_score_);
  auto mean_loss = [&]() {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      loss += softplus(scores[i]) - y[i] * scores[i];
    return loss / static_cast<double>(n);
  };
  model.loss_history_.push_back(mean_loss());

  for (int round = 0; round < config.rounds; ++round) {
    Eigen::VectorXd residuals(n), hessians(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(scores[i]);
      residuals[i] = y[i] - p;
      hessians[i] = p * (1.0 - p);
    }
    TreeBuilder builder(features, residuals, hessians, config);
    model.trees_.push_back(builder.build());
    const RegressionTree& tree = model.trees_.back();
    for (Eigen::Index i = 0; i < n; ++i)
      scores[i] += config.shrinkage * tree.predict(features.row(i));
    model.loss_history_.push_back(mean_loss());
  }
  return model;
}

Eigen::MatrixXd GradientBoostingModel::predict_supports(
    const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  if (features.cols() != feature_count_)
    throw std::invalid_argument("gradient boosting predict: feature count mismatch");
  Eigen::VectorXd positive(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    double score = base_score_;
    for (const RegressionTree& tree : trees_)
      score += config_.shrinkage * tree.predict(features.row(i));
    positive[i] = sigmoid(score);
  }
  return supports_from_positive(positive);
}

nlohmann::json GradientBoostingModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const RegressionTree& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& node : tree.nodes)
      nodes.push_back({{"feature", node.feature},
                       {"threshold", node.threshold},
                       {"left", node.left},
                       {"right", node.right},
                       {"value", node.value}});
    trees.push_back(nodes);
  }
  return {{"format_version", 1},
          {"kind", to_string(kind())},
          {"config",
           {{"rounds", config_.rounds},
            {"shrinkage", config_.shrinkage},
            {"max_depth", config_.max_depth},
            {"min_leaf", config_.min_leaf}}},
          {"parameters",
           {{"base_score", base_score_},
            {"feature_count", feature_count_},
            {"trees", trees}}}};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Learner> learner_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc.contains("parameters"))
    throw DataError("learner document: missing kind or parameters");
  if (doc.value("format_version", 0) != 1)
    throw DataError("learner document: unsupported format_version");
  const auto kind = learner_kind_from_string(doc.at("kind").get<std::string>());
  const nlohmann::json& params = doc.at("parameters");
  const nlohmann::json& config = doc.at("config");

  switch (kind) {
    case LearnerKind::kLogistic: {
      auto model = std::make_unique<LogisticModel>();
      const auto weights = params.at("weights").get<std::vector<double>>();
      model->weights_ = Eigen::Map<const Eigen::VectorXd>(
          weights.data(), static_cast<Eigen::Index>(weights.size()));
      model->bias_ = params.at("bias").get<double>();
      model->config_ = {config.at("learning_rate").get<double>(),
                        config.at("l2").get<double>(),
                        config.at("max_iter").get<int>(),
                        config.at("tol").get<double>()};
      return model;
    }
    case LearnerKind::kAdaBoost: {
      auto model = std::make_unique<AdaBoostModel>();
      model->feature_count_ = params.at("feature_count").get<Eigen::Index>();
      model->config_ = {config.at("rounds").get<int>(),
                        config.at("epsilon_clip").get<double>()};
      for (const auto& s : params.at("stumps"))
        model->stumps_.push_back({s.at("feature").get<int>(),
                                  s.at("threshold").get<double>(),
                                  s.at("left").get<double>(),
                                  s.at("right").get<double>(),
                                  s.at("weight").get<double>()});
      return model;
    }
    case LearnerKind::kGradientBoosting: {
      auto model = std::make_unique<GradientBoostingModel>();
      model->feature_count_ = params.at("feature_count").get<Eigen::Index>();
      model->base_score_ = params.at("base_score").get<double>();
      model->config_ = {config.at("rounds").get<int>(),
                        config.at("shrinkage").get<double>(),
                        config.at("max_depth").get<int>(),
                        config.at("min_leaf").get<int>()};
      for (const auto& tree_doc : params.at("trees")) {
        RegressionTree tree;
        for (const auto& n : tree_doc)
          tree.nodes.push_back({n.at("feature").get<int>(),
                                n.at("threshold").get<double>(),
                                n.at("left").get<int>(),
                                n.at("right").get<int>(),
                                n.at("value").get<double>()});
        model->trees_.push_back(std::move(tree));
      }
      return model;
    }
  }
  throw DataError("learner document: unhandled kind");
}

}  // namespace chofuse
