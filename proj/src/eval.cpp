#include "chofuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "chofuse/fusion.hpp"
#include "chofuse/parallel.hpp"

namespace chofuse {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string display_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kLogistic: return "Logistic regression";
    case LearnerKind::kAdaBoost: return "AdaBoost";
    case LearnerKind::kGradientBoosting: return "Gradient boosting";
  }
  return "unknown";
}

std::unique_ptr<Learner> fit_learner(LearnerKind kind,
                                     const Eigen::MatrixXd& features,
                                     const Eigen::VectorXi& labels,
                                     const PipelineConfig& cfg) {
  switch (kind) {
    case LearnerKind::kLogistic:
      return std::make_unique<LogisticModel>(
          fit_logistic(features, labels, cfg.logistic));
    case LearnerKind::kAdaBoost:
      return std::make_unique<AdaBoostModel>(
          fit_adaboost(features, labels, cfg.adaboost));
    case LearnerKind::kGradientBoosting:
      return std::make_unique<GradientBoostingModel>(
          fit_gradient_boosting(features, labels, cfg.gradient_boosting));
  }
  throw std::invalid_argument("unknown learner kind");
}

Dataset take_rows(const Dataset& ds, const std::vector<int>& idx) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(idx.size()), ds.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = ds.features.row(idx[r]);
    out.labels[static_cast<Eigen::Index>(r)] = ds.labels[idx[r]];
  }
  out.feature_names = ds.feature_names;
  out.provenance = ds.provenance;
  return out;
}

struct FoldData {
  std::vector<int> test_idx;
  std::vector<std::unique_ptr<Learner>> models;
  std::vector<ProbabilityMatrix> pms;
  PairwiseJointTable table{1, 2};
  DensityTable densities;
  std::vector<Eigen::MatrixXd> test_supports;  // per test sample, P x 2
  std::vector<Eigen::MatrixXd> base_supports;  // per learner, Ntest x 2
  Eigen::VectorXi test_labels;
  FoldSummary summary;
};

FoldData build_fold(const Dataset& ds, const std::vector<int>& test_idx,
                    const PipelineConfig& cfg, std::uint64_t seed,
                    std::size_t fold) {
  FoldData data;
  data.test_idx = test_idx;

  std::vector<char> in_test(static_cast<std::size_t>(ds.sample_count()), 0);
  for (int i : test_idx) in_test[static_cast<std::size_t>(i)] = 1;
  std::vector<int> train_idx;
  for (Eigen::Index i = 0; i < ds.sample_count(); ++i)
    if (!in_test[static_cast<std::size_t>(i)]) train_idx.push_back(static_cast<int>(i));

  Dataset train = take_rows(ds, train_idx);
  if ((train.labels.array() == 1).count() == 0 ||
      (train.labels.array() == 0).count() == 0)
    throw DataError("cross_validate: fold " + std::to_string(fold) +
                    " training split is missing a class");
  if (cfg.rus) train = random_undersample(train, mix_seed(seed, fold));

  data.summary.train_size = static_cast<int>(train.sample_count());
  data.summary.train_positives = static_cast<int>((train.labels.array() == 1).count());
  data.summary.train_negatives = static_cast<int>((train.labels.array() == 0).count());
  data.summary.test_size = static_cast<int>(test_idx.size());

  // Optional calibration split: learners on one part, tables on the rest.
  Dataset fit_part = train;
  Dataset table_part = train;
  if (cfg.calibration_split) {
    std::vector<int> cal, fit;
    std::mt19937_64 rng(mix_seed(seed, fold ^ 0xca11b7a7e5ULL));
    for (int cls = 0; cls <= 1; ++cls) {
      std::vector<int> members;
      for (Eigen::Index i = 0; i < train.sample_count(); ++i)
        if (train.labels[i] == cls) members.push_back(static_cast<int>(i));
      std::shuffle(members.begin(), members.end(), rng);
      const auto take = static_cast<std::size_t>(
          cfg.calibration_fraction * static_cast<double>(members.size()));
      for (std::size_t i = 0; i < members.size(); ++i)
        (i < take ? cal : fit).push_back(members[i]);
    }
    std::sort(cal.begin(), cal.end());
    std::sort(fit.begin(), fit.end());
    if (cal.empty() || fit.empty())
      throw DataError("cross_validate: calibration split too small");
    fit_part = take_rows(train, fit);
    table_part = take_rows(train, cal);
  }

  for (LearnerKind kind : cfg.learners)
    data.models.push_back(fit_learner(kind, fit_part.features, fit_part.labels, cfg));

  const int sources = static_cast<int>(data.models.size());
  Eigen::MatrixXi table_preds(sources, table_part.sample_count());
  for (int i = 0; i < sources; ++i) {
    const Eigen::MatrixXd supports =
        data.models[static_cast<std::size_t>(i)]->predict_supports(table_part.features);
    table_preds.row(i) = hard_labels(supports).transpose();
    data.pms.push_back(row_normalize(
        build_confusion(table_preds.row(i).transpose(), table_part.labels, 2)));
  }
  data.densities = initial_densities(data.pms, cfg.adaptive.density_floor);
  data.table = build_pairwise_tables(table_preds, table_part.labels, 2);

  const Dataset test = take_rows(ds, test_idx);
  data.test_labels = test.labels;
  for (int i = 0; i < sources; ++i)
    data.base_supports.push_back(
        data.models[static_cast<std::size_t>(i)]->predict_supports(test.features));
  data.test_supports.resize(static_cast<std::size_t>(test.sample_count()));
  for (Eigen::Index s = 0; s < test.sample_count(); ++s) {
    Eigen::MatrixXd h(sources, 2);
    for (int i = 0; i < sources; ++i)
      h.row(i) = data.base_supports[static_cast<std::size_t>(i)].row(s);
    data.test_supports[static_cast<std::size_t>(s)] = h;
  }
  return data;
}

std::vector<FoldData> build_folds(const Dataset& ds, int folds,
                                  const PipelineConfig& cfg,
                                  std::uint64_t seed) {
  if (ds.sample_count() < folds)
    throw DataError("cross_validate: fewer samples than folds");
  if (cfg.learners.empty())
    throw std::invalid_argument("cross_validate: no learners configured");
  cfg.adaptive.validate();
  const auto assignment = stratified_folds(ds.labels, folds, seed);

  std::vector<FoldData> data(assignment.size());
  std::vector<std::string> errors(assignment.size());
  parallel_for(assignment.size(), cfg.workers, [&](std::size_t f) {
    try {
      data[f] = build_fold(ds, assignment[f], cfg, seed, f);
    } catch (const std::exception& e) {
      errors[f] = e.what();
    }
  });
  for (const auto& message : errors)
    if (!message.empty()) throw DataError(message);
  return data;
}

struct MethodOutcome {
  Eigen::VectorXd scores;
  Eigen::VectorXi predictions;
};

std::vector<std::pair<std::string, MethodOutcome>> evaluate_fold(
    const FoldData& fold, const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, MethodOutcome>> rows;

  for (std::size_t i = 0; i < fold.models.size(); ++i) {
    MethodOutcome outcome;
    outcome.scores = fold.base_supports[i].col(1);
    outcome.predictions = hard_labels(fold.base_supports[i]);
    rows.emplace_back(display_name(fold.models[i]->kind()), std::move(outcome));
  }

  const auto collect = [](const std::vector<FusionOutcome>& outcomes) {
    MethodOutcome method;
    method.scores.resize(static_cast<Eigen::Index>(outcomes.size()));
    method.predictions.resize(static_cast<Eigen::Index>(outcomes.size()));
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
      method.scores[static_cast<Eigen::Index>(s)] = outcomes[s].score;
      method.predictions[static_cast<Eigen::Index>(s)] = outcomes[s].predicted_class;
    }
    return method;
  };

  rows.emplace_back("Optimistic OWA",
                    collect(owa_fuse(fold.test_supports, OwaMode::kOptimistic)));
  rows.emplace_back("Pessimistic OWA",
                    collect(owa_fuse(fold.test_supports, OwaMode::kPessimistic)));

  MethodOutcome votes;
  votes.predictions = majority_vote(fold.test_supports);
  votes.scores = majority_vote_scores(fold.test_supports);
  rows.emplace_back("Majority voting", std::move(votes));

  rows.emplace_back("Choquet fusion",
                    collect(fuse_dataset(fold.test_supports, fold.densities,
                                         fold.pms, fold.table, cfg.adaptive)));
  return rows;
}

}  // namespace

double auc(const Eigen::Ref<const Eigen::VectorXd>& scores,
           const Eigen::Ref<const Eigen::VectorXi>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: score/label sizes differ");
  const Eigen::Index n = scores.size();
  Eigen::Index positives = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (labels[i] == 1) ++positives;
  const Eigen::Index negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw DataError("auc: both classes required");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });

  // average ranks over tied score runs
  double positive_rank_sum = 0.0;
  std::size_t at = 0;
  while (at < order.size()) {
    std::size_t end = at;
    while (end < order.size() && scores[order[end]] == scores[order[at]]) ++end;
    const double rank = 0.5 * (static_cast<double>(at + 1) + static_cast<double>(end));
    for (std::size_t k = at; k < end; ++k)
      if (labels[order[k]] == 1) positive_rank_sum += rank;
    at = end;
  }
  const double p = static_cast<double>(positives);
  const double q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double g_mean(const Eigen::Ref<const Eigen::VectorXi>& predictions,
              const Eigen::Ref<const Eigen::VectorXi>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("g_mean: size mismatch");
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      (predictions[i] == 1 ? tp : fn) += 1.0;
    else
      (predictions[i] == 0 ? tn : fp) += 1.0;
  }
  if (tp + fn == 0.0 || tn + fp == 0.0)
    throw DataError("g_mean: both classes required");
  return std::sqrt((tp / (tp + fn)) * (tn / (tn + fp)));
}

std::vector<std::vector<int>> stratified_folds(
    const Eigen::Ref<const Eigen::VectorXi>& labels, int folds,
    std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("stratified_folds: folds must be >= 2");
  std::vector<std::vector<int>> assignment(static_cast<std::size_t>(folds));
  std::mt19937_64 rng(mix_seed(seed, 0));
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<int> members;
    for (Eigen::Index i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(static_cast<int>(i));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      assignment[i % static_cast<std::size_t>(folds)].push_back(members[i]);
  }
  for (auto& fold : assignment) std::sort(fold.begin(), fold.end());
  return assignment;
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json kinds = nlohmann::json::array();
  for (LearnerKind kind : learners) kinds.push_back(to_string(kind));
  return {{"learners", kinds},
          {"logistic",
           {{"learning_rate", logistic.learning_rate},
            {"l2", logistic.l2},
            {"max_iter", logistic.max_iter},
            {"tol", logistic.tol}}},
          {"adaboost",
           {{"rounds", adaboost.rounds},
            {"epsilon_clip", adaboost.epsilon_clip}}},
          {"gradient_boosting",
           {{"rounds", gradient_boosting.rounds},
            {"shrinkage", gradient_boosting.shrinkage},
            {"max_depth", gradient_boosting.max_depth},
            {"min_leaf", gradient_boosting.min_leaf}}},
          {"adaptive",
           {{"w1", adaptive.w1},
            {"w2", adaptive.w2},
            {"epsilon", adaptive.epsilon},
            {"density_floor", adaptive.density_floor}}},
          {"rus", rus},
          {"calibration_split", calibration_split},
          {"calibration_fraction", calibration_fraction}};
}

const MethodReport* EvalReport::find(const std::string& method) const {
  for (const auto& row : methods)
    if (row.method == method) return &row;
  return nullptr;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json method_rows = nlohmann::json::array();
  for (const auto& row : methods) {
    nlohmann::json confusion = nlohmann::json::array();
    for (Eigen::Index j = 0; j < row.confusion.rows(); ++j) {
      nlohmann::json line = nlohmann::json::array();
      for (Eigen::Index k = 0; k < row.confusion.cols(); ++k)
        line.push_back(row.confusion(j, k));
      confusion.push_back(line);
    }
    method_rows.push_back({{"method", row.method},
                           {"fold_auc", row.fold_auc},
                           {"fold_gmean", row.fold_gmean},
                           {"mean_auc", row.mean_auc},
                           {"mean_gmean", row.mean_gmean},
                           {"confusion", confusion}});
  }
  nlohmann::json fold_rows = nlohmann::json::array();
  for (const auto& fold : folds)
    fold_rows.push_back({{"test_size", fold.test_size},
                         {"train_size", fold.train_size},
                         {"train_positives", fold.train_positives},
                         {"train_negatives", fold.train_negatives}});
  return {{"folds", fold_count},
          {"seed", seed},
          {"config", config_snapshot},
          {"fold_summary", fold_rows},
          {"methods", method_rows}};
}

std::string EvalReport::table_text() const {
  std::ostringstream out;
  out << std::left << std::setw(24) << "Method" << std::right << std::setw(8)
      << "AUC" << std::setw(10) << "G-mean" << "\n";
  out << std::string(42, '-') << "\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& row : methods)
    out << std::left << std::setw(24) << row.method << std::right
        << std::setw(8) << row.mean_auc << std::setw(10) << row.mean_gmean
        << "\n";
  return out.str();
}

std::string EvalReport::table_csv() const {
  std::ostringstream out;
  out << "method,auc,gmean\n";
  for (const auto& row : methods)
    out << row.method << ',' << row.mean_auc << ',' << row.mean_gmean << "\n";
  return out.str();
}

std::string EvalReport::fold_curves_csv() const {
  std::ostringstream out;
  out << "method,fold,auc,gmean\n";
  for (const auto& row : methods)
    for (std::size_t f = 0; f < row.fold_auc.size(); ++f)
      out << row.method << ',' << f << ',' << row.fold_auc[f] << ','
          << row.fold_gmean[f] << "\n";
  return out.str();
}

EvalReport cross_validate(const Dataset& ds, int folds,
                          const PipelineConfig& cfg, std::uint64_t seed) {
  const auto fold_data = build_folds(ds, folds, cfg, seed);

  EvalReport report;
  report.fold_count = folds;
  report.seed = seed;
  report.config_snapshot = cfg.to_json();

  for (std::size_t f = 0; f < fold_data.size(); ++f) {
    const FoldData& fold = fold_data[f];
    report.folds.push_back(fold.summary);
    const auto outcomes = evaluate_fold(fold, cfg);
    for (std::size_t m = 0; m < outcomes.size(); ++m) {
      const auto& [name, outcome] = outcomes[m];
      if (f == 0) {
        MethodReport row;
        row.method = name;
        row.confusion = CountMatrix::Zero(2, 2);
        report.methods.push_back(std::move(row));
      }
      MethodReport& row = report.methods[m];
      row.fold_auc.push_back(100.0 * auc(outcome.scores, fold.test_labels));
      row.fold_gmean.push_back(
          100.0 * g_mean(outcome.predictions, fold.test_labels));
      row.confusion += build_confusion(outcome.predictions, fold.test_labels, 2);
    }
  }

  for (auto& row : report.methods) {
    row.mean_auc =
        std::accumulate(row.fold_auc.begin(), row.fold_auc.end(), 0.0) /
        static_cast<double>(row.fold_auc.size());
    row.mean_gmean =
        std::accumulate(row.fold_gmean.begin(), row.fold_gmean.end(), 0.0) /
        static_cast<double>(row.fold_gmean.size());
  }
  return report;
}

nlohmann::json GridSearchResult::to_json() const {
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t i = 0; i < w1_grid.size(); ++i) {
    nlohmann::json line = nlohmann::json::array();
    for (std::size_t j = 0; j < w2_grid.size(); ++j)
      line.push_back(mean_auc(static_cast<Eigen::Index>(i),
                              static_cast<Eigen::Index>(j)));
    table.push_back(line);
  }
  return {{"best_w1", best_w1},
          {"best_w2", best_w2},
          {"w1_grid", w1_grid},
          {"w2_grid", w2_grid},
          {"mean_auc", table}};
}

std::string GridSearchResult::table_csv() const {
  std::ostringstream out;
  out << "w1,w2,auc\n";
  for (std::size_t i = 0; i < w1_grid.size(); ++i)
    for (std::size_t j = 0; j < w2_grid.size(); ++j)
      out << w1_grid[i] << ',' << w2_grid[j] << ','
          << mean_auc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
          << "\n";
  return out.str();
}

GridSearchResult grid_search_weights(const Dataset& ds, int folds,
                                     const std::vector<double>& w1_grid,
                                     const std::vector<double>& w2_grid,
                                     const PipelineConfig& cfg,
                                     std::uint64_t seed) {
  if (w1_grid.empty() || w2_grid.empty())
    throw std::invalid_argument("grid_search_weights: empty grid");
  const auto fold_data = build_folds(ds, folds, cfg, seed);

  GridSearchResult result;
  result.w1_grid = w1_grid;
  result.w2_grid = w2_grid;
  result.mean_auc.resize(static_cast<Eigen::Index>(w1_grid.size()),
                         static_cast<Eigen::Index>(w2_grid.size()));

  const std::size_t cells = w1_grid.size() * w2_grid.size();
  std::vector<std::string> errors(cells);
  parallel_for(cells, cfg.workers, [&](std::size_t cell) {
    const std::size_t i = cell / w2_grid.size();
    const std::size_t j = cell % w2_grid.size();
    AdaptiveConfig adaptive = cfg.adaptive;
    adaptive.w1 = w1_grid[i];
    adaptive.w2 = w2_grid[j];
    try {
      adaptive.validate();
      double total = 0.0;
      for (const FoldData& fold : fold_data) {
        const auto outcomes = fuse_dataset(fold.test_supports, fold.densities,
                                           fold.pms, fold.table, adaptive);
        Eigen::VectorXd scores(static_cast<Eigen::Index>(outcomes.size()));
        for (std::size_t s = 0; s < outcomes.size(); ++s)
          scores[static_cast<Eigen::Index>(s)] = outcomes[s].score;
        total += 100.0 * auc(scores, fold.test_labels);
      }
      result.mean_auc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          total / static_cast<double>(fold_data.size());
    } catch (const std::exception& e) {
      errors[cell] = e.what();
    }
  });
  for (const auto& message : errors)
    if (!message.empty()) throw DataError(message);

  bool have_best = false;
  double best_auc = 0.0;
  for (std::size_t i = 0; i < w1_grid.size(); ++i)
    for (std::size_t j = 0; j < w2_grid.size(); ++j) {
      const double value = result.mean_auc(static_cast<Eigen::Index>(i),
                                           static_cast<Eigen::Index>(j));
      const bool better =
          !have_best || value > best_auc ||
          (value == best_auc &&
           std::make_pair(w1_grid[i], w2_grid[j]) <
               std::make_pair(result.best_w1, result.best_w2));
      if (better) {
        have_best = true;
        best_auc = value;
        result.best_w1 = w1_grid[i];
        result.best_w2 = w2_grid[j];
      }
    }
  return result;
}

}  // namespace chofuse
