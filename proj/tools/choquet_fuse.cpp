// choquet-fuse: classifier fusion via an adaptive Choquet integral.
//
// Subcommands: synth, prep, train, fuse, evaluate, gridsearch.
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "chofuse/csv.hpp"
#include "chofuse/data.hpp"
#include "chofuse/eval.hpp"
#include "chofuse/fusion.hpp"
#include "chofuse/learners.hpp"
#include "chofuse/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = hardware concurrency
  std::string out_dir = "out";
  std::string label_column = "label";
  int positive_class = 1;
  int folds = 5;
  bool rus = true;

  chofuse::PipelineConfig pipeline;
  chofuse::PrepConfig prep;

  long long synth_n = 10000;
  long long synth_d = 12;
  double synth_rate = 0.183;
  double synth_separation = 1.2;
  int synth_views = 3;

  std::vector<double> w1_grid;
  std::vector<double> w2_grid;
};

std::vector<double> default_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
  return grid;
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw UsageError("config: unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

// Returns whether the file provided a seed (for the env fallback rule).
bool apply_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw chofuse::DataError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw UsageError("config: " + std::string(e.what()));
  }
  check_keys(doc,
             {"seed", "workers", "out_dir", "label_column", "positive_class",
              "folds", "rus", "learners", "logistic", "adaboost",
              "gradient_boosting", "adaptive", "prep", "calibration_split",
              "calibration_fraction", "synth", "grid"},
             "top level");
  take(doc, "seed", cfg.seed);
  take(doc, "workers", cfg.workers);
  take(doc, "out_dir", cfg.out_dir);
  take(doc, "label_column", cfg.label_column);
  take(doc, "positive_class", cfg.positive_class);
  take(doc, "folds", cfg.folds);
  take(doc, "rus", cfg.rus);
  take(doc, "calibration_split", cfg.pipeline.calibration_split);
  take(doc, "calibration_fraction", cfg.pipeline.calibration_fraction);

  if (doc.contains("learners")) {
    cfg.pipeline.learners.clear();
    for (const auto& name : doc.at("learners"))
      cfg.pipeline.learners.push_back(
          chofuse::learner_kind_from_string(name.get<std::string>()));
  }
  if (doc.contains("logistic")) {
    const json& sub = doc.at("logistic");
    check_keys(sub, {"learning_rate", "l2", "max_iter", "tol"}, "logistic");
    take(sub, "learning_rate", cfg.pipeline.logistic.learning_rate);
    take(sub, "l2", cfg.pipeline.logistic.l2);
    take(sub, "max_iter", cfg.pipeline.logistic.max_iter);
    take(sub, "tol", cfg.pipeline.logistic.tol);
  }
  if (doc.contains("adaboost")) {
    const json& sub = doc.at("adaboost");
    check_keys(sub, {"rounds", "epsilon_clip"}, "adaboost");
    take(sub, "rounds", cfg.pipeline.adaboost.rounds);
    take(sub, "epsilon_clip", cfg.pipeline.adaboost.epsilon_clip);
  }
  if (doc.contains("gradient_boosting")) {
    const json& sub = doc.at("gradient_boosting");
    check_keys(sub, {"rounds", "shrinkage", "max_depth", "min_leaf"},
               "gradient_boosting");
    take(sub, "rounds", cfg.pipeline.gradient_boosting.rounds);
    take(sub, "shrinkage", cfg.pipeline.gradient_boosting.shrinkage);
    take(sub, "max_depth", cfg.pipeline.gradient_boosting.max_depth);
    take(sub, "min_leaf", cfg.pipeline.gradient_boosting.min_leaf);
  }
  if (doc.contains("adaptive")) {
    const json& sub = doc.at("adaptive");
    check_keys(sub, {"w1", "w2", "epsilon", "density_floor"}, "adaptive");
    take(sub, "w1", cfg.pipeline.adaptive.w1);
    take(sub, "w2", cfg.pipeline.adaptive.w2);
    take(sub, "epsilon", cfg.pipeline.adaptive.epsilon);
    take(sub, "density_floor", cfg.pipeline.adaptive.density_floor);
  }
  if (doc.contains("prep")) {
    const json& sub = doc.at("prep");
    check_keys(sub,
               {"row_missing_threshold", "column_missing_threshold",
                "leakage_columns", "correlation_threshold", "log_columns",
                "standardize", "one_hot", "seed"},
               "prep");
    take(sub, "row_missing_threshold", cfg.prep.row_missing_threshold);
    take(sub, "column_missing_threshold", cfg.prep.column_missing_threshold);
    take(sub, "leakage_columns", cfg.prep.leakage_columns);
    take(sub, "correlation_threshold", cfg.prep.correlation_threshold);
    take(sub, "log_columns", cfg.prep.log_columns);
    take(sub, "standardize", cfg.prep.standardize);
    take(sub, "one_hot", cfg.prep.one_hot);
    take(sub, "seed", cfg.prep.seed);
  }
  if (doc.contains("synth")) {
    const json& sub = doc.at("synth");
    check_keys(sub, {"n", "d", "default_rate", "class_separation", "views"},
               "synth");
    take(sub, "n", cfg.synth_n);
    take(sub, "d", cfg.synth_d);
    take(sub, "default_rate", cfg.synth_rate);
    take(sub, "class_separation", cfg.synth_separation);
    take(sub, "views", cfg.synth_views);
  }
  if (doc.contains("grid")) {
    const json& sub = doc.at("grid");
    check_keys(sub, {"w1", "w2"}, "grid");
    take(sub, "w1", cfg.w1_grid);
    take(sub, "w2", cfg.w2_grid);
  }
  return doc.contains("seed");
}

json effective_config(const RunConfig& cfg) {
  json doc = cfg.pipeline.to_json();
  doc["prep"] = {{"row_missing_threshold", cfg.prep.row_missing_threshold},
                 {"column_missing_threshold", cfg.prep.column_missing_threshold},
                 {"leakage_columns", cfg.prep.leakage_columns},
                 {"correlation_threshold", cfg.prep.correlation_threshold},
                 {"log_columns", cfg.prep.log_columns},
                 {"standardize", cfg.prep.standardize},
                 {"one_hot", cfg.prep.one_hot},
                 {"seed", cfg.prep.seed}};
  doc["seed"] = cfg.seed;
  doc["workers"] = cfg.workers;
  doc["out_dir"] = cfg.out_dir;
  doc["label_column"] = cfg.label_column;
  doc["positive_class"] = cfg.positive_class;
  doc["folds"] = cfg.folds;
  doc["rus"] = cfg.rus;
  doc["synth"] = {{"n", cfg.synth_n},
                  {"d", cfg.synth_d},
                  {"default_rate", cfg.synth_rate},
                  {"class_separation", cfg.synth_separation},
                  {"views", cfg.synth_views}};
  doc["grid"] = {{"w1", cfg.w1_grid}, {"w2", cfg.w2_grid}};
  return doc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw chofuse::DataError("cannot write file: " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

void write_snapshot(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& inputs) {
  json doc = {{"command", command}, {"config", effective_config(cfg)}};
  for (const auto& [key, value] : inputs) doc[key] = value;
  write_json(fs::path(cfg.out_dir) / "run_config.json", doc);
}

void remap_positive(chofuse::Dataset& ds, int positive_class) {
  if (positive_class == 1) return;
  if (positive_class != 0) throw UsageError("--positive-class must be 0 or 1");
  ds.labels = 1 - ds.labels.array();
}

chofuse::Dataset load_input(const RunConfig& cfg, const std::string& input,
                            chofuse::PrepReport* report = nullptr) {
  chofuse::Dataset ds =
      chofuse::load_csv(input, cfg.label_column, cfg.prep, report);
  remap_positive(ds, cfg.positive_class);
  return ds;
}

// ---------------------------------------------------------------------------
// fusion bundle: the train artifact consumed by fuse
// ---------------------------------------------------------------------------

json pm_to_json(const chofuse::ProbabilityMatrix& pm) {
  json rows = json::array();
  for (Eigen::Index j = 0; j < pm.probs.rows(); ++j) {
    json line = json::array();
    for (Eigen::Index k = 0; k < pm.probs.cols(); ++k)
      line.push_back(pm.probs(j, k));
    rows.push_back(line);
  }
  json degenerate = json::array();
  for (bool flag : pm.degenerate_rows) degenerate.push_back(flag);
  return {{"probs", rows}, {"degenerate_rows", degenerate}};
}

chofuse::ProbabilityMatrix pm_from_json(const json& doc) {
  chofuse::ProbabilityMatrix pm;
  const auto& rows = doc.at("probs");
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size());
  pm.probs.resize(r, c);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index k = 0; k < c; ++k)
      pm.probs(j, k) = rows[static_cast<std::size_t>(j)]
                           [static_cast<std::size_t>(k)].get<double>();
  for (const auto& flag : doc.at("degenerate_rows"))
    pm.degenerate_rows.push_back(flag.get<bool>());
  return pm;
}

struct FusionBundle {
  chofuse::AdaptiveConfig adaptive;
  std::vector<std::unique_ptr<chofuse::Learner>> models;
  std::vector<chofuse::ProbabilityMatrix> pms;
  chofuse::PairwiseJointTable table{1, 2};
  chofuse::DensityTable densities;
  int class_count = 2;
};

FusionBundle build_bundle(const chofuse::Dataset& train, const RunConfig& cfg) {
  FusionBundle bundle;
  bundle.adaptive = cfg.pipeline.adaptive;
  for (chofuse::LearnerKind kind : cfg.pipeline.learners) {
    switch (kind) {
      case chofuse::LearnerKind::kLogistic:
        bundle.models.push_back(std::make_unique<chofuse::LogisticModel>(
            chofuse::fit_logistic(train.features, train.labels,
                                  cfg.pipeline.logistic)));
        break;
      case chofuse::LearnerKind::kAdaBoost:
        bundle.models.push_back(std::make_unique<chofuse::AdaBoostModel>(
            chofuse::fit_adaboost(train.features, train.labels,
                                  cfg.pipeline.adaboost)));
        break;
      case chofuse::LearnerKind::kGradientBoosting:
        bundle.models.push_back(
            std::make_unique<chofuse::GradientBoostingModel>(
                chofuse::fit_gradient_boosting(
                    train.features, train.labels,
                    cfg.pipeline.gradient_boosting)));
        break;
    }
  }
  const int sources = static_cast<int>(bundle.models.size());
  Eigen::MatrixXi preds(sources, train.sample_count());
  for (int i = 0; i < sources; ++i) {
    const Eigen::MatrixXd supports =
        bundle.models[static_cast<std::size_t>(i)]->predict_supports(
            train.features);
    preds.row(i) = chofuse::hard_labels(supports).transpose();
    bundle.pms.push_back(chofuse::row_normalize(
        chofuse::build_confusion(preds.row(i).transpose(), train.labels, 2)));
  }
  bundle.densities = chofuse::initial_densities(
      bundle.pms, cfg.pipeline.adaptive.density_floor);
  bundle.table = chofuse::build_pairwise_tables(preds, train.labels, 2);
  return bundle;
}

json bundle_to_json(const FusionBundle& bundle) {
  json models = json::array();
  for (const auto& model : bundle.models) models.push_back(model->to_json());
  json pms = json::array();
  for (const auto& pm : bundle.pms) pms.push_back(pm_to_json(pm));

  const int sources = bundle.table.source_count();
  const int classes = bundle.table.class_count();
  json pairwise = json::array();
  for (int i = 0; i < sources; ++i) {
    json by_m = json::array();
    for (int m = 0; m < sources; ++m) {
      json jk = json::array();
      for (int j = 0; j < classes; ++j) {
        json line = json::array();
        for (int k = 0; k < classes; ++k)
          line.push_back(i == m ? 0.0 : bundle.table.at(i, m, j, k));
        jk.push_back(line);
      }
      by_m.push_back(jk);
    }
    pairwise.push_back(by_m);
  }
  json degenerate = json::array();
  for (bool flag : bundle.table.degenerate_classes) degenerate.push_back(flag);

  json densities = json::array();
  for (Eigen::Index i = 0; i < bundle.densities.rows(); ++i) {
    json line = json::array();
    for (Eigen::Index j = 0; j < bundle.densities.cols(); ++j)
      line.push_back(bundle.densities(i, j));
    densities.push_back(line);
  }
  return {{"format_version", 1},
          {"kind", "fusion_bundle"},
          {"class_count", bundle.class_count},
          {"adaptive",
           {{"w1", bundle.adaptive.w1},
            {"w2", bundle.adaptive.w2},
            {"epsilon", bundle.adaptive.epsilon},
            {"density_floor", bundle.adaptive.density_floor}}},
          {"learners", models},
          {"pms", pms},
          {"pairwise", pairwise},
          {"degenerate_classes", degenerate},
          {"densities", densities}};
}

FusionBundle bundle_from_json(const json& doc) {
  if (doc.value("kind", "") != "fusion_bundle" ||
      doc.value("format_version", 0) != 1)
    throw chofuse::DataError("bundle: not a format_version 1 fusion_bundle");
  FusionBundle bundle;
  bundle.class_count = doc.at("class_count").get<int>();
  const json& adaptive = doc.at("adaptive");
  bundle.adaptive.w1 = adaptive.at("w1").get<double>();
  bundle.adaptive.w2 = adaptive.at("w2").get<double>();
  bundle.adaptive.epsilon = adaptive.at("epsilon").get<double>();
  bundle.adaptive.density_floor = adaptive.at("density_floor").get<double>();
  for (const auto& model : doc.at("learners"))
    bundle.models.push_back(chofuse::learner_from_json(model));
  for (const auto& pm : doc.at("pms")) bundle.pms.push_back(pm_from_json(pm));

  const int sources = static_cast<int>(bundle.models.size());
  bundle.table = chofuse::PairwiseJointTable(sources, bundle.class_count);
  const json& pairwise = doc.at("pairwise");
  for (int i = 0; i < sources; ++i)
    for (int m = 0; m < sources; ++m) {
      if (i == m) continue;
      for (int j = 0; j < bundle.class_count; ++j)
        for (int k = 0; k < bundle.class_count; ++k)
          bundle.table.at(i, m, j, k) = pairwise[static_cast<std::size_t>(i)]
                                                [static_cast<std::size_t>(m)]
                                                [static_cast<std::size_t>(j)]
                                                [static_cast<std::size_t>(k)]
                                                    .get<double>();
    }
  const json& degenerate = doc.at("degenerate_classes");
  for (std::size_t j = 0; j < degenerate.size(); ++j)
    bundle.table.degenerate_classes[j] = degenerate[j].get<bool>();

  const json& densities = doc.at("densities");
  bundle.densities.resize(sources, bundle.class_count);
  for (int i = 0; i < sources; ++i)
    for (int j = 0; j < bundle.class_count; ++j)
      bundle.densities(i, j) = densities[static_cast<std::size_t>(i)]
                                        [static_cast<std::size_t>(j)]
                                            .get<double>();
  return bundle;
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

int run_synth(const RunConfig& cfg, const std::string& out_file) {
  fs::create_directories(cfg.out_dir);
  const auto ds = chofuse::generate_synthetic(
      cfg.synth_n, cfg.synth_d, cfg.synth_rate, cfg.synth_separation,
      cfg.synth_views, cfg.seed);
  const std::string target =
      out_file.empty() ? (fs::path(cfg.out_dir) / "synth.csv").string()
                       : out_file;
  chofuse::save_dataset_csv(ds, target);
  write_snapshot(cfg, "synth", {{"output", target}});
  std::cout << "wrote " << target << " (" << ds.sample_count() << " samples, "
            << ds.feature_count() << " features)\n";
  return 0;
}

int run_prep(const RunConfig& cfg, const std::string& input) {
  fs::create_directories(cfg.out_dir);
  chofuse::PrepReport report;
  const auto ds = load_input(cfg, input, &report);
  const auto cleaned = fs::path(cfg.out_dir) / "cleaned.csv";
  chofuse::save_dataset_csv(ds, cleaned.string());
  write_json(fs::path(cfg.out_dir) / "prep_report.json", report.to_json());
  write_snapshot(cfg, "prep", {{"input", input}});
  std::cout << "wrote " << cleaned.string() << " (" << ds.sample_count()
            << " rows, " << ds.feature_count() << " features)\n";
  return 0;
}

int run_train(const RunConfig& cfg, const std::string& input) {
  fs::create_directories(cfg.out_dir);
  chofuse::Dataset train = load_input(cfg, input);
  if (cfg.rus) train = chofuse::random_undersample(train, cfg.seed);
  const FusionBundle bundle = build_bundle(train, cfg);
  const auto path = fs::path(cfg.out_dir) / "bundle.json";
  write_json(path, bundle_to_json(bundle));
  write_snapshot(cfg, "train", {{"input", input}});
  std::cout << "wrote " << path.string() << " (" << bundle.models.size()
            << " base learners)\n";
  return 0;
}

int write_fusion_outputs(const RunConfig& cfg,
                         const std::vector<chofuse::FusionOutcome>& outcomes,
                         const std::vector<std::string>& ids) {
  fs::create_directories(cfg.out_dir);
  const auto csv_path = fs::path(cfg.out_dir) / "outcomes.csv";
  std::ofstream out(csv_path, std::ios::binary);
  chofuse::write_outcomes_csv(out, outcomes, ids);
  write_json(fs::path(cfg.out_dir) / "outcomes.json",
             chofuse::outcomes_to_json(outcomes, ids));
  std::cout << "wrote " << csv_path.string() << " (" << outcomes.size()
            << " samples)\n";
  return 0;
}

int run_fuse(const RunConfig& cfg, const std::string& predictions,
             const std::string& input, const std::string& bundle_path) {
  fs::create_directories(cfg.out_dir);
  const int workers =
      cfg.workers > 0 ? cfg.workers : chofuse::default_workers();
  if (!predictions.empty()) {
    const auto ext = chofuse::load_external_predictions(predictions);
    if (!ext.has_labels)
      throw chofuse::DataError(
          predictions +
          ": a label column is required to build the adaptive tables");
    const int sources = static_cast<int>(ext.classifier_ids.size());
    Eigen::MatrixXi preds(sources,
                          static_cast<Eigen::Index>(ext.supports.size()));
    for (std::size_t s = 0; s < ext.supports.size(); ++s)
      preds.col(static_cast<Eigen::Index>(s)) =
          chofuse::hard_labels(ext.supports[s]);
    std::vector<chofuse::ProbabilityMatrix> pms;
    for (int i = 0; i < sources; ++i)
      pms.push_back(chofuse::row_normalize(chofuse::build_confusion(
          preds.row(i).transpose(), ext.labels, ext.class_count)));
    const auto densities = chofuse::initial_densities(
        pms, cfg.pipeline.adaptive.density_floor);
    const auto table =
        chofuse::build_pairwise_tables(preds, ext.labels, ext.class_count);
    const auto outcomes =
        chofuse::fuse_dataset(ext.supports, densities, pms, table,
                              cfg.pipeline.adaptive, workers);
    write_snapshot(cfg, "fuse", {{"predictions", predictions}});
    return write_fusion_outputs(cfg, outcomes, ext.sample_ids);
  }

  if (input.empty() || bundle_path.empty())
    throw UsageError("fuse needs --predictions, or --input with --bundle");
  std::ifstream in(bundle_path);
  if (!in) throw chofuse::DataError("cannot open bundle: " + bundle_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw chofuse::DataError("bundle: " + std::string(e.what()));
  }
  const FusionBundle bundle = bundle_from_json(doc);
  const chofuse::Dataset ds = load_input(cfg, input);

  std::vector<Eigen::MatrixXd> base;
  for (const auto& model : bundle.models)
    base.push_back(model->predict_supports(ds.features));
  std::vector<Eigen::MatrixXd> samples(
      static_cast<std::size_t>(ds.sample_count()));
  for (Eigen::Index s = 0; s < ds.sample_count(); ++s) {
    Eigen::MatrixXd h(static_cast<Eigen::Index>(base.size()), 2);
    for (std::size_t i = 0; i < base.size(); ++i)
      h.row(static_cast<Eigen::Index>(i)) = base[i].row(s);
    samples[static_cast<std::size_t>(s)] = h;
  }
  const auto outcomes =
      chofuse::fuse_dataset(samples, bundle.densities, bundle.pms,
                            bundle.table, bundle.adaptive, workers);
  write_snapshot(cfg, "fuse", {{"input", input}, {"bundle", bundle_path}});
  return write_fusion_outputs(cfg, outcomes, {});
}

int run_evaluate(const RunConfig& cfg, const std::string& input) {
  fs::create_directories(cfg.out_dir);
  const auto ds = load_input(cfg, input);
  chofuse::PipelineConfig pipeline = cfg.pipeline;
  pipeline.rus = cfg.rus;
  pipeline.workers =
      cfg.workers > 0 ? cfg.workers : chofuse::default_workers();
  auto report = chofuse::cross_validate(ds, cfg.folds, pipeline, cfg.seed);
  report.config_snapshot["input"] = input;
  report.config_snapshot["positive_class"] = cfg.positive_class;

  write_text(fs::path(cfg.out_dir) / "report.json",
             report.to_json().dump(2) + "\n");
  write_text(fs::path(cfg.out_dir) / "table.txt", report.table_text());
  write_text(fs::path(cfg.out_dir) / "table.csv", report.table_csv());
  write_text(fs::path(cfg.out_dir) / "folds.csv", report.fold_curves_csv());
  write_snapshot(cfg, "evaluate", {{"input", input}});
  std::cout << report.table_text();
  return 0;
}

int run_gridsearch(const RunConfig& cfg, const std::string& input) {
  fs::create_directories(cfg.out_dir);
  const auto ds = load_input(cfg, input);
  chofuse::PipelineConfig pipeline = cfg.pipeline;
  pipeline.rus = cfg.rus;
  pipeline.workers =
      cfg.workers > 0 ? cfg.workers : chofuse::default_workers();
  const auto result = chofuse::grid_search_weights(
      ds, cfg.folds, cfg.w1_grid, cfg.w2_grid, pipeline, cfg.seed);
  write_json(fs::path(cfg.out_dir) / "grid.json", result.to_json());
  write_text(fs::path(cfg.out_dir) / "grid.csv", result.table_csv());
  write_snapshot(cfg, "gridsearch", {{"input", input}});
  std::cout << "best pair: w1=" << result.best_w1 << " w2=" << result.best_w2
            << "\n";
  return 0;
}

std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  cfg.w1_grid = default_grid();
  cfg.w2_grid = default_grid();

  try {
    // The config file seeds the defaults; explicit flags then override.
    bool config_has_seed = false;
    const std::string config_file = find_config_arg(argc, argv);
    if (!config_file.empty())
      config_has_seed = apply_config_file(config_file, cfg);

    CLI::App app{
        "Choquet-integral classifier fusion for credit risk prediction"};
    app.require_subcommand(1);

    std::string config_sink, input, out_file, predictions, bundle_path;
    std::string learners_csv;

    auto add_common = [&](CLI::App* sub) {
      sub->add_option("--config", config_sink, "JSON config file");
      sub->add_option("--seed", cfg.seed, "RNG seed");
      sub->add_option("--workers", cfg.workers,
                      "worker threads (0 = all cores)");
      sub->add_option("--out-dir", cfg.out_dir, "output directory");
      sub->add_option("--positive-class", cfg.positive_class,
                      "label treated as positive/minority (0 or 1)");
      sub->add_option("--epsilon", cfg.pipeline.adaptive.epsilon,
                      "small value keeping update factors positive");
      sub->add_option("--density-floor", cfg.pipeline.adaptive.density_floor,
                      "lower clamp for fuzzy densities");
      sub->add_option("--w1", cfg.w1_grid,
                      "delta exponent (repeat for a gridsearch grid)");
      sub->add_option("--w2", cfg.w2_grid,
                      "gamma exponent (repeat for a gridsearch grid)");
      sub->add_option("--learners", learners_csv,
                      "comma-separated: logistic,adaboost,gradient_boosting");
      sub->add_option("--label-column", cfg.label_column, "label column name");
      sub->add_option("--folds", cfg.folds, "cross-validation folds");
      sub->add_flag("--rus,!--no-rus", cfg.rus,
                    "undersample training data to 1:1");
      sub->add_option("--logistic-lr", cfg.pipeline.logistic.learning_rate,
                      "logistic learning rate");
      sub->add_option("--logistic-l2", cfg.pipeline.logistic.l2,
                      "logistic L2 strength");
      sub->add_option("--logistic-max-iter", cfg.pipeline.logistic.max_iter,
                      "logistic iteration cap");
      sub->add_option("--logistic-tol", cfg.pipeline.logistic.tol,
                      "logistic gradient tolerance");
      sub->add_option("--ada-rounds", cfg.pipeline.adaboost.rounds,
                      "adaboost rounds");
      sub->add_option("--ada-epsilon-clip",
                      cfg.pipeline.adaboost.epsilon_clip,
                      "adaboost error clamp");
      sub->add_option("--gb-rounds", cfg.pipeline.gradient_boosting.rounds,
                      "gradient boosting rounds");
      sub->add_option("--gb-shrinkage",
                      cfg.pipeline.gradient_boosting.shrinkage,
                      "gradient boosting shrinkage");
      sub->add_option("--gb-max-depth",
                      cfg.pipeline.gradient_boosting.max_depth,
                      "gradient boosting tree depth");
      sub->add_option("--gb-min-leaf",
                      cfg.pipeline.gradient_boosting.min_leaf,
                      "gradient boosting leaf minimum");
      sub->add_option("--row-missing-threshold",
                      cfg.prep.row_missing_threshold,
                      "drop rows missing more than this fraction");
      sub->add_option("--col-missing-threshold",
                      cfg.prep.column_missing_threshold,
                      "drop columns missing more than this fraction");
      sub->add_option("--corr-threshold", cfg.prep.correlation_threshold,
                      "absolute correlation pruning threshold");
      sub->add_option("--leakage", cfg.prep.leakage_columns,
                      "leakage columns to drop");
      sub->add_option("--log-columns", cfg.prep.log_columns,
                      "columns to log1p");
      sub->add_flag("--standardize,!--no-standardize", cfg.prep.standardize,
                    "z-score numeric features");
      sub->add_flag("--one-hot", cfg.prep.one_hot,
                    "one-hot categorical encoding");
    };

    CLI::App* synth =
        app.add_subcommand("synth", "emit a synthetic feature CSV");
    add_common(synth);
    synth->add_option("--out", out_file, "output CSV path");
    synth->add_option("--n", cfg.synth_n, "sample count");
    synth->add_option("--d", cfg.synth_d, "feature count");
    synth->add_option("--default-rate", cfg.synth_rate,
                      "positive class prior");
    synth->add_option("--class-separation", cfg.synth_separation,
                      "signal strength");
    synth->add_option("--views", cfg.synth_views,
                      "complementary feature views");

    CLI::App* prep =
        app.add_subcommand("prep", "clean a CSV and report the steps");
    add_common(prep);
    prep->add_option("--input", input, "feature CSV")->required();

    CLI::App* train =
        app.add_subcommand("train", "fit base learners and adaptive tables");
    add_common(train);
    train->add_option("--input", input, "feature CSV")->required();

    CLI::App* fuse =
        app.add_subcommand("fuse", "score data with the fused model");
    add_common(fuse);
    fuse->add_option("--predictions", predictions,
                     "external predictions CSV");
    fuse->add_option("--input", input, "feature CSV (with --bundle)");
    fuse->add_option("--bundle", bundle_path, "bundle.json from train");

    CLI::App* evaluate =
        app.add_subcommand("evaluate", "cross-validated method comparison");
    add_common(evaluate);
    evaluate->add_option("--input", input, "feature CSV")->required();

    CLI::App* gridsearch =
        app.add_subcommand("gridsearch", "scan (w1, w2) pairs by fused AUC");
    add_common(gridsearch);
    gridsearch->add_option("--input", input, "feature CSV")->required();

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed") == 0 && !config_has_seed) {
      if (const char* env = std::getenv("CHOQUET_FUSE_SEED"))
        cfg.seed = std::strtoull(env, nullptr, 10);
    }
    if (!learners_csv.empty()) {
      cfg.pipeline.learners.clear();
      std::stringstream stream(learners_csv);
      std::string token;
      while (std::getline(stream, token, ','))
        cfg.pipeline.learners.push_back(
            chofuse::learner_kind_from_string(token));
    }
    if (cfg.folds < 2) throw UsageError("--folds must be >= 2");
    if (cfg.pipeline.learners.empty())
      throw UsageError("--learners must name at least one learner");

    // Single-valued w1/w2 configure the adaptive engine directly; the grids
    // are consumed by gridsearch only.
    if (sub != gridsearch) {
      if (cfg.w1_grid.size() == 1) cfg.pipeline.adaptive.w1 = cfg.w1_grid[0];
      if (cfg.w2_grid.size() == 1) cfg.pipeline.adaptive.w2 = cfg.w2_grid[0];
    }
    cfg.pipeline.adaptive.validate();

    if (sub == synth) return run_synth(cfg, out_file);
    if (sub == prep) return run_prep(cfg, input);
    if (sub == train) return run_train(cfg, input);
    if (sub == fuse) return run_fuse(cfg, predictions, input, bundle_path);
    if (sub == evaluate) return run_evaluate(cfg, input);
    if (sub == gridsearch) return run_gridsearch(cfg, input);
    throw UsageError("no subcommand");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const chofuse::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const chofuse::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
