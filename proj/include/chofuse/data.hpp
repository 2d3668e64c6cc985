#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "chofuse/errors.hpp"

namespace chofuse {

// Label 1 is the positive/minority class (a defaulted loan).
struct Dataset {
  Eigen::MatrixXd features;  // N x D
  Eigen::VectorXi labels;    // values in {0, 1}
  std::vector<std::string> feature_names;
  std::string provenance;

  Eigen::Index sample_count() const { return features.rows(); }
  Eigen::Index feature_count() const { return features.cols(); }
};

struct PrepConfig {
  // rows whose missing fraction exceeds this are dropped; 0 drops any row
  // with a missing value
  double row_missing_threshold = 0.0;
  // columns whose missing fraction exceeds this are dropped first
  double column_missing_threshold = 0.5;
  std::vector<std::string> leakage_columns;
  double correlation_threshold = 0.95;
  std::vector<std::string> log_columns;  // log1p applied after encoding
  bool standardize = true;
  bool one_hot = false;  // categorical encoding: ordinal unless set
  std::uint64_t seed = 0;

  void validate() const;
};

struct PrepReport {
  std::size_t rows_in = 0;
  std::size_t rows_dropped = 0;
  std::vector<std::string> dropped_leakage;
  std::vector<std::string> dropped_missing_columns;
  std::vector<std::string> pruned_correlated;
  // column name -> ordered category levels
  std::vector<std::pair<std::string, std::vector<std::string>>> categorical_levels;

  nlohmann::json to_json() const;
};

// Loads and cleans a feature CSV: leakage columns out, over-missing columns
// out, missing rows out, categoricals ordinal-encoded (or one-hot), log1p
// and z-scores applied, then one of each highly correlated column pair
// pruned. Deterministic for a fixed config.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const PrepConfig& prep, PrepReport* report = nullptr);

// Balances classes exactly 1:1 by uniformly discarding majority samples.
Dataset random_undersample(const Dataset& ds, std::uint64_t seed);

// Gaussian class-conditional benchmark generator. Feature blocks form
// `complementary_views` views; each sample carries its class signal in one
// view only, so no single feature subset explains every sample.
Dataset generate_synthetic(Eigen::Index samples, Eigen::Index features,
                           double default_rate, double class_separation,
                           int complementary_views, std::uint64_t seed);

void save_dataset_csv(const Dataset& ds, const std::string& path);

// Pre-computed base-classifier supports, one sources x classes matrix per
// sample, from a CSV with columns sample_id, classifier_id,
// class_0..class_{M-1} and optional label.
struct ExternalPredictions {
  std::vector<Eigen::MatrixXd> supports;
  std::vector<std::string> sample_ids;
  std::vector<std::string> classifier_ids;
  Eigen::VectorXi labels;  // empty when has_labels is false
  bool has_labels = false;
  int class_count = 0;
};

ExternalPredictions load_external_predictions(const std::string& path);

}  // namespace chofuse
