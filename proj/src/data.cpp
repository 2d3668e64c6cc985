#include "chofuse/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "chofuse/csv.hpp"

namespace chofuse {

namespace {

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0' && std::isfinite(out);
}

bool is_missing(const std::string& cell) { return cell.empty(); }

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  const Eigen::VectorXd da = a.array() - ma;
  const Eigen::VectorXd db = b.array() - mb;
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (denom <= 1e-12) return 0.0;
  return da.dot(db) / denom;
}

std::string format_cell(double value) {
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

}  // namespace

void PrepConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(row_missing_threshold) || !in_unit(column_missing_threshold) ||
      !in_unit(correlation_threshold))
    throw DataError("prep config: thresholds must lie in [0, 1]");
}

nlohmann::json PrepReport::to_json() const {
  nlohmann::json levels = nlohmann::json::object();
  for (const auto& [column, values] : categorical_levels)
    levels[column] = values;
  return {{"rows_in", rows_in},
          {"rows_dropped", rows_dropped},
          {"dropped_leakage", dropped_leakage},
          {"dropped_missing_columns", dropped_missing_columns},
          {"pruned_correlated", pruned_correlated},
          {"categorical_levels", levels}};
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const PrepConfig& prep, PrepReport* report) {
  prep.validate();
  const CsvTable csv = read_csv(path);
  PrepReport local;
  PrepReport& rep = report ? *report : local;
  rep.rows_in = csv.rows.size();

  const int label_idx = csv.column(label_column);
  if (label_idx < 0)
    throw DataError(path + ": label column '" + label_column + "' not found");

  // Feature columns after leakage and missing-fraction drops.
  std::vector<int> columns;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (static_cast<int>(c) == label_idx) continue;
    if (std::find(prep.leakage_columns.begin(), prep.leakage_columns.end(),
                  csv.header[c]) != prep.leakage_columns.end()) {
      rep.dropped_leakage.push_back(csv.header[c]);
      continue;
    }
    columns.push_back(static_cast<int>(c));
  }
  if (!csv.rows.empty()) {
    std::vector<int> kept;
    for (int c : columns) {
      std::size_t missing = 0;
      for (const auto& row : csv.rows)
        if (is_missing(row[static_cast<std::size_t>(c)])) ++missing;
      const double fraction =
          static_cast<double>(missing) / static_cast<double>(csv.rows.size());
      if (fraction > prep.column_missing_threshold)
        rep.dropped_missing_columns.push_back(
            csv.header[static_cast<std::size_t>(c)]);
      else
        kept.push_back(c);
    }
    columns = std::move(kept);
  }
  if (columns.empty()) throw DataError(path + ": no feature columns left");

  // Row drops: a missing label always drops the row; feature gaps drop it
  // when their fraction exceeds the threshold.
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (is_missing(row[static_cast<std::size_t>(label_idx)])) continue;
    std::size_t missing = 0;
    for (int c : columns)
      if (is_missing(row[static_cast<std::size_t>(c)])) ++missing;
    const double fraction =
        static_cast<double>(missing) / static_cast<double>(columns.size());
    if (fraction > prep.row_missing_threshold) continue;
    if (missing > 0)
      throw DataError(path + ": row " + std::to_string(r) +
                      " keeps a missing value; lower row_missing_threshold");
    rows.push_back(r);
  }
  rep.rows_dropped = csv.rows.size() - rows.size();
  if (rows.empty()) throw DataError(path + ": no rows left after cleaning");

  // Labels must be binary.
  Eigen::VectorXi labels(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string& cell =
        csv.rows[rows[r]][static_cast<std::size_t>(label_idx)];
    double value = 0.0;
    if (!parse_double(cell, value) || (value != 0.0 && value != 1.0))
      throw DataError(path + ": non-binary label '" + cell + "' at row " +
                      std::to_string(rows[r]));
    labels[static_cast<Eigen::Index>(r)] = static_cast<int>(value);
  }

  // Categorical detection and encoding.
  std::vector<Eigen::VectorXd> encoded;
  std::vector<std::string> names;
  for (int c : columns) {
    const std::string& name = csv.header[static_cast<std::size_t>(c)];
    bool numeric = true;
    for (std::size_t r = 0; r < rows.size() && numeric; ++r) {
      double value;
      numeric = parse_double(csv.rows[rows[r]][static_cast<std::size_t>(c)], value);
    }
    if (numeric) {
      Eigen::VectorXd column(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        double value;
        parse_double(csv.rows[rows[r]][static_cast<std::size_t>(c)], value);
        column[static_cast<Eigen::Index>(r)] = value;
      }
      encoded.push_back(std::move(column));
      names.push_back(name);
      continue;
    }
    std::set<std::string> distinct;
    for (std::size_t r = 0; r < rows.size(); ++r)
      distinct.insert(csv.rows[rows[r]][static_cast<std::size_t>(c)]);
    std::vector<std::string> levels(distinct.begin(), distinct.end());
    rep.categorical_levels.emplace_back(name, levels);
    std::map<std::string, int> code;
    for (std::size_t i = 0; i < levels.size(); ++i)
      code[levels[i]] = static_cast<int>(i);
    if (prep.one_hot) {
      for (std::size_t level = 0; level < levels.size(); ++level) {
        Eigen::VectorXd column(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
          column[static_cast<Eigen::Index>(r)] =
              csv.rows[rows[r]][static_cast<std::size_t>(c)] == levels[level]
                  ? 1.0
                  : 0.0;
        encoded.push_back(std::move(column));
        names.push_back(name + "=" + levels[level]);
      }
    } else {
      Eigen::VectorXd column(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        column[static_cast<Eigen::Index>(r)] =
            code[csv.rows[rows[r]][static_cast<std::size_t>(c)]];
      encoded.push_back(std::move(column));
      names.push_back(name);
    }
  }

  for (const std::string& target : prep.log_columns) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (names[c] != target) continue;
      if ((encoded[c].array() <= -1.0).any())
        throw DataError(path + ": log transform of '" + target +
                        "' hits values <= -1");
      encoded[c] = encoded[c].array().log1p();
    }
  }

  if (prep.standardize) {
    for (auto& column : encoded) {
      const double mean = column.mean();
      const double stddev = std::sqrt(
          (column.array() - mean).square().sum() / static_cast<double>(column.size()));
      if (stddev <= 1e-12)
        column.setZero();
      else
        column = (column.array() - mean) / stddev;
    }
  }

  // Correlation pruning: keep the earlier column of any correlated pair.
  std::vector<std::size_t> survivors;
  for (std::size_t c = 0; c < encoded.size(); ++c) {
    bool pruned = false;
    for (std::size_t prior : survivors) {
      if (std::abs(pearson(encoded[prior], encoded[c])) >
          prep.correlation_threshold) {
        rep.pruned_correlated.push_back(names[c]);
        pruned = true;
        break;
      }
    }
    if (!pruned) survivors.push_back(c);
  }
  if (survivors.empty()) throw DataError(path + ": all features pruned");

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(survivors.size()));
  for (std::size_t c = 0; c < survivors.size(); ++c) {
    ds.features.col(static_cast<Eigen::Index>(c)) = encoded[survivors[c]];
    ds.feature_names.push_back(names[survivors[c]]);
  }
  ds.labels = std::move(labels);
  ds.provenance = path;
  return ds;
}

Dataset random_undersample(const Dataset& ds, std::uint64_t seed) {
  std::vector<int> class0, class1;
  for (Eigen::Index i = 0; i < ds.labels.size(); ++i)
    (ds.labels[i] == 1 ? class1 : class0).push_back(static_cast<int>(i));
  if (class0.empty() || class1.empty())
    throw DataError("random_undersample: both classes required");

  const bool minority_is_one = class1.size() <= class0.size();
  const auto& minority = minority_is_one ? class1 : class0;
  auto majority = minority_is_one ? class0 : class1;

  std::mt19937_64 rng(seed);
  std::shuffle(majority.begin(), majority.end(), rng);
  majority.resize(minority.size());

  std::vector<int> keep(minority.begin(), minority.end());
  keep.insert(keep.end(), majority.begin(), majority.end());
  std::sort(keep.begin(), keep.end());  // original row order

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(keep.size()), ds.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = ds.features.row(keep[r]);
    out.labels[static_cast<Eigen::Index>(r)] = ds.labels[keep[r]];
  }
  out.feature_names = ds.feature_names;
  out.provenance = ds.provenance + " + rus(seed=" + std::to_string(seed) + ")";
  return out;
}

Dataset generate_synthetic(Eigen::Index samples, Eigen::Index features,
                           double default_rate, double class_separation,
                           int complementary_views, std::uint64_t seed) {
  if (samples < 1 || features < 1)
    throw DataError("generate_synthetic: need positive sample and feature counts");
  if (!(default_rate > 0.0 && default_rate < 1.0))
    throw DataError("generate_synthetic: default_rate must lie in (0, 1)");
  if (complementary_views < 1 || features < complementary_views)
    throw DataError("generate_synthetic: views must fit into the feature count");
  if (!(class_separation >= 0.0))
    throw DataError("generate_synthetic: class_separation must be >= 0");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution default_draw(default_rate);
  std::uniform_int_distribution<int> view_draw(0, complementary_views - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  const Eigen::Index block =
      (features + complementary_views - 1) / complementary_views;

  // Within a sample's active view, even block positions carry a class mean
  // shift (visible to every learner) and odd positions carry a class
  // variance signal (invisible to a linear model), so the base classifiers
  // err in different places.
  const double shift = 0.5 * class_separation;
  const double spread = 1.0 + 0.6 * class_separation;

  Dataset ds;
  ds.features.resize(samples, features);
  ds.labels.resize(samples);
  for (Eigen::Index s = 0; s < samples; ++s) {
    const int label = default_draw(rng) ? 1 : 0;
    const int view = view_draw(rng);
    ds.labels[s] = label;
    for (Eigen::Index f = 0; f < features; ++f) {
      const bool informative = f / block == view;
      const double direction = (f / 2) % 2 == 0 ? 1.0 : -1.0;
      double mean = 0.0;
      double scale = 1.0;
      if (informative) {
        if (f % 2 == 0)
          mean = (label == 1 ? shift : -shift) * direction;
        else if (label == 1)
          scale = spread;
      }
      ds.features(s, f) = mean + scale * noise(rng);
    }
  }
  for (Eigen::Index f = 0; f < features; ++f)
    ds.feature_names.push_back("f" + std::to_string(f));
  std::ostringstream tag;
  tag << "synthetic(n=" << samples << ",d=" << features << ",rate="
      << default_rate << ",sep=" << class_separation << ",views="
      << complementary_views << ",seed=" << seed << ")";
  ds.provenance = tag.str();
  return ds;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  for (const auto& name : ds.feature_names) out << csv_escape(name) << ',';
  out << "label\n";
  for (Eigen::Index s = 0; s < ds.sample_count(); ++s) {
    for (Eigen::Index f = 0; f < ds.feature_count(); ++f)
      out << format_cell(ds.features(s, f)) << ',';
    out << ds.labels[s] << "\n";
  }
}

ExternalPredictions load_external_predictions(const std::string& path) {
  const CsvTable csv = read_csv(path);
  const int sid_col = csv.column("sample_id");
  const int cid_col = csv.column("classifier_id");
  if (sid_col < 0 || cid_col < 0)
    throw DataError(path + ": sample_id and classifier_id columns required");

  std::vector<int> class_cols;
  for (int m = 0;; ++m) {
    const int c = csv.column("class_" + std::to_string(m));
    if (c < 0) break;
    class_cols.push_back(c);
  }
  if (class_cols.size() < 2)
    throw DataError(path + ": need contiguous class_0..class_{M-1} columns");
  const int label_col = csv.column("label");

  ExternalPredictions out;
  out.class_count = static_cast<int>(class_cols.size());
  out.has_labels = label_col >= 0;

  std::map<std::string, int> sample_index, classifier_index;
  for (const auto& row : csv.rows) {
    const std::string& sid = row[static_cast<std::size_t>(sid_col)];
    const std::string& cid = row[static_cast<std::size_t>(cid_col)];
    if (!sample_index.count(sid)) {
      sample_index[sid] = static_cast<int>(out.sample_ids.size());
      out.sample_ids.push_back(sid);
    }
    if (!classifier_index.count(cid)) {
      classifier_index[cid] = static_cast<int>(out.classifier_ids.size());
      out.classifier_ids.push_back(cid);
    }
  }
  const int sources = static_cast<int>(out.classifier_ids.size());
  const int n = static_cast<int>(out.sample_ids.size());

  out.supports.assign(static_cast<std::size_t>(n),
                      Eigen::MatrixXd::Constant(sources, out.class_count, -1.0));
  out.labels = Eigen::VectorXi::Constant(n, -1);

  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string& sid = row[static_cast<std::size_t>(sid_col)];
    const std::string& cid = row[static_cast<std::size_t>(cid_col)];
    const int s = sample_index[sid];
    const int i = classifier_index[cid];
    Eigen::MatrixXd& h = out.supports[static_cast<std::size_t>(s)];
    if (h(i, 0) >= 0.0)
      throw DataError(path + ": duplicate pair sample_id=" + sid +
                      " classifier_id=" + cid);
    Eigen::VectorXd values(out.class_count);
    for (int j = 0; j < out.class_count; ++j) {
      const std::string& cell =
          row[static_cast<std::size_t>(class_cols[static_cast<std::size_t>(j)])];
      double v;
      if (!parse_double(cell, v) || v < 0.0)
        throw DataError(path + ": bad support '" + cell + "' for sample_id=" +
                        sid + " classifier_id=" + cid);
      values[j] = v;
    }
    const double total = values.sum();
    if (std::abs(total - 1.0) > 1e-6)
      throw DataError(path + ": supports sum to " + std::to_string(total) +
                      " for sample_id=" + sid + " classifier_id=" + cid);
    h.row(i) = values / total;

    if (out.has_labels) {
      double v;
      const std::string& cell = row[static_cast<std::size_t>(label_col)];
      if (!parse_double(cell, v) || v < 0.0 ||
          v >= static_cast<double>(out.class_count) ||
          v != std::floor(v))
        throw DataError(path + ": bad label '" + cell + "' for sample_id=" + sid);
      const int label = static_cast<int>(v);
      int& slot = out.labels[s];
      if (slot >= 0 && slot != label)
        throw DataError(path + ": conflicting labels for sample_id=" + sid);
      slot = label;
    }
  }

  for (int s = 0; s < n; ++s)
    for (int i = 0; i < sources; ++i)
      if (out.supports[static_cast<std::size_t>(s)](i, 0) < 0.0)
        throw DataError(path + ": missing pair sample_id=" + out.sample_ids[static_cast<std::size_t>(s)] +
                        " classifier_id=" + out.classifier_ids[static_cast<std::size_t>(i)]);
  if (!out.has_labels) out.labels.resize(0);
  return out;
}

}  // namespace chofuse
