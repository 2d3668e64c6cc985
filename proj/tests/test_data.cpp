#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "chofuse/csv.hpp"
#include "chofuse/data.hpp"
#include "chofuse/learners.hpp"
#include "oracles.hpp"

using namespace chofuse;

namespace {

std::filesystem::path temp_file(const std::string& stem) {
  static int counter = 0;
  return std::filesystem::temp_directory_path() /
         (stem + "_" + std::to_string(++counter) + ".csv");
}

std::filesystem::path write_file(const std::string& stem, const std::string& text) {
  const auto path = temp_file(stem);
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}

PrepConfig raw_prep() {
  PrepConfig prep;
  prep.standardize = false;
  return prep;
}

}  // namespace

// ---------------------------------------------------------------------------
// csv utility
// ---------------------------------------------------------------------------

TEST_CASE("csv parser handles quoting and reports ragged rows") {
  const auto table = parse_csv("a,b\n\"x,\"\"y\"\"\",2\n");
  CHECK(table.header == std::vector<std::string>{"a", "b"});
  CHECK(table.rows[0][0] == "x,\"y\"");
  CHECK(table.rows[0][1] == "2");

  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a,b\n\"open,2\n"), DataError);
  CHECK_THROWS_AS(parse_csv(""), DataError);
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

// ---------------------------------------------------------------------------
// load_csv
// ---------------------------------------------------------------------------

TEST_CASE("rows with missing cells are dropped") {
  const auto path = write_file("missing",
                               "x,y,label\n1,2,0\n3,,1\n5,9,1\n4,1,0\n");
  const auto ds = load_csv(path.string(), "label", raw_prep());
  CHECK(ds.sample_count() == 3);
  REQUIRE(ds.feature_count() == 2);
  CHECK(ds.features(0, 0) == 1.0);
  CHECK(ds.features(1, 1) == 9.0);
  CHECK(ds.labels[1] == 1);
}

TEST_CASE("identical columns are pruned, first kept") {
  const auto path = write_file(
      "prune", "x,copy,label\n1,1,0\n2,2,1\n3,3,0\n4,4,1\n");
  PrepReport report;
  const auto ds = load_csv(path.string(), "label", raw_prep(), &report);
  CHECK(ds.feature_count() == 1);
  CHECK(ds.feature_names == std::vector<std::string>{"x"});
  CHECK(report.pruned_correlated == std::vector<std::string>{"copy"});
}

TEST_CASE("categorical columns encode ordinally by sorted value") {
  const auto path =
      write_file("cat", "grade,label\nA,0\nB,1\nA,0\n");
  PrepReport report;
  const auto ds = load_csv(path.string(), "label", raw_prep(), &report);
  CHECK(ds.features.col(0) == (Eigen::VectorXd(3) << 0, 1, 0).finished());
  REQUIRE(report.categorical_levels.size() == 1);
  CHECK(report.categorical_levels[0].second ==
        std::vector<std::string>{"A", "B"});
}

TEST_CASE("one-hot encoding expands levels in sorted order") {
  const auto path =
      write_file("onehot", "grade,label\nA,0\nB,1\nC,0\n");
  PrepConfig prep = raw_prep();
  prep.one_hot = true;
  const auto ds = load_csv(path.string(), "label", prep);
  CHECK(ds.feature_names ==
        std::vector<std::string>{"grade=A", "grade=B", "grade=C"});
  CHECK(ds.features(1, 1) == 1.0);
  CHECK(ds.features(1, 0) == 0.0);
}

TEST_CASE("leakage and over-missing columns are removed") {
  const auto path = write_file(
      "leak", "id,mostly_gone,x,label\n1,,1,0\n2,,2,1\n3,7,3,0\n4,,4,1\n");
  PrepConfig prep = raw_prep();
  prep.leakage_columns = {"id"};
  prep.column_missing_threshold = 0.5;
  PrepReport report;
  const auto ds = load_csv(path.string(), "label", prep, &report);
  CHECK(ds.feature_names == std::vector<std::string>{"x"});
  CHECK(report.dropped_leakage == std::vector<std::string>{"id"});
  CHECK(report.dropped_missing_columns ==
        std::vector<std::string>{"mostly_gone"});
  CHECK(ds.sample_count() == 4);
}

TEST_CASE("log transform applies log1p to configured columns") {
  const auto path = write_file("log", "x,label\n0,0\n9,1\n");
  PrepConfig prep = raw_prep();
  prep.log_columns = {"x"};
  const auto ds = load_csv(path.string(), "label", prep);
  CHECK(ds.features(0, 0) == doctest::Approx(0.0));
  CHECK(ds.features(1, 0) == doctest::Approx(std::log(10.0)));

  const auto bad = write_file("logbad", "x,label\n-2,0\n1,1\n");
  CHECK_THROWS_AS(load_csv(bad.string(), "label", prep), DataError);
}

TEST_CASE("load_csv error paths") {
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", "label", raw_prep()),
                  DataError);
  const auto no_label = write_file("nolabel", "x,y\n1,2\n");
  CHECK_THROWS_AS(load_csv(no_label.string(), "label", raw_prep()), DataError);
  const auto bad_label = write_file("badlabel", "x,label\n1,2\n2,0\n");
  CHECK_THROWS_AS(load_csv(bad_label.string(), "label", raw_prep()), DataError);
  const auto all_missing = write_file("allmissing", "x,label\n,0\n,1\n");
  PrepConfig strict = raw_prep();
  strict.column_missing_threshold = 1.0;  // keep the column, drop the rows
  CHECK_THROWS_AS(load_csv(all_missing.string(), "label", strict), DataError);
}

TEST_CASE("preprocessing is idempotent on its own output") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> noise(3.0, 2.5);
  Dataset ds;
  ds.features.resize(50, 3);
  ds.labels.resize(50);
  for (int i = 0; i < 50; ++i) {
    ds.labels[i] = i % 2;
    for (int f = 0; f < 3; ++f) ds.features(i, f) = noise(rng);
  }
  ds.feature_names = {"a", "b", "c"};

  PrepConfig prep;  // standardize on
  const auto first = temp_file("idem");
  save_dataset_csv(ds, first.string());
  const auto cleaned = load_csv(first.string(), "label", prep);

  const auto second = temp_file("idem");
  save_dataset_csv(cleaned, second.string());
  const auto again = load_csv(second.string(), "label", prep);

  CHECK(again.features.isApprox(cleaned.features, 1e-9));
  CHECK(again.labels == cleaned.labels);
}

// ---------------------------------------------------------------------------
// random_undersample
// ---------------------------------------------------------------------------

TEST_CASE("undersampling balances to exactly 1:1") {
  Dataset ds;
  ds.features = Eigen::MatrixXd::Random(120, 2);
  ds.labels.resize(120);
  for (int i = 0; i < 120; ++i) ds.labels[i] = i < 20 ? 1 : 0;

  const auto balanced = random_undersample(ds, 9);
  CHECK(balanced.sample_count() == 40);
  CHECK((balanced.labels.array() == 1).count() == 20);
  CHECK((balanced.labels.array() == 0).count() == 20);

  // Minority rows all kept, majority subset of the input rows.
  const auto repeat = random_undersample(ds, 9);
  CHECK(balanced.features == repeat.features);
  const auto other_seed = random_undersample(ds, 10);
  CHECK(balanced.features != other_seed.features);
}

TEST_CASE("undersampling keeps every minority sample") {
  std::mt19937_64 rng(44);
  Dataset ds;
  ds.features = Eigen::MatrixXd::Random(60, 1);
  ds.labels.resize(60);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 60; ++i) ds.labels[i] = u(rng) < 0.3 ? 1 : 0;

  const auto balanced = random_undersample(ds, 5);
  std::vector<double> minority_in, minority_out;
  for (int i = 0; i < 60; ++i)
    if (ds.labels[i] == 1) minority_in.push_back(ds.features(i, 0));
  for (int i = 0; i < balanced.sample_count(); ++i)
    if (balanced.labels[i] == 1) minority_out.push_back(balanced.features(i, 0));
  CHECK(minority_in == minority_out);
}

TEST_CASE("already balanced data passes through unchanged") {
  Dataset ds;
  ds.features = Eigen::MatrixXd::Random(10, 2);
  ds.labels.resize(10);
  for (int i = 0; i < 10; ++i) ds.labels[i] = i % 2;
  const auto balanced = random_undersample(ds, 1);
  CHECK(balanced.features == ds.features);
  CHECK(balanced.labels == ds.labels);
}

TEST_CASE("undersampling a single-class dataset fails") {
  Dataset ds;
  ds.features = Eigen::MatrixXd::Random(5, 1);
  ds.labels = Eigen::VectorXi::Zero(5);
  CHECK_THROWS_AS(random_undersample(ds, 0), DataError);
}

// ---------------------------------------------------------------------------
// generate_synthetic
// ---------------------------------------------------------------------------

TEST_CASE("synthetic prior tracks the requested default rate") {
  const auto ds = generate_synthetic(10000, 6, 0.183, 1.0, 3, 7);
  const double rate =
      (ds.labels.array() == 1).cast<double>().sum() / 10000.0;
  CHECK(std::abs(rate - 0.183) <= 0.01);

  const auto big = generate_synthetic(100000, 4, 0.183, 1.0, 2, 11);
  const double big_rate =
      (big.labels.array() == 1).cast<double>().sum() / 100000.0;
  CHECK(std::abs(big_rate - 0.183) <= 0.005);
}

TEST_CASE("zero separation gives a chance-level learner") {
  const auto train = generate_synthetic(2000, 5, 0.3, 0.0, 2, 3);
  const auto test = generate_synthetic(2000, 5, 0.3, 0.0, 2, 4);
  const auto model = fit_logistic(train.features, train.labels);
  const auto supports = model.predict_supports(test.features);
  const double auc = oracle::auc_pairs(supports.col(1), test.labels);
  CHECK(auc >= 0.45);
  CHECK(auc <= 0.55);
}

TEST_CASE("synthetic generation is deterministic per seed") {
  const auto a = generate_synthetic(500, 4, 0.2, 1.0, 2, 42);
  const auto b = generate_synthetic(500, 4, 0.2, 1.0, 2, 42);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const auto c = generate_synthetic(500, 4, 0.2, 1.0, 2, 43);
  CHECK(a.features != c.features);
}

TEST_CASE("synthetic parameter validation") {
  CHECK_THROWS_AS(generate_synthetic(10, 2, 0.0, 1.0, 1, 0), DataError);
  CHECK_THROWS_AS(generate_synthetic(10, 2, 0.5, 1.0, 3, 0), DataError);
  CHECK_THROWS_AS(generate_synthetic(0, 2, 0.5, 1.0, 1, 0), DataError);
}

// ---------------------------------------------------------------------------
// external predictions
// ---------------------------------------------------------------------------

TEST_CASE("external predictions assemble per-sample matrices") {
  const auto path = write_file("ext",
                               "sample_id,classifier_id,class_0,class_1,label\n"
                               "s1,a,0.7,0.3,0\n"
                               "s1,b,0.4,0.6,0\n"
                               "s2,a,0.2,0.8,1\n"
                               "s2,b,0.1,0.9,1\n");
  const auto ext = load_external_predictions(path.string());
  CHECK(ext.supports.size() == 2);
  CHECK(ext.classifier_ids == std::vector<std::string>{"a", "b"});
  CHECK(ext.sample_ids == std::vector<std::string>{"s1", "s2"});
  CHECK(ext.class_count == 2);
  CHECK(ext.has_labels);
  CHECK(ext.labels[0] == 0);
  CHECK(ext.labels[1] == 1);
  CHECK(ext.supports[0](0, 0) == doctest::Approx(0.7));
  CHECK(ext.supports[1](1, 1) == doctest::Approx(0.9));
}

TEST_CASE("slightly off rows renormalize, bad rows name the pair") {
  const auto near = write_file("near",
                               "sample_id,classifier_id,class_0,class_1\n"
                               "s1,a,0.7000004,0.3\n");
  const auto ext = load_external_predictions(near.string());
  CHECK(ext.supports[0].row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(ext.has_labels);

  const auto bad = write_file("bad",
                              "sample_id,classifier_id,class_0,class_1\n"
                              "s1,a,0.5,0.3\n");
  CHECK_THROWS_WITH_AS(load_external_predictions(bad.string()),
                       doctest::Contains("s1"), DataError);
}

TEST_CASE("external predictions demand complete pairs") {
  const auto gap = write_file("gap",
                              "sample_id,classifier_id,class_0,class_1\n"
                              "s1,a,0.7,0.3\n"
                              "s1,b,0.4,0.6\n"
                              "s2,a,0.2,0.8\n");
  CHECK_THROWS_WITH_AS(load_external_predictions(gap.string()),
                       doctest::Contains("s2"), DataError);

  const auto dup = write_file("dup",
                              "sample_id,classifier_id,class_0,class_1\n"
                              "s1,a,0.7,0.3\n"
                              "s1,a,0.7,0.3\n");
  CHECK_THROWS_AS(load_external_predictions(dup.string()), DataError);
}
