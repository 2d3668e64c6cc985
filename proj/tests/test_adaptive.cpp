#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "chofuse/adaptive.hpp"
#include "oracles.hpp"

using namespace chofuse;

namespace {

Eigen::VectorXi vec(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (int x : v) out[i++] = x;
  return out;
}

ProbabilityMatrix pm2(double a, double b, double c, double d) {
  ProbabilityMatrix pm;
  pm.probs = Eigen::MatrixXd(2, 2);
  pm.probs << a, b, c, d;
  pm.degenerate_rows = {false, false};
  return pm;
}

}  // namespace

TEST_CASE("build_confusion counts by true class row") {
  const auto cm = build_confusion(vec({0, 0, 1, 1, 1}), vec({0, 1, 1, 1, 0}), 2);
  CHECK(cm(0, 0) == 1);
  CHECK(cm(0, 1) == 1);
  CHECK(cm(1, 0) == 1);
  CHECK(cm(1, 1) == 2);

  const auto perfect = build_confusion(vec({0, 1, 0, 1}), vec({0, 1, 0, 1}), 2);
  CHECK(perfect(0, 0) == 2);
  CHECK(perfect(1, 1) == 2);
  CHECK(perfect(0, 1) == 0);
  CHECK(perfect(1, 0) == 0);

  const auto constant = build_confusion(vec({0, 0, 0, 0}), vec({0, 0, 1, 1}), 2);
  CHECK(constant(0, 0) == 2);
  CHECK(constant(1, 0) == 2);
  CHECK(constant.col(1).sum() == 0);
}

TEST_CASE("build_confusion error paths") {
  CHECK_THROWS_AS(build_confusion(vec({0, 2}), vec({0, 0}), 2), DataError);
  CHECK_THROWS_AS(build_confusion(Eigen::VectorXi(), Eigen::VectorXi(), 2),
                  DataError);
  CHECK_THROWS_AS(build_confusion(vec({0}), vec({0, 1}), 2),
                  std::invalid_argument);
}

TEST_CASE("row_normalize divides by row totals and flags empty rows") {
  CountMatrix cm(2, 2);
  cm << 80, 20, 10, 90;
  const auto pm = row_normalize(cm);
  CHECK(pm.probs(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(pm.probs(1, 1) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK_FALSE(pm.degenerate_rows[0]);

  cm << 2, 0, 0, 2;
  CHECK(row_normalize(cm).probs.isApprox(Eigen::MatrixXd::Identity(2, 2)));

  cm << 0, 0, 3, 1;
  const auto degen = row_normalize(cm);
  CHECK(degen.degenerate_rows[0]);
  CHECK(degen.probs.row(0).sum() == 0.0);
  CHECK(degen.probs(1, 0) == doctest::Approx(0.75));
  CHECK(degen.probs(1, 1) == doctest::Approx(0.25));
}

TEST_CASE("row normalization is stochastic on random counts") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> count(0, 30);
  for (int trial = 0; trial < 200; ++trial) {
    CountMatrix cm(3, 3);
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) cm(j, k) = count(rng);
    const auto pm = row_normalize(cm);
    for (int j = 0; j < 3; ++j) {
      if (pm.degenerate_rows[static_cast<std::size_t>(j)]) continue;
      CHECK(std::abs(pm.probs.row(j).sum() - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("initial_densities reads the diagonal with a floor") {
  std::vector<ProbabilityMatrix> pms{pm2(0.8, 0.2, 0.1, 0.9)};
  const auto g = initial_densities(pms);
  CHECK(g(0, 0) == doctest::Approx(0.8));
  CHECK(g(0, 1) == doctest::Approx(0.9));

  pms[0] = pm2(1.0, 0.0, 0.0, 1.0);
  CHECK(initial_densities(pms)(0, 0) == 1.0);

  pms[0] = pm2(0.0, 1.0, 0.5, 0.5);
  CHECK(initial_densities(pms)(0, 0) == 1e-4);
}

TEST_CASE("build_pairwise_tables worked examples") {
  // Ten class-0 samples, both classifiers perfect.
  Eigen::MatrixXi preds = Eigen::MatrixXi::Zero(2, 10);
  Eigen::VectorXi labels = Eigen::VectorXi::Zero(10);
  auto table = build_pairwise_tables(preds, labels, 2);
  CHECK(table.at(0, 1, 0, 0) == doctest::Approx(1.0));
  CHECK(table.at(0, 1, 0, 1) == 0.0);
  CHECK(table.degenerate_classes[1]);

  // Classifier 0 predicts 1 on three samples; classifier 1 right everywhere.
  preds.row(0) << 1, 1, 1, 0, 0, 0, 0, 0, 0, 0;
  table = build_pairwise_tables(preds, labels, 2);
  CHECK(table.at(0, 1, 0, 1) == doctest::Approx(0.3));
  CHECK(table.at(0, 1, 0, 0) == doctest::Approx(0.7));

  // Classifier 1 wrong everywhere: the "m correct" event never happens.
  preds.row(0).setZero();
  preds.row(1).setOnes();
  table = build_pairwise_tables(preds, labels, 2);
  CHECK(table.at(0, 1, 0, 0) == 0.0);
  CHECK(table.at(0, 1, 0, 1) == 0.0);
}

TEST_CASE("counting matches a brute-force tally on small datasets") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> label_dist(0, 2);
  std::uniform_int_distribution<Eigen::Index> n_dist(1, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = n_dist(rng);
    Eigen::VectorXi labels(n);
    Eigen::MatrixXi preds(3, n);
    for (Eigen::Index s = 0; s < n; ++s) {
      labels[s] = label_dist(rng);
      for (int i = 0; i < 3; ++i) preds(i, s) = label_dist(rng);
    }
    for (int i = 0; i < 3; ++i) {
      const auto cm = build_confusion(preds.row(i).transpose(), labels, 3);
      const auto want = oracle::confusion_tally(preds.row(i).transpose(), labels, 3);
      CHECK(cm.cast<int>() == want);
    }
    const auto table = build_pairwise_tables(preds, labels, 3);
    for (int i = 0; i < 3; ++i)
      for (int m = 0; m < 3; ++m) {
        if (i == m) continue;
        for (int j = 0; j < 3; ++j)
          for (int k = 0; k < 3; ++k)
            CHECK(table.at(i, m, j, k) ==
                  oracle::pairwise_fraction(preds, labels, i, m, j, k));
      }
  }
}

TEST_CASE("delta_factor branches") {
  AdaptiveConfig cfg;
  const auto pm = pm2(0.8, 0.2, 0.3, 0.7);
  PairwiseJointTable table(2, 2);

  CHECK(delta_factor(pm, table, 0, 1, 0, 1, 1, cfg) == 1.0);

  table.at(0, 1, 0, 0) = 0.1;
  CHECK(delta_factor(pm, table, 0, 1, 0, 0, 1, cfg) == doctest::Approx(0.875));

  // Raw value negative: clamped up to epsilon.
  const auto weak = pm2(0.05, 0.95, 0.5, 0.5);
  table.at(0, 1, 0, 0) = 0.2;
  CHECK(delta_factor(weak, table, 0, 1, 0, 0, 1, cfg) == cfg.epsilon);

  // Degenerate diagonal.
  const auto degen = pm2(0.0, 1.0, 0.5, 0.5);
  CHECK(delta_factor(degen, table, 0, 1, 0, 0, 1, cfg) == cfg.epsilon);
}

TEST_CASE("gamma_factor branches") {
  AdaptiveConfig cfg;
  // Three classes so k1, k2 and j can be pairwise distinct.
  ProbabilityMatrix pm_i, pm_m;
  pm_i.probs = Eigen::MatrixXd::Zero(3, 3);
  pm_m.probs = Eigen::MatrixXd::Zero(3, 3);
  pm_i.probs(0, 1) = 0.2;
  pm_m.probs(0, 2) = 0.3;
  CHECK(gamma_factor(pm_i, pm_m, 0, 1, 2, cfg) == 1.0);

  pm_i.probs(0, 1) = 0.3;
  pm_m.probs(0, 2) = 0.2;
  CHECK(gamma_factor(pm_i, pm_m, 0, 1, 2, cfg) == doctest::Approx(2.0 / 3.0));

  pm_m.probs(0, 2) = 0.0;
  pm_i.probs(0, 1) = 0.1;
  CHECK(gamma_factor(pm_i, pm_m, 0, 1, 2, cfg) == cfg.epsilon);

  // Hypothesis matching either prediction, or agreement, leaves 1.
  CHECK(gamma_factor(pm_i, pm_m, 1, 1, 2, cfg) == 1.0);
  CHECK(gamma_factor(pm_i, pm_m, 2, 1, 2, cfg) == 1.0);
  CHECK(gamma_factor(pm_i, pm_m, 0, 1, 1, cfg) == 1.0);
}

TEST_CASE("adapt_densities worked examples") {
  AdaptiveConfig cfg;  // w1 = 0.9, w2 = 0.6

  // Single disagreeing peer, delta = 0.875, gamma = 1.
  std::vector<ProbabilityMatrix> pms{pm2(0.8, 0.2, 0.3, 0.7),
                                     pm2(0.6, 0.4, 0.4, 0.6)};
  PairwiseJointTable table(2, 2);
  table.at(0, 1, 0, 0) = 0.1;
  DensityTable g(2, 2);
  g << 0.8, 0.5, 0.5, 0.5;
  const auto adapted = adapt_densities(g, vec({0, 1}), pms, table, cfg);
  CHECK(adapted(0, 0) == doctest::Approx(0.8 * std::pow(0.875, 0.9)).epsilon(1e-12));

  // delta = 0.5 and gamma = 0.5 with unit exponents: 0.8 * 0.5 * 0.5.
  AdaptiveConfig unit;
  unit.w1 = 1.0;
  unit.w2 = 1.0;
  ProbabilityMatrix a, b;
  a.probs = Eigen::MatrixXd::Zero(3, 3);
  b.probs = Eigen::MatrixXd::Zero(3, 3);
  a.probs(0, 0) = 0.8;
  a.probs(0, 1) = 0.2;   // err of classifier 0 toward label 1
  b.probs(0, 2) = 0.1;   // err of classifier 1 toward label 2
  PairwiseJointTable t3(2, 3);
  t3.at(0, 1, 0, 1) = 0.4;  // (0.8 - 0.4)/0.8 = 0.5
  DensityTable g3(2, 3);
  g3.setConstant(0.8);
  const auto out = adapt_densities(g3, vec({1, 2}), {a, b}, t3, unit);
  CHECK(out(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("unanimous predictions leave densities bit-identical") {
  AdaptiveConfig cfg;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ProbabilityMatrix> pms;
    for (int i = 0; i < 3; ++i) {
      const double d0 = u(rng), d1 = u(rng);
      pms.push_back(pm2(d0, 1 - d0, 1 - d1, d1));
    }
    PairwiseJointTable table(3, 2);
    for (int i = 0; i < 3; ++i)
      for (int m = 0; m < 3; ++m)
        if (i != m)
          for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) table.at(i, m, j, k) = 0.5 * u(rng);
    DensityTable g(3, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) g(i, j) = u(rng);

    const int label = trial % 2;
    const auto adapted = adapt_densities(g, vec({label, label, label}), pms,
                                         table, cfg);
    CHECK((adapted.array() == g.array()).all());
  }
}

TEST_CASE("adaptation never raises a density") {
  AdaptiveConfig cfg;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::uniform_int_distribution<int> lab(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ProbabilityMatrix> pms;
    for (int i = 0; i < 3; ++i) {
      const double d0 = u(rng), d1 = u(rng);
      pms.push_back(pm2(d0, 1 - d0, 1 - d1, d1));
    }
    PairwiseJointTable table(3, 2);
    for (int i = 0; i < 3; ++i)
      for (int m = 0; m < 3; ++m)
        if (i != m)
          for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) table.at(i, m, j, k) = u(rng);
    DensityTable g(3, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) g(i, j) = u(rng);

    const auto preds = vec({lab(rng), lab(rng), lab(rng)});
    const auto adapted = adapt_densities(g, preds, pms, table, cfg);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) {
        CHECK(adapted(i, j) <= g(i, j) + 1e-15);
        CHECK(adapted(i, j) >= cfg.density_floor);
      }
  }
}

TEST_CASE("adaptive config validation") {
  AdaptiveConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = AdaptiveConfig{};
  cfg.w1 = 2.5;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = AdaptiveConfig{};
  cfg.density_floor = 0.5;
  CHECK_THROWS_AS(cfg.validate(), DataError);
}
