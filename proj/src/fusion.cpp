#include "chofuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>

#include "chofuse/learners.hpp"
#include "chofuse/parallel.hpp"

namespace chofuse {

namespace {

int argmax_tie_low(const Eigen::VectorXd& values) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < values.size(); ++j)
    if (values[j] > values[best]) best = j;
  return static_cast<int>(best);
}

double positive_share(const Eigen::VectorXd& integrals) {
  const double total = integrals.sum();
  if (!(total > 0.0)) return 0.5;
  return integrals[1] / total;
}

void check_sample_shape(const Eigen::Ref<const Eigen::MatrixXd>& supports,
                        const DensityTable& densities) {
  if (supports.rows() != densities.rows() ||
      supports.cols() != densities.cols())
    throw std::invalid_argument(
        "fuse_sample: supports and density table shapes differ");
  if (supports.cols() < 2)
    throw std::invalid_argument("fuse_sample: need at least two classes");
}

// Per-class measures for one hard-prediction pattern.
std::vector<LambdaMeasure> measures_for_pattern(
    const Eigen::VectorXi& pattern, const DensityTable& densities,
    const std::vector<ProbabilityMatrix>& pms, const PairwiseJointTable& table,
    const AdaptiveConfig& cfg) {
  const DensityTable adapted =
      adapt_densities(densities, pattern, pms, table, cfg);
  std::vector<LambdaMeasure> measures;
  measures.reserve(static_cast<std::size_t>(adapted.cols()));
  for (Eigen::Index j = 0; j < adapted.cols(); ++j) {
    const Densities column = adapted.col(j)
                                 .cwiseMax(cfg.density_floor)
                                 .cwiseMin(kDensityCap);
    measures.push_back(LambdaMeasure::fit(column));
  }
  return measures;
}

FusionOutcome integrate_sample(const Eigen::Ref<const Eigen::MatrixXd>& supports,
                               const std::vector<LambdaMeasure>& measures) {
  FusionOutcome outcome;
  outcome.integrals.resize(supports.cols());
  for (Eigen::Index j = 0; j < supports.cols(); ++j)
    outcome.integrals[j] = choquet_integral(
        supports.col(j), measures[static_cast<std::size_t>(j)]);
  outcome.predicted_class = argmax_tie_low(outcome.integrals);
  outcome.score = positive_share(outcome.integrals);
  return outcome;
}

}  // namespace

FusionOutcome fuse_sample(const Eigen::Ref<const Eigen::MatrixXd>& supports,
                          const DensityTable& densities,
                          const std::vector<ProbabilityMatrix>& pms,
                          const PairwiseJointTable& table,
                          const AdaptiveConfig& cfg) {
  check_sample_shape(supports, densities);
  const Eigen::VectorXi pattern = hard_labels(supports);
  return integrate_sample(
      supports, measures_for_pattern(pattern, densities, pms, table, cfg));
}

std::vector<FusionOutcome> fuse_dataset(
    const std::vector<Eigen::MatrixXd>& supports, const DensityTable& densities,
    const std::vector<ProbabilityMatrix>& pms, const PairwiseJointTable& table,
    const AdaptiveConfig& cfg, int workers) {
  std::vector<FusionOutcome> outcomes(supports.size());
  if (supports.empty()) return outcomes;

  // The measure per class depends on the sample only through its hard
  // predictions, so patterns are resolved once up front.
  std::vector<Eigen::VectorXi> patterns(supports.size());
  std::map<std::vector<int>, std::vector<LambdaMeasure>> cache;
  for (std::size_t s = 0; s < supports.size(); ++s) {
    check_sample_shape(supports[s], densities);
    patterns[s] = hard_labels(supports[s]);
    std::vector<int> key(patterns[s].begin(), patterns[s].end());
    if (!cache.count(key))
      cache.emplace(key, measures_for_pattern(patterns[s], densities, pms,
                                              table, cfg));
  }

  std::mutex error_mutex;
  std::size_t first_bad = supports.size();
  std::string first_message;
  parallel_for(supports.size(), workers, [&](std::size_t s) {
    try {
      const std::vector<int> key(patterns[s].begin(), patterns[s].end());
      outcomes[s] = integrate_sample(supports[s], cache.at(key));
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (s < first_bad) {
        first_bad = s;
        first_message = e.what();
      }
    }
  });
  if (first_bad < supports.size())
    throw DataError("fuse_dataset: sample " + std::to_string(first_bad) +
                    ": " + first_message);
  return outcomes;
}

Eigen::VectorXi majority_vote(const std::vector<Eigen::MatrixXd>& supports) {
  Eigen::VectorXi winners(static_cast<Eigen::Index>(supports.size()));
  for (std::size_t s = 0; s < supports.size(); ++s) {
    const Eigen::MatrixXd& h = supports[s];
    const Eigen::VectorXi votes = hard_labels(h);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(h.cols());
    for (Eigen::Index i = 0; i < votes.size(); ++i) counts[votes[i]]++;

    const int top = counts.maxCoeff();
    int winner = -1;
    double winner_support = -1.0;
    for (Eigen::Index j = 0; j < counts.size(); ++j) {
      if (counts[j] != top) continue;
      const double summed = h.col(j).sum();
      if (summed > winner_support) {
        winner = static_cast<int>(j);
        winner_support = summed;
      }
    }
    winners[static_cast<Eigen::Index>(s)] = winner;
  }
  return winners;
}

Eigen::VectorXd majority_vote_scores(const std::vector<Eigen::MatrixXd>& supports) {
  Eigen::VectorXd scores(static_cast<Eigen::Index>(supports.size()));
  for (std::size_t s = 0; s < supports.size(); ++s) {
    const Eigen::VectorXi votes = hard_labels(supports[s]);
    scores[static_cast<Eigen::Index>(s)] =
        (votes.array() == 1).cast<double>().sum() /
        static_cast<double>(votes.size());
  }
  return scores;
}

double owa_aggregate(const Eigen::Ref<const Eigen::VectorXd>& values,
                     const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (values.size() != weights.size())
    throw std::invalid_argument("owa_aggregate: weight/value sizes differ");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    acc += weights[i] * sorted[static_cast<std::size_t>(i)];
  return acc;
}

std::vector<FusionOutcome> owa_fuse_weighted(
    const std::vector<Eigen::MatrixXd>& supports,
    const Eigen::Ref<const Eigen::VectorXd>& weights) {
  std::vector<FusionOutcome> outcomes(supports.size());
  for (std::size_t s = 0; s < supports.size(); ++s) {
    const Eigen::MatrixXd& h = supports[s];
    FusionOutcome& outcome = outcomes[s];
    outcome.integrals.resize(h.cols());
    for (Eigen::Index j = 0; j < h.cols(); ++j)
      outcome.integrals[j] = owa_aggregate(h.col(j), weights);
    outcome.predicted_class = argmax_tie_low(outcome.integrals);
    outcome.score = positive_share(outcome.integrals);
  }
  return outcomes;
}

std::vector<FusionOutcome> owa_fuse(const std::vector<Eigen::MatrixXd>& supports,
                                    OwaMode mode) {
  if (supports.empty()) return {};
  const Eigen::Index sources = supports.front().rows();
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(sources);
  weights[mode == OwaMode::kOptimistic ? 0 : sources - 1] = 1.0;
  return owa_fuse_weighted(supports, weights);
}

void write_outcomes_csv(std::ostream& out,
                        const std::vector<FusionOutcome>& outcomes,
                        const std::vector<std::string>& sample_ids) {
  const Eigen::Index classes =
      outcomes.empty() ? 2 : outcomes.front().integrals.size();
  out << "sample_id,predicted_class,score";
  for (Eigen::Index j = 0; j < classes; ++j) out << ",integral_class_" << j;
  out << "\n";
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    out << (s < sample_ids.size() ? sample_ids[s] : std::to_string(s)) << ','
        << outcomes[s].predicted_class << ',' << outcomes[s].score;
    for (Eigen::Index j = 0; j < outcomes[s].integrals.size(); ++j)
      out << ',' << outcomes[s].integrals[j];
    out << "\n";
  }
}

nlohmann::json outcomes_to_json(const std::vector<FusionOutcome>& outcomes,
                                const std::vector<std::string>& sample_ids) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    rows.push_back(
        {{"sample_id", s < sample_ids.size() ? sample_ids[s] : std::to_string(s)},
         {"predicted_class", outcomes[s].predicted_class},
         {"score", outcomes[s].score},
         {"integrals", std::vector<double>(outcomes[s].integrals.begin(),
                                           outcomes[s].integrals.end())}});
  }
  return rows;
}

}  // namespace chofuse
