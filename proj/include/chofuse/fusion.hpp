#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

#include "chofuse/adaptive.hpp"
#include "chofuse/measure.hpp"

namespace chofuse {

// Densities are capped just below 1 before fitting a measure: a singleton
// density of exactly 1 beside another positive one admits no lambda > -1.
inline constexpr double kDensityCap = 1.0 - 1e-6;

struct FusionOutcome {
  int predicted_class = 0;
  Eigen::VectorXd integrals;  // per-class Choquet values (or OWA aggregates)
  double score = 0.5;         // normalized positive-class share
};

// One sample's supports are a sources x classes probability-row matrix.
// Adapts the densities to the sample's hard predictions, fits a
// lambda-measure per class and integrates that class's support column.
FusionOutcome fuse_sample(const Eigen::Ref<const Eigen::MatrixXd>& supports,
                          const DensityTable& densities,
                          const std::vector<ProbabilityMatrix>& pms,
                          const PairwiseJointTable& table,
                          const AdaptiveConfig& cfg);

// Elementwise fuse_sample, output order matches input order. Adapted
// measures are cached per hard-prediction pattern since they do not depend
// on the soft supports.
std::vector<FusionOutcome> fuse_dataset(
    const std::vector<Eigen::MatrixXd>& supports,
    const DensityTable& densities, const std::vector<ProbabilityMatrix>& pms,
    const PairwiseJointTable& table, const AdaptiveConfig& cfg,
    int workers = 1);

// Most hard votes per sample; ties go to the larger summed support, then to
// the lower class index.
Eigen::VectorXi majority_vote(const std::vector<Eigen::MatrixXd>& supports);

// Vote share of class 1, used as the majority-vote ranking score.
Eigen::VectorXd majority_vote_scores(const std::vector<Eigen::MatrixXd>& supports);

enum class OwaMode { kOptimistic, kPessimistic };

// Ordered weighted average: weights applied to the values sorted descending.
double owa_aggregate(const Eigen::Ref<const Eigen::VectorXd>& values,
                     const Eigen::Ref<const Eigen::VectorXd>& weights);

// Per class, aggregates the classifiers' supports with the given OWA weight
// vector (length = source count) and predicts the argmax.
std::vector<FusionOutcome> owa_fuse_weighted(
    const std::vector<Eigen::MatrixXd>& supports,
    const Eigen::Ref<const Eigen::VectorXd>& weights);

// Optimistic = weight (1, 0, ..., 0) on sorted supports (max); pessimistic =
// (0, ..., 0, 1) (min).
std::vector<FusionOutcome> owa_fuse(const std::vector<Eigen::MatrixXd>& supports,
                                    OwaMode mode);

// sample_id, predicted_class, score, one integral column per class
void write_outcomes_csv(std::ostream& out,
                        const std::vector<FusionOutcome>& outcomes,
                        const std::vector<std::string>& sample_ids = {});

nlohmann::json outcomes_to_json(const std::vector<FusionOutcome>& outcomes,
                                const std::vector<std::string>& sample_ids = {});

}  // namespace chofuse
