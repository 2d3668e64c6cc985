#include "chofuse/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace chofuse {

namespace {

void check_label_range(const Eigen::Ref<const Eigen::VectorXi>& v, int classes,
                       const char* what) {
  for (Eigen::Index s = 0; s < v.size(); ++s)
    if (v[s] < 0 || v[s] >= classes)
      throw DataError(std::string(what) + " out of range at sample " +
                      std::to_string(s) + ": " + std::to_string(v[s]));
}

}  // namespace

PairwiseJointTable::PairwiseJointTable(int source_count, int class_count)
    : degenerate_classes(static_cast<std::size_t>(class_count), false),
      sources_(source_count),
      classes_(class_count) {
  if (source_count < 1 || class_count < 1)
    throw std::invalid_argument("PairwiseJointTable: empty dimensions");
  tables_.assign(static_cast<std::size_t>(source_count) * source_count,
                 Eigen::MatrixXd::Zero(class_count, class_count));
}

std::size_t PairwiseJointTable::pair_index(int i, int m) const {
  if (i < 0 || i >= sources_ || m < 0 || m >= sources_)
    throw std::invalid_argument("PairwiseJointTable: source index out of range");
  return static_cast<std::size_t>(i) * sources_ + m;
}

void AdaptiveConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 0.01))
    throw DataError("adaptive config: epsilon must lie in (0, 0.01]");
  if (!(density_floor > 0.0 && density_floor <= 0.01))
    throw DataError("adaptive config: density_floor must lie in (0, 0.01]");
  if (!(w1 >= 0.0 && w1 <= 2.0) || !(w2 >= 0.0 && w2 <= 2.0))
    throw DataError("adaptive config: w1 and w2 must lie in [0, 2]");
}

CountMatrix build_confusion(const Eigen::Ref<const Eigen::VectorXi>& predictions,
                            const Eigen::Ref<const Eigen::VectorXi>& true_labels,
                            int class_count) {
  if (predictions.size() != true_labels.size())
    throw std::invalid_argument("build_confusion: size mismatch");
  if (true_labels.size() == 0) throw DataError("build_confusion: empty dataset");
  check_label_range(true_labels, class_count, "true label");
  check_label_range(predictions, class_count, "prediction");

  CountMatrix counts = CountMatrix::Zero(class_count, class_count);
  for (Eigen::Index s = 0; s < true_labels.size(); ++s)
    counts(true_labels[s], predictions[s])++;
  return counts;
}

ProbabilityMatrix row_normalize(const CountMatrix& counts) {
  ProbabilityMatrix pm;
  pm.probs = Eigen::MatrixXd::Zero(counts.rows(), counts.cols());
  pm.degenerate_rows.assign(static_cast<std::size_t>(counts.rows()), false);
  for (Eigen::Index j = 0; j < counts.rows(); ++j) {
    const double row_total = static_cast<double>(counts.row(j).sum());
    if (row_total <= 0.0) {
      pm.degenerate_rows[static_cast<std::size_t>(j)] = true;
      continue;
    }
    for (Eigen::Index k = 0; k < counts.cols(); ++k)
      pm.probs(j, k) = static_cast<double>(counts(j, k)) / row_total;
  }
  return pm;
}

DensityTable initial_densities(const std::vector<ProbabilityMatrix>& pms,
                               double density_floor) {
  if (pms.empty()) throw std::invalid_argument("initial_densities: no sources");
  const Eigen::Index classes = pms.front().probs.rows();
  DensityTable g(static_cast<Eigen::Index>(pms.size()), classes);
  for (std::size_t i = 0; i < pms.size(); ++i) {
    if (pms[i].probs.rows() != classes || pms[i].probs.cols() != classes)
      throw std::invalid_argument("initial_densities: inconsistent shapes");
    for (Eigen::Index j = 0; j < classes; ++j)
      g(static_cast<Eigen::Index>(i), j) =
          std::clamp(pms[i].probs(j, j), density_floor, 1.0);
  }
  return g;
}

PairwiseJointTable build_pairwise_tables(
    const Eigen::Ref<const Eigen::MatrixXi>& predictions,
    const Eigen::Ref<const Eigen::VectorXi>& true_labels, int class_count) {
  const int sources = static_cast<int>(predictions.rows());
  if (predictions.cols() != true_labels.size())
    throw std::invalid_argument("build_pairwise_tables: size mismatch");
  if (true_labels.size() == 0)
    throw DataError("build_pairwise_tables: empty dataset");
  check_label_range(true_labels, class_count, "true label");
  for (int i = 0; i < sources; ++i)
    check_label_range(predictions.row(i).transpose(), class_count, "prediction");

  PairwiseJointTable table(sources, class_count);
  Eigen::VectorXi class_sizes = Eigen::VectorXi::Zero(class_count);
  for (Eigen::Index s = 0; s < true_labels.size(); ++s)
    class_sizes[true_labels[s]]++;
  for (int j = 0; j < class_count; ++j)
    table.degenerate_classes[static_cast<std::size_t>(j)] = class_sizes[j] == 0;

  for (Eigen::Index s = 0; s < true_labels.size(); ++s) {
    const int j = true_labels[s];
    for (int i = 0; i < sources; ++i) {
      for (int m = 0; m < sources; ++m) {
        if (i == m) continue;
        if (predictions(m, s) == j)
          table.at(i, m, j, predictions(i, s)) += 1.0;
      }
    }
  }
  for (int i = 0; i < sources; ++i)
    for (int m = 0; m < sources; ++m) {
      if (i == m) continue;
      for (int j = 0; j < class_count; ++j) {
        if (class_sizes[j] == 0) continue;
        for (int k = 0; k < class_count; ++k)
          table.at(i, m, j, k) /= static_cast<double>(class_sizes[j]);
      }
    }
  return table;
}

double delta_factor(const ProbabilityMatrix& pm_i,
                    const PairwiseJointTable& table, int i, int m, int j,
                    int k1, int k2, const AdaptiveConfig& cfg) {
  if (k1 == k2) return 1.0;
  const double p_jj = pm_i.probs(j, j);
  if (p_jj <= 0.0) return cfg.epsilon;
  const double raw = (p_jj - table.at(i, m, j, k1)) / p_jj;
  return std::clamp(raw, cfg.epsilon, 1.0);
}

double gamma_factor(const ProbabilityMatrix& pm_i,
                    const ProbabilityMatrix& pm_m, int j, int k1, int k2,
                    const AdaptiveConfig& cfg) {
  if (k1 == j || k2 == j || k1 == k2) return 1.0;
  const double err_i = pm_i.probs(j, k1);
  const double err_m = pm_m.probs(j, k2);
  if (err_i <= err_m) return 1.0;
  if (err_m <= 0.0) return cfg.epsilon;
  return err_m / err_i;
}

DensityTable adapt_densities(const DensityTable& densities,
                             const Eigen::Ref<const Eigen::VectorXi>& sample_predictions,
                             const std::vector<ProbabilityMatrix>& pms,
                             const PairwiseJointTable& table,
                             const AdaptiveConfig& cfg) {
  const int sources = static_cast<int>(densities.rows());
  const int classes = static_cast<int>(densities.cols());
  if (sample_predictions.size() != sources)
    throw std::invalid_argument("adapt_densities: one prediction per source required");
  if (static_cast<int>(pms.size()) != sources)
    throw std::invalid_argument("adapt_densities: one probability matrix per source required");

  DensityTable adapted(sources, classes);
  for (int i = 0; i < sources; ++i) {
    const int k1 = sample_predictions[i];
    for (int j = 0; j < classes; ++j) {
      double delta_prod = 1.0;
      double gamma_prod = 1.0;
      for (int m = 0; m < sources; ++m) {
        if (m == i) continue;
        const int k2 = sample_predictions[m];
        delta_prod *= delta_factor(pms[static_cast<std::size_t>(i)], table, i,
                                   m, j, k1, k2, cfg);
        gamma_prod *= gamma_factor(pms[static_cast<std::size_t>(i)],
                                   pms[static_cast<std::size_t>(m)], j, k1, k2,
                                   cfg);
      }
      double value = densities(i, j) * std::pow(delta_prod, cfg.w1) *
                     std::pow(gamma_prod, cfg.w2);
      if (value < cfg.density_floor) value = cfg.density_floor;
      if (value > 1.0) value = 1.0;
      adapted(i, j) = value;
    }
  }
  return adapted;
}

}  // namespace chofuse
