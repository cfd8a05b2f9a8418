#pragma once

// Log Expected Empirical Prediction (LEEP) transferability score and per-task
// min-max normalization of the scores of cluster representatives.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twophase/error.hpp"
#include "twophase/repository.hpp"

namespace twophase {

struct LeepOptions {
  // When set, per-row likelihoods are clamped below at this value instead of failing on log(0).
  std::optional<double> likelihood_floor;
};

// Empirical joint P(y, z) over target labels y and source labels z.
inline std::vector<std::vector<double>> empirical_joint(const PredictionDump& dump) {
  const auto n = dump.rows();
  const auto y_count = static_cast<std::size_t>(dump.target_label_count());
  std::vector<std::vector<double>> joint(y_count, std::vector<double>(dump.source_label_count, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = joint[static_cast<std::size_t>(dump.labels[i])];
    for (std::size_t z = 0; z < dump.source_label_count; ++z) row[z] += dump.probs[i][z];
  }
  for (auto& row : joint)
    for (auto& p : row) p /= static_cast<double>(n);
  return joint;
}

inline double leep_score(const PredictionDump& dump, const LeepOptions& options = {}) {
  if (dump.rows() == 0) throw Error(ErrorKind::no_data, "LEEP needs at least one row");
  const auto joint = empirical_joint(dump);
  const auto z_count = dump.source_label_count;

  std::vector<double> marginal(z_count, 0.0);
  for (const auto& row : joint)
    for (std::size_t z = 0; z < z_count; ++z) marginal[z] += row[z];

  // P(y | z); a source label with zero mass never receives any probability, so its column is unused.
  auto conditional = joint;
  for (auto& row : conditional)
    for (std::size_t z = 0; z < z_count; ++z) row[z] = marginal[z] > 0.0 ? row[z] / marginal[z] : 0.0;

  double total = 0.0;
  for (std::size_t i = 0; i < dump.rows(); ++i) {
    const auto& cond = conditional[static_cast<std::size_t>(dump.labels[i])];
    double likelihood = 0.0;
    for (std::size_t z = 0; z < z_count; ++z) likelihood += cond[z] * dump.probs[i][z];
    if (options.likelihood_floor) {
      likelihood = std::max(likelihood, *options.likelihood_floor);
    } else if (!(likelihood > 0.0)) {
      throw Error(ErrorKind::domain, "LEEP: row " + std::to_string(i) + " has zero expected likelihood (score is -inf)");
    }
    total += std::log(likelihood);
  }
  return std::min(0.0, total / static_cast<double>(dump.rows()));
}

struct ProxyScore {
  std::string model_id;
  double raw = 0.0;
  double normalized = 0.0;
};

// Min-max map onto [0, 1]; a degenerate set (max == min) maps to 1.
inline std::vector<ProxyScore> normalize_scores(std::vector<ProxyScore> scores) {
  if (scores.empty()) throw Error(ErrorKind::no_data, "cannot normalize an empty score set");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end(),
                                            [](const auto& a, const auto& b) { return a.raw < b.raw; });
  const double min = lo->raw;
  const double max = hi->raw;
  for (auto& s : scores) s.normalized = max > min ? (s.raw - min) / (max - min) : 1.0;
  return scores;
}

inline std::string proxy_scores_csv(const std::vector<ProxyScore>& scores) {
  std::ostringstream out;
  out << "model_id,raw_leep,normalized\n";
  for (const auto& s : scores) {
    out << s.model_id << ',' << text::format_double(s.raw) << ',' << text::format_double(s.normalized) << '\n';
  }
  return out.str();
}

}  // namespace twophase
