#pragma once

// Convergence trends: for one model at validation stage t, its benchmark datasets are grouped by
// stage-t validation accuracy; each group is summarized by mean validation and mean final test.
// A running model is matched to the nearest group and its final test is predicted from it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "twophase/clustering.hpp"
#include "twophase/error.hpp"
#include "twophase/repository.hpp"
#include "twophase/similarity.hpp"

namespace twophase {

struct Trend {
  double val_mean = 0.0;
  double test_mean = 0.0;
  std::vector<std::string> members;  // benchmark dataset ids

  bool operator==(const Trend&) const = default;
};

struct TrendSet {
  std::string model_id;
  std::size_t stage = 1;      // 1-based validation stage
  std::vector<Trend> trends;  // ordered by descending val_mean

  bool operator==(const TrendSet&) const = default;
};

struct TrendOptions {
  std::optional<std::size_t> clusters;  // unset: choose by silhouette
  std::size_t max_clusters = 4;
  std::uint64_t seed = 0;
  std::size_t restarts = 8;
};

namespace detail {

// Best-of-restarts 1-D k-means labels for the given cluster count.
inline std::vector<std::size_t> cluster_scalars(const std::vector<double>& values, std::size_t c, std::uint64_t seed,
                                                std::size_t restarts) {
  std::vector<std::vector<double>> points;
  points.reserve(values.size());
  for (double v : values) points.push_back({v});
  std::vector<std::size_t> best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    const auto res = kmeans(points, c, seed + r);
    if (res.sse_history.back() < best_sse - 1e-15) {
      best_sse = res.sse_history.back();
      best = res.assignment;
    }
  }
  return best;
}

}  // namespace detail

// `traces` are one model's benchmark traces; those shorter than `stage` are skipped.
inline TrendSet mine_trends(const std::vector<TrainingTrace>& traces, std::size_t stage, const TrendOptions& options = {}) {
  if (stage == 0) throw Error(ErrorKind::config, "trend stage is 1-based");
  std::vector<const TrainingTrace*> eligible;
  for (const auto& t : traces) {
    if (t.stage_val.size() >= stage) eligible.push_back(&t);
  }
  if (eligible.empty()) {
    throw Error(ErrorKind::no_data, "no benchmark trace reaches stage " + std::to_string(stage) +
                                        (traces.empty() ? std::string() : " for model '" + traces.front().model_id + "'"));
  }
  std::vector<double> values;
  std::vector<std::string> ids;
  for (const auto* t : eligible) {
    values.push_back(t->stage_val[stage - 1]);
    ids.push_back(t->dataset_id);
  }
  const auto n = values.size();

  std::vector<std::size_t> labels(n, 0);
  if (options.clusters) {
    const auto c = std::clamp<std::size_t>(*options.clusters, 1, n);
    labels = detail::cluster_scalars(values, c, options.seed, options.restarts);
  } else if (n >= 2) {
    DistanceMatrix dist(ids);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) dist.set(i, j, std::abs(values[i] - values[j]));
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 2; c <= std::min(options.max_clusters, n); ++c) {
      auto candidate = detail::cluster_scalars(values, c, options.seed, options.restarts);
      const double s = silhouette(candidate, dist);
      if (s > best + 1e-12) {
        best = s;
        labels = std::move(candidate);
      }
    }
  }

  std::map<std::size_t, Trend> groups;
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = groups[labels[i]];
    g.val_mean += values[i];
    g.test_mean += eligible[i]->final_test;
    g.members.push_back(ids[i]);
    ++counts[labels[i]];
  }
  TrendSet out;
  out.model_id = eligible.front()->model_id;
  out.stage = stage;
  for (auto& [label, g] : groups) {
    g.val_mean /= static_cast<double>(counts[label]);
    g.test_mean /= static_cast<double>(counts[label]);
    std::sort(g.members.begin(), g.members.end());
    out.trends.push_back(std::move(g));
  }
  std::sort(out.trends.begin(), out.trends.end(), [](const Trend& a, const Trend& b) {
    if (a.val_mean != b.val_mean) return a.val_mean > b.val_mean;
    return a.test_mean > b.test_mean;
  });
  return out;
}

// Index of the trend whose mean validation is closest; equidistant ties go to the larger test mean.
inline std::size_t match_trend(const TrendSet& trends, double val) {
  if (trends.trends.empty()) throw Error(ErrorKind::no_data, "empty trend set");
  std::size_t best = 0;
  double best_gap = std::abs(trends.trends[0].val_mean - val);
  for (std::size_t x = 1; x < trends.trends.size(); ++x) {
    const double gap = std::abs(trends.trends[x].val_mean - val);
    if (gap < best_gap - 1e-12 ||
        (std::abs(gap - best_gap) <= 1e-12 && trends.trends[x].test_mean > trends.trends[best].test_mean)) {
      best = x;
      best_gap = gap;
    }
  }
  return best;
}

inline double predict_final(const TrendSet& trends, double val) {
  return trends.trends[match_trend(trends, val)].test_mean;
}

inline nlohmann::json trendset_to_json(const TrendSet& ts) {
  nlohmann::json doc;
  doc["model_id"] = ts.model_id;
  doc["stage"] = ts.stage;
  doc["trends"] = nlohmann::json::array();
  for (const auto& t : ts.trends) {
    doc["trends"].push_back({{"val_mean", t.val_mean}, {"test_mean", t.test_mean}, {"members", t.members}});
  }
  return doc;
}

struct PredictionErrors {
  double cluster = 0.0;      // mean |pred - actual| / actual using the matched trend
  double global_mean = 0.0;  // same, predicting the mean final test of all other datasets
  std::size_t folds = 0;
};

// Leave-one-out over one model's benchmark traces at `stage`: each dataset in turn plays the target.
inline PredictionErrors leave_one_out_errors(const std::vector<TrainingTrace>& traces, std::size_t stage,
                                             const TrendOptions& options = {}) {
  PredictionErrors err;
  for (std::size_t h = 0; h < traces.size(); ++h) {
    const auto& held = traces[h];
    if (held.stage_val.size() < stage || held.final_test <= 0.0) continue;
    std::vector<TrainingTrace> rest;
    double mean = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (i == h || traces[i].stage_val.size() < stage) continue;
      rest.push_back(traces[i]);
      mean += traces[i].final_test;
    }
    if (rest.empty()) continue;
    mean /= static_cast<double>(rest.size());
    const auto ts = mine_trends(rest, stage, options);
    const double pred = predict_final(ts, held.stage_val[stage - 1]);
    err.cluster += std::abs(pred - held.final_test) / held.final_test;
    err.global_mean += std::abs(mean - held.final_test) / held.final_test;
    ++err.folds;
  }
  if (err.folds == 0) throw Error(ErrorKind::no_data, "leave-one-out needs at least two eligible traces");
  err.cluster /= static_cast<double>(err.folds);
  err.global_mean /= static_cast<double>(err.folds);
  return err;
}

}  // namespace twophase
