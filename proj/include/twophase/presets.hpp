#pragma once

// Engineered synthetic bundles whose epoch arithmetic mirrors published runtimes. Accuracies are
// synthetic. Each target bundle has a 40-model (NLP-shaped, T=5) or 30-model (CV-shaped, T=4)
// repository with ten planted non-singleton clusters, and target traces shaped so that
// fine-selection over the ten recalled models keeps a fixed number of models after stage 0.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twophase/bundle.hpp"
#include "twophase/error.hpp"
#include "twophase/pipeline.hpp"
#include "twophase/synthetic.hpp"

namespace twophase {

struct PresetShape {
  std::string name;
  bool nlp = true;
  std::size_t stage0_survivors = 1;  // recalled models left after the first fine-selection stage
  std::uint64_t seed = 0;
};

inline const std::vector<PresetShape>& preset_shapes() {
  static const std::vector<PresetShape> shapes{
      {"tweet", true, 1, 101},    {"mnli", true, 1, 202},     {"multirc", true, 2, 303}, {"boolq", true, 3, 404},
      {"xray", false, 1, 505},    {"medmnist", false, 3, 606}, {"flowers", false, 3, 707}, {"beans", false, 5, 808},
  };
  return shapes;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& s : preset_shapes()) names.push_back(s.name);
  names.push_back("threshold");
  return names;
}

namespace detail {

// Rewrites a model's target trace to `vals` and its benchmark traces so that, at every stage, the
// datasets holding its upper half of benchmark accuracies validate near the target value and the
// rest 0.3 lower. Matching the target to the upper group then predicts that group's mean test.
inline void shape_model(Bundle& b, const std::string& model, const std::vector<double>& vals, double final_test) {
  auto& trace = b.target.traces.at(model);
  trace.stage_val = vals;
  trace.final_test = final_test;

  std::vector<std::pair<double, std::string>> cells;
  for (const auto& d : b.matrix.datasets()) {
    if (const auto v = b.matrix.get(model, d)) cells.emplace_back(*v, d);
  }
  std::stable_sort(cells.begin(), cells.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  std::map<std::string, bool> upper;
  for (std::size_t i = 0; i < cells.size(); ++i) upper[cells[i].second] = i < (cells.size() + 1) / 2;

  std::size_t k = 0;
  for (auto& t : b.benchmark_traces) {
    if (t.model_id != model) continue;
    const double jitter = 0.001 * static_cast<double>(k % 5) - 0.002;
    ++k;
    const double offset = upper[t.dataset_id] ? 0.0 : -0.3;
    t.stage_val.resize(vals.size());
    for (std::size_t s = 0; s < vals.size(); ++s) t.stage_val[s] = std::clamp(vals[s] + offset + jitter, 0.0, 1.0);
  }
}

inline double upper_half_mean(const PerformanceMatrix& matrix, const std::string& model) {
  std::vector<double> cells;
  for (const auto& d : matrix.datasets()) {
    if (const auto v = matrix.get(model, d)) cells.push_back(*v);
  }
  std::sort(cells.begin(), cells.end(), std::greater<>());
  const auto n = (cells.size() + 1) / 2;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += cells[i];
  return sum / static_cast<double>(n);
}

inline Bundle target_preset(const PresetShape& shape) {
  ScenarioSpec spec;
  spec.name = shape.name;
  spec.target_id = shape.name;
  spec.id_prefix = shape.nlp ? "nlp-m" : "cv-m";
  spec.blocks.assign(10, shape.nlp ? 3 : 2);
  spec.singletons = 10;
  spec.benchmarks = shape.nlp ? 8 : 6;
  spec.stages = shape.nlp ? 5 : 4;
  spec.matrix_noise = 0.005;
  spec.min_center_gap = 0.25;
  spec.curve_noise = 0.01;

  const PipelineConfig config;
  for (std::uint64_t attempt = 0; attempt < 200; ++attempt) {
    auto b = generate_synthetic_scenario(spec, shape.seed + 1000 * attempt);
    const auto clustering = cluster_models(b.matrix, config);
    if (clustering.non_singleton_count() != spec.blocks.size() ||
        clustering.clusters.size() != spec.blocks.size() + spec.singletons) {
      continue;
    }
    const auto proxies = score_representatives(clustering, b.target, config);
    auto recall = recall_scores(b.matrix, clustering, proxies, config.k_sim);
    const auto recalled = top_k(recall, config.k_recall);

    // Recalled models by predicted final test (upper-half benchmark mean), best first.
    std::vector<std::pair<double, std::string>> by_pred;
    for (const auto& id : recalled) by_pred.emplace_back(upper_half_mean(b.matrix, id), id);
    std::sort(by_pred.begin(), by_pred.end(), std::greater<>());
    bool distinct = true;
    for (std::size_t i = 1; i < by_pred.size(); ++i) distinct &= by_pred[i - 1].first - by_pred[i].first > 1e-3;
    if (!distinct) continue;

    // Stage-0 validation rank: the first r models are ordered so that better validation comes with
    // worse prediction (none filters another); the best-predicted of them outranks everyone below.
    const auto r = shape.stage0_survivors;
    std::vector<std::string> stage0_order;
    for (std::size_t i = 0; i < r; ++i) stage0_order.push_back(by_pred[r - 1 - i].second);
    for (std::size_t i = r; i < by_pred.size(); ++i) stage0_order.push_back(by_pred[i].second);
    std::map<std::string, std::size_t> stage0_rank, pred_rank;
    for (std::size_t i = 0; i < stage0_order.size(); ++i) stage0_rank[stage0_order[i]] = i;
    for (std::size_t i = 0; i < by_pred.size(); ++i) pred_rank[by_pred[i].second] = i;

    for (const auto& [pred, id] : by_pred) {
      std::vector<double> vals(spec.stages);
      vals[0] = 0.62 - 0.03 * static_cast<double>(stage0_rank[id]);
      for (std::size_t s = 1; s < spec.stages; ++s) {
        vals[s] = 0.62 + 0.04 * static_cast<double>(s) - 0.03 * static_cast<double>(pred_rank[id]);
      }
      shape_model(b, id, vals, std::min(1.0, pred + 0.01));
    }
    // Everyone else trains visibly worse on the target.
    std::size_t j = 0;
    for (const auto& id : b.repository.model_ids()) {
      if (std::find(recalled.begin(), recalled.end(), id) != recalled.end()) continue;
      auto& t = b.target.traces.at(id);
      for (std::size_t s = 0; s < t.stage_val.size(); ++s) {
        t.stage_val[s] = 0.2 + 0.004 * static_cast<double>(j) + 0.02 * static_cast<double>(s);
      }
      t.final_test = 0.3 + 0.004 * static_cast<double>(j);
      ++j;
    }
    return b;
  }
  throw Error(ErrorKind::config, "preset '" + shape.name + "': no seed reproduced the planted clustering");
}

// Ten models whose filtering outcome depends on the threshold: at stage 0 the runner-up on
// validation predicts 2.5% below the leader and the third 6.7% below, so thresholds of
// 0/1%/5%/10% keep 1/1/2/3 models. The runner-up overtakes from stage 1 and is the best model.
inline Bundle threshold_preset() {
  Bundle b;
  b.name = "threshold";
  b.target.id = "threshold";
  b.total_steps = 5;
  b.interval = 1;
  std::vector<ModelRecord> models;
  std::vector<BenchmarkDatasetRecord> datasets;
  for (std::size_t i = 0; i < 10; ++i) models.push_back({detail::model_name("thr-m", i), "synthetic threshold model", {}});
  for (std::size_t d = 0; d < 6; ++d) datasets.push_back({"bench" + std::to_string(d), "synthetic"});
  b.repository = Repository(models, datasets);
  b.matrix = PerformanceMatrix(b.repository.model_ids(), b.repository.dataset_ids());

  const std::vector<double> preds{0.80, 0.78, 0.75, 0.70, 0.68, 0.66, 0.64, 0.62, 0.60, 0.58};
  const std::vector<double> finals{0.85, 0.87, 0.84, 0.74, 0.72, 0.70, 0.68, 0.66, 0.64, 0.62};
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      b.matrix.set(models[i].id, datasets[d].id, d < 3 ? preds[i] : preds[i] - 0.3);
      b.benchmark_traces.push_back({models[i].id, datasets[d].id, std::vector<double>(5, 0.0), d < 3 ? preds[i] : preds[i] - 0.3, 1, 1.0});
    }
    b.target.traces[models[i].id] = {models[i].id, b.target.id, std::vector<double>(5, 0.0), finals[i], 1, 1.0};
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::vector<double> vals(5);
    vals[0] = 0.62 - 0.02 * static_cast<double>(i);
    // From stage 1 the runner-up leads, then the leader, then the rest in order.
    const double later_rank = i == 1 ? 0.0 : (i == 0 ? 1.0 : static_cast<double>(i));
    for (std::size_t s = 1; s < 5; ++s) vals[s] = 0.66 + 0.03 * static_cast<double>(s) - 0.02 * later_rank;
    shape_model(b, models[i].id, vals, finals[i]);
  }
  return b;
}

}  // namespace detail

inline Bundle preset_bundle(const std::string& name) {
  if (name == "threshold") return detail::threshold_preset();
  for (const auto& s : preset_shapes()) {
    if (s.name == name) return detail::target_preset(s);
  }
  throw Error(ErrorKind::config, "unknown preset '" + name + "'");
}

}  // namespace twophase
