#pragma once

// Deterministic synthetic input bundles: block-structured performance matrices, learning-curve
// traces on benchmark and target datasets, and prediction dumps whose informativeness is
// planted per block.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "twophase/bundle.hpp"
#include "twophase/error.hpp"
#include "twophase/similarity.hpp"
#include "twophase/trainer.hpp"

namespace twophase {

struct ScenarioSpec {
  std::string name = "synthetic";
  std::string target_id = "target";
  std::string id_prefix = "m";
  std::vector<std::size_t> blocks{5, 5};  // sizes of the planted model groups
  std::size_t singletons = 0;
  std::size_t benchmarks = 6;
  std::size_t stages = 5;
  double epochs_per_stage = 1.0;
  double matrix_noise = 0.01;   // within-block spread of benchmark accuracies
  double min_center_gap = 0.2;  // minimum top-k distance between block centers
  double curve_noise = 0.01;    // validation noise on learning curves
  std::size_t relevant_block = 0;
  // Validation ordering constant across stages and equal to the final-test ordering on the target.
  bool monotone = false;
  std::size_t dump_rows = 60;
  std::size_t source_labels = 4;
  std::size_t target_labels = 3;
};

inline void validate_spec(const ScenarioSpec& s) {
  if (s.blocks.empty() && s.singletons == 0) throw Error(ErrorKind::config, "scenario has no models");
  for (auto b : s.blocks) {
    if (b == 0) throw Error(ErrorKind::config, "scenario block size must be positive");
  }
  if (s.benchmarks == 0) throw Error(ErrorKind::config, "scenario needs at least one benchmark dataset");
  if (s.stages == 0) throw Error(ErrorKind::config, "scenario needs at least one stage");
  if (!(s.epochs_per_stage > 0.0)) throw Error(ErrorKind::config, "epochs_per_stage must be positive");
  if (!(s.matrix_noise >= 0.0) || !(s.curve_noise >= 0.0)) throw Error(ErrorKind::config, "noise must be non-negative (sigma >= 0)");
  if (!s.blocks.empty() && s.relevant_block >= s.blocks.size()) throw Error(ErrorKind::config, "relevant_block out of range");
  if (s.source_labels < s.target_labels || s.target_labels == 0) {
    throw Error(ErrorKind::config, "dump needs source_labels >= target_labels >= 1");
  }
  if (s.dump_rows < s.target_labels) throw Error(ErrorKind::config, "dump needs at least one row per target label");
}

inline ScenarioSpec scenario_spec_from_json(const nlohmann::json& doc) {
  ScenarioSpec s;
  const auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get("name", s.name);
    get("target_id", s.target_id);
    get("id_prefix", s.id_prefix);
    get("blocks", s.blocks);
    get("singletons", s.singletons);
    get("benchmarks", s.benchmarks);
    get("stages", s.stages);
    get("epochs_per_stage", s.epochs_per_stage);
    get("matrix_noise", s.matrix_noise);
    get("min_center_gap", s.min_center_gap);
    get("curve_noise", s.curve_noise);
    get("relevant_block", s.relevant_block);
    get("monotone", s.monotone);
    get("dump_rows", s.dump_rows);
    get("source_labels", s.source_labels);
    get("target_labels", s.target_labels);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("scenario spec: ") + e.what());
  }
  validate_spec(s);
  return s;
}

// Rows of `rows` examples whose source prediction puts `informativeness` mass on the source label
// matching the target label and spreads the rest at random.
inline PredictionDump synthetic_dump(const std::string& target_id, double informativeness, std::size_t rows,
                                     std::size_t source_labels, std::size_t target_labels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  PredictionDump dump;
  dump.target_dataset_id = target_id;
  dump.source_label_count = source_labels;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto y = static_cast<int>(i % target_labels);
    std::vector<double> noise(source_labels);
    double sum = 0.0;
    for (auto& v : noise) sum += (v = unit(rng));
    std::vector<double> row(source_labels);
    double total = 0.0;
    for (std::size_t z = 0; z < source_labels; ++z) {
      row[z] = (1.0 - informativeness) * noise[z] / sum + (z == static_cast<std::size_t>(y) ? informativeness : 0.0);
      total += row[z];
    }
    for (auto& v : row) v /= total;
    dump.probs.push_back(std::move(row));
    dump.labels.push_back(y);
  }
  return dump;
}

namespace detail {

inline std::string model_name(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02zu", i);
  return prefix + buf;
}

}  // namespace detail

// Benchmark traces for one model whose datasets fall in two regimes (a strong, fast-converging one
// and a weak, slow one). Returns `datasets` traces named d0..d{n-1}.
inline std::vector<TrainingTrace> two_regime_traces(const std::string& model_id, std::size_t datasets, std::size_t stages,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::vector<TrainingTrace> out;
  for (std::size_t d = 0; d < datasets; ++d) {
    const bool strong = (d % 2 == 0);
    SyntheticCurveParams p;
    p.asymptote = std::clamp(strong ? 0.88 + 0.02 * jitter(rng) : 0.55 + 0.03 * jitter(rng), 0.05, 0.99);
    p.rate = strong ? 1.5 : 0.6;
    p.noise = 0.01;
    p.stages = stages;
    auto trace = synthetic_trace(model_id, "d" + std::to_string(d), p, mix_seed(seed, d + 1));
    trace.final_test = std::clamp(p.asymptote + 0.01 * jitter(rng), 0.0, 1.0);
    out.push_back(std::move(trace));
  }
  return out;
}

inline Bundle generate_synthetic_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  std::mt19937_64 rng(mix_seed(seed, 17));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  Bundle b;
  b.name = spec.name;
  b.synthetic = true;
  b.matrix_convention = "final_test";
  b.total_steps = spec.stages;
  b.interval = 1;
  b.target.id = spec.target_id;

  std::vector<BenchmarkDatasetRecord> datasets;
  for (std::size_t d = 0; d < spec.benchmarks; ++d) datasets.push_back({"bench" + std::to_string(d), "synthetic"});

  // Block centers, kept apart under the top-k performance distance.
  std::vector<std::vector<double>> centers;
  const auto as_vector = [&](const std::vector<double>& acc) {
    std::vector<std::pair<std::string, double>> dims;
    for (std::size_t d = 0; d < acc.size(); ++d) dims.emplace_back(datasets[d].id, acc[d]);
    return make_vector("", dims);
  };
  const auto far_from_centers = [&](const std::vector<double>& cand, double gap) {
    for (const auto& c : centers) {
      if (1.0 - pair_similarity(as_vector(cand), as_vector(c)) < gap) return false;
    }
    return true;
  };
  for (std::size_t blk = 0; blk < spec.blocks.size(); ++blk) {
    std::vector<double> cand(spec.benchmarks);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double level = uniform(0.55, 0.9);
      for (auto& v : cand) v = std::clamp(level + uniform(-0.25, 0.25), 0.05, 0.98);
      if (far_from_centers(cand, spec.min_center_gap)) break;
    }
    centers.push_back(cand);
  }

  std::vector<ModelRecord> models;
  std::vector<std::vector<double>> acc;
  std::vector<std::size_t> block_of;  // blocks.size() marks a singleton
  std::size_t next = 0;
  for (std::size_t blk = 0; blk < spec.blocks.size(); ++blk) {
    for (std::size_t i = 0; i < spec.blocks[blk]; ++i) {
      std::vector<double> v(spec.benchmarks);
      for (std::size_t d = 0; d < spec.benchmarks; ++d) {
        v[d] = std::clamp(centers[blk][d] + spec.matrix_noise * gauss(rng), 0.0, 1.0);
      }
      models.push_back({detail::model_name(spec.id_prefix, next++), "", {"block-" + std::to_string(blk)}});
      acc.push_back(v);
      block_of.push_back(blk);
    }
  }
  for (std::size_t i = 0; i < spec.singletons; ++i) {
    // Singletons: weaker models with an idiosyncratic per-dataset profile.
    std::vector<double> v(spec.benchmarks);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (auto& x : v) x = uniform(0.15, 0.75);
      if (far_from_centers(v, spec.min_center_gap)) break;
    }
    centers.push_back(v);
    models.push_back({detail::model_name(spec.id_prefix, next++), "", {"singleton"}});
    acc.push_back(v);
    block_of.push_back(spec.blocks.size());
  }
  for (auto& m : models) m.display_name = "synthetic " + m.id;

  b.repository = Repository(models, datasets);
  b.matrix = PerformanceMatrix(b.repository.model_ids(), b.repository.dataset_ids());
  for (std::size_t m = 0; m < models.size(); ++m)
    for (std::size_t d = 0; d < spec.benchmarks; ++d) b.matrix.set(models[m].id, datasets[d].id, acc[m][d]);

  // Learning curves. A shared rate in monotone mode keeps validation ordering fixed across stages.
  const double shared_rate = uniform(0.6, 1.4);
  for (std::size_t m = 0; m < models.size(); ++m) {
    const double rate = spec.monotone ? shared_rate : uniform(0.5, 1.5);
    for (std::size_t d = 0; d < spec.benchmarks; ++d) {
      SyntheticCurveParams p{acc[m][d], rate, spec.curve_noise, spec.stages};
      auto trace = synthetic_trace(models[m].id, datasets[d].id, p, mix_seed(seed, 1000 + m * 97 + d), spec.epochs_per_stage);
      trace.final_test = acc[m][d];
      b.benchmark_traces.push_back(std::move(trace));
    }
    const bool relevant = !spec.blocks.empty() && block_of[m] == spec.relevant_block;
    const double asymptote = relevant ? uniform(0.82, 0.95) : uniform(0.3, 0.78);
    SyntheticCurveParams p{asymptote, rate, spec.monotone ? 0.0 : spec.curve_noise, spec.stages};
    auto trace = synthetic_trace(models[m].id, spec.target_id, p, mix_seed(seed, 500000 + m), spec.epochs_per_stage);
    if (spec.monotone) trace.final_test = asymptote;
    b.target.traces.emplace(models[m].id, std::move(trace));

    const double q = relevant ? uniform(0.75, 0.9) : uniform(0.05, 0.45);
    b.target.dumps.emplace(models[m].id, synthetic_dump(spec.target_id, q, spec.dump_rows, spec.source_labels,
                                                        spec.target_labels, mix_seed(seed, 900000 + m)));
  }
  return b;
}

}  // namespace twophase
