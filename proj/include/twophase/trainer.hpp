#pragma once

// Stage-wise trainer abstraction. A trainer either replays a recorded trace or draws a
// deterministic synthetic learning curve val(t) = a(1 - exp(-r t)) + noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <variant>

#include "twophase/error.hpp"
#include "twophase/repository.hpp"

namespace twophase {

struct SyntheticCurveParams {
  double asymptote = 0.8;
  double rate = 1.0;
  double noise = 0.0;
  std::size_t stages = 5;
};

inline void validate_curve(const SyntheticCurveParams& p) {
  if (!(p.asymptote >= 0.0 && p.asymptote <= 1.0)) throw Error(ErrorKind::out_of_range, "curve asymptote outside [0,1]");
  if (!(p.rate > 0.0)) throw Error(ErrorKind::out_of_range, "curve rate must be positive");
  if (!(p.noise >= 0.0)) throw Error(ErrorKind::out_of_range, "curve noise must be non-negative");
  if (p.stages == 0) throw Error(ErrorKind::out_of_range, "curve needs at least one stage");
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double curve_value(const SyntheticCurveParams& p, std::uint64_t seed, std::size_t stage_index) {
  std::mt19937_64 rng(mix_seed(seed, stage_index));
  const double t = static_cast<double>(stage_index + 1);
  double noise = 0.0;
  if (p.noise > 0.0) noise = std::normal_distribution<double>(0.0, p.noise)(rng);
  return std::clamp(p.asymptote * (1.0 - std::exp(-p.rate * t)) + noise, 0.0, 1.0);
}

inline double curve_final_test(const SyntheticCurveParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xffffffffULL));
  double noise = 0.0;
  if (p.noise > 0.0) noise = std::normal_distribution<double>(0.0, p.noise)(rng);
  return std::clamp(p.asymptote + noise, 0.0, 1.0);
}

// Materializes a synthetic curve as a replayable trace.
inline TrainingTrace synthetic_trace(const std::string& model_id, const std::string& dataset_id,
                                     const SyntheticCurveParams& p, std::uint64_t seed, double epochs_per_stage = 1.0) {
  validate_curve(p);
  TrainingTrace trace;
  trace.model_id = model_id;
  trace.dataset_id = dataset_id;
  for (std::size_t i = 0; i < p.stages; ++i) trace.stage_val.push_back(curve_value(p, seed, i));
  trace.final_test = curve_final_test(p, seed);
  trace.stage_len_steps = 1;
  trace.epochs_per_stage = epochs_per_stage;
  return trace;
}

class Trainer {
 public:
  static Trainer replay(TrainingTrace trace) {
    validate_trace(trace, "trace for '" + trace.model_id + "'");
    Trainer t;
    t.model_id_ = trace.model_id;
    t.target_id_ = trace.dataset_id;
    t.epochs_per_stage_ = trace.epochs_per_stage;
    t.source_ = std::move(trace);
    return t;
  }

  static Trainer synthetic(std::string model_id, std::string target_id, SyntheticCurveParams params,
                           std::uint64_t seed, double epochs_per_stage = 1.0) {
    validate_curve(params);
    if (!(epochs_per_stage > 0.0)) throw Error(ErrorKind::out_of_range, "epochs_per_stage must be positive");
    Trainer t;
    t.model_id_ = std::move(model_id);
    t.target_id_ = std::move(target_id);
    t.epochs_per_stage_ = epochs_per_stage;
    t.source_ = Synthetic{params, seed};
    return t;
  }

  const std::string& model_id() const { return model_id_; }
  const std::string& target_id() const { return target_id_; }
  std::size_t cursor() const { return cursor_; }
  double epochs_per_stage() const { return epochs_per_stage_; }

  std::size_t total_stages() const {
    if (const auto* trace = std::get_if<TrainingTrace>(&source_)) return trace->stage_val.size();
    return std::get<Synthetic>(source_).params.stages;
  }

  // Advances one stage and returns the validation accuracy observed there.
  double train_stage() {
    if (cursor_ >= total_stages()) {
      throw Error(ErrorKind::exhausted, "trainer for '" + model_id_ + "' exhausted after " +
                                            std::to_string(total_stages()) + " stages");
    }
    double val = 0.0;
    if (const auto* trace = std::get_if<TrainingTrace>(&source_)) {
      val = trace->stage_val[cursor_];
    } else {
      const auto& s = std::get<Synthetic>(source_);
      val = curve_value(s.params, s.seed, cursor_);
    }
    ++cursor_;
    return val;
  }

  double final_test() const {
    if (const auto* trace = std::get_if<TrainingTrace>(&source_)) return trace->final_test;
    const auto& s = std::get<Synthetic>(source_);
    return curve_final_test(s.params, s.seed);
  }

 private:
  struct Synthetic {
    SyntheticCurveParams params;
    std::uint64_t seed = 0;
  };

  Trainer() = default;

  std::string model_id_;
  std::string target_id_;
  std::size_t cursor_ = 0;
  double epochs_per_stage_ = 1.0;
  std::variant<TrainingTrace, Synthetic> source_;
};

}  // namespace twophase
