#pragma once

// On-disk input bundle for one target task:
//
//   bundle.json             name, target id, matrix convention, default T and s
//   repository.json         repository manifest
//   matrix.csv              benchmark performance matrix
//   benchmark_traces.json   staged validation traces of every model on the benchmark datasets
//   target_traces.json      staged validation traces of every model on the target dataset
//   dumps/<model>.csv       source-model prediction dumps on the target dataset

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "twophase/error.hpp"
#include "twophase/repository.hpp"
#include "twophase/text_io.hpp"

namespace twophase {

struct Bundle {
  std::string name;
  // Which test accuracy the matrix cells hold: "final_test" (last epoch) or "best_test".
  std::string matrix_convention = "final_test";
  bool synthetic = true;
  std::size_t total_steps = 5;
  std::size_t interval = 1;
  Repository repository;
  PerformanceMatrix matrix;
  std::vector<TrainingTrace> benchmark_traces;
  TargetTask target;
};

inline std::string dump_file_name(const std::string& model_id) {
  std::string out;
  for (char c : model_id) out += (c == '/' || c == '\\') ? std::string("__") : std::string(1, c);
  return out + ".csv";
}

inline Bundle load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::parse, dir.string() + ": bundle directory not found");
  Bundle b;
  const auto meta_path = (dir / "bundle.json").string();
  const auto meta = detail::parse_json(text::read_file(meta_path), meta_path);
  b.name = detail::json_field<std::string>(meta, "name", meta_path);
  b.target.id = detail::json_field<std::string>(meta, "target", meta_path);
  b.matrix_convention = detail::json_field<std::string>(meta, "matrix_convention", meta_path);
  if (b.matrix_convention != "final_test" && b.matrix_convention != "best_test") {
    throw Error(ErrorKind::parse, meta_path + ": matrix_convention must be 'final_test' or 'best_test'");
  }
  if (meta.contains("synthetic")) b.synthetic = detail::json_field<bool>(meta, "synthetic", meta_path);
  if (meta.contains("total_steps")) b.total_steps = detail::json_field<std::size_t>(meta, "total_steps", meta_path);
  if (meta.contains("interval")) b.interval = detail::json_field<std::size_t>(meta, "interval", meta_path);

  b.repository = load_repository((dir / "repository.json").string());
  b.matrix = load_performance_matrix((dir / "matrix.csv").string(), &b.repository);
  b.benchmark_traces = load_traces((dir / "benchmark_traces.json").string(), &b.repository);
  for (const auto& t : b.benchmark_traces) {
    if (!b.repository.has_dataset(t.dataset_id)) {
      throw Error(ErrorKind::unknown_id, "benchmark_traces.json: unknown dataset id '" + t.dataset_id + "'");
    }
  }
  for (auto& t : load_traces((dir / "target_traces.json").string(), &b.repository)) {
    const auto id = t.model_id;
    if (!b.target.traces.emplace(id, std::move(t)).second) {
      throw Error(ErrorKind::duplicate_id, "target_traces.json: two traces for model '" + id + "'");
    }
  }
  const auto dumps = dir / "dumps";
  if (fs::is_directory(dumps)) {
    for (const auto& m : b.repository.models()) {
      const auto path = dumps / dump_file_name(m.id);
      if (fs::exists(path)) b.target.dumps.emplace(m.id, load_prediction_dump(path.string(), b.target.id));
    }
  }
  validate_target(b.target, b.repository);
  return b;
}

inline nlohmann::json bundle_meta_json(const Bundle& b) {
  return {{"name", b.name},
          {"target", b.target.id},
          {"matrix_convention", b.matrix_convention},
          {"synthetic", b.synthetic},
          {"total_steps", b.total_steps},
          {"interval", b.interval}};
}

inline void write_bundle(const Bundle& b, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "dumps");
  text::write_file((dir / "bundle.json").string(), bundle_meta_json(b).dump(2) + "\n");
  text::write_file((dir / "repository.json").string(), serialize_repository(b.repository));
  text::write_file((dir / "matrix.csv").string(), serialize_performance_matrix(b.matrix));
  text::write_file((dir / "benchmark_traces.json").string(), serialize_traces(b.benchmark_traces));
  std::vector<TrainingTrace> target;
  for (const auto& [id, t] : b.target.traces) target.push_back(t);
  text::write_file((dir / "target_traces.json").string(), serialize_traces(target));
  for (const auto& [id, dump] : b.target.dumps) {
    text::write_file((dir / "dumps" / dump_file_name(id)).string(), serialize_prediction_dump(dump));
  }
}

}  // namespace twophase
