#pragma once

// Domain records for the model repository and the files they are loaded from:
// repository manifest (JSON), performance matrix (CSV), training traces (JSON)
// and source-model prediction dumps (CSV).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "twophase/error.hpp"
#include "twophase/text_io.hpp"

namespace twophase {

using json = nlohmann::json;

struct ModelRecord {
  std::string id;
  std::string display_name;
  std::vector<std::string> tags;

  bool operator==(const ModelRecord&) const = default;
};

struct BenchmarkDatasetRecord {
  std::string id;
  std::string task_kind;

  bool operator==(const BenchmarkDatasetRecord&) const = default;
};

class Repository {
 public:
  Repository() = default;

  Repository(std::vector<ModelRecord> models, std::vector<BenchmarkDatasetRecord> datasets)
      : models_(std::move(models)), datasets_(std::move(datasets)) {
    for (std::size_t i = 0; i < models_.size(); ++i) {
      if (models_[i].id.empty()) throw Error(ErrorKind::parse, "model #" + std::to_string(i) + ": empty id");
      if (!model_index_.emplace(models_[i].id, i).second) {
        throw Error(ErrorKind::duplicate_id, "duplicate model id '" + models_[i].id + "'");
      }
    }
    for (std::size_t i = 0; i < datasets_.size(); ++i) {
      if (datasets_[i].id.empty()) throw Error(ErrorKind::parse, "dataset #" + std::to_string(i) + ": empty id");
      if (!dataset_index_.emplace(datasets_[i].id, i).second) {
        throw Error(ErrorKind::duplicate_id, "duplicate dataset id '" + datasets_[i].id + "'");
      }
    }
  }

  const std::vector<ModelRecord>& models() const { return models_; }
  const std::vector<BenchmarkDatasetRecord>& datasets() const { return datasets_; }
  std::size_t size() const { return models_.size(); }

  bool has_model(const std::string& id) const { return model_index_.count(id) != 0; }
  bool has_dataset(const std::string& id) const { return dataset_index_.count(id) != 0; }

  std::vector<std::string> model_ids() const {
    std::vector<std::string> ids;
    ids.reserve(models_.size());
    for (const auto& m : models_) ids.push_back(m.id);
    return ids;
  }

  std::vector<std::string> dataset_ids() const {
    std::vector<std::string> ids;
    ids.reserve(datasets_.size());
    for (const auto& d : datasets_) ids.push_back(d.id);
    return ids;
  }

  bool operator==(const Repository& other) const {
    return models_ == other.models_ && datasets_ == other.datasets_;
  }

 private:
  std::vector<ModelRecord> models_;
  std::vector<BenchmarkDatasetRecord> datasets_;
  std::unordered_map<std::string, std::size_t> model_index_;
  std::unordered_map<std::string, std::size_t> dataset_index_;
};

namespace detail {

template <typename T>
T json_field(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorKind::parse, context + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, context + ": field '" + key + "': " + e.what());
  }
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, source + ": " + e.what());
  }
}

inline void check_unit_interval(double value, const std::string& context) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorKind::out_of_range, context + ": accuracy " + text::format_double(value) + " outside [0,1]");
  }
}

}  // namespace detail

inline Repository parse_repository(const std::string& text, const std::string& source = "<manifest>") {
  const json doc = detail::parse_json(text, source);
  if (!doc.is_object()) throw Error(ErrorKind::parse, source + ": manifest must be a JSON object");
  std::vector<ModelRecord> models;
  std::vector<BenchmarkDatasetRecord> datasets;
  const auto models_json = detail::json_field<json>(doc, "models", source);
  if (!models_json.is_array()) throw Error(ErrorKind::parse, source + ": 'models' must be an array");
  for (std::size_t i = 0; i < models_json.size(); ++i) {
    const auto ctx = source + ": models[" + std::to_string(i) + "]";
    const auto& m = models_json[i];
    ModelRecord rec;
    rec.id = detail::json_field<std::string>(m, "id", ctx);
    rec.display_name = m.contains("display_name") ? detail::json_field<std::string>(m, "display_name", ctx) : rec.id;
    if (m.contains("tags")) rec.tags = detail::json_field<std::vector<std::string>>(m, "tags", ctx);
    models.push_back(std::move(rec));
  }
  if (doc.contains("datasets")) {
    const auto& ds = doc.at("datasets");
    if (!ds.is_array()) throw Error(ErrorKind::parse, source + ": 'datasets' must be an array");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto ctx = source + ": datasets[" + std::to_string(i) + "]";
      BenchmarkDatasetRecord rec;
      rec.id = detail::json_field<std::string>(ds[i], "id", ctx);
      rec.task_kind = ds[i].contains("task_kind") ? detail::json_field<std::string>(ds[i], "task_kind", ctx) : "";
      datasets.push_back(std::move(rec));
    }
  }
  return Repository(std::move(models), std::move(datasets));
}

inline Repository load_repository(const std::string& path) {
  return parse_repository(text::read_file(path), path);
}

inline std::string serialize_repository(const Repository& repo) {
  json doc;
  doc["models"] = json::array();
  for (const auto& m : repo.models()) {
    doc["models"].push_back({{"id", m.id}, {"display_name", m.display_name}, {"tags", m.tags}});
  }
  doc["datasets"] = json::array();
  for (const auto& d : repo.datasets()) {
    doc["datasets"].push_back({{"id", d.id}, {"task_kind", d.task_kind}});
  }
  return doc.dump(2) + "\n";
}

// Test accuracies of models fine-tuned on benchmark datasets. Cells may be absent.
class PerformanceMatrix {
 public:
  PerformanceMatrix() = default;

  PerformanceMatrix(std::vector<std::string> models, std::vector<std::string> datasets)
      : models_(std::move(models)), datasets_(std::move(datasets)),
        cells_(models_.size() * datasets_.size()) {
    for (std::size_t i = 0; i < models_.size(); ++i) {
      if (!model_index_.emplace(models_[i], i).second) {
        throw Error(ErrorKind::duplicate_id, "duplicate model id '" + models_[i] + "' in matrix");
      }
    }
    for (std::size_t i = 0; i < datasets_.size(); ++i) {
      if (!dataset_index_.emplace(datasets_[i], i).second) {
        throw Error(ErrorKind::duplicate_id, "duplicate dataset id '" + datasets_[i] + "' in matrix");
      }
    }
  }

  const std::vector<std::string>& models() const { return models_; }
  const std::vector<std::string>& datasets() const { return datasets_; }

  bool has_model(const std::string& id) const { return model_index_.count(id) != 0; }

  std::size_t model_index(const std::string& id) const {
    const auto it = model_index_.find(id);
    if (it == model_index_.end()) throw Error(ErrorKind::unknown_id, "unknown model id '" + id + "'");
    return it->second;
  }

  std::size_t dataset_index(const std::string& id) const {
    const auto it = dataset_index_.find(id);
    if (it == dataset_index_.end()) throw Error(ErrorKind::unknown_id, "unknown dataset id '" + id + "'");
    return it->second;
  }

  std::optional<double> at(std::size_t model, std::size_t dataset) const {
    return cells_[model * datasets_.size() + dataset];
  }

  std::optional<double> get(const std::string& model, const std::string& dataset) const {
    return at(model_index(model), dataset_index(dataset));
  }

  void set(const std::string& model, const std::string& dataset, std::optional<double> value) {
    if (value) detail::check_unit_interval(*value, "cell (" + dataset + ", " + model + ")");
    cells_[model_index(model) * datasets_.size() + dataset_index(dataset)] = value;
  }

  std::size_t present_count() const {
    return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); }));
  }

  bool operator==(const PerformanceMatrix& other) const {
    return models_ == other.models_ && datasets_ == other.datasets_ && cells_ == other.cells_;
  }

 private:
  std::vector<std::string> models_;
  std::vector<std::string> datasets_;
  std::vector<std::optional<double>> cells_;
  std::unordered_map<std::string, std::size_t> model_index_;
  std::unordered_map<std::string, std::size_t> dataset_index_;
};

// Header `model_id,<dataset_id>...`; one row per model; empty field marks an absent cell.
// When `repo` is given, every id must resolve against it.
inline PerformanceMatrix parse_performance_matrix(std::istream& in, const Repository* repo,
                                                  const std::string& source = "<matrix>") {
  const auto table = text::parse_csv(in, source);
  if (table.header.empty() || table.header.front() != "model_id") {
    throw Error(ErrorKind::parse, source + ":1: header must start with 'model_id'");
  }
  std::vector<std::string> datasets(table.header.begin() + 1, table.header.end());
  std::vector<std::string> models;
  for (std::size_t r = 0; r < table.rows.size(); ++r) models.push_back(table.rows[r].front());
  if (repo) {
    for (const auto& d : datasets) {
      if (!repo->has_dataset(d)) throw Error(ErrorKind::unknown_id, source + ":1: unknown dataset id '" + d + "'");
    }
    for (std::size_t r = 0; r < models.size(); ++r) {
      if (!repo->has_model(models[r])) {
        throw Error(ErrorKind::unknown_id, source + ":" + std::to_string(table.line_numbers[r]) +
                                               ": unknown model id '" + models[r] + "'");
      }
    }
  }
  PerformanceMatrix matrix(models, datasets);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < datasets.size(); ++c) {
      const auto& field = table.rows[r][c + 1];
      if (field.empty()) continue;
      const auto ctx = source + ":" + std::to_string(table.line_numbers[r]) + ": field '" + datasets[c] + "'";
      const double value = text::parse_double(field, ctx);
      detail::check_unit_interval(value, ctx);
      matrix.set(models[r], datasets[c], value);
    }
  }
  return matrix;
}

inline PerformanceMatrix load_performance_matrix(const std::string& path, const Repository* repo = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::parse, path + ": cannot open file");
  return parse_performance_matrix(in, repo, path);
}

inline std::string serialize_performance_matrix(const PerformanceMatrix& matrix) {
  std::ostringstream out;
  out << "model_id";
  for (const auto& d : matrix.datasets()) out << ',' << d;
  out << '\n';
  for (std::size_t m = 0; m < matrix.models().size(); ++m) {
    out << matrix.models()[m];
    for (std::size_t d = 0; d < matrix.datasets().size(); ++d) {
      out << ',';
      if (const auto v = matrix.at(m, d)) out << text::format_double(*v);
    }
    out << '\n';
  }
  return out.str();
}

// Mean accuracy over the model's present cells.
inline double model_avg_acc(const PerformanceMatrix& matrix, const std::string& model_id) {
  const auto m = matrix.model_index(model_id);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t d = 0; d < matrix.datasets().size(); ++d) {
    if (const auto v = matrix.at(m, d)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorKind::no_data, "model '" + model_id + "' has no present matrix cells");
  return sum / static_cast<double>(count);
}

struct TrainingTrace {
  std::string model_id;
  std::string dataset_id;
  std::vector<double> stage_val;
  double final_test = 0.0;
  long long stage_len_steps = 1;
  double epochs_per_stage = 1.0;

  bool operator==(const TrainingTrace&) const = default;
};

inline void validate_trace(const TrainingTrace& trace, const std::string& context) {
  if (trace.model_id.empty()) throw Error(ErrorKind::parse, context + ": empty model_id");
  if (trace.stage_val.empty()) throw Error(ErrorKind::parse, context + ": stage_val is empty");
  for (std::size_t i = 0; i < trace.stage_val.size(); ++i) {
    detail::check_unit_interval(trace.stage_val[i], context + ": stage_val[" + std::to_string(i) + "]");
  }
  detail::check_unit_interval(trace.final_test, context + ": final_test");
  if (trace.stage_len_steps <= 0) throw Error(ErrorKind::out_of_range, context + ": stage_len_steps must be positive");
  if (!(trace.epochs_per_stage > 0.0)) throw Error(ErrorKind::out_of_range, context + ": epochs_per_stage must be positive");
}

inline std::vector<TrainingTrace> parse_traces(const std::string& text, const Repository* repo,
                                               const std::string& source = "<traces>") {
  const json doc = detail::parse_json(text, source);
  if (!doc.is_array()) throw Error(ErrorKind::parse, source + ": traces file must be a JSON array");
  std::vector<TrainingTrace> traces;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto ctx = source + ": [" + std::to_string(i) + "]";
    const auto& t = doc[i];
    TrainingTrace trace;
    trace.model_id = detail::json_field<std::string>(t, "model_id", ctx);
    trace.dataset_id = detail::json_field<std::string>(t, "dataset_id", ctx);
    trace.stage_val = detail::json_field<std::vector<double>>(t, "stage_val", ctx);
    trace.final_test = detail::json_field<double>(t, "final_test", ctx);
    if (t.contains("stage_len_steps")) trace.stage_len_steps = detail::json_field<long long>(t, "stage_len_steps", ctx);
    if (t.contains("epochs_per_stage")) trace.epochs_per_stage = detail::json_field<double>(t, "epochs_per_stage", ctx);
    validate_trace(trace, ctx);
    if (repo && !repo->has_model(trace.model_id)) {
      throw Error(ErrorKind::unknown_id, ctx + ": unknown model id '" + trace.model_id + "'");
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

inline std::vector<TrainingTrace> load_traces(const std::string& path, const Repository* repo = nullptr) {
  return parse_traces(text::read_file(path), repo, path);
}

inline json trace_to_json(const TrainingTrace& t) {
  return {{"model_id", t.model_id},         {"dataset_id", t.dataset_id},
          {"stage_val", t.stage_val},       {"final_test", t.final_test},
          {"stage_len_steps", t.stage_len_steps}, {"epochs_per_stage", t.epochs_per_stage}};
}

inline std::string serialize_traces(const std::vector<TrainingTrace>& traces) {
  json doc = json::array();
  for (const auto& t : traces) doc.push_back(trace_to_json(t));
  return doc.dump(1) + "\n";
}

// Source-model output distributions over Z source labels, one row per target example.
struct PredictionDump {
  std::string target_dataset_id;
  std::size_t source_label_count = 0;
  std::vector<std::vector<double>> probs;
  std::vector<int> labels;

  std::size_t rows() const { return labels.size(); }

  int target_label_count() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }

  bool operator==(const PredictionDump&) const = default;
};

inline constexpr double kRowSumTolerance = 1e-6;

inline void validate_dump(const PredictionDump& dump, const std::string& context) {
  if (dump.source_label_count == 0) throw Error(ErrorKind::parse, context + ": no source label columns");
  if (dump.probs.size() != dump.labels.size()) throw Error(ErrorKind::parse, context + ": probs/labels size mismatch");
  for (std::size_t i = 0; i < dump.probs.size(); ++i) {
    const auto& row = dump.probs[i];
    const auto ctx = context + ": row " + std::to_string(i);
    if (row.size() != dump.source_label_count) throw Error(ErrorKind::parse, ctx + ": wrong column count");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorKind::out_of_range, ctx + ": negative or non-finite probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw Error(ErrorKind::out_of_range, ctx + ": probabilities sum to " + text::format_double(sum) + ", not 1");
    }
    if (dump.labels[i] < 0) throw Error(ErrorKind::out_of_range, ctx + ": negative label");
  }
}

inline PredictionDump parse_prediction_dump(std::istream& in, const std::string& target_dataset_id,
                                            const std::string& source = "<dump>") {
  const auto table = text::parse_csv(in, source);
  const auto& header = table.header;
  if (header.size() < 2 || header.back() != "label") {
    throw Error(ErrorKind::parse, source + ":1: header must be p_0,...,p_{Z-1},label");
  }
  for (std::size_t z = 0; z + 1 < header.size(); ++z) {
    if (header[z] != "p_" + std::to_string(z)) {
      throw Error(ErrorKind::parse, source + ":1: expected column 'p_" + std::to_string(z) + "', found '" + header[z] + "'");
    }
  }
  PredictionDump dump;
  dump.target_dataset_id = target_dataset_id;
  dump.source_label_count = header.size() - 1;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto ctx = source + ":" + std::to_string(table.line_numbers[r]);
    std::vector<double> row;
    row.reserve(dump.source_label_count);
    for (std::size_t z = 0; z < dump.source_label_count; ++z) row.push_back(text::parse_double(table.rows[r][z], ctx));
    dump.probs.push_back(std::move(row));
    dump.labels.push_back(static_cast<int>(text::parse_int(table.rows[r].back(), ctx)));
  }
  if (dump.rows() == 0) throw Error(ErrorKind::parse, source + ": no data rows");
  validate_dump(dump, source);
  return dump;
}

inline PredictionDump load_prediction_dump(const std::string& path, const std::string& target_dataset_id = "") {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::parse, path + ": cannot open file");
  return parse_prediction_dump(in, target_dataset_id, path);
}

inline std::string serialize_prediction_dump(const PredictionDump& dump) {
  std::ostringstream out;
  for (std::size_t z = 0; z < dump.source_label_count; ++z) out << "p_" << z << ',';
  out << "label\n";
  for (std::size_t i = 0; i < dump.rows(); ++i) {
    for (double p : dump.probs[i]) out << text::format_double(p) << ',';
    out << dump.labels[i] << '\n';
  }
  return out.str();
}

// A target task: per-candidate training traces on the target dataset (for replay) and
// per-model prediction dumps (for the proxy score).
struct TargetTask {
  std::string id;
  std::map<std::string, TrainingTrace> traces;
  std::map<std::string, PredictionDump> dumps;
};

inline void validate_target(const TargetTask& task, const Repository& repo) {
  for (const auto& [model, trace] : task.traces) {
    if (!repo.has_model(model)) throw Error(ErrorKind::unknown_id, "target '" + task.id + "': unknown model id '" + model + "'");
  }
  for (const auto& [model, dump] : task.dumps) {
    if (!repo.has_model(model)) throw Error(ErrorKind::unknown_id, "target '" + task.id + "': unknown model id '" + model + "'");
  }
}

}  // namespace twophase
