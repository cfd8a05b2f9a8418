#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "twophase/error.hpp"
#include "twophase/repository.hpp"

namespace twophase {

inline constexpr std::size_t kDefaultTopK = 5;

// A model's benchmark accuracies, restricted to present cells, ordered by dataset id.
struct ModelVector {
  std::string model_id;
  std::vector<std::pair<std::string, double>> dims;
};

inline ModelVector make_vector(std::string model_id, std::vector<std::pair<std::string, double>> dims) {
  std::sort(dims.begin(), dims.end());
  return {std::move(model_id), std::move(dims)};
}

inline ModelVector model_vector(const PerformanceMatrix& matrix, const std::string& model_id) {
  const auto m = matrix.model_index(model_id);
  std::vector<std::pair<std::string, double>> dims;
  for (std::size_t d = 0; d < matrix.datasets().size(); ++d) {
    if (const auto v = matrix.at(m, d)) dims.emplace_back(matrix.datasets()[d], *v);
  }
  if (dims.empty()) throw Error(ErrorKind::no_data, "model '" + model_id + "' has no present matrix cells");
  return make_vector(model_id, std::move(dims));
}

inline std::vector<ModelVector> model_vectors(const PerformanceMatrix& matrix) {
  std::vector<ModelVector> out;
  out.reserve(matrix.models().size());
  for (const auto& id : matrix.models()) out.push_back(model_vector(matrix, id));
  return out;
}

// Absolute differences over the datasets both vectors cover.
inline std::vector<double> shared_abs_differences(const ModelVector& a, const ModelVector& b) {
  std::vector<double> diffs;
  auto ia = a.dims.begin();
  auto ib = b.dims.begin();
  while (ia != a.dims.end() && ib != b.dims.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      diffs.push_back(std::abs(ia->second - ib->second));
      ++ia;
      ++ib;
    }
  }
  return diffs;
}

// 1 - mean of the k largest per-dataset accuracy differences.
inline double pair_similarity(const ModelVector& a, const ModelVector& b, std::size_t k = kDefaultTopK) {
  if (k == 0) throw Error(ErrorKind::config, "similarity top-k must be positive");
  auto diffs = shared_abs_differences(a, b);
  if (diffs.empty()) {
    throw Error(ErrorKind::no_data, "models '" + a.model_id + "' and '" + b.model_id + "' share no benchmark datasets");
  }
  const auto kk = std::min(k, diffs.size());
  std::partial_sort(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(kk), diffs.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < kk; ++i) sum += diffs[i];
  return std::clamp(1.0 - sum / static_cast<double>(kk), 0.0, 1.0);
}

// Dense symmetric matrix with ids; entry (i, j) is a distance in [0, 1].
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  explicit DistanceMatrix(std::vector<std::string> ids)
      : ids_(std::move(ids)), values_(ids_.size() * ids_.size(), 0.0) {}

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }

  void set(std::size_t i, std::size_t j, double value) {
    values_[i * ids_.size() + j] = value;
    values_[j * ids_.size() + i] = value;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<double> values_;
};

inline DistanceMatrix distance_matrix(const std::vector<ModelVector>& vectors, std::size_t k = kDefaultTopK) {
  if (vectors.size() < 2) throw Error(ErrorKind::no_data, "distance matrix needs at least 2 models");
  std::vector<std::string> ids;
  ids.reserve(vectors.size());
  for (const auto& v : vectors) ids.push_back(v.model_id);
  DistanceMatrix dist(std::move(ids));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      dist.set(i, j, 1.0 - pair_similarity(vectors[i], vectors[j], k));
    }
  }
  return dist;
}

// Externally computed distances, CSV with header `model_id,<id>...` and a square body.
inline DistanceMatrix parse_distance_matrix(std::istream& in, const std::string& source = "<distances>") {
  const auto table = text::parse_csv(in, source);
  if (table.header.empty() || table.header.front() != "model_id") {
    throw Error(ErrorKind::parse, source + ":1: header must start with 'model_id'");
  }
  std::vector<std::string> ids(table.header.begin() + 1, table.header.end());
  if (table.rows.size() != ids.size()) throw Error(ErrorKind::parse, source + ": distance matrix must be square");
  DistanceMatrix dist(ids);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto ctx = source + ":" + std::to_string(table.line_numbers[r]);
    if (table.rows[r].front() != ids[r]) throw Error(ErrorKind::parse, ctx + ": row id must match column order");
    for (std::size_t c = 0; c < ids.size(); ++c) {
      const double v = text::parse_double(table.rows[r][c + 1], ctx);
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::out_of_range, ctx + ": distance outside [0,1]");
      if (c < r && std::abs(v - dist(r, c)) > 1e-12) throw Error(ErrorKind::parse, ctx + ": distance matrix not symmetric");
      if (c == r && v != 0.0) throw Error(ErrorKind::parse, ctx + ": non-zero diagonal");
      if (c > r) dist.set(r, c, v);
    }
  }
  return dist;
}

inline DistanceMatrix load_distance_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::parse, path + ": cannot open file");
  return parse_distance_matrix(in, path);
}

}  // namespace twophase
