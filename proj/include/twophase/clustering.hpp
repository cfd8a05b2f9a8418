#pragma once

// Model clustering over performance vectors: agglomerative (average linkage by default)
// with threshold or silhouette-chosen cut, k-means on imputed raw vectors, silhouette
// scoring and representative selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "twophase/error.hpp"
#include "twophase/repository.hpp"
#include "twophase/similarity.hpp"

namespace twophase {

enum class ClusterMethod { hierarchical, kmeans, external };

inline std::string to_string(ClusterMethod method) {
  switch (method) {
    case ClusterMethod::hierarchical: return "hierarchical";
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::external: return "external";
  }
  return "unknown";
}

inline ClusterMethod parse_cluster_method(const std::string& name) {
  if (name == "hierarchical") return ClusterMethod::hierarchical;
  if (name == "kmeans") return ClusterMethod::kmeans;
  if (name == "external") return ClusterMethod::external;
  throw Error(ErrorKind::config, "unknown clustering method '" + name + "'");
}

enum class Linkage { average, complete, single };

inline Linkage parse_linkage(const std::string& name) {
  if (name == "average") return Linkage::average;
  if (name == "complete") return Linkage::complete;
  if (name == "single") return Linkage::single;
  throw Error(ErrorKind::config, "unknown linkage '" + name + "'");
}

inline std::string to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::average: return "average";
    case Linkage::complete: return "complete";
    case Linkage::single: return "single";
  }
  return "unknown";
}

// Either a distance threshold (merge while height < tau) or the silhouette-maximizing cut.
struct CutRule {
  std::optional<double> threshold;

  static CutRule automatic() { return {}; }
  static CutRule at(double tau) { return {tau}; }
  bool is_auto() const { return !threshold.has_value(); }
};

struct ModelClustering {
  ClusterMethod method = ClusterMethod::hierarchical;
  // Each cluster's members are sorted; clusters are ordered by their smallest member id.
  std::vector<std::vector<std::string>> clusters;
  std::vector<std::string> representatives;  // parallel to clusters, empty until selected
  std::optional<double> silhouette;

  std::size_t cluster_of(const std::string& model_id) const {
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (std::binary_search(clusters[c].begin(), clusters[c].end(), model_id)) return c;
    }
    throw Error(ErrorKind::unknown_id, "model '" + model_id + "' is not in the clustering");
  }

  std::size_t non_singleton_count() const {
    return static_cast<std::size_t>(std::count_if(clusters.begin(), clusters.end(), [](const auto& c) { return c.size() > 1; }));
  }
};

namespace detail {

inline void canonicalize(std::vector<std::vector<std::string>>& clusters) {
  clusters.erase(std::remove_if(clusters.begin(), clusters.end(), [](const auto& c) { return c.empty(); }), clusters.end());
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

inline std::vector<std::vector<std::string>> groups_from_labels(const std::vector<std::string>& ids,
                                                               const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) groups[labels[i]].push_back(ids[i]);
  std::vector<std::vector<std::string>> out;
  for (auto& [label, members] : groups) out.push_back(std::move(members));
  canonicalize(out);
  return out;
}

inline constexpr double kTieEps = 1e-12;

}  // namespace detail

// Mean silhouette over points; singleton points contribute 0, and partitions with fewer than two
// clusters or no non-singleton cluster score 0.
inline double silhouette(const std::vector<std::size_t>& labels, const DistanceMatrix& dist) {
  const auto n = labels.size();
  if (n != dist.size()) throw Error(ErrorKind::config, "silhouette: label count does not match distance matrix");
  std::map<std::size_t, std::size_t> sizes;
  for (auto l : labels) ++sizes[l];
  const bool any_non_singleton = std::any_of(sizes.begin(), sizes.end(), [](const auto& kv) { return kv.second > 1; });
  if (sizes.size() < 2 || !any_non_singleton) return 0.0;

  double total = 0.0;
  std::map<std::size_t, double> sum_to;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    sum_to.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum_to[labels[j]] += dist(i, j);
    }
    const double a = sum_to[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, sum] : sum_to) {
      if (label != labels[i]) b = std::min(b, sum / static_cast<double>(sizes[label]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

inline double silhouette(const ModelClustering& clustering, const DistanceMatrix& dist) {
  std::vector<std::size_t> labels(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) labels[i] = clustering.cluster_of(dist.ids()[i]);
  return silhouette(labels, dist);
}

struct Merge {
  double height = 0.0;
  std::size_t left = 0;   // cluster slots; the merged cluster takes slot `left`
  std::size_t right = 0;
};

// Full agglomerative merge sequence. Slots 0..n-1 start as singletons of the points in order.
struct Dendrogram {
  std::vector<std::string> ids;
  std::vector<Merge> merges;

  // Point labels after applying the first `count` merges.
  std::vector<std::size_t> labels_after(std::size_t count) const {
    std::vector<std::size_t> labels(ids.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i;
    for (std::size_t m = 0; m < count && m < merges.size(); ++m) {
      for (auto& l : labels) {
        if (l == merges[m].right) l = merges[m].left;
      }
    }
    return labels;
  }
};

inline Dendrogram agglomerate(const DistanceMatrix& dist, Linkage linkage = Linkage::average) {
  const auto n = dist.size();
  Dendrogram tree{dist.ids(), {}};
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i][j] = dist(i, j);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::string> min_id = dist.ids();
  std::vector<bool> active(n, true);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t best_i = n, best_j = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const double dij = d[i][j];
        bool take = false;
        if (best_i == n || dij < best - detail::kTieEps) {
          take = true;
        } else if (std::abs(dij - best) <= detail::kTieEps) {
          // Ties go to the pair whose members have the lexicographically smallest ids.
          const auto& lo = std::min(min_id[i], min_id[j]);
          const auto& hi = std::max(min_id[i], min_id[j]);
          const auto& blo = std::min(min_id[best_i], min_id[best_j]);
          const auto& bhi = std::max(min_id[best_i], min_id[best_j]);
          take = std::tie(lo, hi) < std::tie(blo, bhi);
        }
        if (take) {
          best = dij;
          best_i = i;
          best_j = j;
        }
      }
    }
    tree.merges.push_back({best, best_i, best_j});
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == best_i || k == best_j) continue;
      double merged = 0.0;
      switch (linkage) {
        case Linkage::average:
          merged = (static_cast<double>(size[best_i]) * d[k][best_i] + static_cast<double>(size[best_j]) * d[k][best_j]) /
                   static_cast<double>(size[best_i] + size[best_j]);
          break;
        case Linkage::complete: merged = std::max(d[k][best_i], d[k][best_j]); break;
        case Linkage::single: merged = std::min(d[k][best_i], d[k][best_j]); break;
      }
      d[k][best_i] = d[best_i][k] = merged;
    }
    size[best_i] += size[best_j];
    min_id[best_i] = std::min(min_id[best_i], min_id[best_j]);
    active[best_j] = false;
  }
  return tree;
}

inline ModelClustering hierarchical_cluster(const DistanceMatrix& dist, CutRule cut = CutRule::automatic(),
                                            Linkage linkage = Linkage::average) {
  if (dist.size() < 2) throw Error(ErrorKind::no_data, "hierarchical clustering needs at least 2 models");
  const auto tree = agglomerate(dist, linkage);

  std::size_t merges = 0;
  if (cut.threshold) {
    while (merges < tree.merges.size() && tree.merges[merges].height < *cut.threshold) ++merges;
  } else {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m <= tree.merges.size(); ++m) {
      const double s = silhouette(tree.labels_after(m), dist);
      // On ties prefer the coarser partition.
      if (s >= best - detail::kTieEps) {
        if (s > best) best = s;
        merges = m;
      }
    }
  }
  const auto labels = tree.labels_after(merges);
  ModelClustering out;
  out.method = ClusterMethod::hierarchical;
  out.clusters = detail::groups_from_labels(dist.ids(), labels);
  out.silhouette = silhouette(labels, dist);
  return out;
}

// Raw performance vectors with absent cells replaced by their dataset's column mean.
inline std::vector<std::vector<double>> imputed_vectors(const PerformanceMatrix& matrix) {
  const auto nm = matrix.models().size();
  const auto nd = matrix.datasets().size();
  std::vector<double> column_mean(nd, 0.0);
  for (std::size_t d = 0; d < nd; ++d) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t m = 0; m < nm; ++m) {
      if (const auto v = matrix.at(m, d)) {
        sum += *v;
        ++count;
      }
    }
    if (count == 0) {
      throw Error(ErrorKind::no_data, "dataset '" + matrix.datasets()[d] + "' has no present cells to impute from");
    }
    column_mean[d] = sum / static_cast<double>(count);
  }
  std::vector<std::vector<double>> out(nm, std::vector<double>(nd));
  for (std::size_t m = 0; m < nm; ++m)
    for (std::size_t d = 0; d < nd; ++d) out[m][d] = matrix.at(m, d).value_or(column_mean[d]);
  return out;
}

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centroids;
  std::vector<double> sse_history;  // within-cluster SSE after each assignment step
  std::size_t iterations = 0;
};

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Lloyd's algorithm with k-means++ seeding. Stops when assignments stabilize or after max_iter.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                           std::size_t max_iter = 100) {
  const auto n = points.size();
  if (k == 0 || k > n) throw Error(ErrorKind::config, "k-means: cluster count must be in [1, n]");
  const auto dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw Error(ErrorKind::config, "k-means: dimension mismatch between vectors");
  }

  std::mt19937_64 rng(seed);
  KMeansResult res;
  std::vector<bool> chosen(n, false);
  const auto first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  res.centroids.push_back(points[first]);
  chosen[first] = true;
  std::vector<double> d2(n);
  while (res.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centroids) d2[i] = std::min(d2[i], squared_distance(points[i], c));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        if (r < d2[i]) break;
        r -= d2[i];
      }
    } else {
      std::vector<std::size_t> remaining;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) remaining.push_back(i);
      pick = remaining[std::uniform_int_distribution<std::size_t>(0, remaining.size() - 1)(rng)];
    }
    chosen[pick] = true;
    res.centroids.push_back(points[pick]);
  }

  res.assignment.assign(n, k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(points[i], res.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double dc = squared_distance(points[i], res.centroids[c]);
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      if (res.assignment[i] != best) changed = true;
      res.assignment[i] = best;
      sse += best_d;
    }
    res.sse_history.push_back(sse);
    res.iterations = iter + 1;
    if (!changed) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[res.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[res.assignment[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) res.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }
  return res;
}

inline ModelClustering kmeans_cluster(const PerformanceMatrix& matrix, std::size_t k_clusters, std::uint64_t seed) {
  const auto points = imputed_vectors(matrix);
  const auto res = kmeans(points, k_clusters, seed);
  ModelClustering out;
  out.method = ClusterMethod::kmeans;
  out.clusters = detail::groups_from_labels(matrix.models(), res.assignment);
  return out;
}

// Per cluster, the member with the highest mean benchmark accuracy (ties: smallest id).
inline std::vector<std::string> select_representative(const ModelClustering& clustering, const PerformanceMatrix& matrix) {
  std::vector<std::string> reps;
  reps.reserve(clustering.clusters.size());
  for (const auto& members : clustering.clusters) {
    if (members.empty()) throw Error(ErrorKind::config, "empty cluster");
    std::string best;
    double best_acc = -1.0;
    for (const auto& id : members) {
      const double acc = model_avg_acc(matrix, id);
      if (acc > best_acc || (acc == best_acc && id < best)) {
        best_acc = acc;
        best = id;
      }
    }
    reps.push_back(best);
  }
  return reps;
}

inline nlohmann::json clustering_to_json(const ModelClustering& clustering) {
  nlohmann::json doc;
  doc["method"] = to_string(clustering.method);
  doc["clusters"] = nlohmann::json::array();
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    nlohmann::json entry;
    entry["members"] = clustering.clusters[c];
    entry["representative"] = c < clustering.representatives.size() ? nlohmann::json(clustering.representatives[c]) : nlohmann::json();
    doc["clusters"].push_back(std::move(entry));
  }
  doc["silhouette"] = clustering.silhouette ? nlohmann::json(*clustering.silhouette) : nlohmann::json();
  return doc;
}

inline ModelClustering clustering_from_json(const nlohmann::json& doc, const std::string& source = "<clusters>") {
  ModelClustering out;
  out.method = parse_cluster_method(detail::json_field<std::string>(doc, "method", source));
  const auto clusters = detail::json_field<nlohmann::json>(doc, "clusters", source);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto ctx = source + ": clusters[" + std::to_string(c) + "]";
    out.clusters.push_back(detail::json_field<std::vector<std::string>>(clusters[c], "members", ctx));
    if (clusters[c].contains("representative") && clusters[c]["representative"].is_string()) {
      out.representatives.push_back(clusters[c]["representative"].get<std::string>());
    }
  }
  if (!out.representatives.empty() && out.representatives.size() != out.clusters.size()) {
    throw Error(ErrorKind::parse, source + ": representative missing for some clusters");
  }
  std::vector<std::string> seen;
  for (std::size_t c = 0; c < out.clusters.size(); ++c) {
    auto& members = out.clusters[c];
    if (members.empty()) throw Error(ErrorKind::parse, source + ": empty cluster");
    std::sort(members.begin(), members.end());
    if (!out.representatives.empty() && !std::binary_search(members.begin(), members.end(), out.representatives[c])) {
      throw Error(ErrorKind::parse, source + ": representative '" + out.representatives[c] + "' is not a member");
    }
    seen.insert(seen.end(), members.begin(), members.end());
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw Error(ErrorKind::duplicate_id, source + ": clusters overlap");
  }
  if (doc.contains("silhouette") && doc["silhouette"].is_number()) out.silhouette = doc["silhouette"].get<double>();
  return out;
}

}  // namespace twophase
