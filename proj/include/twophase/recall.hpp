#pragma once

// Coarse recall: combine each model's mean benchmark accuracy with the normalized proxy score of
// its cluster representative. Models in singleton clusters receive a similarity-weighted average
// of the non-singleton representatives' proxies.

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "twophase/clustering.hpp"
#include "twophase/error.hpp"
#include "twophase/leep.hpp"
#include "twophase/repository.hpp"
#include "twophase/similarity.hpp"

namespace twophase {

inline constexpr std::size_t kDefaultRecallK = 10;

struct RecallEntry {
  std::string model_id;
  double score = 0.0;
  std::size_t cluster = 0;
  bool singleton = false;
};

struct RecallResult {
  std::vector<RecallEntry> ranked;  // descending score, ties by id
  std::vector<std::string> top_k;
  std::size_t proxy_evals = 0;
  std::vector<std::string> warnings;
};

// `proxies` must hold a normalized score for the representative of every non-singleton cluster.
inline RecallResult recall_scores(const PerformanceMatrix& matrix, const ModelClustering& clustering,
                                  const std::vector<ProxyScore>& proxies, std::size_t k_sim = kDefaultTopK) {
  if (clustering.representatives.size() != clustering.clusters.size()) {
    throw Error(ErrorKind::config, "recall: clustering has no representatives selected");
  }
  std::map<std::string, double> proxy_of;
  for (const auto& p : proxies) proxy_of[p.model_id] = p.normalized;

  struct Source {
    std::string rep;
    double proxy;
    ModelVector vec;
  };
  std::vector<Source> sources;
  bool any_singleton = false;
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    if (clustering.clusters[c].size() == 1) {
      any_singleton = true;
      continue;
    }
    const auto& rep = clustering.representatives[c];
    const auto it = proxy_of.find(rep);
    if (it == proxy_of.end()) {
      throw Error(ErrorKind::config, "recall: missing proxy score for representative '" + rep + "'");
    }
    sources.push_back({rep, it->second, model_vector(matrix, rep)});
  }
  if (any_singleton && sources.empty()) {
    throw Error(ErrorKind::config, "recall: singleton clusters present but no non-singleton cluster to propagate from");
  }

  RecallResult result;
  result.proxy_evals = sources.size();
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    const auto& members = clustering.clusters[c];
    if (members.size() > 1) {
      const double proxy = proxy_of.at(clustering.representatives[c]);
      for (const auto& id : members) result.ranked.push_back({id, model_avg_acc(matrix, id) * proxy, c, false});
      continue;
    }
    const auto& id = members.front();
    const auto vec = model_vector(matrix, id);
    double propagated = 0.0;
    for (const auto& src : sources) {
      if (shared_abs_differences(vec, src.vec).empty()) {
        result.warnings.push_back("model '" + id + "' shares no datasets with representative '" + src.rep +
                                  "'; similarity taken as 0");
        continue;
      }
      propagated += pair_similarity(vec, src.vec, k_sim) * src.proxy;
    }
    propagated /= static_cast<double>(sources.size());
    result.ranked.push_back({id, model_avg_acc(matrix, id) * propagated, c, true});
  }
  std::sort(result.ranked.begin(), result.ranked.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.model_id < b.model_id;
  });
  return result;
}

inline std::vector<std::string> top_k(const RecallResult& result, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::config, "top_k: K must be positive");
  if (k > result.ranked.size()) {
    throw Error(ErrorKind::config, "top_k: K = " + std::to_string(k) + " exceeds the " +
                                       std::to_string(result.ranked.size()) + " ranked models");
  }
  std::vector<std::string> ids;
  ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ids.push_back(result.ranked[i].model_id);
  return ids;
}

inline std::string recall_csv(const RecallResult& result) {
  std::ostringstream out;
  out << "rank,model_id,score,cluster_id,is_singleton\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const auto& e = result.ranked[i];
    out << i + 1 << ',' << e.model_id << ',' << text::format_double(e.score) << ',' << e.cluster << ','
        << (e.singleton ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace twophase
