#pragma once

// End-to-end two-phase selection: cluster the repository, score cluster representatives with
// LEEP, recall the top-K models, then run fine-selection on them. Baselines (brute force and
// successive halving over the full repository) share the same epoch ledger.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "twophase/bundle.hpp"
#include "twophase/clustering.hpp"
#include "twophase/error.hpp"
#include "twophase/leep.hpp"
#include "twophase/recall.hpp"
#include "twophase/selection.hpp"
#include "twophase/similarity.hpp"
#include "twophase/trend.hpp"

namespace twophase {

struct PipelineConfig {
  std::size_t k_sim = kDefaultTopK;
  ClusterMethod cluster_method = ClusterMethod::hierarchical;
  CutRule cut = CutRule::automatic();
  Linkage linkage = Linkage::average;
  std::size_t k_clusters = 2;  // k-means only
  std::size_t k_recall = kDefaultRecallK;
  std::optional<std::size_t> total_steps;  // unset: the bundle's value
  std::optional<std::size_t> interval;
  double threshold = 0.0;
  std::optional<std::size_t> trend_clusters;  // unset: chosen by silhouette
  std::size_t trend_cap = 4;
  double coarse_cost_per_eval = 0.5;
  std::uint64_t seed = 0;
  std::optional<double> leep_floor;

  bool operator==(const PipelineConfig& o) const {
    return k_sim == o.k_sim && cluster_method == o.cluster_method && cut.threshold == o.cut.threshold &&
           linkage == o.linkage && k_clusters == o.k_clusters && k_recall == o.k_recall &&
           total_steps == o.total_steps && interval == o.interval && threshold == o.threshold &&
           trend_clusters == o.trend_clusters && trend_cap == o.trend_cap &&
           coarse_cost_per_eval == o.coarse_cost_per_eval && seed == o.seed && leep_floor == o.leep_floor;
  }
};

inline void validate_config(const PipelineConfig& c) {
  if (c.k_sim == 0) throw Error(ErrorKind::config, "k_sim must be >= 1");
  if (c.k_recall == 0) throw Error(ErrorKind::config, "k_recall must be >= 1");
  if (c.k_clusters == 0) throw Error(ErrorKind::config, "k_clusters must be >= 1");
  if (c.cut.threshold && !(*c.cut.threshold >= 0.0)) throw Error(ErrorKind::config, "cut threshold must be >= 0");
  if (c.total_steps && *c.total_steps == 0) throw Error(ErrorKind::config, "total_steps must be >= 1");
  if (c.interval && *c.interval == 0) throw Error(ErrorKind::config, "interval must be >= 1");
  if (!(c.threshold >= 0.0)) throw Error(ErrorKind::config, "threshold must be >= 0");
  if (c.trend_clusters && *c.trend_clusters == 0) throw Error(ErrorKind::config, "trend_clusters must be >= 1");
  if (c.trend_cap < 2) throw Error(ErrorKind::config, "trend_cap must be >= 2");
  if (!(c.coarse_cost_per_eval >= 0.0)) throw Error(ErrorKind::config, "coarse_cost_per_eval must be >= 0");
  if (c.leep_floor && !(*c.leep_floor > 0.0 && *c.leep_floor <= 1.0)) throw Error(ErrorKind::config, "leep_floor must be in (0, 1]");
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  using nlohmann::json;
  json doc;
  doc["k_sim"] = c.k_sim;
  doc["cluster_method"] = to_string(c.cluster_method);
  doc["cut"] = c.cut.threshold ? json(*c.cut.threshold) : json("auto");
  doc["linkage"] = to_string(c.linkage);
  doc["k_clusters"] = c.k_clusters;
  doc["k_recall"] = c.k_recall;
  doc["total_steps"] = c.total_steps ? json(*c.total_steps) : json();
  doc["interval"] = c.interval ? json(*c.interval) : json();
  doc["threshold"] = c.threshold;
  doc["trend_clusters"] = c.trend_clusters ? json(*c.trend_clusters) : json("auto");
  doc["trend_cap"] = c.trend_cap;
  doc["coarse_cost_per_eval"] = c.coarse_cost_per_eval;
  doc["seed"] = c.seed;
  doc["leep_floor"] = c.leep_floor ? json(*c.leep_floor) : json();
  return doc;
}

inline PipelineConfig config_from_json(const nlohmann::json& doc, const std::string& source = "<config>") {
  if (!doc.is_object()) throw Error(ErrorKind::parse, source + ": config must be a JSON object");
  static const std::vector<std::string> known{"k_sim",     "cluster_method", "cut",          "linkage",
                                              "k_clusters", "k_recall",      "total_steps",  "interval",
                                              "threshold", "trend_clusters", "trend_cap",    "coarse_cost_per_eval",
                                              "seed",      "leep_floor"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::parse, source + ": unknown config field '" + key + "'");
    }
  }
  PipelineConfig c;
  try {
    if (doc.contains("k_sim")) c.k_sim = doc["k_sim"].get<std::size_t>();
    if (doc.contains("cluster_method")) c.cluster_method = parse_cluster_method(doc["cluster_method"].get<std::string>());
    if (doc.contains("cut")) {
      if (doc["cut"].is_string()) {
        if (doc["cut"].get<std::string>() != "auto") throw Error(ErrorKind::parse, source + ": cut must be 'auto' or a number");
        c.cut = CutRule::automatic();
      } else {
        c.cut = CutRule::at(doc["cut"].get<double>());
      }
    }
    if (doc.contains("linkage")) c.linkage = parse_linkage(doc["linkage"].get<std::string>());
    if (doc.contains("k_clusters")) c.k_clusters = doc["k_clusters"].get<std::size_t>();
    if (doc.contains("k_recall")) c.k_recall = doc["k_recall"].get<std::size_t>();
    if (doc.contains("total_steps") && !doc["total_steps"].is_null()) c.total_steps = doc["total_steps"].get<std::size_t>();
    if (doc.contains("interval") && !doc["interval"].is_null()) c.interval = doc["interval"].get<std::size_t>();
    if (doc.contains("threshold")) c.threshold = doc["threshold"].get<double>();
    if (doc.contains("trend_clusters")) {
      if (doc["trend_clusters"].is_string()) {
        if (doc["trend_clusters"].get<std::string>() != "auto") {
          throw Error(ErrorKind::parse, source + ": trend_clusters must be 'auto' or an integer");
        }
        c.trend_clusters.reset();
      } else {
        c.trend_clusters = doc["trend_clusters"].get<std::size_t>();
      }
    }
    if (doc.contains("trend_cap")) c.trend_cap = doc["trend_cap"].get<std::size_t>();
    if (doc.contains("coarse_cost_per_eval")) c.coarse_cost_per_eval = doc["coarse_cost_per_eval"].get<double>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("leep_floor") && !doc["leep_floor"].is_null()) c.leep_floor = doc["leep_floor"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, source + ": " + e.what());
  }
  validate_config(c);
  return c;
}

inline StageBudget budget_for(const Bundle& bundle, const PipelineConfig& config) {
  return {config.total_steps.value_or(bundle.total_steps), config.interval.value_or(bundle.interval)};
}

inline TrendOptions trend_options(const PipelineConfig& config) {
  TrendOptions o;
  o.clusters = config.trend_clusters;
  o.max_clusters = config.trend_cap;
  o.seed = config.seed;
  return o;
}

// Clusters the repository's performance vectors and selects representatives.
inline ModelClustering cluster_models(const PerformanceMatrix& matrix, const PipelineConfig& config,
                                      const DistanceMatrix* external = nullptr) {
  ModelClustering clustering;
  if (config.cluster_method == ClusterMethod::external) {
    if (!external) throw Error(ErrorKind::config, "external clustering needs a distance matrix");
    clustering = hierarchical_cluster(*external, config.cut, config.linkage);
    clustering.method = ClusterMethod::external;
  } else {
    const auto dist = distance_matrix(model_vectors(matrix), config.k_sim);
    if (config.cluster_method == ClusterMethod::hierarchical) {
      clustering = hierarchical_cluster(dist, config.cut, config.linkage);
    } else {
      clustering = kmeans_cluster(matrix, config.k_clusters, config.seed);
      clustering.silhouette = silhouette(clustering, dist);
    }
  }
  clustering.representatives = select_representative(clustering, matrix);
  return clustering;
}

// LEEP on the representative of every non-singleton cluster, normalized over that set.
inline std::vector<ProxyScore> score_representatives(const ModelClustering& clustering, const TargetTask& target,
                                                     const PipelineConfig& config) {
  std::vector<ProxyScore> scores;
  const LeepOptions opts{config.leep_floor};
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    if (clustering.clusters[c].size() < 2) continue;
    const auto& rep = clustering.representatives[c];
    const auto it = target.dumps.find(rep);
    if (it == target.dumps.end()) {
      throw Error(ErrorKind::no_data, "missing prediction dump for representative '" + rep + "' on target '" + target.id + "'");
    }
    scores.push_back({rep, leep_score(it->second, opts), 0.0});
  }
  if (scores.empty()) return scores;
  return normalize_scores(std::move(scores));
}

inline std::vector<Trainer> replay_trainers(const TargetTask& target, const std::vector<std::string>& models) {
  std::vector<Trainer> trainers;
  for (const auto& id : models) {
    const auto it = target.traces.find(id);
    if (it == target.traces.end()) {
      throw Error(ErrorKind::no_data, "missing target trace for model '" + id + "' on target '" + target.id + "'");
    }
    trainers.push_back(Trainer::replay(it->second));
  }
  return trainers;
}

struct TwoPhaseResult {
  ModelClustering clustering;
  std::vector<ProxyScore> proxies;
  RecallResult recall;
  TrendTable trends;
  SelectionLog selection;
  std::size_t proxy_evals = 0;
  double coarse_epochs = 0.0;
  double total_epochs = 0.0;
};

inline TwoPhaseResult run_two_phase(const Bundle& bundle, const PipelineConfig& config,
                                    const DistanceMatrix* external = nullptr) {
  validate_config(config);
  TwoPhaseResult r;
  r.clustering = cluster_models(bundle.matrix, config, external);
  r.proxies = score_representatives(r.clustering, bundle.target, config);
  r.proxy_evals = r.proxies.size();
  r.recall = recall_scores(bundle.matrix, r.clustering, r.proxies, config.k_sim);
  r.recall.top_k = top_k(r.recall, config.k_recall);

  const auto budget = budget_for(bundle, config);
  r.trends = build_trend_table(bundle.benchmark_traces, r.recall.top_k, budget.stages(), trend_options(config));
  r.selection = fine_selection(replay_trainers(bundle.target, r.recall.top_k), budget, r.trends, FilterRule{config.threshold});
  r.selection.method = "2PH";
  r.coarse_epochs = config.coarse_cost_per_eval * static_cast<double>(r.proxy_evals);
  r.total_epochs = r.coarse_epochs + r.selection.epochs;
  return r;
}

struct MethodSummary {
  std::string method;
  double runtime_epochs = 0.0;
  std::string winner;
  double winner_test = 0.0;
};

struct ComparisonReport {
  MethodSummary bf;
  MethodSummary sh;
  MethodSummary two_phase;

  double speedup_vs_bf() const { return bf.runtime_epochs / two_phase.runtime_epochs; }
  double speedup_vs_sh() const { return sh.runtime_epochs / two_phase.runtime_epochs; }
};

struct ComparisonRun {
  SelectionLog bf;
  SelectionLog sh;
  TwoPhaseResult two_phase;
  ComparisonReport report;
};

inline ComparisonReport make_report(const SelectionLog& bf, const SelectionLog& sh, const TwoPhaseResult& two_phase) {
  ComparisonReport rep;
  rep.bf = {"BF", bf.epochs, bf.winner, bf.winner_test};
  rep.sh = {"SH", sh.epochs, sh.winner, sh.winner_test};
  rep.two_phase = {"2PH", two_phase.total_epochs, two_phase.selection.winner, two_phase.selection.winner_test};
  return rep;
}

inline ComparisonRun run_comparison(const Bundle& bundle, const PipelineConfig& config,
                                    const DistanceMatrix* external = nullptr) {
  validate_config(config);
  const auto budget = budget_for(bundle, config);
  const auto all = bundle.repository.model_ids();
  ComparisonRun run;
  run.bf = brute_force(replay_trainers(bundle.target, all), budget);
  run.sh = successive_halving(replay_trainers(bundle.target, all), budget);
  run.two_phase = run_two_phase(bundle, config, external);
  run.report = make_report(run.bf, run.sh, run.two_phase);
  return run;
}

// report.csv: the summary columns plus each row's speedup relative to BF and SH, 2 decimals.
inline std::string report_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << summary_csv_header() << ",speedup_vs_bf,speedup_vs_sh\n";
  for (const auto* row : {&report.bf, &report.sh, &report.two_phase}) {
    out << summary_csv_row(row->method, row->runtime_epochs, row->winner, row->winner_test) << ','
        << text::format_fixed(report.bf.runtime_epochs / row->runtime_epochs, 2) << ','
        << text::format_fixed(report.sh.runtime_epochs / row->runtime_epochs, 2) << '\n';
  }
  return out.str();
}

inline nlohmann::json trends_to_json(const TrendTable& table) {
  auto doc = nlohmann::json::array();
  for (const auto& [key, ts] : table) doc.push_back(trendset_to_json(ts));
  return doc;
}

inline nlohmann::json two_phase_log_json(const TwoPhaseResult& r) {
  auto doc = selection_log_to_json(r.selection);
  doc["fine_selection_epochs"] = r.selection.epochs;
  doc["proxy_evals"] = r.proxy_evals;
  doc["coarse_epochs"] = r.coarse_epochs;
  doc["total_epochs"] = r.total_epochs;
  doc["recalled"] = r.recall.top_k;
  return doc;
}

inline void write_two_phase_outputs(const TwoPhaseResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  text::write_file((dir / "clusters.json").string(), clustering_to_json(r.clustering).dump(2) + "\n");
  text::write_file((dir / "proxy.csv").string(), proxy_scores_csv(r.proxies));
  text::write_file((dir / "recall.csv").string(), recall_csv(r.recall));
  text::write_file((dir / "selection_log.json").string(), two_phase_log_json(r).dump(2) + "\n");
  text::write_file((dir / "trends.json").string(), trends_to_json(r.trends).dump(1) + "\n");
}

}  // namespace twophase
