#pragma once

// Command-line front end. Exit codes: 0 success, 1 validation error, 2 usage error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "twophase/bundle.hpp"
#include "twophase/clustering.hpp"
#include "twophase/error.hpp"
#include "twophase/leep.hpp"
#include "twophase/pipeline.hpp"
#include "twophase/presets.hpp"
#include "twophase/recall.hpp"
#include "twophase/selection.hpp"
#include "twophase/synthetic.hpp"

namespace twophase::cli {

namespace fs = std::filesystem;

struct ConfigFlags {
  std::string config = "default";
  std::optional<std::size_t> k_sim;
  std::optional<std::string> method;
  std::optional<std::string> cut;
  std::optional<std::string> linkage;
  std::optional<std::size_t> k_clusters;
  std::optional<std::size_t> k_recall;
  std::optional<std::size_t> total_steps;
  std::optional<std::size_t> interval;
  std::optional<double> threshold;
  std::optional<std::string> trend_clusters;
  std::optional<double> coarse_cost;
  std::optional<double> leep_floor;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "Config JSON file, or 'default'");
    cmd.add_option("--k-sim", k_sim, "Datasets averaged in the similarity (top-k)");
    cmd.add_option("--method", method, "Clustering method: hierarchical | kmeans | external");
    cmd.add_option("--cut", cut, "Hierarchical cut: 'auto' or a distance threshold");
    cmd.add_option("--linkage", linkage, "Hierarchical linkage: average | complete | single");
    cmd.add_option("--k-clusters", k_clusters, "Cluster count for k-means");
    cmd.add_option("--k-recall", k_recall, "Number of recalled models (K)");
    cmd.add_option("--total-steps", total_steps, "Total training stages T");
    cmd.add_option("--interval", interval, "Validation interval s");
    cmd.add_option("--threshold", threshold, "Fine-selection filtering threshold (fraction)");
    cmd.add_option("--trend-clusters", trend_clusters, "Convergence-trend cluster count or 'auto'");
    cmd.add_option("--coarse-cost", coarse_cost, "Epochs charged per proxy evaluation");
    cmd.add_option("--leep-floor", leep_floor, "Clamp per-row LEEP likelihoods below at this value");
  }

  PipelineConfig resolve(std::uint64_t seed, bool seed_given) const {
    PipelineConfig c;
    if (config != "default") c = config_from_json(detail::parse_json(text::read_file(config), config), config);
    if (k_sim) c.k_sim = *k_sim;
    if (method) c.cluster_method = parse_cluster_method(*method);
    if (cut) c.cut = *cut == "auto" ? CutRule::automatic() : CutRule::at(text::parse_double(*cut, "--cut"));
    if (linkage) c.linkage = parse_linkage(*linkage);
    if (k_clusters) c.k_clusters = *k_clusters;
    if (k_recall) c.k_recall = *k_recall;
    if (total_steps) c.total_steps = *total_steps;
    if (interval) c.interval = *interval;
    if (threshold) c.threshold = *threshold;
    if (trend_clusters) {
      if (*trend_clusters == "auto") {
        c.trend_clusters.reset();
      } else {
        c.trend_clusters = static_cast<std::size_t>(text::parse_int(*trend_clusters, "--trend-clusters"));
      }
    }
    if (coarse_cost) c.coarse_cost_per_eval = *coarse_cost;
    if (leep_floor) c.leep_floor = *leep_floor;
    if (seed_given) c.seed = seed;
    validate_config(c);
    return c;
  }
};

inline void emit(const std::string& content, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    text::write_file(path, content);
  }
}

inline std::vector<std::string> split_ids(const std::string& list) {
  std::vector<std::string> ids;
  for (auto& f : text::split_csv_line(list)) {
    if (!f.empty()) ids.push_back(f);
  }
  return ids;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-phase model selection: clustering, LEEP recall and fine-selection with epoch accounting",
               "twophase"};
  app.require_subcommand(1);
  bool json_errors = false;
  std::uint64_t seed = 0;
  app.add_flag("--json-errors", json_errors, "Report errors as JSON on stderr");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  // cluster
  auto* cluster_cmd = app.add_subcommand("cluster", "Cluster models by benchmark performance");
  std::string c_bundle, c_repo, c_matrix, c_distances, c_out;
  ConfigFlags c_flags;
  cluster_cmd->add_option("--bundle", c_bundle, "Bundle directory (repository.json + matrix.csv)");
  cluster_cmd->add_option("--repo", c_repo, "Repository manifest");
  cluster_cmd->add_option("--matrix", c_matrix, "Performance matrix CSV");
  cluster_cmd->add_option("--distances", c_distances, "External distance matrix CSV (method external)");
  cluster_cmd->add_option("--out", c_out, "Output clusters.json path (default stdout)");
  c_flags.attach(*cluster_cmd);

  // leep
  auto* leep_cmd = app.add_subcommand("leep", "LEEP scores for prediction dumps");
  std::vector<std::string> l_dumps;
  std::string l_bundle, l_out;
  ConfigFlags l_flags;
  leep_cmd->add_option("--dump", l_dumps, "Prediction dump CSV (repeatable); model id is the file stem");
  leep_cmd->add_option("--bundle", l_bundle, "Bundle directory: score the cluster representatives");
  leep_cmd->add_option("--out", l_out, "Output proxy.csv path (default stdout)");
  l_flags.attach(*leep_cmd);

  // recall
  auto* recall_cmd = app.add_subcommand("recall", "Coarse recall over a bundle");
  std::string r_bundle, r_out;
  ConfigFlags r_flags;
  recall_cmd->add_option("--bundle", r_bundle, "Bundle directory")->required();
  recall_cmd->add_option("--out", r_out, "Output directory for clusters.json, proxy.csv, recall.csv");
  r_flags.attach(*recall_cmd);

  // select
  auto* select_cmd = app.add_subcommand("select", "Run a selection method on a bundle's target traces");
  std::string s_bundle, s_out, s_models, s_method = "fs";
  ConfigFlags s_flags;
  select_cmd->add_option("--bundle", s_bundle, "Bundle directory")->required();
  select_cmd->add_option("--models", s_models, "Comma-separated candidate ids (default: all)");
  select_cmd->add_option("--algorithm", s_method, "fs | sh | bf")->check(CLI::IsMember({"fs", "sh", "bf"}));
  select_cmd->add_option("--out", s_out, "Output directory for selection_log.json and trends.json");
  s_flags.attach(*select_cmd);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic scenario and run BF, SH and FS on it");
  std::string m_spec, m_out;
  ConfigFlags m_flags;
  sim_cmd->add_option("--spec", m_spec, "Scenario spec JSON (default: two blocks of five)");
  sim_cmd->add_option("--out", m_out, "Output directory for the selection logs");
  m_flags.attach(*sim_cmd);

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "End-to-end BF / SH / two-phase comparison");
  std::string p_bundle, p_out, p_distances;
  ConfigFlags p_flags;
  cmp_cmd->add_option("--bundle", p_bundle, "Bundle directory")->required();
  cmp_cmd->add_option("--distances", p_distances, "External distance matrix CSV (method external)");
  cmp_cmd->add_option("--out", p_out, "Output directory");
  p_flags.attach(*cmp_cmd);

  // gen-synthetic
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic input bundle");
  std::string g_spec, g_preset, g_out;
  auto* g_spec_opt = gen_cmd->add_option("--spec", g_spec, "Scenario spec JSON");
  gen_cmd->add_option("--preset", g_preset, "Engineered preset name")->check(CLI::IsMember(preset_names()))->excludes(g_spec_opt);
  gen_cmd->add_option("--out", g_out, "Output directory")->required();

  std::vector<const char*> argv{"twophase"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (json_errors) {
      err << nlohmann::json{{"error", {{"kind", "usage"}, {"message", e.what()}, {"exit_code", 2}}}}.dump() << '\n';
    } else {
      err << "error: " << e.what() << "\nRun with --help for usage.\n";
    }
    return 2;
  }
  const bool seed_given = seed_opt->count() > 0;

  try {
    if (cluster_cmd->parsed()) {
      const auto config = c_flags.resolve(seed, seed_given);
      if (!c_bundle.empty()) {
        c_repo = (fs::path(c_bundle) / "repository.json").string();
        c_matrix = (fs::path(c_bundle) / "matrix.csv").string();
      }
      if (c_repo.empty() || c_matrix.empty()) throw CLI::RequiredError("--bundle or --repo/--matrix");
      const auto repo = load_repository(c_repo);
      const auto matrix = load_performance_matrix(c_matrix, &repo);
      std::optional<DistanceMatrix> external;
      if (!c_distances.empty()) external = load_distance_matrix(c_distances);
      const auto clustering = cluster_models(matrix, config, external ? &*external : nullptr);
      emit(clustering_to_json(clustering).dump(2) + "\n", c_out, out);
    } else if (leep_cmd->parsed()) {
      const auto config = l_flags.resolve(seed, seed_given);
      std::vector<ProxyScore> scores;
      if (!l_bundle.empty()) {
        const auto bundle = load_bundle(l_bundle);
        scores = score_representatives(cluster_models(bundle.matrix, config), bundle.target, config);
      } else if (!l_dumps.empty()) {
        for (const auto& path : l_dumps) {
          const auto dump = load_prediction_dump(path);
          scores.push_back({fs::path(path).stem().string(), leep_score(dump, LeepOptions{config.leep_floor}), 0.0});
        }
        scores = normalize_scores(std::move(scores));
      } else {
        throw CLI::RequiredError("--dump or --bundle");
      }
      emit(proxy_scores_csv(scores), l_out, out);
    } else if (recall_cmd->parsed()) {
      const auto config = r_flags.resolve(seed, seed_given);
      const auto bundle = load_bundle(r_bundle);
      auto clustering = cluster_models(bundle.matrix, config);
      const auto proxies = score_representatives(clustering, bundle.target, config);
      auto recall = recall_scores(bundle.matrix, clustering, proxies, config.k_sim);
      recall.top_k = top_k(recall, config.k_recall);
      for (const auto& w : recall.warnings) err << "warning: " << w << '\n';
      if (!r_out.empty()) {
        fs::create_directories(r_out);
        text::write_file((fs::path(r_out) / "clusters.json").string(), clustering_to_json(clustering).dump(2) + "\n");
        text::write_file((fs::path(r_out) / "proxy.csv").string(), proxy_scores_csv(proxies));
        text::write_file((fs::path(r_out) / "recall.csv").string(), recall_csv(recall));
      }
      out << recall_csv(recall);
    } else if (select_cmd->parsed()) {
      const auto config = s_flags.resolve(seed, seed_given);
      const auto bundle = load_bundle(s_bundle);
      const auto models = s_models.empty() ? bundle.repository.model_ids() : split_ids(s_models);
      const auto budget = budget_for(bundle, config);
      SelectionLog log;
      TrendTable trends;
      if (s_method == "bf") {
        log = brute_force(replay_trainers(bundle.target, models), budget);
      } else if (s_method == "sh") {
        log = successive_halving(replay_trainers(bundle.target, models), budget);
      } else {
        trends = build_trend_table(bundle.benchmark_traces, models, budget.stages(), trend_options(config));
        log = fine_selection(replay_trainers(bundle.target, models), budget, trends, FilterRule{config.threshold});
      }
      if (!s_out.empty()) {
        fs::create_directories(s_out);
        text::write_file((fs::path(s_out) / "selection_log.json").string(), selection_log_to_json(log).dump(2) + "\n");
        if (trends.size() > 0) text::write_file((fs::path(s_out) / "trends.json").string(), trends_to_json(trends).dump(1) + "\n");
      }
      out << selection_summary_csv(log);
    } else if (sim_cmd->parsed()) {
      const auto config = m_flags.resolve(seed, seed_given);
      ScenarioSpec spec;
      if (!m_spec.empty()) spec = scenario_spec_from_json(detail::parse_json(text::read_file(m_spec), m_spec));
      const auto bundle = generate_synthetic_scenario(spec, seed);
      const auto models = bundle.repository.model_ids();
      const auto budget = budget_for(bundle, config);
      const auto trends = build_trend_table(bundle.benchmark_traces, models, budget.stages(), trend_options(config));
      const auto bf = brute_force(replay_trainers(bundle.target, models), budget);
      const auto sh = successive_halving(replay_trainers(bundle.target, models), budget);
      const auto fs_log = fine_selection(replay_trainers(bundle.target, models), budget, trends, FilterRule{config.threshold});
      std::ostringstream csv;
      csv << summary_csv_header() << '\n';
      for (const auto* log : {&bf, &sh, &fs_log}) csv << summary_csv_row(log->method, log->epochs, log->winner, log->winner_test) << '\n';
      if (!m_out.empty()) {
        fs::create_directories(m_out);
        for (const auto* log : {&bf, &sh, &fs_log}) {
          text::write_file((fs::path(m_out) / ("selection_log_" + log->method + ".json")).string(),
                           selection_log_to_json(*log).dump(2) + "\n");
        }
        text::write_file((fs::path(m_out) / "report.csv").string(), csv.str());
      }
      out << csv.str();
    } else if (cmp_cmd->parsed()) {
      const auto config = p_flags.resolve(seed, seed_given);
      const auto bundle = load_bundle(p_bundle);
      std::optional<DistanceMatrix> external;
      if (!p_distances.empty()) external = load_distance_matrix(p_distances);
      const auto run = run_comparison(bundle, config, external ? &*external : nullptr);
      for (const auto& w : run.two_phase.recall.warnings) err << "warning: " << w << '\n';
      const auto report = report_csv(run.report);
      if (!p_out.empty()) {
        write_two_phase_outputs(run.two_phase, p_out);
        text::write_file((fs::path(p_out) / "report.csv").string(), report);
      }
      out << report;
    } else if (gen_cmd->parsed()) {
      if (g_spec.empty() == g_preset.empty()) throw CLI::RequiredError("exactly one of --spec or --preset");
      Bundle bundle;
      if (!g_preset.empty()) {
        bundle = preset_bundle(g_preset);
      } else {
        bundle = generate_synthetic_scenario(scenario_spec_from_json(detail::parse_json(text::read_file(g_spec), g_spec)), seed);
      }
      write_bundle(bundle, g_out);
      out << "wrote bundle '" << bundle.name << "' (" << bundle.repository.size() << " models) to " << g_out << '\n';
    }
  } catch (const CLI::ParseError& e) {
    if (json_errors) {
      err << nlohmann::json{{"error", {{"kind", "usage"}, {"message", e.what()}, {"exit_code", 2}}}}.dump() << '\n';
    } else {
      err << "error: missing " << e.what() << '\n';
    }
    return 2;
  } catch (const Error& e) {
    if (json_errors) {
      err << nlohmann::json{{"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}, {"exit_code", 1}}}}.dump()
          << '\n';
    } else {
      err << "error: " << e.what() << '\n';
    }
    return 1;
  } catch (const std::exception& e) {
    if (json_errors) {
      err << nlohmann::json{{"error", {{"kind", "io"}, {"message", e.what()}, {"exit_code", 1}}}}.dump() << '\n';
    } else {
      err << "error: " << e.what() << '\n';
    }
    return 1;
  }
  return 0;
}

}  // namespace twophase::cli
