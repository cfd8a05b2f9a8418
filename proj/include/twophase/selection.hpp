#pragma once

// Stage-wise model selection under an epoch ledger: brute force, successive halving and
// fine-selection (halving plus trend-prediction filtering).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "twophase/error.hpp"
#include "twophase/trainer.hpp"
#include "twophase/trend.hpp"

namespace twophase {

// Total training T and validation interval s, both in stage-length units; the run has floor(T/s) stages.
struct StageBudget {
  std::size_t total = 5;
  std::size_t interval = 1;

  std::size_t stages() const {
    if (interval == 0) throw Error(ErrorKind::config, "validation interval must be positive");
    return total / interval;
  }
};

enum class RemovalReason { trend_filter, halving };

inline std::string to_string(RemovalReason reason) {
  return reason == RemovalReason::trend_filter ? "trend_filter" : "halving";
}

struct Removal {
  std::string model_id;
  RemovalReason reason = RemovalReason::halving;

  bool operator==(const Removal&) const = default;
};

struct TrendMatch {
  std::string model_id;
  std::size_t trend = 0;
  double trend_val = 0.0;
  double predicted = 0.0;
};

struct StageRecord {
  std::size_t stage = 0;  // 0-based
  std::vector<std::string> before;
  std::vector<double> validation;  // parallel to `before`
  std::vector<TrendMatch> matches;
  std::vector<Removal> removals;
  std::vector<std::string> after;
  double epochs = 0.0;
};

struct SelectionLog {
  std::string method;
  std::vector<StageRecord> stages;
  std::map<std::string, double> epochs_per_stage;
  double epochs = 0.0;
  std::string winner;
  double winner_test = 0.0;
};

// Independent recount of the ledger: model-stages trained, weighted by each model's stage length.
inline double recount_ledger(const SelectionLog& log) {
  double total = 0.0;
  for (const auto& stage : log.stages) {
    for (const auto& id : stage.before) total += log.epochs_per_stage.at(id);
  }
  return total;
}

// True when two logs trained, validated and removed the same models in the same order.
inline bool same_schedule(const SelectionLog& a, const SelectionLog& b) {
  if (a.epochs != b.epochs || a.winner != b.winner || a.winner_test != b.winner_test) return false;
  if (a.stages.size() != b.stages.size()) return false;
  for (std::size_t i = 0; i < a.stages.size(); ++i) {
    const auto& x = a.stages[i];
    const auto& y = b.stages[i];
    if (x.stage != y.stage || x.before != y.before || x.validation != y.validation || x.removals != y.removals ||
        x.after != y.after || x.epochs != y.epochs) {
      return false;
    }
  }
  return true;
}

// Trend sets keyed by (model, 1-based stage).
class TrendTable {
 public:
  void add(TrendSet ts) {
    const auto key = std::make_pair(ts.model_id, ts.stage);
    table_[key] = std::move(ts);
  }

  const TrendSet* find(const std::string& model, std::size_t stage) const {
    const auto it = table_.find({model, stage});
    return it == table_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return table_.size(); }
  auto begin() const { return table_.begin(); }
  auto end() const { return table_.end(); }

 private:
  std::map<std::pair<std::string, std::size_t>, TrendSet> table_;
};

// Mines trend sets for every (model, stage) pair from the models' benchmark traces.
inline TrendTable build_trend_table(const std::vector<TrainingTrace>& benchmark_traces,
                                    const std::vector<std::string>& models, std::size_t stages,
                                    const TrendOptions& options = {}) {
  std::map<std::string, std::vector<TrainingTrace>> by_model;
  for (const auto& t : benchmark_traces) by_model[t.model_id].push_back(t);
  TrendTable table;
  for (const auto& id : models) {
    const auto it = by_model.find(id);
    if (it == by_model.end()) throw Error(ErrorKind::no_data, "no benchmark traces for model '" + id + "'");
    for (std::size_t stage = 1; stage <= stages; ++stage) table.add(mine_trends(it->second, stage, options));
  }
  return table;
}

// Filtering predicate: model i is dominated by j when j's predicted final test exceeds i's by
// more than threshold * pred_i. An infinite threshold disables the filter.
struct FilterRule {
  double threshold = 0.0;

  static FilterRule disabled() { return {std::numeric_limits<double>::infinity()}; }

  bool dominates(double pred_j, double pred_i) const {
    if (std::isinf(threshold)) return false;
    return (pred_j - pred_i) > threshold * pred_i;
  }
};

namespace detail {

struct Pool {
  std::vector<Trainer> trainers;  // sorted by model id
  std::map<std::string, std::size_t> index;
};

inline Pool make_pool(std::vector<Trainer> trainers, std::size_t stages) {
  if (trainers.empty()) throw Error(ErrorKind::config, "selection needs at least one model");
  if (stages == 0) throw Error(ErrorKind::config, "selection needs at least one stage (T >= s)");
  std::sort(trainers.begin(), trainers.end(), [](const Trainer& a, const Trainer& b) { return a.model_id() < b.model_id(); });
  Pool pool;
  for (std::size_t i = 0; i < trainers.size(); ++i) {
    if (trainers[i].total_stages() < stages) {
      throw Error(ErrorKind::no_data, "trace for '" + trainers[i].model_id() + "' has " +
                                          std::to_string(trainers[i].total_stages()) + " stages, " +
                                          std::to_string(stages) + " required");
    }
    if (!pool.index.emplace(trainers[i].model_id(), i).second) {
      throw Error(ErrorKind::duplicate_id, "model '" + trainers[i].model_id() + "' appears twice in the candidate set");
    }
  }
  pool.trainers = std::move(trainers);
  return pool;
}

// Better validation first; equal validation keeps the smaller id ahead.
inline bool ranks_before(const std::pair<std::string, double>& a, const std::pair<std::string, double>& b) {
  if (a.second != b.second) return a.second > b.second;
  return a.first < b.first;
}

inline StageRecord train_survivors(Pool& pool, const std::vector<std::string>& survivors, std::size_t stage,
                                   std::map<std::string, double>& last_val) {
  StageRecord rec;
  rec.stage = stage;
  rec.before = survivors;
  for (const auto& id : survivors) {
    auto& trainer = pool.trainers[pool.index.at(id)];
    const double v = trainer.train_stage();
    rec.validation.push_back(v);
    rec.epochs += trainer.epochs_per_stage();
    last_val[id] = v;
  }
  return rec;
}

// Drops the lowest-validation models until `keep` remain.
inline std::vector<std::string> halve(const std::vector<std::string>& survivors, std::size_t keep,
                                      const std::map<std::string, double>& val, std::vector<Removal>& removals) {
  std::vector<std::pair<std::string, double>> ranked;
  for (const auto& id : survivors) ranked.emplace_back(id, val.at(id));
  std::sort(ranked.begin(), ranked.end(), ranks_before);
  while (ranked.size() > keep) {
    removals.push_back({ranked.back().first, RemovalReason::halving});
    ranked.pop_back();
  }
  std::vector<std::string> out;
  for (const auto& [id, v] : ranked) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

// Walks from the worst validation upwards; a model goes when some survivor beats it on validation
// and on predicted final test by more than the threshold.
inline std::vector<std::string> trend_filter(const std::vector<std::string>& survivors, std::size_t stage,
                                             const TrendTable& trends, const FilterRule& rule,
                                             const std::map<std::string, double>& val, StageRecord& rec) {
  std::map<std::string, double> pred;
  for (const auto& id : survivors) {
    const auto* ts = trends.find(id, stage);
    if (!ts) {
      throw Error(ErrorKind::config, "no convergence trends for model '" + id + "' at stage " + std::to_string(stage));
    }
    const auto x = match_trend(*ts, val.at(id));
    pred[id] = ts->trends[x].test_mean;
    rec.matches.push_back({id, x, ts->trends[x].val_mean, pred[id]});
  }
  std::vector<std::pair<std::string, double>> ascending;
  for (const auto& id : survivors) ascending.emplace_back(id, val.at(id));
  std::sort(ascending.begin(), ascending.end(), [](const auto& a, const auto& b) { return ranks_before(b, a); });
  std::vector<std::string> kept = survivors;
  for (const auto& [id, v] : ascending) {
    const bool dominated = std::any_of(kept.begin(), kept.end(), [&](const std::string& j) {
      return val.at(j) > v && rule.dominates(pred.at(j), pred.at(id));
    });
    if (dominated) {
      kept.erase(std::find(kept.begin(), kept.end(), id));
      rec.removals.push_back({id, RemovalReason::trend_filter});
    }
  }
  return kept;
}

inline void finish(SelectionLog& log, Pool& pool, const std::vector<std::string>& survivors,
                   const std::map<std::string, double>& last_val) {
  for (const auto& t : pool.trainers) log.epochs_per_stage[t.model_id()] = t.epochs_per_stage();
  for (const auto& s : log.stages) log.epochs += s.epochs;
  // More than one survivor only when the stages run out before halving reaches one.
  std::vector<std::pair<std::string, double>> ranked;
  for (const auto& id : survivors) ranked.emplace_back(id, last_val.at(id));
  std::sort(ranked.begin(), ranked.end(), ranks_before);
  log.winner = ranked.front().first;
  log.winner_test = pool.trainers[pool.index.at(log.winner)].final_test();
}

}  // namespace detail

inline SelectionLog brute_force(std::vector<Trainer> trainers, StageBudget budget) {
  const auto stages = budget.stages();
  auto pool = detail::make_pool(std::move(trainers), stages);
  SelectionLog log;
  log.method = "BF";
  std::vector<std::string> all;
  for (const auto& t : pool.trainers) all.push_back(t.model_id());
  std::map<std::string, double> last_val;
  for (std::size_t t = 0; t < stages; ++t) {
    auto rec = detail::train_survivors(pool, all, t, last_val);
    rec.after = all;
    log.stages.push_back(std::move(rec));
  }
  for (const auto& tr : pool.trainers) log.epochs_per_stage[tr.model_id()] = tr.epochs_per_stage();
  for (const auto& s : log.stages) log.epochs += s.epochs;
  double best = -1.0;
  for (const auto& tr : pool.trainers) {
    if (tr.final_test() > best) {  // ids are sorted, so the first maximum is the smallest id
      best = tr.final_test();
      log.winner = tr.model_id();
    }
  }
  log.winner_test = best;
  return log;
}

inline SelectionLog successive_halving(std::vector<Trainer> trainers, StageBudget budget) {
  const auto stages = budget.stages();
  auto pool = detail::make_pool(std::move(trainers), stages);
  SelectionLog log;
  log.method = "SH";
  std::vector<std::string> survivors;
  for (const auto& t : pool.trainers) survivors.push_back(t.model_id());
  std::map<std::string, double> last_val;
  for (std::size_t t = 0; t < stages; ++t) {
    auto rec = detail::train_survivors(pool, survivors, t, last_val);
    if (survivors.size() > 1) survivors = detail::halve(survivors, survivors.size() / 2, last_val, rec.removals);
    rec.after = survivors;
    log.stages.push_back(std::move(rec));
  }
  detail::finish(log, pool, survivors, last_val);
  return log;
}

inline SelectionLog fine_selection(std::vector<Trainer> trainers, StageBudget budget, const TrendTable& trends,
                                   FilterRule rule = {}) {
  const auto stages = budget.stages();
  auto pool = detail::make_pool(std::move(trainers), stages);
  SelectionLog log;
  log.method = "FS";
  std::vector<std::string> survivors;
  for (const auto& t : pool.trainers) survivors.push_back(t.model_id());
  std::map<std::string, double> last_val;
  for (std::size_t t = 0; t < stages; ++t) {
    auto rec = detail::train_survivors(pool, survivors, t, last_val);
    if (survivors.size() > 1) {
      const auto keep = survivors.size() / 2;
      auto kept = std::isinf(rule.threshold) ? survivors : detail::trend_filter(survivors, t + 1, trends, rule, last_val, rec);
      survivors = detail::halve(kept, std::min(keep, kept.size()), last_val, rec.removals);
    }
    rec.after = survivors;
    log.stages.push_back(std::move(rec));
  }
  detail::finish(log, pool, survivors, last_val);
  return log;
}

inline nlohmann::json selection_log_to_json(const SelectionLog& log) {
  nlohmann::json doc;
  doc["method"] = log.method;
  doc["stages"] = nlohmann::json::array();
  for (const auto& s : log.stages) {
    nlohmann::json st;
    st["stage"] = s.stage;
    st["survivors_before"] = s.before;
    st["validation"] = nlohmann::json::object();
    for (std::size_t i = 0; i < s.before.size(); ++i) st["validation"][s.before[i]] = s.validation[i];
    st["matches"] = nlohmann::json::array();
    for (const auto& m : s.matches) {
      st["matches"].push_back({{"model_id", m.model_id}, {"trend", m.trend}, {"trend_val", m.trend_val}, {"predicted", m.predicted}});
    }
    st["removals"] = nlohmann::json::array();
    for (const auto& r : s.removals) st["removals"].push_back({{"model_id", r.model_id}, {"reason", to_string(r.reason)}});
    st["survivors_after"] = s.after;
    st["epochs"] = s.epochs;
    doc["stages"].push_back(std::move(st));
  }
  doc["epoch_ledger"] = log.epochs;
  doc["winner"] = log.winner;
  doc["winner_test"] = log.winner_test;
  return doc;
}

inline std::string summary_csv_header() { return "method,runtime_epochs,winner,winner_test"; }

inline std::string summary_csv_row(const std::string& method, double epochs, const std::string& winner, double winner_test) {
  return method + "," + text::format_double(epochs) + "," + winner + "," + text::format_double(winner_test);
}

inline std::string selection_summary_csv(const SelectionLog& log) {
  return summary_csv_header() + "\n" + summary_csv_row(log.method, log.epochs, log.winner, log.winner_test) + "\n";
}

}  // namespace twophase
