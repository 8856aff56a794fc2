#pragma once

// Five-method comparison on a task set, ablation sweeps, and report/CSV
// output.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "gboost/backends/remote.hpp"
#include "gboost/engine.hpp"
#include "gboost/harness/baselines.hpp"
#include "gboost/harness/config.hpp"
#include "gboost/harness/tasks.hpp"
#include "gboost/harness/trace_io.hpp"

namespace gboost {

enum class Method : std::uint8_t { Base, Tuned, TunedMCTS, ProxyTuning, GBoost };

inline constexpr std::array<Method, 5> kAllMethods = {Method::Base, Method::Tuned, Method::TunedMCTS,
                                                      Method::ProxyTuning, Method::GBoost};

inline constexpr std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::Base: return "base";
    case Method::Tuned: return "tuned";
    case Method::TunedMCTS: return "tuned_mcts";
    case Method::ProxyTuning: return "proxy_tuning";
    case Method::GBoost: return "gboost";
  }
  return "?";
}

struct QueryRecord {
  std::size_t task = 0;
  Method method = Method::GBoost;
  TokenSeq answer;
  bool correct = false;
  double best_reward = 0.0;
  std::uint64_t iterations = 0;
  bool terminal_found = false;
  bool truncated = false;
  std::optional<std::string> error;
  double wall_ms = 0.0;
};

struct BenchmarkReport {
  nlohmann::json config;
  std::size_t task_count = 0;
  std::map<Method, double> accuracy;
  std::vector<QueryRecord> records;  // task-major, methods in kAllMethods order
  std::map<Method, double> mean_wall_ms;
  double wall_seconds = 0.0;
  /// One trace per task for each search method.
  std::vector<std::vector<TraceEvent>> gboost_traces;
  std::vector<std::vector<TraceEvent>> tuned_mcts_traces;

  double accuracy_of(Method m) const { return accuracy.at(m); }
};

namespace detail {

struct TaskOutcome {
  std::array<QueryRecord, kAllMethods.size()> records;
  std::vector<TraceEvent> gboost_trace;
  std::vector<TraceEvent> tuned_mcts_trace;
};

inline TaskOutcome evaluate_task(std::size_t index, const ToyTask& task, const BackendTriple& backends,
                                 const RewardModel& prm, const SearchConfig& base_config) {
  SearchConfig config = base_config;
  config.seed = mix64(base_config.seed + index);
  TaskOutcome out;
  for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
    QueryRecord& rec = out.records[m];
    rec.task = index;
    rec.method = kAllMethods[m];
    const auto start = std::chrono::steady_clock::now();
    try {
      switch (rec.method) {
        case Method::Base:
        case Method::Tuned:
        case Method::ProxyTuning: {
          const BaselineMode mode = rec.method == Method::Base    ? BaselineMode::Base
                                    : rec.method == Method::Tuned ? BaselineMode::Tuned
                                                                  : BaselineMode::ProxyTuning;
          const BaselineOutput o = baseline_decode(mode, backends, task.query, config);
          rec.answer = o.answer_tokens;
          rec.truncated = o.truncated;
          rec.terminal_found = !o.truncated;
          break;
        }
        case Method::TunedMCTS:
        case Method::GBoost: {
          ReasoningResult r = rec.method == Method::GBoost ? run_search(task.query, backends, prm, config)
                                                           : tuned_mcts(backends, prm, task.query, config);
          rec.answer = r.answer_tokens;
          rec.best_reward = r.best_reward;
          rec.iterations = r.iterations_run;
          rec.terminal_found = r.terminal_found;
          rec.error = r.error;
          for (auto& e : r.trace) e.query_index = index;
          (rec.method == Method::GBoost ? out.gboost_trace : out.tuned_mcts_trace) = std::move(r.trace);
          break;
        }
      }
    } catch (const Error& e) {
      rec.error = e.what();
    }
    rec.correct = !rec.error && rec.answer == task.oracle_answer;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return out;
}

}  // namespace detail

/// Evaluates every method on every task. Tasks may be spread over
/// `threads` workers; the report is assembled in task order.
inline BenchmarkReport run_benchmark(const std::vector<ToyTask>& tasks, const BackendTriple& backends,
                                     const RewardModel& prm, const SearchConfig& config, unsigned threads = 1,
                                     nlohmann::json config_snapshot = {}) {
  if (tasks.empty()) throw InvalidInput("benchmark needs at least one task");
  config.validate();
  backends.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<detail::TaskOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      outcomes[i] = detail::evaluate_task(i, tasks[i], backends, prm, config);
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  BenchmarkReport report;
  report.config = config_snapshot.is_null() ? nlohmann::json{{"search", search_config_to_json(config)}}
                                            : std::move(config_snapshot);
  report.task_count = tasks.size();
  std::map<Method, std::size_t> correct;
  std::map<Method, double> wall;
  for (auto& o : outcomes) {
    for (auto& rec : o.records) {
      correct[rec.method] += rec.correct ? 1 : 0;
      wall[rec.method] += rec.wall_ms;
      report.records.push_back(std::move(rec));
    }
    report.gboost_traces.push_back(std::move(o.gboost_trace));
    report.tuned_mcts_traces.push_back(std::move(o.tuned_mcts_trace));
  }
  for (Method m : kAllMethods) {
    report.accuracy[m] = static_cast<double>(correct[m]) / static_cast<double>(tasks.size());
    report.mean_wall_ms[m] = wall[m] / static_cast<double>(tasks.size());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Report body without timing, so identical runs serialize identically.
inline nlohmann::json report_content_json(const BenchmarkReport& r) {
  using nlohmann::json;
  json acc = json::object();
  for (const auto& [m, a] : r.accuracy) acc[std::string(to_string(m))] = a;
  json records = json::array();
  for (const auto& rec : r.records) {
    records.push_back({{"task", rec.task},
                       {"method", std::string(to_string(rec.method))},
                       {"answer", rec.answer},
                       {"correct", rec.correct},
                       {"best_reward", rec.best_reward},
                       {"iterations", rec.iterations},
                       {"terminal_found", rec.terminal_found},
                       {"truncated", rec.truncated},
                       {"error", rec.error ? json(*rec.error) : json(nullptr)}});
  }
  return {{"schema", "gboost-report"},
          {"version", 1},
          {"config", r.config},
          {"task_count", r.task_count},
          {"accuracy", acc},
          {"records", records}};
}

inline nlohmann::json report_to_json(const BenchmarkReport& r) {
  nlohmann::json j = report_content_json(r);
  nlohmann::json per_method = nlohmann::json::object();
  for (const auto& [m, ms] : r.mean_wall_ms) per_method[std::string(to_string(m))] = ms;
  j["timing"] = {{"wall_seconds", r.wall_seconds}, {"mean_wall_ms", per_method}};
  return j;
}

inline std::string summary_csv(const BenchmarkReport& r) {
  std::ostringstream os;
  os << "method,accuracy,tasks\n";
  for (Method m : kAllMethods) os << to_string(m) << ',' << r.accuracy.at(m) << ',' << r.task_count << '\n';
  return os.str();
}

/// Writes report.json, summary.csv and the two search trace files.
inline void write_report(const BenchmarkReport& r, const std::filesystem::path& dir,
                         std::optional<std::filesystem::path> gboost_trace_path = std::nullopt) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw Error("cannot write " + (dir / "report.json").string());
    out << report_to_json(r).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "summary.csv");
    if (!out) throw Error("cannot write " + (dir / "summary.csv").string());
    out << summary_csv(r);
  }
  auto flatten = [](const std::vector<std::vector<TraceEvent>>& per_task) {
    std::vector<TraceEvent> all;
    for (const auto& t : per_task) all.insert(all.end(), t.begin(), t.end());
    return all;
  };
  export_trace(flatten(r.gboost_traces), gboost_trace_path.value_or(dir / "trace_gboost.ndjson"));
  export_trace(flatten(r.tuned_mcts_traces), dir / "trace_tuned_mcts.ndjson");
}

/// Backends, PRM and tasks described by a config file.
struct PreparedRun {
  BackendTriple backends;
  std::shared_ptr<const RewardModel> prm;
  std::vector<ToyTask> tasks;
};

/// Builds everything a benchmark needs. Without an explicit task list the
/// config's "tasks" section generates one.
inline PreparedRun prepare_run(const BenchmarkConfig& config, std::optional<std::vector<ToyTask>> tasks = std::nullopt) {
  PreparedRun run;
  run.backends = make_backends(config.backends);
  run.tasks = tasks ? std::move(*tasks) : generate_tasks(config.tasks.seed, config.tasks.n, config.tasks.profile);
  if (run.tasks.empty()) throw InvalidInput("benchmark needs at least one task");
  if (config.prm.kind == PrmSpec::Kind::Remote) {
    if (config.prm.url.empty()) throw InvalidInput("remote PRM has no url");
    run.prm = std::make_shared<remote::RemotePRMClient>(endpoint_for(config.backends, config.prm.url));
  } else {
    run.prm = oracle_for(run.tasks, run.backends.vocabulary());
  }
  return run;
}

inline BenchmarkReport run_benchmark(const BenchmarkConfig& config,
                                     std::optional<std::vector<ToyTask>> tasks = std::nullopt) {
  const PreparedRun run = prepare_run(config, std::move(tasks));
  return run_benchmark(run.tasks, run.backends, *run.prm, config.search, config.threads,
                       benchmark_config_to_json(config));
}

inline constexpr std::array<std::string_view, 5> kSweepParams = {"c_explore", "step_length", "max_iterations",
                                                                 "p_collab", "expand_strategy"};

/// Returns `config` with one named parameter replaced by a textual value.
inline SearchConfig apply_param(SearchConfig config, std::string_view name, const std::string& value) {
  try {
    if (name == "c_explore") config.c_explore = std::stod(value);
    else if (name == "step_length") config.step_length = std::stoul(value);
    else if (name == "max_iterations") config.max_iterations = std::stoul(value);
    else if (name == "p_collab") config.p_collab = std::stod(value);
    else if (name == "expand_strategy") config.expand_strategy = expand_strategy_from_string(value);
    else throw InvalidInput("unknown sweep parameter '" + std::string(name) + "'");
  } catch (const std::logic_error&) {
    throw InvalidInput("bad value '" + value + "' for " + std::string(name));
  }
  config.validate();
  return config;
}

struct SweepResult {
  std::string parameter;
  std::vector<std::string> values;
  std::vector<BenchmarkReport> reports;
};

inline SweepResult sweep(std::string_view parameter, const std::vector<std::string>& values,
                         const std::vector<ToyTask>& tasks, const BackendTriple& backends, const RewardModel& prm,
                         const SearchConfig& config, unsigned threads = 1) {
  if (values.size() < 2) throw InvalidInput("a sweep needs at least two values");
  SweepResult out{std::string(parameter), values, {}};
  for (const auto& v : values) {
    const SearchConfig c = apply_param(config, parameter, v);
    out.reports.push_back(run_benchmark(tasks, backends, prm, c, threads));
  }
  return out;
}

/// One row per (value, method).
inline std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  os << "param,value,method,accuracy,tasks\n";
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    for (Method m : kAllMethods) {
      os << s.parameter << ',' << s.values[i] << ',' << to_string(m) << ',' << s.reports[i].accuracy.at(m) << ','
         << s.reports[i].task_count << '\n';
    }
  }
  return os.str();
}

}  // namespace gboost
