// gboost: run the five-method benchmark, ablation sweeps, and toy task
// generation from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gboost/gboost.hpp"

namespace fs = std::filesystem;
using namespace gboost;

namespace {

struct SearchOverrides {
  std::optional<std::size_t> iterations;
  std::optional<double> c_explore;
  std::optional<std::size_t> step_length;
  std::optional<double> p_collab;
  std::optional<std::string> expand;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--iterations", iterations, "Maximum search iterations (T)");
    cmd->add_option("--c-explore", c_explore, "UCT exploration constant (C)");
    cmd->add_option("--step-length", step_length, "Tokens per reasoning step (L)");
    cmd->add_option("--p-collab", p_collab, "Probability of a collaborative expansion");
    cmd->add_option("--expand", expand, "Expansion strategy")->check(CLI::IsMember({"single", "full"}));
    cmd->add_option("--seed", seed, "Search seed");
  }

  void apply(SearchConfig& c) const {
    if (iterations) c.max_iterations = *iterations;
    if (c_explore) c.c_explore = *c_explore;
    if (step_length) c.step_length = *step_length;
    if (p_collab) c.p_collab = *p_collab;
    if (expand) c.expand_strategy = expand_strategy_from_string(*expand);
    if (seed) c.seed = *seed;
    c.validate();
  }
};

BenchmarkConfig load_config(const std::string& path) {
  if (path.empty()) return benchmark_config_from_json(nlohmann::json::object());
  return load_benchmark_config(path);
}

std::optional<std::vector<ToyTask>> load_tasks(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_tasks(fs::path(path));
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_accuracy(const BenchmarkReport& r) {
  for (Method m : kAllMethods) std::cout << "  " << to_string(m) << ": " << r.accuracy_of(m) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative small/large model reasoning search"};
  app.require_subcommand(1);

  std::string config_path, task_path, out_dir = "gboost_out", trace_out;
  SearchOverrides overrides;

  auto* run = app.add_subcommand("run", "Evaluate all methods on a task set");
  run->add_option("--config", config_path, "Benchmark config JSON");
  run->add_option("--task", task_path, "Task set JSONL (default: generated from the config)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--trace-out", trace_out, "Path of the G-Boost trace file");
  overrides.attach(run);

  std::string param, values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the benchmark once per parameter value");
  sweep_cmd->add_option("--param", param, "Parameter to sweep")
      ->required()
      ->check(CLI::IsMember({"c_explore", "step_length", "max_iterations", "p_collab", "expand_strategy"}));
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
  sweep_cmd->add_option("--config", config_path, "Benchmark config JSON");
  sweep_cmd->add_option("--task", task_path, "Task set JSONL");
  sweep_cmd->add_option("--out", out_dir, "Output directory");
  overrides.attach(sweep_cmd);

  std::uint64_t gen_seed = 7;
  std::size_t gen_n = 50;
  std::string gen_profile = "complementary", gen_out;
  auto* gen = app.add_subcommand("gen-tasks", "Generate a toy task set as JSONL");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--n", gen_n, "Number of tasks")->check(CLI::PositiveNumber);
  gen->add_option("--profile", gen_profile, "Synthetic profile")
      ->check(CLI::IsMember({"general_strong", "tuned_strong", "complementary"}));
  gen->add_option("--out", gen_out, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto tasks = generate_tasks(gen_seed, gen_n, synthetic::profile_from_string(gen_profile));
      if (gen_out.empty()) {
        write_tasks(std::cout, tasks);
      } else {
        std::ofstream out(gen_out);
        if (!out) throw Error("cannot write " + gen_out);
        write_tasks(out, tasks);
      }
      return 0;
    }

    BenchmarkConfig config = load_config(config_path);
    overrides.apply(config.search);

    if (*run) {
      const BenchmarkReport report = run_benchmark(config, load_tasks(task_path));
      std::optional<fs::path> trace_path;
      if (!trace_out.empty()) trace_path = fs::path(trace_out);
      write_report(report, out_dir, trace_path);
      std::cout << "tasks: " << report.task_count << '\n';
      print_accuracy(report);
      std::cout << "report: " << (fs::path(out_dir) / "report.json").string() << '\n';
      return 0;
    }

    if (*sweep_cmd) {
      const PreparedRun prepared = prepare_run(config, load_tasks(task_path));
      const SweepResult result = sweep(param, split_csv(values), prepared.tasks, prepared.backends, *prepared.prm,
                                       config.search, config.threads);
      fs::create_directories(out_dir);
      for (std::size_t i = 0; i < result.values.size(); ++i) {
        const fs::path dir = fs::path(out_dir) / (param + "=" + result.values[i]);
        write_report(result.reports[i], dir);
        std::cout << param << '=' << result.values[i] << '\n';
        print_accuracy(result.reports[i]);
      }
      std::ofstream csv(fs::path(out_dir) / "sweep.csv");
      if (!csv) throw Error("cannot write sweep.csv");
      csv << sweep_csv(result);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "gboost: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gboost: unexpected error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
