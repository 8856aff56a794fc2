#pragma once

// JSON configuration for benchmark runs.
//
// {
//   "search":   { "c_explore": 1.0, "step_length": 4, "max_iterations": 32,
//                 "p_collab": 0.5, "expansion_budget": 2, "expand_strategy": "single",
//                 "max_depth": 3, "temperature": 1.0, "seed": 0,
//                 "deterministic_top1": true },
//   "backends": { "kind": "synthetic", "profile": "complementary", "seed": 7 }
//            or { "kind": "remote", "vocabulary": {"size": N, "eos_id": E, "answer_marker_ids": [...]},
//                 "general": {"url": ..., "model": ...}, "tuned": {...}, "base": {...},
//                 "timeout_ms": 30000, "max_retries": 2 },
//   "prm":      { "kind": "oracle" } or { "kind": "remote", "url": ... },
//   "tasks":    { "seed": 7, "n": 200, "profile": "complementary" },
//   "threads":  1
// }
//
// GBOOST_GENERAL_URL, GBOOST_PRM_URL and GBOOST_AUTH_TOKEN override the
// remote settings.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "gboost/backends/remote.hpp"
#include "gboost/backends/synthetic.hpp"
#include "gboost/core.hpp"

namespace gboost {

struct RemoteModelSpec {
  std::string url;
  std::string model;
};

struct BackendSpec {
  enum class Kind { Synthetic, Remote } kind = Kind::Synthetic;
  synthetic::Profile profile = synthetic::Profile::Complementary;
  std::uint64_t seed = 7;
  Vocabulary vocabulary = synthetic::toy_vocabulary();
  RemoteModelSpec general, tuned, base;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::optional<std::string> auth_token;
};

struct PrmSpec {
  enum class Kind { Oracle, Remote } kind = Kind::Oracle;
  std::string url;
};

struct TaskSpec {
  std::uint64_t seed = 7;
  std::size_t n = 200;
  synthetic::Profile profile = synthetic::Profile::Complementary;
};

struct BenchmarkConfig {
  SearchConfig search = synthetic::toy_search_config();
  BackendSpec backends;
  PrmSpec prm;
  TaskSpec tasks;
  unsigned threads = 1;
};

inline nlohmann::json search_config_to_json(const SearchConfig& c) {
  return {{"c_explore", c.c_explore},
          {"step_length", c.step_length},
          {"max_iterations", c.max_iterations},
          {"p_collab", c.p_collab},
          {"expansion_budget", c.expansion_budget},
          {"expand_strategy", std::string(to_string(c.expand_strategy))},
          {"max_depth", c.max_depth},
          {"temperature", c.temperature},
          {"seed", c.seed},
          {"deterministic_top1", c.deterministic_top1}};
}

inline SearchConfig search_config_from_json(const nlohmann::json& j, SearchConfig c) {
  c.c_explore = j.value("c_explore", c.c_explore);
  c.step_length = j.value("step_length", c.step_length);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.p_collab = j.value("p_collab", c.p_collab);
  c.expansion_budget = j.value("expansion_budget", c.expansion_budget);
  if (j.contains("expand_strategy")) c.expand_strategy = expand_strategy_from_string(j["expand_strategy"].get<std::string>());
  c.max_depth = j.value("max_depth", c.max_depth);
  c.temperature = j.value("temperature", c.temperature);
  c.seed = j.value("seed", c.seed);
  c.deterministic_top1 = j.value("deterministic_top1", c.deterministic_top1);
  c.validate();
  return c;
}

inline nlohmann::json benchmark_config_to_json(const BenchmarkConfig& c) {
  nlohmann::json backends;
  if (c.backends.kind == BackendSpec::Kind::Synthetic) {
    backends = {{"kind", "synthetic"}, {"profile", std::string(synthetic::to_string(c.backends.profile))},
                {"seed", c.backends.seed}};
  } else {
    // The auth token is deliberately not echoed into reports.
    auto model = [](const RemoteModelSpec& m) { return nlohmann::json{{"url", m.url}, {"model", m.model}}; };
    backends = {{"kind", "remote"},
                {"vocabulary",
                 {{"size", c.backends.vocabulary.size},
                  {"eos_id", c.backends.vocabulary.eos_id},
                  {"answer_marker_ids", c.backends.vocabulary.answer_marker_ids}}},
                {"general", model(c.backends.general)},
                {"tuned", model(c.backends.tuned)},
                {"base", model(c.backends.base)},
                {"timeout_ms", c.backends.timeout.count()},
                {"max_retries", c.backends.max_retries}};
  }
  nlohmann::json prm = c.prm.kind == PrmSpec::Kind::Oracle ? nlohmann::json{{"kind", "oracle"}}
                                                           : nlohmann::json{{"kind", "remote"}, {"url", c.prm.url}};
  return {{"search", search_config_to_json(c.search)},
          {"backends", backends},
          {"prm", prm},
          {"tasks",
           {{"seed", c.tasks.seed}, {"n", c.tasks.n}, {"profile", std::string(synthetic::to_string(c.tasks.profile))}}},
          {"threads", c.threads}};
}

inline std::optional<std::string> env_var(const char* name) {
  if (const char* v = std::getenv(name); v && *v) return std::string(v);
  return std::nullopt;
}

/// Parses a config document and applies the GBOOST_* environment overrides.
inline BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j) {
  BenchmarkConfig c;
  try {
    if (j.contains("search")) c.search = search_config_from_json(j["search"], c.search);
    if (j.contains("backends")) {
      const auto& b = j["backends"];
      const std::string kind = b.value("kind", "synthetic");
      if (kind == "synthetic") {
        c.backends.kind = BackendSpec::Kind::Synthetic;
        c.backends.profile = synthetic::profile_from_string(b.value("profile", "complementary"));
        c.backends.seed = b.value("seed", c.backends.seed);
      } else if (kind == "remote") {
        c.backends.kind = BackendSpec::Kind::Remote;
        const auto& v = b.at("vocabulary");
        c.backends.vocabulary = Vocabulary{v.at("size").get<std::size_t>(), v.at("eos_id").get<TokenId>(),
                                           v.value("answer_marker_ids", TokenSeq{})};
        c.backends.vocabulary.validate();
        auto model = [&](const char* name) {
          const auto& m = b.at(name);
          return RemoteModelSpec{m.value("url", ""), m.value("model", name)};
        };
        c.backends.general = model("general");
        c.backends.tuned = model("tuned");
        c.backends.base = model("base");
        c.backends.timeout = std::chrono::milliseconds(b.value("timeout_ms", 30000));
        c.backends.max_retries = b.value("max_retries", 2);
      } else {
        throw InvalidInput("unknown backends.kind '" + kind + "'");
      }
    }
    if (j.contains("prm")) {
      const std::string kind = j["prm"].value("kind", "oracle");
      if (kind == "oracle") c.prm.kind = PrmSpec::Kind::Oracle;
      else if (kind == "remote") {
        c.prm.kind = PrmSpec::Kind::Remote;
        c.prm.url = j["prm"].value("url", "");
      } else {
        throw InvalidInput("unknown prm.kind '" + kind + "'");
      }
    }
    if (j.contains("tasks")) {
      const auto& t = j["tasks"];
      c.tasks.seed = t.value("seed", c.tasks.seed);
      c.tasks.n = t.value("n", c.tasks.n);
      c.tasks.profile = synthetic::profile_from_string(t.value("profile", "complementary"));
    }
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed config: ") + e.what());
  }
  if (auto url = env_var("GBOOST_GENERAL_URL")) c.backends.general.url = *url;
  if (auto url = env_var("GBOOST_PRM_URL")) {
    c.prm.kind = PrmSpec::Kind::Remote;
    c.prm.url = *url;
  }
  if (auto token = env_var("GBOOST_AUTH_TOKEN")) c.backends.auth_token = *token;
  if (c.threads == 0) c.threads = 1;
  return c;
}

inline BenchmarkConfig load_benchmark_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("config " + path.string() + ": " + e.what());
  }
  return benchmark_config_from_json(j);
}

inline remote::Endpoint endpoint_for(const BackendSpec& spec, const std::string& url) {
  remote::Endpoint ep;
  ep.base_url = url;
  ep.timeout = spec.timeout;
  ep.max_retries = spec.max_retries;
  ep.auth_token = spec.auth_token;
  return ep;
}

inline BackendTriple make_backends(const BackendSpec& spec) {
  if (spec.kind == BackendSpec::Kind::Synthetic) return synthetic::synthetic_triple(spec.seed, spec.profile);
  auto make = [&](const RemoteModelSpec& m) -> BackendPtr {
    if (m.url.empty()) throw InvalidInput("remote backend '" + m.model + "' has no url");
    return std::make_shared<remote::RemoteModelClient>(endpoint_for(spec, m.url), m.model, spec.vocabulary);
  };
  BackendTriple t{make(spec.general), make(spec.tuned), make(spec.base)};
  t.validate();
  return t;
}

}  // namespace gboost
