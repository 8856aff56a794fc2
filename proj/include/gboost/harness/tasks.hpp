#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gboost/backends/synthetic.hpp"
#include "gboost/core.hpp"
#include "gboost/harness/baselines.hpp"
#include "gboost/reward.hpp"

namespace gboost {

struct ToyTask {
  Query query;
  TokenSeq oracle_answer;
  synthetic::Difficulty difficulty = synthetic::Difficulty::Easy;
  std::uint64_t seed = 0;

  bool operator==(const ToyTask& o) const {
    return query.token_ids == o.query.token_ids && oracle_answer == o.oracle_answer &&
           difficulty == o.difficulty && seed == o.seed;
  }
};

/// Whether some sequence of per-step actions decodes (greedily) to the
/// task's answer. Used as a construction check.
inline bool answer_reachable(const BackendTriple& backends, const Query& query, const TokenSeq& answer) {
  SearchConfig cfg = synthetic::toy_search_config();
  const std::size_t depth = cfg.max_depth;
  for (unsigned mask = 0; mask < (1u << depth); ++mask) {
    const BaselineOutput out = decode_actions(backends, query, cfg, [mask](std::size_t d) {
      return (mask >> d) & 1u ? ActionKind::Private : ActionKind::Collaborative;
    });
    if (!out.truncated && out.answer_tokens == answer) return true;
  }
  return false;
}

/// Deterministic set of `n` distinct toy tasks for `profile`. Every task is
/// checked to be solvable in the collaborative decoding space.
inline std::vector<ToyTask> generate_tasks(std::uint64_t seed, std::size_t n, synthetic::Profile profile) {
  if (n == 0) throw InvalidInput("generate_tasks needs n >= 1");
  const BackendTriple models = synthetic::synthetic_triple(seed, profile);
  Rng rng(mix64(seed ^ 0x7a5c));
  std::set<TokenSeq> seen;
  std::vector<ToyTask> tasks;
  constexpr std::size_t kBodyLength = 6;
  std::size_t attempts = 0;
  while (tasks.size() < n) {
    if (++attempts > 100 * n + 1000) throw InvariantViolation("could not generate enough solvable toy tasks");
    TokenSeq body;
    for (std::size_t i = 0; i < kBodyLength; ++i) body.push_back(synthetic::content_token(rng.next_u64()));
    if (!seen.insert(body).second) continue;
    const synthetic::ToyPlan plan = synthetic::toy_plan(body, profile);
    ToyTask t;
    t.query = synthetic::toy_query(body);
    t.oracle_answer = plan.answer;
    t.difficulty = plan.difficulty;
    t.seed = seed;
    if (!answer_reachable(models, t.query, t.oracle_answer)) continue;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

/// OraclePRM populated with every task's answer.
inline std::shared_ptr<OraclePRM> oracle_for(const std::vector<ToyTask>& tasks, const Vocabulary& vocab) {
  auto prm = std::make_shared<OraclePRM>(vocab);
  for (const auto& t : tasks) prm->add_answer(t.query.token_ids, t.oracle_answer);
  return prm;
}

inline std::string task_to_jsonl(const ToyTask& t) {
  nlohmann::json j{{"query", t.query.token_ids},
                   {"oracle", t.oracle_answer},
                   {"difficulty", std::string(synthetic::to_string(t.difficulty))},
                   {"seed", t.seed}};
  if (t.query.text) j["text"] = *t.query.text;
  return j.dump();
}

inline ToyTask task_from_json(const nlohmann::json& j) {
  try {
    ToyTask t;
    t.query.token_ids = j.at("query").get<TokenSeq>();
    t.oracle_answer = j.at("oracle").get<TokenSeq>();
    t.difficulty = synthetic::difficulty_from_string(j.value("difficulty", "easy"));
    t.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("text")) t.query.text = j["text"].get<std::string>();
    if (t.query.token_ids.empty()) throw InvalidInput("task has an empty query");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed task line: ") + e.what());
  }
}

inline void write_tasks(std::ostream& os, const std::vector<ToyTask>& tasks) {
  for (const auto& t : tasks) os << task_to_jsonl(t) << '\n';
}

inline std::vector<ToyTask> read_tasks(std::istream& is) {
  std::vector<ToyTask> tasks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      tasks.push_back(task_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput("task line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (tasks.empty()) throw InvalidInput("task file contains no tasks");
  return tasks;
}

inline std::vector<ToyTask> read_tasks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open task file " + path.string());
  return read_tasks(in);
}

}  // namespace gboost
