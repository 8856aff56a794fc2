#pragma once

// Straight-line decoders, the search without collaboration, and the
// exhaustive action-sequence oracle.

#include <functional>
#include <string>
#include <vector>

#include "gboost/core.hpp"
#include "gboost/engine.hpp"
#include "gboost/policy.hpp"
#include "gboost/reward.hpp"

namespace gboost {

enum class BaselineMode : std::uint8_t { Base, Tuned, ProxyTuning };

struct BaselineOutput {
  TokenSeq answer_tokens;  // eos removed
  std::vector<ReasoningStep> steps;
  /// Hit max_depth * step_length tokens without eos or answer marker.
  bool truncated = false;
};

/// Decodes step after step until termination. `action_for(depth)` picks the
/// mode of each step; it is how both baselines and the oracle drive decoding.
inline BaselineOutput decode_actions(const BackendTriple& backends, const Query& query, const SearchConfig& config,
                                     const std::function<ActionKind(std::size_t)>& action_for,
                                     const GenerationBackend* private_backend = nullptr) {
  const GenerationBackend& single = private_backend ? *private_backend : *backends.tuned;
  Rng rng(config.seed);
  BaselineOutput out;
  while (out.steps.size() < config.max_depth) {
    const ActionKind a = action_for(out.steps.size());
    StepSample s = a == ActionKind::Collaborative
                       ? sample_step_collaborative(backends, query, out.steps, config, rng)
                       : sample_step_private(single, query, out.steps, config, rng);
    const bool terminal = s.step.is_terminal;
    out.steps.push_back(std::move(s.step));
    if (terminal) break;
  }
  const Vocabulary& vocab = backends.vocabulary();
  out.truncated = out.steps.empty() || !ends_answer(out.steps.back().token_ids, vocab);
  out.answer_tokens = detail::strip_eos(out.steps, vocab);
  return out;
}

/// Base: base SLM alone. Tuned: tuned SLM alone. ProxyTuning: fused
/// distribution for every token, no tree and no PRM.
inline BaselineOutput baseline_decode(BaselineMode mode, const BackendTriple& backends, const Query& query,
                                      const SearchConfig& config) {
  backends.validate();
  switch (mode) {
    case BaselineMode::Base:
      return decode_actions(backends, query, config, [](std::size_t) { return ActionKind::Private; },
                            backends.base.get());
    case BaselineMode::Tuned:
      return decode_actions(backends, query, config, [](std::size_t) { return ActionKind::Private; });
    case BaselineMode::ProxyTuning:
      return decode_actions(backends, query, config, [](std::size_t) { return ActionKind::Collaborative; });
  }
  throw InvalidInput("unknown baseline mode");
}

/// The search restricted to private-SLM expansions.
inline ReasoningResult tuned_mcts(const BackendTriple& backends, const RewardModel& prm, const Query& query,
                                  SearchConfig config, const SearchObserver& observer = {}) {
  config.p_collab = 0.0;
  return run_search(query, backends, prm, config, observer);
}

struct BruteForceResult {
  double best_reward = 0.0;
  std::vector<ActionKind> best_actions;
  TokenSeq best_answer;
  std::size_t terminals_scored = 0;
};

/// Enumerates every action sequence of length <= depth_limit with
/// deterministic top-1 decoding, scores each terminal prefix with the PRM
/// and returns the maximum. Sequences stop early when a step terminates.
inline BruteForceResult brute_force_best(const BackendTriple& backends, const RewardModel& prm, const Query& query,
                                         SearchConfig config, std::size_t depth_limit) {
  if (depth_limit == 0 || depth_limit > 4) throw InvalidInput("brute_force_best depth limit must be in [1, 4]");
  backends.validate();
  config.deterministic_top1 = true;
  config.max_depth = std::min(config.max_depth, depth_limit);
  const Vocabulary& vocab = backends.vocabulary();

  BruteForceResult best;
  bool have = false;
  std::vector<ReasoningStep> steps;
  std::vector<ActionKind> actions;
  Rng rng(config.seed);

  std::function<void()> dfs = [&]() {
    for (ActionKind a : {ActionKind::Collaborative, ActionKind::Private}) {
      StepSample s = a == ActionKind::Collaborative
                         ? sample_step_collaborative(backends, query, steps, config, rng)
                         : sample_step_private(*backends.tuned, query, steps, config, rng);
      steps.push_back(std::move(s.step));
      actions.push_back(a);
      if (steps.back().is_terminal) {
        const double r = score(prm, query, steps).value;
        ++best.terminals_scored;
        if (!have || r > best.best_reward) {
          have = true;
          best.best_reward = r;
          best.best_actions = actions;
          best.best_answer = detail::strip_eos(steps, vocab);
        }
      } else {
        dfs();
      }
      steps.pop_back();
      actions.pop_back();
    }
  };
  dfs();
  return best;
}

}  // namespace gboost
