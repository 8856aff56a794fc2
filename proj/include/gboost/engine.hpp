#pragma once

// The search loop: UCT descent to a leaf, value-argmax over the expandable
// nodes of that trajectory, expansion by either inference mode, PRM
// evaluation of the new prefix, and running-mean backpropagation.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gboost/core.hpp"
#include "gboost/errors.hpp"
#include "gboost/policy.hpp"
#include "gboost/reward.hpp"

namespace gboost {

struct ReasoningResult {
  std::vector<NodeId> best_path;
  TokenSeq answer_tokens;  // eos removed
  double best_value = 0.0;
  /// Cached PRM reward of the chosen node (0 for the fallback path).
  double best_reward = 0.0;
  std::uint64_t iterations_run = 0;
  bool terminal_found = false;
  std::vector<TraceEvent> trace;
  std::optional<std::string> error;
};

/// Called after every completed iteration with the tree in its new state.
using SearchObserver = std::function<void(const SearchTree&, const TraceEvent&)>;

/// Descends from the root by UCT until a childless node is reached.
inline NodeId select_leaf(const SearchTree& tree, double c) {
  NodeId cur = tree.root();
  while (true) {
    const SearchNode& n = tree.node(cur);
    if (n.children.empty()) return cur;
    NodeId best = n.children.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (NodeId child : n.children) {
      const SearchNode& ch = tree.node(child);
      const double s = uct_score(ch.value, ch.visits, n.visits, c);
      if (s > best_score) {  // strict: earliest child wins ties
        best_score = s;
        best = child;
      }
    }
    cur = best;
  }
}

/// Nodes on the root-to-leaf trajectory that can still be expanded.
inline std::vector<NodeId> candidate_set(const SearchTree& tree, NodeId leaf) {
  std::vector<NodeId> out;
  for (NodeId id : trajectory(tree, leaf)) {
    const SearchNode& n = tree.node(id);
    if (n.expansions_remaining > 0 && !n.is_terminal()) out.push_back(id);
  }
  return out;
}

/// Highest-value candidate, earliest creation on ties. Empty input means
/// there is nothing to expand this iteration.
inline std::optional<NodeId> pick_expansion_node(const SearchTree& tree, std::span<const NodeId> candidates) {
  std::optional<NodeId> best;
  for (NodeId id : candidates) {
    if (!best) {
      best = id;
      continue;
    }
    const double v = tree.node(id).value;
    const double bv = tree.node(*best).value;
    if (v > bv || (v == bv && index_of(id) < index_of(*best))) best = id;
  }
  return best;
}

namespace detail {

inline bool action_tried(const SearchTree& tree, const SearchNode& n, ActionKind a) {
  return std::any_of(n.children.begin(), n.children.end(),
                     [&](NodeId c) { return tree.node(c).step->action == a; });
}

/// Coin flip with probability p_collab. With deterministic decoding a
/// repeated action reproduces an existing child, so the draw falls back to
/// an allowed action the node has not tried yet.
inline ActionKind draw_action(const SearchTree& tree, const SearchNode& n, const SearchConfig& config, Rng& rng,
                              std::span<const ActionKind> pending) {
  const ActionKind coin = rng.uniform() < config.p_collab ? ActionKind::Collaborative : ActionKind::Private;
  if (!config.deterministic_top1) return coin;
  auto used = [&](ActionKind a) {
    return action_tried(tree, n, a) || std::find(pending.begin(), pending.end(), a) != pending.end();
  };
  if (!used(coin)) return coin;
  const ActionKind other = coin == ActionKind::Collaborative ? ActionKind::Private : ActionKind::Collaborative;
  const bool other_allowed = other == ActionKind::Collaborative ? config.p_collab > 0.0 : config.p_collab < 1.0;
  return (other_allowed && !used(other)) ? other : coin;
}

/// Number of distinct actions a deterministic node can still take.
inline std::uint32_t untried_allowed(const SearchTree& tree, const SearchNode& n, const SearchConfig& config,
                                     std::span<const ActionKind> pending) {
  std::uint32_t k = 0;
  for (ActionKind a : {ActionKind::Collaborative, ActionKind::Private}) {
    const bool allowed = a == ActionKind::Collaborative ? config.p_collab > 0.0 : config.p_collab < 1.0;
    const bool used =
        action_tried(tree, n, a) || std::find(pending.begin(), pending.end(), a) != pending.end();
    if (allowed && !used) ++k;
  }
  return k;
}

struct PendingChild {
  StepSample sample;
  double reward = 0.0;
};

}  // namespace detail

/// Expansion followed by PRM evaluation of each new child. Every sample and
/// score is computed before the tree is touched, so a backend failure
/// leaves the tree exactly as it was. Returns the new children in creation
/// order; Full creates at most `max_children`.
inline std::vector<NodeId> expand_and_score(SearchTree& tree, NodeId node, const BackendTriple& backends,
                                            const RewardModel& prm, const SearchConfig& config, Rng& rng,
                                            std::uint32_t max_children = UINT32_MAX) {
  const SearchNode& parent = tree.node(node);
  if (parent.is_terminal()) throw InvariantViolation("cannot expand a terminal node");
  if (parent.expansions_remaining == 0) throw InvariantViolation("node has no expansions remaining");

  if (max_children == 0) throw InvalidInput("max_children must be positive");
  const std::uint32_t count =
      config.expand_strategy == ExpandStrategy::Full ? std::min(parent.expansions_remaining, max_children) : 1;
  const std::vector<ReasoningStep> prior = path_steps(tree, node);
  std::vector<ActionKind> actions;
  std::vector<detail::PendingChild> pending;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (config.deterministic_top1 && detail::untried_allowed(tree, parent, config, actions) == 0) break;
    const ActionKind a = detail::draw_action(tree, parent, config, rng, actions);
    actions.push_back(a);
    detail::PendingChild child;
    child.sample = a == ActionKind::Collaborative
                       ? sample_step_collaborative(backends, tree.query(), prior, config, rng)
                       : sample_step_private(*backends.tuned, tree.query(), prior, config, rng);
    pending.push_back(std::move(child));
  }
  for (auto& child : pending) {
    std::vector<ReasoningStep> steps = prior;
    steps.push_back(child.sample.step);
    child.reward = score(prm, tree.query(), steps).value;
  }

  std::vector<NodeId> created;
  for (auto& child : pending) created.push_back(tree.add_child(node, std::move(child.sample.step), child.reward));
  SearchNode& p = tree.node(node);
  if (config.deterministic_top1 && detail::untried_allowed(tree, p, config, {}) == 0) p.expansions_remaining = 0;
  return created;
}

/// Adds one child (or, under Full, every remaining child) to `node` and
/// returns the first. Children get V=0, N=0 and the full budget.
inline NodeId expand(SearchTree& tree, NodeId node, const BackendTriple& backends, const RewardModel& prm,
                     const SearchConfig& config, Rng& rng) {
  return expand_and_score(tree, node, backends, prm, config, rng).front();
}

/// N <- N + 1, then V <- ((N - 1) V + r) / N, for origin and each ancestor.
inline void backpropagate(SearchTree& tree, NodeId origin, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) throw InvalidInput("reward outside [0, 1]");
  tree.node(origin).eval_count += 1;
  for (std::optional<NodeId> cur = origin; cur; cur = tree.node(*cur).parent) {
    SearchNode& n = tree.node(*cur);
    n.visits += 1;
    const double nv = static_cast<double>(n.visits);
    n.value = ((nv - 1.0) * n.value + reward) / nv;
  }
}

namespace detail {

inline TokenSeq strip_eos(const std::vector<ReasoningStep>& steps, const Vocabulary& vocab) {
  TokenSeq out;
  for (const auto& s : steps) {
    for (TokenId t : s.token_ids) {
      if (t != vocab.eos_id) out.push_back(t);
    }
  }
  return out;
}

inline void append_updates(const SearchTree& tree, NodeId origin, std::vector<NodeUpdate>& out) {
  for (std::optional<NodeId> cur = origin; cur; cur = tree.node(*cur).parent) {
    const SearchNode& n = tree.node(*cur);
    out.push_back(NodeUpdate{n.id, n.value, n.visits});
  }
}

}  // namespace detail

/// Best terminal path by value (ties: higher reward, shallower, earlier).
/// Without any terminal, the highest-value leaf is completed greedily by
/// the tuned model and the result is flagged `terminal_found = false`.
inline ReasoningResult extract_answer(const SearchTree& tree, const BackendTriple& backends,
                                      const SearchConfig& config) {
  ReasoningResult result;
  const Vocabulary& vocab = backends.vocabulary();
  std::optional<NodeId> best;
  for (NodeId id : tree.terminal_ids()) {
    if (!best) {
      best = id;
      continue;
    }
    const SearchNode& a = tree.node(id);
    const SearchNode& b = tree.node(*best);
    const double ar = a.reward.value_or(0.0), br = b.reward.value_or(0.0);
    if (a.value != b.value ? a.value > b.value
        : ar != br         ? ar > br
        : a.depth != b.depth ? a.depth < b.depth
                             : index_of(a.id) < index_of(b.id)) {
      best = id;
    }
  }
  if (best) {
    const SearchNode& n = tree.node(*best);
    result.best_path = trajectory(tree, *best);
    result.answer_tokens = detail::strip_eos(path_steps(tree, *best), vocab);
    result.best_value = n.value;
    result.best_reward = n.reward.value_or(0.0);
    result.terminal_found = true;
    return result;
  }

  NodeId leaf = tree.root();
  bool have_leaf = false;
  for (const SearchNode& n : tree.nodes()) {
    if (!n.children.empty() || !n.step) continue;
    if (!have_leaf || n.value > tree.node(leaf).value) {
      leaf = n.id;
      have_leaf = true;
    }
  }
  std::vector<ReasoningStep> steps = path_steps(tree, leaf);
  SearchConfig greedy = config;
  greedy.deterministic_top1 = true;
  Rng unused(config.seed);
  while (steps.size() < config.max_depth && (steps.empty() || !steps.back().is_terminal)) {
    steps.push_back(sample_step_private(*backends.tuned, tree.query(), steps, greedy, unused).step);
  }
  result.best_path = trajectory(tree, leaf);
  result.answer_tokens = detail::strip_eos(steps, vocab);
  result.best_value = tree.node(leaf).value;
  result.terminal_found = false;
  return result;
}

/// Runs select, pick, expand, evaluate and backpropagate until
/// `config.max_iterations` rewards have been backpropagated. One iteration
/// is one backpropagation, so a Full expansion of k children spends k
/// iterations and the root's visit count always equals `iterations_run`.
/// Each cycle emits one trace event. A backend failure that survives the
/// clients' own retries stops the search; the result then carries the
/// answer extracted so far, the trace, and `error`.
inline ReasoningResult run_search(const Query& query, const BackendTriple& backends, const RewardModel& prm,
                                  const SearchConfig& config, const SearchObserver& observer = {}) {
  config.validate();
  backends.validate();
  query.validate(backends.vocabulary());
  SearchTree tree = tree_new(query, config);
  Rng rng(config.seed);
  std::vector<TraceEvent> trace;
  std::optional<std::string> error;
  std::uint64_t done = 0;

  for (std::uint64_t it = 0; done < config.max_iterations; ++it) {
    const std::uint64_t retries_before = backends.retry_count() + prm.retry_count();
    TraceEvent ev;
    ev.iteration = it;
    const NodeId leaf = select_leaf(tree, config.c_explore);
    ev.selected_path = trajectory(tree, leaf);

    const std::vector<NodeId> candidates = candidate_set(tree, leaf);
    const std::optional<NodeId> target = pick_expansion_node(tree, candidates);

    if (!target) {
      // Nothing on the trajectory can grow: re-propagate the leaf's cached reward.
      const SearchNode& n = tree.node(leaf);
      const double r = n.reward.value_or(n.value);
      backpropagate(tree, leaf, r);
      ev.revisit = true;
      ev.expanded_from = leaf;
      ev.new_node = leaf;
      ev.action = n.step ? n.step->action : ActionKind::Private;
      ev.reward = r;
      detail::append_updates(tree, leaf, ev.updated_values);
    } else {
      std::vector<NodeId> children;
      try {
        const auto left = static_cast<std::uint32_t>(std::min<std::uint64_t>(config.max_iterations - done, UINT32_MAX));
        children = expand_and_score(tree, *target, backends, prm, config, rng, left);
      } catch (const BackendError& e) {
        error = "iteration " + std::to_string(it) + ": " + e.what();
        break;
      }
      ev.expanded_from = *target;
      for (std::size_t i = 0; i < children.size(); ++i) {
        const SearchNode& ch = tree.node(children[i]);
        const double r = *ch.reward;
        backpropagate(tree, ch.id, r);
        detail::append_updates(tree, ch.id, ev.updated_values);
        if (i == 0) {
          ev.new_node = ch.id;
          ev.action = ch.step->action;
          ev.sampled_tokens = ch.step->token_ids;
          ev.reward = r;
        } else {
          ev.extra_children.push_back(ChildRecord{ch.id, ch.step->action, ch.step->token_ids, r});
        }
      }
    }
    ev.retries = backends.retry_count() + prm.retry_count() - retries_before;
    done += 1 + ev.extra_children.size();
    if (observer) observer(tree, ev);
    trace.push_back(std::move(ev));
  }

  ReasoningResult result;
  if (error && tree.size() == 1) {
    result.best_path = {tree.root()};
  } else {
    try {
      result = extract_answer(tree, backends, config);
    } catch (const BackendError& e) {
      result.best_path = {tree.root()};
      if (!error) error = std::string("answer extraction: ") + e.what();
    }
  }
  result.iterations_run = done;
  result.trace = std::move(trace);
  result.error = std::move(error);
  return result;
}

}  // namespace gboost
