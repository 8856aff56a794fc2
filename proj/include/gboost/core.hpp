#pragma once

// Domain types for the collaborative reasoning tree: vocabulary, queries,
// reasoning steps, search nodes and the search configuration. Nothing in
// this header talks to a model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gboost/errors.hpp"

namespace gboost {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

struct Vocabulary {
  std::size_t size = 0;
  TokenId eos_id = 0;
  /// Contiguous pattern whose appearance marks a final answer.
  TokenSeq answer_marker_ids;

  void validate() const {
    if (size == 0) throw InvalidInput("vocabulary size must be positive");
    auto in_range = [this](TokenId t) { return t >= 0 && static_cast<std::size_t>(t) < size; };
    if (!in_range(eos_id)) throw InvalidInput("eos id outside vocabulary");
    for (TokenId t : answer_marker_ids) {
      if (!in_range(t)) throw InvalidInput("answer marker id outside vocabulary");
    }
  }

  bool contains(TokenId t) const noexcept { return t >= 0 && static_cast<std::size_t>(t) < size; }

  /// Same size and special ids.
  bool compatible_with(const Vocabulary& other) const noexcept {
    return size == other.size && eos_id == other.eos_id &&
           answer_marker_ids == other.answer_marker_ids;
  }
};

struct Query {
  TokenSeq token_ids;
  std::optional<std::string> text;

  void validate(const Vocabulary& vocab) const {
    if (token_ids.empty()) throw InvalidInput("query has no tokens");
    for (TokenId t : token_ids) {
      if (!vocab.contains(t)) {
        throw InvalidInput("query token " + std::to_string(t) + " outside vocabulary");
      }
    }
  }

  /// Short human-readable label used in error messages.
  std::string label() const {
    if (text && !text->empty()) return *text;
    std::ostringstream os;
    os << "query[";
    for (std::size_t i = 0; i < token_ids.size() && i < 8; ++i) os << (i ? " " : "") << token_ids[i];
    if (token_ids.size() > 8) os << " ...";
    os << "]";
    return os.str();
  }
};

enum class ActionKind : std::uint8_t { Collaborative, Private };

inline constexpr std::string_view to_string(ActionKind a) noexcept {
  return a == ActionKind::Collaborative ? "collaborative" : "private";
}

inline ActionKind action_from_string(std::string_view s) {
  if (s == "collaborative") return ActionKind::Collaborative;
  if (s == "private") return ActionKind::Private;
  throw InvalidInput("unknown action kind '" + std::string(s) + "'");
}

struct ReasoningStep {
  TokenSeq token_ids;
  double log_prob = 0.0;
  ActionKind action = ActionKind::Private;
  bool is_terminal = false;
};

enum class NodeId : std::uint32_t {};

constexpr std::size_t index_of(NodeId id) noexcept { return static_cast<std::size_t>(id); }
constexpr NodeId node_id(std::size_t i) noexcept { return static_cast<NodeId>(i); }

struct SearchNode {
  NodeId id{};
  std::optional<NodeId> parent;
  std::optional<ReasoningStep> step;
  double value = 0.0;         // V_s, running mean of propagated rewards
  std::uint64_t visits = 0;   // N_s
  std::uint64_t eval_count = 0;
  std::vector<NodeId> children;
  std::uint32_t expansions_remaining = 0;
  std::size_t depth = 0;
  /// PRM score assigned when the node was created. Absent at the root.
  std::optional<double> reward;

  bool is_terminal() const noexcept { return step && step->is_terminal; }
};

enum class ExpandStrategy : std::uint8_t { Single, Full };

inline constexpr std::string_view to_string(ExpandStrategy s) noexcept {
  return s == ExpandStrategy::Single ? "single" : "full";
}

inline ExpandStrategy expand_strategy_from_string(std::string_view s) {
  if (s == "single") return ExpandStrategy::Single;
  if (s == "full") return ExpandStrategy::Full;
  throw InvalidInput("unknown expand strategy '" + std::string(s) + "'");
}

struct SearchConfig {
  double c_explore = 1.0;
  std::size_t step_length = 64;
  std::size_t max_iterations = 32;
  double p_collab = 0.5;
  std::uint32_t expansion_budget = 3;
  ExpandStrategy expand_strategy = ExpandStrategy::Single;
  std::size_t max_depth = 16;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool deterministic_top1 = false;

  void validate() const {
    if (!(c_explore >= 0.0) || !std::isfinite(c_explore)) throw InvalidInput("c_explore must be >= 0");
    if (step_length == 0) throw InvalidInput("step_length must be positive");
    if (max_iterations == 0) throw InvalidInput("max_iterations must be positive");
    if (!(p_collab >= 0.0 && p_collab <= 1.0)) throw InvalidInput("p_collab must lie in [0, 1]");
    if (expansion_budget == 0) throw InvalidInput("expansion_budget must be positive");
    if (max_depth == 0) throw InvalidInput("max_depth must be positive");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidInput("temperature must be > 0");
  }
};

/// Unnormalized next-token scores over the shared vocabulary.
struct LogitVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }

  void validate(std::size_t vocab_size) const {
    if (values.size() != vocab_size) {
      throw ShapeError("logit vector has " + std::to_string(values.size()) +
                       " entries, vocabulary has " + std::to_string(vocab_size));
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw InvalidInput("logit vector contains a non-finite entry");
    }
  }
};

struct NodeUpdate {
  NodeId node{};
  double value = 0.0;
  std::uint64_t visits = 0;

  bool operator==(const NodeUpdate&) const = default;
};

/// A child created during an iteration, together with its PRM reward.
struct ChildRecord {
  NodeId node{};
  ActionKind action = ActionKind::Private;
  TokenSeq tokens;
  double reward = 0.0;

  bool operator==(const ChildRecord&) const = default;
};

/// One search iteration. For a revisit (terminal leaf or nothing left to
/// expand), `new_node` is the node whose cached reward was re-propagated and
/// `sampled_tokens` is empty. Under Full expansion the first child is
/// described by the top-level fields and the rest by `extra_children`.
struct TraceEvent {
  std::uint64_t iteration = 0;
  std::vector<NodeId> selected_path;
  NodeId expanded_from{};
  ActionKind action = ActionKind::Private;
  NodeId new_node{};
  TokenSeq sampled_tokens;
  double reward = 0.0;
  std::vector<NodeUpdate> updated_values;
  bool revisit = false;
  std::vector<ChildRecord> extra_children;
  std::uint64_t retries = 0;
  std::uint64_t query_index = 0;

  bool operator==(const TraceEvent&) const = default;
};

/// Seeded random source. The uniform draw is built from raw 64-bit output
/// so sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class SearchTree {
 public:
  SearchTree(Query query, std::uint32_t expansion_budget)
      : query_(std::move(query)), budget_(expansion_budget) {
    SearchNode root;
    root.id = node_id(0);
    root.expansions_remaining = budget_;
    nodes_.push_back(std::move(root));
  }

  const Query& query() const noexcept { return query_; }
  NodeId root() const noexcept { return node_id(0); }
  std::uint32_t expansion_budget() const noexcept { return budget_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<SearchNode>& nodes() const noexcept { return nodes_; }
  const std::set<NodeId>& terminal_ids() const noexcept { return terminals_; }

  bool contains(NodeId id) const noexcept { return index_of(id) < nodes_.size(); }

  const SearchNode& node(NodeId id) const {
    if (!contains(id)) throw NotFound("node " + std::to_string(index_of(id)) + " not in tree");
    return nodes_[index_of(id)];
  }
  SearchNode& node(NodeId id) {
    if (!contains(id)) throw NotFound("node " + std::to_string(index_of(id)) + " not in tree");
    return nodes_[index_of(id)];
  }

  /// Appends a fresh child (V=0, N=0, full budget). Does not touch the
  /// parent's expansion budget.
  /// Consumes one unit of the parent's expansion budget.
  NodeId add_child(NodeId parent, ReasoningStep step, double reward) {
    if (node(parent).expansions_remaining == 0) throw InvariantViolation("node has no expansions remaining");
    const std::size_t parent_depth = node(parent).depth;
    SearchNode child;
    child.id = node_id(nodes_.size());
    child.parent = parent;
    child.depth = parent_depth + 1;
    child.expansions_remaining = step.is_terminal ? 0 : budget_;
    child.reward = reward;
    const bool terminal = step.is_terminal;
    child.step = std::move(step);
    nodes_.push_back(std::move(child));
    const NodeId id = nodes_.back().id;
    nodes_[index_of(parent)].children.push_back(id);
    nodes_[index_of(parent)].expansions_remaining -= 1;
    if (terminal) terminals_.insert(id);
    return id;
  }

 private:
  Query query_;
  std::uint32_t budget_;
  std::vector<SearchNode> nodes_;
  std::set<NodeId> terminals_;
};

inline SearchTree tree_new(const Query& query, const SearchConfig& config) {
  config.validate();
  if (query.token_ids.empty()) throw InvalidInput("query has no tokens");
  return SearchTree(query, config.expansion_budget);
}

/// Node ids from the root down to `node`, inclusive.
inline std::vector<NodeId> trajectory(const SearchTree& tree, NodeId node) {
  std::vector<NodeId> path;
  for (std::optional<NodeId> cur = node; cur; cur = tree.node(*cur).parent) path.push_back(*cur);
  std::reverse(path.begin(), path.end());
  return path;
}

/// Steps s_1..s_d on the way to `node`; the root contributes nothing.
inline std::vector<ReasoningStep> path_steps(const SearchTree& tree, NodeId node) {
  std::vector<ReasoningStep> steps;
  for (NodeId id : trajectory(tree, node)) {
    if (const auto& n = tree.node(id); n.step) steps.push_back(*n.step);
  }
  return steps;
}

inline constexpr double kUnvisitedScore = std::numeric_limits<double>::infinity();

/// UCT score. Unvisited nodes score +inf so every child is tried once
/// before any comparison.
inline double uct_score(double value, std::uint64_t visits, std::uint64_t parent_visits, double c) {
  if (visits == 0) return kUnvisitedScore;
  if (parent_visits == 0) throw InvariantViolation("visited child under a parent with zero visits");
  return value + c * std::sqrt(std::log(static_cast<double>(parent_visits)) / static_cast<double>(visits));
}

/// Concatenation of the query and every step along the way; the context a
/// backend conditions on.
inline TokenSeq build_context(const Query& query, std::span<const ReasoningStep> steps) {
  TokenSeq ctx = query.token_ids;
  for (const auto& s : steps) ctx.insert(ctx.end(), s.token_ids.begin(), s.token_ids.end());
  return ctx;
}

/// Walks the whole tree and reports every broken bookkeeping rule. An empty
/// result means the tree is consistent.
inline std::vector<std::string> validate_tree(const SearchTree& tree) {
  std::vector<std::string> problems;
  const auto& nodes = tree.nodes();
  auto report = [&](const SearchNode& n, const std::string& msg) {
    problems.push_back("node " + std::to_string(index_of(n.id)) + ": " + msg);
  };
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const SearchNode& n = nodes[i];
    if (index_of(n.id) != i) report(n, "id does not match storage slot");
    if (i == 0) {
      if (n.parent || n.step) report(n, "root must have neither parent nor step");
    } else {
      if (!n.parent || !n.step) report(n, "non-root node lacks parent or step");
      else if (index_of(*n.parent) >= i) report(n, "parent created after child");
      else {
        const auto& siblings = nodes[index_of(*n.parent)].children;
        if (std::count(siblings.begin(), siblings.end(), n.id) != 1) report(n, "not linked from parent");
        if (n.depth != nodes[index_of(*n.parent)].depth + 1) report(n, "depth mismatch");
      }
    }
    std::uint64_t child_visits = 0;
    for (NodeId c : n.children) {
      if (index_of(c) >= nodes.size()) {
        report(n, "dangling child");
        continue;
      }
      if (nodes[index_of(c)].parent != n.id) report(n, "child does not point back");
      child_visits += nodes[index_of(c)].visits;
    }
    if (n.visits != n.eval_count + child_visits) report(n, "visits != eval_count + sum(children visits)");
    if (n.children.size() > tree.expansion_budget()) report(n, "more children than the expansion budget");
    if (n.expansions_remaining > tree.expansion_budget()) report(n, "expansions_remaining exceeds budget");
    if (n.children.size() + n.expansions_remaining > tree.expansion_budget()) {
      report(n, "children + remaining budget exceeds expansion budget");
    }
    if (n.is_terminal() != (tree.terminal_ids().count(n.id) == 1)) report(n, "terminal set out of sync");
    if (n.is_terminal() && !n.children.empty()) report(n, "terminal node has children");
    if (n.visits == 0 && n.value != 0.0) report(n, "unvisited node carries a value");
  }
  return problems;
}

}  // namespace gboost
