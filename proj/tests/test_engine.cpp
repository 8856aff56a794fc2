#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "gboost/backends/counting.hpp"
#include "gboost/backends/synthetic.hpp"
#include "gboost/engine.hpp"

using namespace gboost;
namespace syn = gboost::synthetic;

namespace {

ReasoningStep step(TokenSeq t, bool terminal = false, ActionKind a = ActionKind::Private) {
  return ReasoningStep{std::move(t), -1.0, a, terminal};
}

Query q1() { return Query{{1}, std::nullopt}; }

struct Toy {
  Query query;
  TokenSeq answer;
  BackendTriple backends;
  std::shared_ptr<OraclePRM> prm;
};

Toy toy(std::uint64_t seed, syn::Profile profile = syn::Profile::Complementary) {
  const TokenSeq body = {6, 7, 8, 9, 10, static_cast<TokenId>(11 + seed % 10)};
  Toy t{syn::toy_query(body), syn::toy_plan(body, profile).answer, syn::synthetic_triple(seed, profile),
        std::make_shared<OraclePRM>(syn::toy_vocabulary())};
  t.prm->add_answer(t.query.token_ids, t.answer);
  return t;
}

/// Delegates to an inner backend and throws once `fail_after` calls are made.
class FailingBackend : public GenerationBackend {
 public:
  FailingBackend(BackendPtr inner, std::uint64_t fail_after) : inner_(std::move(inner)), left_(fail_after) {}
  LogitVector next_logits(std::span<const TokenId> ctx) const override {
    if (left_ == 0) throw TransportError("backend unreachable");
    --left_;
    return inner_->next_logits(ctx);
  }
  const Vocabulary& vocabulary() const override { return inner_->vocabulary(); }
  std::string id() const override { return "failing"; }

 private:
  BackendPtr inner_;
  mutable std::uint64_t left_;
};

}  // namespace

TEST_CASE("select_leaf follows UCT") {
  SearchConfig cfg;
  SearchTree tree = tree_new(q1(), cfg);
  const NodeId a = tree.add_child(tree.root(), step({5}), 0.0);
  const NodeId b = tree.add_child(tree.root(), step({6}), 0.0);
  tree.node(tree.root()).visits = 10;
  tree.node(a).value = 0.9;
  tree.node(a).visits = 3;
  tree.node(b).value = 0.5;
  tree.node(b).visits = 5;
  // A: 0.9 + sqrt(ln 10 / 3) = 1.776; B: 0.5 + sqrt(ln 10 / 5) = 1.179.
  CHECK(select_leaf(tree, 1.0) == a);

  // An unvisited child beats any visited sibling.
  const NodeId c = tree.add_child(tree.root(), step({7}), 0.0);
  CHECK(select_leaf(tree, 1.0) == c);
}

TEST_CASE("select_leaf returns the root of a fresh tree and breaks ties by creation") {
  SearchConfig cfg;
  SearchTree tree = tree_new(q1(), cfg);
  CHECK(select_leaf(tree, 1.0) == tree.root());
  const NodeId a = tree.add_child(tree.root(), step({5}), 0.0);
  tree.add_child(tree.root(), step({6}), 0.0);
  CHECK(select_leaf(tree, 1.0) == a);
}

TEST_CASE("candidate_set and pick_expansion_node") {
  SearchConfig cfg;
  cfg.expansion_budget = 2;
  SearchTree tree = tree_new(q1(), cfg);
  const NodeId a = tree.add_child(tree.root(), step({5}), 0.4);
  const NodeId t = tree.add_child(a, step({6, 0}, true), 1.0);

  // Terminal leaf is excluded; its ancestors remain.
  const auto cands = candidate_set(tree, t);
  CHECK(cands == std::vector<NodeId>{tree.root(), a});

  tree.node(tree.root()).value = 0.3;
  tree.node(a).value = 0.6;
  CHECK(pick_expansion_node(tree, cands) == a);
  tree.node(a).value = 0.3;
  CHECK(pick_expansion_node(tree, cands) == tree.root());  // tie: earliest created

  tree.node(a).expansions_remaining = 0;
  CHECK(candidate_set(tree, t) == std::vector<NodeId>{tree.root()});
  tree.node(tree.root()).expansions_remaining = 0;
  CHECK(candidate_set(tree, t).empty());
  CHECK_FALSE(pick_expansion_node(tree, std::vector<NodeId>{}).has_value());
}

TEST_CASE("backpropagate keeps running means") {
  SearchConfig cfg;
  SearchTree tree = tree_new(q1(), cfg);
  const NodeId a = tree.add_child(tree.root(), step({5}), 0.8);
  backpropagate(tree, a, 0.8);
  CHECK(tree.node(a).value == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(tree.node(a).visits == 1);
  CHECK(tree.node(tree.root()).value == doctest::Approx(0.8).epsilon(1e-12));

  const NodeId b = tree.add_child(tree.root(), step({6}), 0.6);
  backpropagate(tree, b, 0.6);
  CHECK(tree.node(tree.root()).value == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(tree.node(tree.root()).visits == 2);

  SearchTree chain = tree_new(q1(), cfg);
  const NodeId x = chain.add_child(chain.root(), step({5}), 0.0);
  const NodeId y = chain.add_child(x, step({6}), 0.0);
  backpropagate(chain, y, 0.6);
  for (NodeId id : {chain.root(), x, y}) {
    CHECK(chain.node(id).value == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(chain.node(id).visits == 1);
  }
  CHECK(validate_tree(chain).empty());

  CHECK_THROWS_AS(backpropagate(chain, y, 1.5), InvalidInput);
  CHECK_THROWS_AS(backpropagate(chain, y, NAN), InvalidInput);
}

TEST_CASE("expand honours the collaboration probability") {
  Toy t = toy(3);
  SearchConfig cfg = syn::toy_search_config();

  cfg.p_collab = 1.0;
  auto counted = count_calls(t.backends);
  SearchTree tree = tree_new(t.query, cfg);
  Rng rng(0);
  const NodeId c = expand(tree, tree.root(), counted.triple, *t.prm, cfg, rng);
  CHECK(tree.node(c).step->action == ActionKind::Collaborative);
  CHECK(tree.node(c).visits == 0);
  CHECK(tree.node(c).value == 0.0);
  CHECK(counted.general->calls() > 0);

  cfg.p_collab = 0.0;
  cfg.deterministic_top1 = false;
  auto spy = count_calls(t.backends);
  SearchTree tree2 = tree_new(t.query, cfg);
  for (int i = 0; i < 2; ++i) {
    const NodeId p = expand(tree2, tree2.root(), spy.triple, *t.prm, cfg, rng);
    CHECK(tree2.node(p).step->action == ActionKind::Private);
  }
  CHECK(spy.general->calls() == 0);
  CHECK(spy.base->calls() == 0);
  CHECK(spy.tuned->calls() > 0);
}

TEST_CASE("full expansion spends the remaining budget") {
  Toy t = toy(4);
  SearchConfig cfg = syn::toy_search_config();
  cfg.expansion_budget = 3;
  cfg.expand_strategy = ExpandStrategy::Full;
  cfg.deterministic_top1 = false;
  SearchTree tree = tree_new(t.query, cfg);
  Rng rng(9);
  const auto kids = expand_and_score(tree, tree.root(), t.backends, *t.prm, cfg, rng);
  CHECK(kids.size() == 3);
  CHECK(tree.node(tree.root()).expansions_remaining == 0);
  for (NodeId k : kids) CHECK(tree.node(k).reward.has_value());
  CHECK(validate_tree(tree).empty());

  // Greedy decoding has only two distinct actions to offer.
  cfg.deterministic_top1 = true;
  SearchTree det = tree_new(t.query, cfg);
  const auto dkids = expand_and_score(det, det.root(), t.backends, *t.prm, cfg, rng);
  CHECK(dkids.size() == 2);
  CHECK(det.node(dkids[0]).step->action != det.node(dkids[1]).step->action);
  CHECK(det.node(det.root()).expansions_remaining == 0);

  CHECK_THROWS_AS(expand(det, det.root(), t.backends, *t.prm, cfg, rng), InvariantViolation);
}

TEST_CASE("run_search with one iteration") {
  Toy t = toy(5);
  SearchConfig cfg = syn::toy_search_config();
  cfg.max_iterations = 1;
  std::size_t calls = 0;
  const ReasoningResult r = run_search(t.query, t.backends, *t.prm, cfg, [&](const SearchTree& tree, const TraceEvent& ev) {
    ++calls;
    CHECK(tree.size() == 2);
    CHECK(tree.node(tree.root()).visits == 1);
    CHECK(ev.expanded_from == tree.root());
    CHECK(ev.selected_path == std::vector<NodeId>{tree.root()});
  });
  CHECK(calls == 1);
  CHECK(r.iterations_run == 1);
  CHECK(r.trace.size() == 1);
  CHECK_FALSE(r.error);
}

TEST_CASE("run_search is deterministic under a fixed seed") {
  Toy t = toy(6);
  SearchConfig cfg = syn::toy_search_config();
  cfg.deterministic_top1 = false;
  cfg.max_iterations = 24;
  cfg.seed = 1234;
  const ReasoningResult a = run_search(t.query, t.backends, *t.prm, cfg);
  const ReasoningResult b = run_search(t.query, t.backends, *t.prm, cfg);
  CHECK(a.trace == b.trace);
  CHECK(a.answer_tokens == b.answer_tokens);
  cfg.seed = 1235;
  const ReasoningResult c = run_search(t.query, t.backends, *t.prm, cfg);
  CHECK(c.trace.size() == a.trace.size());
}

TEST_CASE("run_search keeps value means and visit counts exact") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Toy t = toy(seed);
    SearchConfig cfg = syn::toy_search_config();
    cfg.seed = seed;
    cfg.deterministic_top1 = seed % 2 == 0;
    cfg.expand_strategy = seed % 3 == 0 ? ExpandStrategy::Full : ExpandStrategy::Single;
    cfg.max_iterations = 40;
    oracle::ShadowAccumulator shadow;
    std::uint64_t evaluations = 0;
    const ReasoningResult r = run_search(t.query, t.backends, *t.prm, cfg, [&](const SearchTree& tree, const TraceEvent& ev) {
      evaluations += 1 + ev.extra_children.size();
      shadow.record(tree, ev);
      CHECK(validate_tree(tree).empty());
      CHECK(tree.node(tree.root()).visits == evaluations);
      const double err = shadow.max_error(tree);
      CHECK(err >= 0.0);
      CHECK(err <= 1e-12);
    });
    CHECK(r.iterations_run == 40);
    CHECK(evaluations == 40);
  }
}

TEST_CASE("extract_answer prefers the best terminal") {
  Toy t = toy(7);
  SearchConfig cfg = syn::toy_search_config();
  cfg.expansion_budget = 3;
  SearchTree tree = tree_new(t.query, cfg);
  const TokenSeq wrong = {5, 5, 0};
  TokenSeq right = t.answer;
  right.push_back(syn::kEos);
  const NodeId w = tree.add_child(tree.root(), step(wrong, true), 0.0);
  const NodeId r = tree.add_child(tree.root(), step(right, true), 1.0);
  backpropagate(tree, w, 0.0);
  backpropagate(tree, r, 1.0);
  const ReasoningResult res = extract_answer(tree, t.backends, cfg);
  CHECK(res.terminal_found);
  CHECK(res.answer_tokens == t.answer);
  CHECK(res.best_path == std::vector<NodeId>{tree.root(), r});
  CHECK(res.best_reward == 1.0);

  // Equal values: the higher cached reward wins.
  tree.node(w).value = 1.0;
  tree.node(w).reward = 0.5;
  CHECK(extract_answer(tree, t.backends, cfg).best_path.back() == r);
}

TEST_CASE("extract_answer completes the best leaf when nothing terminated") {
  Toy t = toy(8, syn::Profile::TunedStrong);
  SearchConfig cfg = syn::toy_search_config();
  SearchTree tree = tree_new(t.query, cfg);
  const TokenSeq first(t.answer.begin(), t.answer.begin() + 4);
  const NodeId a = tree.add_child(tree.root(), step(first), 0.5);
  const NodeId b = tree.add_child(tree.root(), step({5, 5, 5, 5}), 0.0);
  backpropagate(tree, a, 0.5);
  backpropagate(tree, b, 0.0);
  const ReasoningResult res = extract_answer(tree, t.backends, cfg);
  CHECK_FALSE(res.terminal_found);
  CHECK(res.best_path.back() == a);
  CHECK(res.answer_tokens == t.answer);  // tuned greedy finishes the tuned-strong answer
}

TEST_CASE("a failing backend stops the search and leaves the tree intact") {
  Toy t = toy(9);
  SearchConfig cfg = syn::toy_search_config();
  cfg.p_collab = 1.0;
  BackendTriple broken = t.backends;
  broken.general = std::make_shared<FailingBackend>(t.backends.general, 6);

  SearchTree tree = tree_new(t.query, cfg);
  Rng rng(0);
  expand(tree, tree.root(), broken, *t.prm, cfg, rng);  // 4 tokens, 4 calls
  const std::size_t before = tree.size();
  const auto remaining = tree.node(tree.root()).expansions_remaining;
  CHECK_THROWS_AS(expand(tree, node_id(1), broken, *t.prm, cfg, rng), BackendError);
  CHECK(tree.size() == before);
  CHECK(tree.node(tree.root()).expansions_remaining == remaining);
  CHECK(tree.node(node_id(1)).children.empty());
  CHECK(validate_tree(tree).empty());

  broken.general = std::make_shared<FailingBackend>(t.backends.general, 6);
  cfg.max_iterations = 10;
  const ReasoningResult r = run_search(t.query, broken, *t.prm, cfg);
  REQUIRE(r.error.has_value());
  CHECK(r.iterations_run == 1);
  CHECK(r.trace.size() == 1);
  CHECK(r.error->find("backend unreachable") != std::string::npos);
}

TEST_CASE("run_search validates its inputs") {
  Toy t = toy(1);
  SearchConfig cfg = syn::toy_search_config();
  CHECK_THROWS_AS(run_search(Query{{}, std::nullopt}, t.backends, *t.prm, cfg), InvalidInput);
  CHECK_THROWS_AS(run_search(Query{{1, 99}, std::nullopt}, t.backends, *t.prm, cfg), InvalidInput);
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(run_search(t.query, t.backends, *t.prm, cfg), InvalidInput);
}
