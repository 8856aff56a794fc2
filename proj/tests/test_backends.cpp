#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "stub_server.hpp"

#include "gboost/backends/remote.hpp"
#include "gboost/backends/synthetic.hpp"
#include "gboost/backends/wire.hpp"

using namespace gboost;
namespace syn = gboost::synthetic;
using remote::Endpoint;
using remote::RemoteModelClient;
using remote::RemotePRMClient;

namespace {

const Vocabulary kVocab4{4, 0, {}};

Endpoint fast(const stub::Server& s) {
  Endpoint ep;
  ep.base_url = s.url();
  ep.timeout = std::chrono::milliseconds(2000);
  ep.initial_backoff = std::chrono::milliseconds(1);
  return ep;
}

ReasoningStep step(TokenSeq t) { return ReasoningStep{std::move(t), 0.0, ActionKind::Private, false}; }

}  // namespace

TEST_CASE("remote logits pass through unchanged") {
  stub::Server server;
  server.logits = [](const wire::LogitsRequest&) { return std::vector<double>{0.5, -1.25, 3.0, 1e-3}; };
  RemoteModelClient client(fast(server), "tuned", kVocab4);
  const TokenSeq ctx = {1, 2, 3};
  const LogitVector z = remote::remote_next_logits(client, ctx);
  CHECK(z.values == std::vector<double>{0.5, -1.25, 3.0, 1e-3});
  REQUIRE(server.logits_requests.size() == 1);
  CHECK(server.logits_requests[0].model == "tuned");
  CHECK(server.logits_requests[0].token_ids == ctx);
  CHECK(client.retry_count() == 0);
}

TEST_CASE("wrong-length logits are a protocol error naming both lengths") {
  stub::Server server;
  server.logits = [](const wire::LogitsRequest&) { return std::vector<double>{0.0, 1.0, 2.0}; };
  RemoteModelClient client(fast(server), "general", kVocab4);
  const TokenSeq ctx = {1};
  try {
    client.next_logits(ctx);
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 4") != std::string::npos);
    CHECK(msg.find("got 3") != std::string::npos);
  }
}

TEST_CASE("transient server errors are retried with backoff") {
  stub::Server server;
  server.logits = [](const wire::LogitsRequest&) { return std::vector<double>{1, 2, 3, 4}; };
  server.fail_next(2, 503);
  RemoteModelClient client(fast(server), "tuned", kVocab4);
  const TokenSeq ctx = {1};
  CHECK(client.next_logits(ctx).values == std::vector<double>{1, 2, 3, 4});
  CHECK(server.hits() == 3);
  CHECK(client.retry_count() == 2);
  const auto log = client.retry_log();
  REQUIRE(log.size() == 2);
  CHECK(log[0].attempt == 1);
  CHECK(log[1].attempt == 2);
  CHECK(log[0].status == 503);

  server.fail_next(3, 500);
  CHECK_THROWS_AS(client.next_logits(ctx), TransportError);
  CHECK(server.hits() == 6);
}

TEST_CASE("client errors are not retried") {
  stub::Server server;
  server.fail_next(5, 422);
  RemoteModelClient client(fast(server), "tuned", kVocab4);
  const TokenSeq ctx = {1};
  try {
    client.next_logits(ctx);
    FAIL("expected RequestError");
  } catch (const RequestError& e) {
    CHECK(e.status() == 422);
  }
  CHECK(server.hits() == 1);
  CHECK(client.retry_count() == 0);
}

TEST_CASE("unreachable servers exhaust retries as transport errors") {
  int port = 0;
  {
    stub::Server gone;
    port = std::stoi(gone.url().substr(gone.url().rfind(':') + 1));
  }
  Endpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  ep.timeout = std::chrono::milliseconds(300);
  ep.initial_backoff = std::chrono::milliseconds(1);
  ep.max_retries = 1;
  RemoteModelClient client(ep, "tuned", kVocab4);
  const TokenSeq ctx = {1};
  CHECK_THROWS_AS(client.next_logits(ctx), TransportError);
  CHECK(client.retry_count() == 1);
}

TEST_CASE("remote rewards clamp but keep the raw score") {
  stub::Server server;
  RemotePRMClient prm(fast(server));
  const Query q{{1, 5}, "two plus two"};
  const std::vector<ReasoningStep> steps = {step({5, 6}), step({7})};

  server.reward = [](const wire::RewardRequest&) { return 0.85; };
  CHECK(remote::remote_reward(prm, q, steps).value == 0.85);
  REQUIRE(server.reward_requests.size() == 1);
  CHECK(server.reward_requests[0].question == "two plus two");
  CHECK(server.reward_requests[0].steps == std::vector<std::string>{"5 6", "7"});

  server.reward = [](const wire::RewardRequest&) { return -0.2; };
  const RewardScore s = prm.score(q, steps);
  CHECK(s.value == 0.0);
  CHECK(s.raw == -0.2);

  server.raw_reward_body = [] { return std::string("{\"score\": \"high\"}"); };
  CHECK_THROWS_AS(prm.score(q, steps), ProtocolError);
  server.raw_reward_body = [] { return std::string("not json"); };
  CHECK_THROWS_AS(prm.score(q, steps), ProtocolError);
}

TEST_CASE("malformed logits bodies are protocol errors") {
  stub::Server server;
  RemoteModelClient client(fast(server), "tuned", kVocab4);
  const TokenSeq ctx = {1};
  server.raw_logits_body = [](const wire::LogitsRequest&) { return std::string("{\"logits\": [1, 2"); };
  CHECK_THROWS_AS(client.next_logits(ctx), ProtocolError);
  server.raw_logits_body = [](const wire::LogitsRequest&) { return std::string("{\"values\": [1, 2, 3, 4]}"); };
  CHECK_THROWS_AS(client.next_logits(ctx), ProtocolError);
  server.raw_logits_body = [](const wire::LogitsRequest&) { return std::string("{\"logits\": [1, \"x\", 3, 4]}"); };
  CHECK_THROWS_AS(client.next_logits(ctx), ProtocolError);
}

TEST_CASE("bearer token is sent when configured") {
  stub::Server server;
  server.logits = [](const wire::LogitsRequest&) { return std::vector<double>{0, 0, 0, 0}; };
  Endpoint ep = fast(server);
  ep.auth_token = "s3cret";
  RemoteModelClient client(ep, "tuned", kVocab4);
  const TokenSeq ctx = {1};
  client.next_logits(ctx);
  RemoteModelClient anon(fast(server), "tuned", kVocab4);
  anon.next_logits(ctx);
  const auto auth = server.auth_headers();
  REQUIRE(auth.size() == 2);
  CHECK(auth[0] == "Bearer s3cret");
  CHECK(auth[1].empty());
}

TEST_CASE("base urls with a path prefix are honoured") {
  const auto s = remote::detail::split_url("http://host:8080/api/v2/");
  CHECK(s.scheme_host_port == "http://host:8080");
  CHECK(s.prefix == "/api/v2");
  CHECK(remote::detail::split_url("http://host:1").prefix.empty());
  Endpoint bad;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("wire messages round-trip") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 300; ++i) {
    wire::LogitsRequest req{"m" + std::to_string(i), {}};
    wire::LogitsResponse resp;
    wire::RewardRequest rr{"q\"uote\n" + std::to_string(i), {}};
    const std::size_t n = gen() % 40;
    for (std::size_t k = 0; k < n; ++k) {
      req.token_ids.push_back(static_cast<TokenId>(gen() % 50000));
      resp.logits.push_back(d(gen));
      rr.steps.push_back("step " + std::to_string(gen() % 100));
    }
    CHECK(wire::decode_logits_request(wire::encode(req)) == req);
    CHECK(wire::decode_logits_response(wire::encode(resp)) == resp);
    CHECK(wire::decode_reward_request(wire::encode(rr)) == rr);
    const wire::RewardResponse sc{d(gen)};
    CHECK(wire::decode_reward_response(wire::encode(sc)) == sc);
  }
  const wire::ErrorBody e{"overloaded", "try later"};
  CHECK(wire::decode_error(wire::encode(e)) == e);
  CHECK(wire::decode_error("<html>").code == "unknown");
}

TEST_CASE("synthetic models are deterministic per seed and role") {
  const syn::SyntheticModel a(3, syn::Role::Tuned, syn::Profile::Complementary);
  const syn::SyntheticModel b(3, syn::Role::Tuned, syn::Profile::Complementary);
  const syn::SyntheticModel c(4, syn::Role::Tuned, syn::Profile::Complementary);
  const TokenSeq ctx = {syn::kBos, 6, 7, 8, 9, 10, 11, syn::kSep, 20};
  CHECK(a.next_logits(ctx).values == b.next_logits(ctx).values);
  CHECK(a.next_logits(ctx).values != c.next_logits(ctx).values);
  CHECK(a.next_logits(ctx).values.size() == syn::kVocabSize);
  CHECK(a.vocabulary().compatible_with(syn::toy_vocabulary()));
}

TEST_CASE("synthetic overrides replace logits for one context") {
  syn::SyntheticModel m(0, syn::Role::General, syn::Profile::TunedStrong);
  std::vector<double> forced(syn::kVocabSize, 0.0);
  forced[9] = 5.0;
  m.set_override({1, 2}, LogitVector{forced});
  CHECK(m.next_logits(TokenSeq{1, 2}).values == forced);
  CHECK(m.next_logits(TokenSeq{1, 3}).values != forced);
  CHECK_THROWS_AS(m.set_override({1}, LogitVector{{1.0}}), ShapeError);
}

TEST_CASE("synthetic profiles shape greedy decoding") {
  int easy = 0, hard = 0;
  for (std::uint64_t i = 0; i < 60; ++i) {
    const TokenSeq body = {static_cast<TokenId>(5 + i % 20), static_cast<TokenId>(5 + (i / 20) % 20), 7, 8, 9, 10};
    const Query q = syn::toy_query(body);

    const auto comp = syn::toy_plan(body, syn::Profile::Complementary);
    const BackendTriple cb = syn::synthetic_triple(i, syn::Profile::Complementary);
    bool eos = false;
    const TokenSeq fused = oracle::greedy_decode(cb, q, {ActionKind::Collaborative}, 4, 3, &eos);
    const TokenSeq tuned = oracle::greedy_single(*cb.tuned, q, 12);
    const TokenSeq general = oracle::greedy_single(*cb.general, q, 12);
    const TokenSeq base = oracle::greedy_single(*cb.base, q, 12);
    CHECK(tuned != comp.answer);
    CHECK(general != comp.answer);
    CHECK(base != comp.answer);
    if (comp.difficulty == syn::Difficulty::Easy) {
      ++easy;
      CHECK(fused == comp.answer);
      CHECK(eos);
    } else {
      ++hard;
      CHECK(fused != comp.answer);
      // The per-segment action pattern of the plan solves it.
      std::vector<ActionKind> actions;
      for (auto k : comp.segments) {
        actions.push_back(k == syn::SegmentKind::TunedOnly ? ActionKind::Private : ActionKind::Collaborative);
      }
      CHECK(oracle::greedy_decode(cb, q, actions, 4, 3) == comp.answer);
    }

    const auto strong = syn::toy_plan(body, syn::Profile::TunedStrong);
    const BackendTriple tb = syn::synthetic_triple(i, syn::Profile::TunedStrong);
    CHECK(oracle::greedy_single(*tb.tuned, q, 12) == strong.answer);
    CHECK(oracle::greedy_single(*tb.base, q, 12) != strong.answer);

    const auto gen_plan = syn::toy_plan(body, syn::Profile::GeneralStrong);
    const BackendTriple gb = syn::synthetic_triple(i, syn::Profile::GeneralStrong);
    CHECK(oracle::greedy_single(*gb.general, q, 12) == gen_plan.answer);
    CHECK(oracle::greedy_single(*gb.tuned, q, 12) != gen_plan.answer);
  }
  CHECK(easy > 10);
  CHECK(hard > 10);
}
