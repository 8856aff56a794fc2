#pragma once

// HTTP clients for logits-exposing model servers and remote PRMs. Each call
// opens its own connection, so a client can be shared across threads.

#include <atomic>
#include <chrono>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

#include "gboost/backends/wire.hpp"
#include "gboost/core.hpp"
#include "gboost/errors.hpp"
#include "gboost/policy.hpp"
#include "gboost/reward.hpp"

namespace gboost::remote {

struct Endpoint {
  std::string base_url;  // http://host:port[/prefix]
  std::chrono::milliseconds timeout{30000};
  /// Retries after the first attempt; the default gives 3 attempts.
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{200};
  std::optional<std::string> auth_token;

  void validate() const {
    if (base_url.empty()) throw InvalidInput("endpoint base_url is empty");
    if (timeout.count() <= 0) throw InvalidInput("endpoint timeout must be positive");
    if (max_retries < 0) throw InvalidInput("endpoint max_retries must be >= 0");
  }
};

/// One failed attempt that was followed by another.
struct RetryRecord {
  std::string path;
  int attempt = 0;  // 1-based attempt that failed
  int status = 0;   // 0 for transport failures
  std::string reason;
};

namespace detail {

struct SplitUrl {
  std::string scheme_host_port;
  std::string prefix;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

/// POST with the shared retry policy: 5xx and transport failures back off
/// exponentially, 4xx fails immediately. Returns the 200 body.
class Transport {
 public:
  explicit Transport(Endpoint ep) : ep_(std::move(ep)) {
    ep_.validate();
    url_ = split_url(ep_.base_url);
  }

  std::string post(const std::string& path, const std::string& body) const {
    auto delay = ep_.initial_backoff;
    const int attempts = ep_.max_retries + 1;
    for (int attempt = 1;; ++attempt) {
      httplib::Client cli(url_.scheme_host_port);
      cli.set_connection_timeout(ep_.timeout);
      cli.set_read_timeout(ep_.timeout);
      cli.set_write_timeout(ep_.timeout);
      if (ep_.auth_token) cli.set_bearer_token_auth(*ep_.auth_token);
      const std::string full_path = url_.prefix + path;
      auto res = cli.Post(full_path, body, "application/json");

      std::string reason;
      int status = 0;
      if (!res) {
        reason = "transport: " + httplib::to_string(res.error());
      } else if (res->status == 200) {
        return res->body;
      } else {
        status = res->status;
        const wire::ErrorBody err = wire::decode_error(res->body);
        reason = "HTTP " + std::to_string(status) + " " + err.code + ": " + err.message;
        if (status >= 400 && status < 500) throw RequestError(full_path + " rejected request: " + reason, status);
      }
      if (attempt >= attempts) {
        throw TransportError(full_path + " failed after " + std::to_string(attempts) + " attempts: " + reason);
      }
      {
        std::lock_guard lock(mu_);
        log_.push_back(RetryRecord{full_path, attempt, status, reason});
      }
      retries_.fetch_add(1, std::memory_order_relaxed);
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }

  std::uint64_t retry_count() const noexcept { return retries_.load(std::memory_order_relaxed); }

  std::vector<RetryRecord> retry_log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  const Endpoint& endpoint() const noexcept { return ep_; }

 private:
  Endpoint ep_;
  SplitUrl url_;
  mutable std::atomic<std::uint64_t> retries_{0};
  mutable std::mutex mu_;
  mutable std::vector<RetryRecord> log_;
};

}  // namespace detail

/// GenerationBackend served over POST /v1/logits. The vocabulary is not
/// discoverable over the wire and must be supplied.
class RemoteModelClient : public GenerationBackend {
 public:
  RemoteModelClient(Endpoint endpoint, std::string model_id, Vocabulary vocab)
      : transport_(std::move(endpoint)), model_(std::move(model_id)), vocab_(std::move(vocab)) {
    vocab_.validate();
  }

  LogitVector next_logits(std::span<const TokenId> context) const override {
    if (context.empty()) throw InvalidInput("remote logits requested for an empty context");
    const wire::LogitsRequest req{model_, TokenSeq(context.begin(), context.end())};
    const std::string body = transport_.post(wire::kLogitsPath, wire::encode(req));
    wire::LogitsResponse resp = wire::decode_logits_response(body);
    if (resp.logits.size() != vocab_.size) {
      throw ProtocolError(model_ + ": expected " + std::to_string(vocab_.size) + " logits, got " +
                          std::to_string(resp.logits.size()));
    }
    for (double v : resp.logits) {
      if (!std::isfinite(v)) throw ProtocolError(model_ + ": non-finite logit in response");
    }
    return LogitVector{std::move(resp.logits)};
  }

  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string id() const override { return "remote:" + model_; }
  std::uint64_t retry_count() const override { return transport_.retry_count(); }
  std::vector<RetryRecord> retry_log() const { return transport_.retry_log(); }

 private:
  detail::Transport transport_;
  std::string model_;
  Vocabulary vocab_;
};

/// RewardModel served over POST /v1/reward. Steps travel as whitespace
/// separated token ids; the question is the query text when present.
class RemotePRMClient : public RewardModel {
 public:
  explicit RemotePRMClient(Endpoint endpoint) : transport_(std::move(endpoint)) {}

  static wire::RewardRequest make_request(const Query& query, std::span<const ReasoningStep> steps) {
    wire::RewardRequest req;
    req.question = query.text ? *query.text : wire::tokens_to_text(query.token_ids);
    for (const auto& s : steps) req.steps.push_back(wire::tokens_to_text(s.token_ids));
    return req;
  }

  RewardScore score(const Query& query, std::span<const ReasoningStep> steps) const override {
    if (steps.empty()) throw InvalidInput("reward requested for an empty step sequence");
    const std::string body = transport_.post(wire::kRewardPath, wire::encode(make_request(query, steps)));
    const wire::RewardResponse resp = wire::decode_reward_response(body);
    if (!std::isfinite(resp.score)) throw ProtocolError("non-finite score in reward response");
    return RewardScore::from_raw(resp.score);
  }

  std::string id() const override { return "remote-prm"; }
  std::uint64_t retry_count() const override { return transport_.retry_count(); }
  std::vector<RetryRecord> retry_log() const { return transport_.retry_log(); }

 private:
  detail::Transport transport_;
};

/// remote_next_logits / remote_reward as free functions.
inline LogitVector remote_next_logits(const RemoteModelClient& client, std::span<const TokenId> context) {
  return client.next_logits(context);
}

inline RewardScore remote_reward(const RemotePRMClient& client, const Query& query,
                                 std::span<const ReasoningStep> steps) {
  return client.score(query, steps);
}

}  // namespace gboost::remote
