#pragma once

#include <atomic>
#include <memory>

#include "gboost/policy.hpp"
#include "gboost/reward.hpp"

namespace gboost {

/// Forwards to another backend and counts next_logits calls.
class CountingBackend : public GenerationBackend {
 public:
  explicit CountingBackend(BackendPtr inner) : inner_(std::move(inner)) {}

  LogitVector next_logits(std::span<const TokenId> context) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->next_logits(context);
  }
  const Vocabulary& vocabulary() const override { return inner_->vocabulary(); }
  std::string id() const override { return inner_->id(); }
  std::uint64_t retry_count() const override { return inner_->retry_count(); }

  std::uint64_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }
  void reset() noexcept { calls_.store(0, std::memory_order_relaxed); }

 private:
  BackendPtr inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

class CountingReward : public RewardModel {
 public:
  explicit CountingReward(std::shared_ptr<const RewardModel> inner) : inner_(std::move(inner)) {}

  RewardScore score(const Query& q, std::span<const ReasoningStep> steps) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->score(q, steps);
  }
  std::string id() const override { return inner_->id(); }
  std::uint64_t retry_count() const override { return inner_->retry_count(); }
  std::uint64_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

 private:
  std::shared_ptr<const RewardModel> inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

/// A triple whose members are CountingBackends, plus typed handles to them.
struct CountedTriple {
  BackendTriple triple;
  std::shared_ptr<CountingBackend> general;
  std::shared_ptr<CountingBackend> tuned;
  std::shared_ptr<CountingBackend> base;
};

inline CountedTriple count_calls(const BackendTriple& inner) {
  CountedTriple c;
  c.general = std::make_shared<CountingBackend>(inner.general);
  c.tuned = std::make_shared<CountingBackend>(inner.tuned);
  c.base = std::make_shared<CountingBackend>(inner.base);
  c.triple = BackendTriple{c.general, c.tuned, c.base};
  return c;
}

}  // namespace gboost
