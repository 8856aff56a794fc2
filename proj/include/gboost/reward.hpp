#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gboost/core.hpp"
#include "gboost/errors.hpp"

namespace gboost {

struct RewardScore {
  double value = 0.0;
  std::optional<double> raw;

  static RewardScore from_raw(double raw) {
    if (std::isnan(raw)) throw InvalidInput("reward is NaN");
    return RewardScore{std::clamp(raw, 0.0, 1.0), raw};
  }
};

/// Scores a whole reasoning prefix s_1..s_k for a query.
class RewardModel {
 public:
  virtual ~RewardModel() = default;
  virtual RewardScore score(const Query& query, std::span<const ReasoningStep> steps) const = 0;
  virtual std::string id() const = 0;
  virtual std::uint64_t retry_count() const { return 0; }
};

/// Boundary wrapper: rejects empty prefixes, clamps into [0, 1] and tags
/// backend failures with the query.
inline RewardScore score(const RewardModel& model, const Query& query, std::span<const ReasoningStep> steps) {
  if (steps.empty()) throw InvalidInput("reward requested for an empty step sequence");
  RewardScore s;
  try {
    s = model.score(query, steps);
  } catch (const BackendError& e) {
    throw BackendError(model.id() + " failed for " + query.label() + ": " + e.what());
  }
  if (s.raw) return RewardScore::from_raw(*s.raw);
  return RewardScore::from_raw(s.value);
}

/// Rewards prefixes against a table of known answers.
///
/// Let g be the generated tokens with eos removed and o the answer:
///  - g diverges from o, or the path ended without producing exactly o: 0
///  - g == o and the path ended with eos or the answer marker: 1
///  - otherwise g is a proper, still-open prefix of o:
///      prefix_floor + prefix_span * |g| / (|o| + 1)
/// so credit grows along the correct path and never exceeds 1.
class OraclePRM : public RewardModel {
 public:
  OraclePRM(Vocabulary vocab, double prefix_floor = 0.2, double prefix_span = 0.6)
      : vocab_(std::move(vocab)), floor_(prefix_floor), span_(prefix_span) {
    if (floor_ < 0.0 || span_ < 0.0 || floor_ + span_ >= 1.0) {
      throw InvalidInput("oracle prefix credit must stay below 1");
    }
  }

  void add_answer(TokenSeq query_tokens, TokenSeq answer) {
    answers_[std::move(query_tokens)] = std::move(answer);
  }

  std::size_t answer_count() const noexcept { return answers_.size(); }

  RewardScore score(const Query& query, std::span<const ReasoningStep> steps) const override {
    auto it = answers_.find(query.token_ids);
    if (it == answers_.end()) throw InvalidInput("oracle has no answer for " + query.label());
    const TokenSeq& answer = it->second;
    TokenSeq generated;
    bool ended = false;
    for (const auto& s : steps) {
      for (TokenId t : s.token_ids) {
        if (t == vocab_.eos_id) ended = true;
        else generated.push_back(t);
      }
      if (ends_answer(s.token_ids)) ended = true;
    }
    if (steps.back().is_terminal) ended = true;

    if (generated.size() > answer.size() ||
        !std::equal(generated.begin(), generated.end(), answer.begin())) {
      return RewardScore{0.0, 0.0};
    }
    if (ended) {
      const double v = generated.size() == answer.size() ? 1.0 : 0.0;
      return RewardScore{v, v};
    }
    const double v = floor_ + span_ * static_cast<double>(generated.size()) / static_cast<double>(answer.size() + 1);
    return RewardScore{v, v};
  }

  std::string id() const override { return "oracle-prm"; }

 private:
  bool ends_answer(std::span<const TokenId> tokens) const {
    const auto& m = vocab_.answer_marker_ids;
    return !m.empty() && std::search(tokens.begin(), tokens.end(), m.begin(), m.end()) != tokens.end();
  }

  Vocabulary vocab_;
  double floor_;
  double span_;
  std::map<TokenSeq, TokenSeq> answers_;
};

}  // namespace gboost
