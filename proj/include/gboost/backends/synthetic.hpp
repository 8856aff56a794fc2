#pragma once

// Deterministic in-memory language models over a 32-token toy vocabulary.
//
// A toy query is [BOS, body..., SEP]. Every model derives the same hidden
// plan from the body: the answer tokens and, for each 4-token segment of
// the answer, which decoding mode gets that segment right. Given a correct
// prefix, each model puts fixed logits on the correct token and on a shared
// distractor; everything else is small hashed noise. Off the correct path
// the models agree on a hashed junk continuation that ends with EOS.
//
// Segment kinds (argmax behaviour on the correct prefix):
//   FusedOnly   fused correct, tuned/general/base wrong
//   TunedOnly   tuned and base correct, fused and general wrong
//   Both        tuned and fused correct, general and base wrong
//   GeneralLed  general and fused correct, tuned and base wrong

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "gboost/core.hpp"
#include "gboost/policy.hpp"

namespace gboost::synthetic {

inline constexpr std::size_t kVocabSize = 32;
inline constexpr TokenId kEos = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kSep = 2;
inline constexpr TokenId kMarkerA = 3;
inline constexpr TokenId kMarkerB = 4;
inline constexpr TokenId kFirstContent = 5;
inline constexpr std::size_t kContentCount = kVocabSize - static_cast<std::size_t>(kFirstContent);
/// Step length the toy tasks are authored for.
inline constexpr std::size_t kSegmentLength = 4;
inline constexpr std::size_t kSegments = 3;
inline constexpr double kMaxLogit = 20.0;

enum class Profile : std::uint8_t { GeneralStrong, TunedStrong, Complementary };
enum class Role : std::uint8_t { General, Tuned, Base };
enum class SegmentKind : std::uint8_t { FusedOnly, TunedOnly, Both, GeneralLed };
enum class Difficulty : std::uint8_t { Easy, Hard };

inline std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::GeneralStrong: return "general_strong";
    case Profile::TunedStrong: return "tuned_strong";
    case Profile::Complementary: return "complementary";
  }
  return "?";
}

inline Profile profile_from_string(std::string_view s) {
  if (s == "general_strong" || s == "GeneralStrong") return Profile::GeneralStrong;
  if (s == "tuned_strong" || s == "TunedStrong") return Profile::TunedStrong;
  if (s == "complementary" || s == "Complementary") return Profile::Complementary;
  throw InvalidInput("unknown synthetic profile '" + std::string(s) + "'");
}

inline std::string_view to_string(Difficulty d) { return d == Difficulty::Easy ? "easy" : "hard"; }

inline Difficulty difficulty_from_string(std::string_view s) {
  if (s == "easy" || s == "Easy") return Difficulty::Easy;
  if (s == "hard" || s == "Hard") return Difficulty::Hard;
  throw InvalidInput("unknown difficulty '" + std::string(s) + "'");
}

/// Search settings the toy tasks are built for: 4-token steps, depth 3,
/// two children per node, greedy decoding.
inline SearchConfig toy_search_config() {
  SearchConfig c;
  c.step_length = kSegmentLength;
  c.max_depth = kSegments;
  c.expansion_budget = 2;
  c.deterministic_top1 = true;
  return c;
}

inline Vocabulary toy_vocabulary() { return Vocabulary{kVocabSize, kEos, {kMarkerA, kMarkerB}}; }

inline std::uint64_t hash_tokens(std::span<const TokenId> tokens, std::uint64_t salt) {
  std::uint64_t h = mix64(salt ^ 0x6a09e667f3bcc908ULL);
  for (TokenId t : tokens) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
  return mix64(h ^ tokens.size());
}

inline TokenId content_token(std::uint64_t h) {
  return static_cast<TokenId>(kFirstContent + static_cast<TokenId>(h % kContentCount));
}

struct ToyPlan {
  TokenSeq answer;  // without EOS
  std::array<SegmentKind, kSegments> segments{};
  Difficulty difficulty = Difficulty::Easy;
};

/// The hidden plan for a query body. Depends on the body and the profile
/// only, so tasks and models built with different seeds still agree.
inline ToyPlan toy_plan(std::span<const TokenId> body, Profile profile) {
  const std::uint64_t h = hash_tokens(body, 0x51ed);
  ToyPlan plan;
  // Answer plus EOS spans exactly three segments.
  const std::size_t len = 2 * kSegmentLength + static_cast<std::size_t>(mix64(h ^ 1) % kSegmentLength);
  for (std::size_t i = 0; i < len; ++i) plan.answer.push_back(content_token(mix64(h ^ (0x100 + i))));

  using K = SegmentKind;
  switch (profile) {
    case Profile::TunedStrong:
      plan.segments = {K::Both, K::Both, K::Both};
      break;
    case Profile::GeneralStrong:
      plan.segments = {K::GeneralLed, K::GeneralLed, K::GeneralLed};
      break;
    case Profile::Complementary: {
      if ((mix64(h ^ 2) & 1) == 0) {
        plan.segments = {K::FusedOnly, K::FusedOnly, K::FusedOnly};
      } else {
        static constexpr std::array<std::array<K, kSegments>, 6> mixed = {{
            {K::FusedOnly, K::TunedOnly, K::FusedOnly},
            {K::TunedOnly, K::FusedOnly, K::TunedOnly},
            {K::TunedOnly, K::TunedOnly, K::FusedOnly},
            {K::FusedOnly, K::FusedOnly, K::TunedOnly},
            {K::FusedOnly, K::TunedOnly, K::TunedOnly},
            {K::TunedOnly, K::FusedOnly, K::FusedOnly},
        }};
        plan.segments = mixed[mix64(h ^ 3) % mixed.size()];
        plan.difficulty = Difficulty::Hard;
      }
      break;
    }
  }
  return plan;
}

struct KeyLogits {
  double correct;
  double distractor;
};

inline KeyLogits key_logits(SegmentKind kind, Role role) {
  // Rows: general, tuned, base.
  static constexpr KeyLogits fused_only[] = {{4, 5}, {3, 6}, {0, 6}};
  static constexpr KeyLogits tuned_only[] = {{0, 8}, {6, 3}, {5, 0}};
  static constexpr KeyLogits both[] = {{2, 4}, {6, 2}, {1, 2}};
  static constexpr KeyLogits general_led[] = {{7, 3}, {3, 5}, {1, 5}};
  const auto r = static_cast<std::size_t>(role);
  switch (kind) {
    case SegmentKind::FusedOnly: return fused_only[r];
    case SegmentKind::TunedOnly: return tuned_only[r];
    case SegmentKind::Both: return both[r];
    case SegmentKind::GeneralLed: return general_led[r];
  }
  return {0, 0};
}

class SyntheticModel : public GenerationBackend {
 public:
  SyntheticModel(std::uint64_t seed, Role role, Profile profile)
      : vocab_(toy_vocabulary()), seed_(seed), role_(role), profile_(profile) {}

  /// Forces the logits returned for one exact context.
  void set_override(TokenSeq context, LogitVector logits) {
    logits.validate(vocab_.size);
    std::lock_guard lock(mu_);
    overrides_[std::move(context)] = std::move(logits);
  }

  LogitVector next_logits(std::span<const TokenId> context) const override {
    {
      std::lock_guard lock(mu_);
      if (!overrides_.empty()) {
        auto it = overrides_.find(TokenSeq(context.begin(), context.end()));
        if (it != overrides_.end()) return it->second;
      }
    }
    LogitVector z;
    z.values.resize(vocab_.size);
    const std::uint64_t ctx_hash = hash_tokens(context, seed_ * 3 + static_cast<std::uint64_t>(role_));
    for (std::size_t i = 0; i < vocab_.size; ++i) {
      // Noise in [-1, 1].
      z.values[i] = static_cast<double>(mix64(ctx_hash ^ (i * 0x9e37)) >> 11) * 0x1.0p-52 - 1.0;
    }
    for (TokenId special : {kBos, kSep, kMarkerA, kMarkerB}) z.values[static_cast<std::size_t>(special)] = -kMaxLogit;

    std::span<const TokenId> body;
    std::span<const TokenId> generated = context;
    const auto sep = std::find(context.begin(), context.end(), kSep);
    const bool structured = !context.empty() && context.front() == kBos && sep != context.end();
    if (structured) {
      body = context.subspan(1, static_cast<std::size_t>(sep - context.begin()) - 1);
      generated = context.subspan(static_cast<std::size_t>(sep - context.begin()) + 1);
    }
    const std::size_t pos = generated.size();

    if (structured) {
      const ToyPlan plan = toy_plan(body, profile_);
      const bool on_path = pos <= plan.answer.size() &&
                           std::equal(generated.begin(), generated.end(), plan.answer.begin());
      if (on_path) {
        const TokenId correct = pos < plan.answer.size() ? plan.answer[pos] : kEos;
        const SegmentKind kind = plan.segments[std::min(pos / kSegmentLength, kSegments - 1)];
        const TokenId distractor = distractor_for(body, pos, correct);
        const KeyLogits k = key_logits(kind, role_);
        if (correct != kEos) z.values[static_cast<std::size_t>(kEos)] = -8.0;
        z.values[static_cast<std::size_t>(correct)] = k.correct;
        z.values[static_cast<std::size_t>(distractor)] = k.distractor;
        return z;
      }
    }

    // Off the answer path: all three models favour the same junk token and
    // close the sequence once it is as long as a typical answer.
    const std::size_t answer_len = structured ? toy_plan(body, profile_).answer.size() : 3 * kSegmentLength - 1;
    const TokenId junk = content_token(hash_tokens(context, seed_ ^ 0x1234));
    z.values[static_cast<std::size_t>(junk)] += 3.0;
    z.values[static_cast<std::size_t>(kEos)] = pos >= answer_len ? 6.0 : -8.0;
    return z;
  }

  const Vocabulary& vocabulary() const override { return vocab_; }

  std::string id() const override {
    static constexpr const char* names[] = {"synthetic-general", "synthetic-tuned", "synthetic-base"};
    return names[static_cast<std::size_t>(role_)];
  }

  Role role() const noexcept { return role_; }
  Profile profile() const noexcept { return profile_; }

 private:
  TokenId distractor_for(std::span<const TokenId> body, std::size_t pos, TokenId correct) const {
    TokenId d = content_token(mix64(hash_tokens(body, seed_) ^ (pos + 1)));
    if (d == correct) d = static_cast<TokenId>(kFirstContent + (d - kFirstContent + 1) % kContentCount);
    return d;
  }

  Vocabulary vocab_;
  std::uint64_t seed_;
  Role role_;
  Profile profile_;
  mutable std::mutex mu_;
  std::map<TokenSeq, LogitVector> overrides_;
};

/// Three models over one vocabulary sharing a seed.
inline BackendTriple synthetic_triple(std::uint64_t seed, Profile profile) {
  return BackendTriple{std::make_shared<SyntheticModel>(seed, Role::General, profile),
                       std::make_shared<SyntheticModel>(seed, Role::Tuned, profile),
                       std::make_shared<SyntheticModel>(seed, Role::Base, profile)};
}

/// [BOS, body..., SEP].
inline Query toy_query(std::span<const TokenId> body) {
  Query q;
  q.token_ids.push_back(kBos);
  q.token_ids.insert(q.token_ids.end(), body.begin(), body.end());
  q.token_ids.push_back(kSep);
  return q;
}

}  // namespace gboost::synthetic
