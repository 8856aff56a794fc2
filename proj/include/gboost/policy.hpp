#pragma once

// Next-step generation. A step is at most `step_length` tokens drawn either
// from the fused distribution softmax((z_general + z_tuned - z_base) / T)
// (collaborative) or from the tuned small model alone (private).

#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gboost/core.hpp"
#include "gboost/errors.hpp"

namespace gboost {

/// Anything that maps a token context to next-token logits.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  virtual LogitVector next_logits(std::span<const TokenId> context) const = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  virtual std::string id() const = 0;

  /// Transport retries performed so far (remote backends only).
  virtual std::uint64_t retry_count() const { return 0; }
};

using BackendPtr = std::shared_ptr<const GenerationBackend>;

/// general = large model (z_c), tuned = fine-tuned small model (z_e^+),
/// base = the small model before fine-tuning (z_e^-).
struct BackendTriple {
  BackendPtr general;
  BackendPtr tuned;
  BackendPtr base;

  void validate() const {
    if (!general || !tuned || !base) throw InvalidInput("backend triple is incomplete");
    const Vocabulary& v = tuned->vocabulary();
    v.validate();
    if (!general->vocabulary().compatible_with(v) || !base->vocabulary().compatible_with(v)) {
      throw InvalidInput("backends disagree on vocabulary size or special ids");
    }
  }

  const Vocabulary& vocabulary() const { return tuned->vocabulary(); }

  std::uint64_t retry_count() const {
    return general->retry_count() + tuned->retry_count() + base->retry_count();
  }
};

struct StepSample {
  ReasoningStep step;
  std::vector<double> per_token_log_probs;
};

namespace detail {

inline void check_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput("non-finite logit");
  }
}

/// max-subtracted softmax of scores/temperature; also returns the log of
/// the normalizer so callers can form exact log-probabilities.
inline std::vector<double> stable_softmax(std::span<const double> scores, double temperature,
                                          std::vector<double>* log_probs = nullptr) {
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be > 0");
  if (scores.empty()) throw ShapeError("empty score vector");
  double mx = scores[0] / temperature;
  for (double s : scores) mx = std::max(mx, s / temperature);
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] / temperature - mx);
    sum += out[i];
  }
  const double log_sum = std::log(sum);
  if (log_probs) {
    log_probs->resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      (*log_probs)[i] = std::min(0.0, (scores[i] / temperature - mx) - log_sum);
    }
  }
  for (double& p : out) p /= sum;
  return out;
}

}  // namespace detail

inline std::vector<double> softmax(const LogitVector& z, double temperature = 1.0) {
  detail::check_finite(z.values);
  return detail::stable_softmax(z.values, temperature);
}

/// softmax((z_c + z_plus - z_minus) / temperature).
inline std::vector<double> fused_distribution(const LogitVector& z_c, const LogitVector& z_plus,
                                              const LogitVector& z_minus, double temperature) {
  if (z_c.size() != z_plus.size() || z_c.size() != z_minus.size()) {
    throw ShapeError("fused_distribution operands have lengths " + std::to_string(z_c.size()) + ", " +
                     std::to_string(z_plus.size()) + ", " + std::to_string(z_minus.size()));
  }
  detail::check_finite(z_c.values);
  detail::check_finite(z_plus.values);
  detail::check_finite(z_minus.values);
  std::vector<double> fused(z_c.size());
  for (std::size_t i = 0; i < fused.size(); ++i) fused[i] = z_c.values[i] + z_plus.values[i] - z_minus.values[i];
  return detail::stable_softmax(fused, temperature);
}

/// True when the tokens contain eos, contain the answer marker as a
/// contiguous run, or the step sits at (or past) the depth cap.
inline bool detect_termination(std::span<const TokenId> tokens, const Vocabulary& vocab, std::size_t depth,
                               std::size_t max_depth) {
  if (depth >= max_depth) return true;
  if (std::find(tokens.begin(), tokens.end(), vocab.eos_id) != tokens.end()) return true;
  const auto& marker = vocab.answer_marker_ids;
  if (marker.empty()) return false;
  return std::search(tokens.begin(), tokens.end(), marker.begin(), marker.end()) != tokens.end();
}

/// Whether the step has produced an explicit end (eos or answer marker),
/// as opposed to being cut by the depth cap.
inline bool ends_answer(std::span<const TokenId> tokens, const Vocabulary& vocab) {
  return detect_termination(tokens, vocab, 0, std::numeric_limits<std::size_t>::max());
}

namespace detail {

inline std::size_t argmax(std::span<const double> p) {
  return static_cast<std::size_t>(std::distance(p.begin(), std::max_element(p.begin(), p.end())));
}

inline std::size_t sample_index(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  // Rounding left the cumulative sum just below u: take the last token with mass.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return i;
  }
  return p.size() - 1;
}

inline LogitVector query_backend(const GenerationBackend& backend, std::span<const TokenId> ctx,
                                 std::size_t vocab_size, std::size_t position) {
  LogitVector z;
  try {
    z = backend.next_logits(ctx);
  } catch (const BackendError& e) {
    throw BackendError(backend.id() + " failed at step position " + std::to_string(position) + ": " + e.what(),
                       position);
  }
  z.validate(vocab_size);
  return z;
}

/// Shared autoregressive loop. `scores` maps (context, position) to the
/// pre-temperature score vector for the next token.
template <typename ScoreFn>
StepSample sample_step(const Query& query, std::span<const ReasoningStep> prior_steps, const Vocabulary& vocab,
                       const SearchConfig& config, Rng& rng, ActionKind action, ScoreFn&& scores) {
  config.validate();
  TokenSeq ctx = build_context(query, prior_steps);
  StepSample out;
  out.step.action = action;
  const std::size_t depth = prior_steps.size() + 1;
  std::vector<double> log_probs;
  for (std::size_t pos = 0; pos < config.step_length; ++pos) {
    const std::vector<double> score = scores(std::span<const TokenId>(ctx), pos);
    const std::vector<double> probs = stable_softmax(score, config.temperature, &log_probs);
    const std::size_t tok = config.deterministic_top1 ? argmax(probs) : sample_index(probs, rng);
    out.step.token_ids.push_back(static_cast<TokenId>(tok));
    out.per_token_log_probs.push_back(log_probs[tok]);
    ctx.push_back(static_cast<TokenId>(tok));
    if (ends_answer(out.step.token_ids, vocab)) break;
  }
  out.step.log_prob = std::accumulate(out.per_token_log_probs.begin(), out.per_token_log_probs.end(), 0.0);
  out.step.is_terminal = detect_termination(out.step.token_ids, vocab, depth, config.max_depth);
  return out;
}

}  // namespace detail

/// One step from the fused distribution. Each backend receives exactly one
/// next_logits call per generated token.
inline StepSample sample_step_collaborative(const BackendTriple& backends, const Query& query,
                                            std::span<const ReasoningStep> prior_steps, const SearchConfig& config,
                                            Rng& rng) {
  const Vocabulary& vocab = backends.vocabulary();
  const std::size_t n = vocab.size;
  return detail::sample_step(query, prior_steps, vocab, config, rng, ActionKind::Collaborative,
                             [&](std::span<const TokenId> ctx, std::size_t pos) {
                               const LogitVector zc = detail::query_backend(*backends.general, ctx, n, pos);
                               const LogitVector zp = detail::query_backend(*backends.tuned, ctx, n, pos);
                               const LogitVector zm = detail::query_backend(*backends.base, ctx, n, pos);
                               std::vector<double> fused(n);
                               for (std::size_t i = 0; i < n; ++i) {
                                 fused[i] = zc.values[i] + zp.values[i] - zm.values[i];
                               }
                               return fused;
                             });
}

/// One step from a single backend (the tuned model in search; baselines
/// also reuse it for the base and general models).
inline StepSample sample_step_private(const GenerationBackend& tuned, const Query& query,
                                      std::span<const ReasoningStep> prior_steps, const SearchConfig& config,
                                      Rng& rng) {
  const Vocabulary& vocab = tuned.vocabulary();
  return detail::sample_step(query, prior_steps, vocab, config, rng, ActionKind::Private,
                             [&](std::span<const TokenId> ctx, std::size_t pos) {
                               return detail::query_backend(tuned, ctx, vocab.size, pos).values;
                             });
}

}  // namespace gboost
