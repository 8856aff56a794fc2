#pragma once

// JSON messages of the logits/reward HTTP protocol (version 1).
//
//   POST {base}/v1/logits  {"model": str, "token_ids": [int]} -> {"logits": [float]}
//   POST {base}/v1/reward  {"question": str, "steps": [str]}  -> {"score": float}
//   non-200                {"error": {"code": str, "message": str}}

#include <string>
#include <vector>

#include "json.hpp"

#include "gboost/core.hpp"
#include "gboost/errors.hpp"

namespace gboost::wire {

using nlohmann::json;

inline constexpr const char* kLogitsPath = "/v1/logits";
inline constexpr const char* kRewardPath = "/v1/reward";

struct LogitsRequest {
  std::string model;
  TokenSeq token_ids;
  bool operator==(const LogitsRequest&) const = default;
};

struct LogitsResponse {
  std::vector<double> logits;
  bool operator==(const LogitsResponse&) const = default;
};

struct RewardRequest {
  std::string question;
  std::vector<std::string> steps;
  bool operator==(const RewardRequest&) const = default;
};

struct RewardResponse {
  double score = 0.0;
  bool operator==(const RewardResponse&) const = default;
};

struct ErrorBody {
  std::string code;
  std::string message;
  bool operator==(const ErrorBody&) const = default;
};

namespace detail {

inline json parse(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON body: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw ProtocolError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("field '") + name + "' has the wrong type: " + e.what());
  }
}

}  // namespace detail

inline std::string encode(const LogitsRequest& m) {
  return json{{"model", m.model}, {"token_ids", m.token_ids}}.dump();
}
inline std::string encode(const LogitsResponse& m) { return json{{"logits", m.logits}}.dump(); }
inline std::string encode(const RewardRequest& m) {
  return json{{"question", m.question}, {"steps", m.steps}}.dump();
}
inline std::string encode(const RewardResponse& m) { return json{{"score", m.score}}.dump(); }
inline std::string encode(const ErrorBody& m) {
  return json{{"error", {{"code", m.code}, {"message", m.message}}}}.dump();
}

inline LogitsRequest decode_logits_request(const std::string& body) {
  const json j = detail::parse(body);
  return {detail::field<std::string>(j, "model"), detail::field<TokenSeq>(j, "token_ids")};
}

inline LogitsResponse decode_logits_response(const std::string& body) {
  const json j = detail::parse(body);
  const json& arr = j.is_object() && j.contains("logits") ? j["logits"] : json();
  if (!arr.is_array()) throw ProtocolError("field 'logits' missing or not an array");
  LogitsResponse r;
  r.logits.reserve(arr.size());
  for (const json& v : arr) {
    if (!v.is_number()) throw ProtocolError("field 'logits' contains a non-number");
    r.logits.push_back(v.get<double>());
  }
  return r;
}

inline RewardRequest decode_reward_request(const std::string& body) {
  const json j = detail::parse(body);
  return {detail::field<std::string>(j, "question"), detail::field<std::vector<std::string>>(j, "steps")};
}

inline RewardResponse decode_reward_response(const std::string& body) {
  const json j = detail::parse(body);
  if (!j.is_object() || !j.contains("score") || !j["score"].is_number()) {
    throw ProtocolError("field 'score' missing or not a number");
  }
  return {j["score"].get<double>()};
}

/// Best effort: non-JSON error bodies become code "unknown".
inline ErrorBody decode_error(const std::string& body) {
  try {
    const json j = json::parse(body);
    const json& e = j.at("error");
    return {e.value("code", "unknown"), e.value("message", "")};
  } catch (const json::exception&) {
    return {"unknown", body};
  }
}

/// Token ids rendered as text; the protocol carries strings for the PRM.
inline std::string tokens_to_text(std::span<const TokenId> tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(tokens[i]);
  }
  return s;
}

}  // namespace gboost::wire
