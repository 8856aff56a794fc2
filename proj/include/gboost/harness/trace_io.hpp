#pragma once

// Newline-delimited JSON traces. Line 1 is a schema header, then one
// TraceEvent per line.

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gboost/core.hpp"
#include "gboost/errors.hpp"

namespace gboost {

inline constexpr const char* kTraceSchema = "gboost-trace";
inline constexpr int kTraceVersion = 1;

namespace detail {

inline std::vector<std::uint32_t> ids_to_ints(std::span<const NodeId> ids) {
  std::vector<std::uint32_t> out;
  out.reserve(ids.size());
  for (NodeId id : ids) out.push_back(static_cast<std::uint32_t>(id));
  return out;
}

inline std::vector<NodeId> ints_to_ids(const std::vector<std::uint32_t>& v) {
  std::vector<NodeId> out;
  out.reserve(v.size());
  for (auto i : v) out.push_back(static_cast<NodeId>(i));
  return out;
}

}  // namespace detail

inline nlohmann::json trace_event_to_json(const TraceEvent& e) {
  using nlohmann::json;
  json updates = json::array();
  for (const auto& u : e.updated_values) {
    updates.push_back({{"node", static_cast<std::uint32_t>(u.node)}, {"value", u.value}, {"visits", u.visits}});
  }
  json extra = json::array();
  for (const auto& c : e.extra_children) {
    extra.push_back({{"node", static_cast<std::uint32_t>(c.node)},
                     {"action", std::string(to_string(c.action))},
                     {"tokens", c.tokens},
                     {"reward", c.reward}});
  }
  return json{{"query_index", e.query_index},
              {"iteration", e.iteration},
              {"selected_path", detail::ids_to_ints(e.selected_path)},
              {"expanded_from", static_cast<std::uint32_t>(e.expanded_from)},
              {"action", std::string(to_string(e.action))},
              {"new_node", static_cast<std::uint32_t>(e.new_node)},
              {"sampled_tokens", e.sampled_tokens},
              {"reward", e.reward},
              {"revisit", e.revisit},
              {"updated_values", std::move(updates)},
              {"extra_children", std::move(extra)},
              {"retries", e.retries}};
}

inline TraceEvent trace_event_from_json(const nlohmann::json& j) {
  try {
    TraceEvent e;
    e.query_index = j.value("query_index", std::uint64_t{0});
    e.iteration = j.at("iteration").get<std::uint64_t>();
    e.selected_path = detail::ints_to_ids(j.at("selected_path").get<std::vector<std::uint32_t>>());
    e.expanded_from = static_cast<NodeId>(j.at("expanded_from").get<std::uint32_t>());
    e.action = action_from_string(j.at("action").get<std::string>());
    e.new_node = static_cast<NodeId>(j.at("new_node").get<std::uint32_t>());
    e.sampled_tokens = j.at("sampled_tokens").get<TokenSeq>();
    e.reward = j.at("reward").get<double>();
    e.revisit = j.value("revisit", false);
    for (const auto& u : j.at("updated_values")) {
      e.updated_values.push_back(NodeUpdate{static_cast<NodeId>(u.at("node").get<std::uint32_t>()),
                                            u.at("value").get<double>(), u.at("visits").get<std::uint64_t>()});
    }
    for (const auto& c : j.value("extra_children", nlohmann::json::array())) {
      e.extra_children.push_back(ChildRecord{static_cast<NodeId>(c.at("node").get<std::uint32_t>()),
                                             action_from_string(c.at("action").get<std::string>()),
                                             c.at("tokens").get<TokenSeq>(), c.at("reward").get<double>()});
    }
    e.retries = j.value("retries", std::uint64_t{0});
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("malformed trace event: ") + ex.what());
  }
}

inline void write_trace(std::ostream& os, std::span<const TraceEvent> events) {
  os << nlohmann::json{{"schema", kTraceSchema}, {"version", kTraceVersion}}.dump() << '\n';
  for (const auto& e : events) os << trace_event_to_json(e).dump() << '\n';
}

inline void export_trace(std::span<const TraceEvent> events, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open trace file " + path.string() + " for writing");
  write_trace(out, events);
  out.flush();
  if (!out) throw Error("failed writing trace file " + path.string());
}

inline std::vector<TraceEvent> read_trace(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("trace is empty (missing header)");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("malformed trace header: ") + ex.what());
  }
  if (header.value("schema", "") != kTraceSchema) throw InvalidInput("not a gboost trace");
  if (header.value("version", 0) != kTraceVersion) throw InvalidInput("unsupported trace version");
  std::vector<TraceEvent> events;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      events.push_back(trace_event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& ex) {
      throw InvalidInput(std::string("malformed trace line: ") + ex.what());
    }
  }
  return events;
}

inline std::vector<TraceEvent> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trace file " + path.string());
  return read_trace(in);
}

}  // namespace gboost
