#pragma once

// Readers for GSM8K / MATH-500 style JSONL files and a free-text numeric
// answer normalizer. Running these sets needs real model servers and a
// tokenizer; nothing in the test suite depends on them.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gboost/errors.hpp"

namespace gboost {

struct DatasetItem {
  std::string question;
  std::string reference;     // full reference solution or answer text
  std::string final_answer;  // normalized
};

/// Strips whitespace, "$", commas, a trailing period, \boxed{...} and
/// surrounding text so "The answer is $1,234." and "1234" compare equal.
inline std::string normalize_numeric_answer(std::string s) {
  if (auto p = s.rfind("\\boxed{"); p != std::string::npos) {
    const auto start = p + 7;
    int depth = 1;
    std::size_t end = start;
    while (end < s.size() && depth > 0) {
      if (s[end] == '{') ++depth;
      else if (s[end] == '}') --depth;
      if (depth > 0) ++end;
    }
    s = s.substr(start, end - start);
  }
  std::string out;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '$' || c == ',') continue;
    out.push_back(c);
  }
  // Keep the last number when the text still contains words; LaTeX stays verbatim.
  const bool has_alpha = std::any_of(out.begin(), out.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
  if (has_alpha && out.find('\\') == std::string::npos) {
    std::string last, cur;
    for (char c : out) {
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || (c == '-' && cur.empty()) || c == '/') {
        cur.push_back(c);
      } else {
        if (!cur.empty()) last = cur;
        cur.clear();
      }
    }
    if (!cur.empty()) last = cur;
    if (!last.empty()) out = last;
  }
  while (!out.empty() && out.back() == '.') out.pop_back();
  if (out.find('.') != std::string::npos && out.find('/') == std::string::npos) {
    while (!out.empty() && out.back() == '0') out.pop_back();
    if (!out.empty() && out.back() == '.') out.pop_back();
  }
  return out;
}

namespace detail {

template <typename Fn>
std::vector<DatasetItem> read_jsonl(const std::filesystem::path& path, Fn&& convert) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path.string());
  std::vector<DatasetItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      items.push_back(convert(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

}  // namespace detail

/// {"question": ..., "answer": "... #### 42"}
inline DatasetItem gsm8k_item(const nlohmann::json& j) {
  DatasetItem item;
  item.question = j.at("question").get<std::string>();
  item.reference = j.at("answer").get<std::string>();
  const auto p = item.reference.rfind("####");
  item.final_answer = normalize_numeric_answer(p == std::string::npos ? item.reference : item.reference.substr(p + 4));
  return item;
}

/// {"problem": ..., "answer": ..., "solution": ...}
inline DatasetItem math500_item(const nlohmann::json& j) {
  DatasetItem item;
  item.question = j.at("problem").get<std::string>();
  item.reference = j.value("solution", j.at("answer").get<std::string>());
  item.final_answer = normalize_numeric_answer(j.at("answer").get<std::string>());
  return item;
}

inline std::vector<DatasetItem> read_gsm8k_jsonl(const std::filesystem::path& path) {
  return detail::read_jsonl(path, gsm8k_item);
}

inline std::vector<DatasetItem> read_math500_jsonl(const std::filesystem::path& path) {
  return detail::read_jsonl(path, math500_item);
}

}  // namespace gboost
