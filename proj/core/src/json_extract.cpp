// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/json_extract.hpp"

namespace macprune {

namespace {

// End (exclusive) of the balanced span opening at text[start] == '{', or npos.
std::size_t balanced_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<nlohmann::json> extract_json_object(std::string_view text,
                                                  const std::function<bool(const nlohmann::json&)>& accept) {
  for (std::size_t i = text.find('{'); i != std::string_view::npos; i = text.find('{', i + 1)) {
    const std::size_t end = balanced_end(text, i);
    if (end == std::string_view::npos) continue;
    auto doc = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    if (accept && !accept(doc)) continue;
    return doc;
  }
  return std::nullopt;
}

}  // namespace macprune
