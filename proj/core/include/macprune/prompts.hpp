// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace macprune {

enum class PromptTemplate { kProfiling, kMaster, kAnalysisCnn, kAnalysisVit };

std::string_view to_string(PromptTemplate t);
std::optional<PromptTemplate> parse_prompt_template(std::string_view text);

// Raw template text; placeholders are {lower_snake_identifiers}.
std::string_view template_text(PromptTemplate t);

// Distinct placeholder names in order of first appearance.
std::vector<std::string> placeholders(PromptTemplate t);
std::vector<std::string> placeholders_in(std::string_view text);

class MissingPlaceholder : public std::runtime_error {
 public:
  explicit MissingPlaceholder(const std::string& field)
      : std::runtime_error("no value for prompt placeholder '" + field + "'"), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

using PromptContext = std::map<std::string, std::string>;

// Substitutes every placeholder; throws MissingPlaceholder on the first unset one.
std::string render_text(std::string_view text, const PromptContext& context);
std::string render_prompt(PromptTemplate t, const PromptContext& context);

}  // namespace macprune
