// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include <json.hpp>

namespace macprune {

// Scans for balanced-brace spans (string-literal aware) and returns the
// first one that parses as a JSON object and satisfies `accept`.
std::optional<nlohmann::json> extract_json_object(
    std::string_view text, const std::function<bool(const nlohmann::json&)>& accept = {});

}  // namespace macprune
