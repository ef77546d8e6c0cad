// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/history_log.hpp"

#include <stdexcept>

namespace macprune {

namespace {

std::optional<MacStatus> parse_mac_status(std::string_view t) {
  if (t == "valid") return MacStatus::kValid;
  if (t == "overshoot") return MacStatus::kOvershoot;
  if (t == "undershoot") return MacStatus::kUndershoot;
  return std::nullopt;
}

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T>& v) {
  if (v) return *v;
  return nullptr;
}

std::optional<double> optional_number(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  return doc[key].get<double>();
}

}  // namespace

std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::kValid:
      return "valid";
    case RecordStatus::kUndershoot:
      return "undershoot";
    case RecordStatus::kOvershoot:
      return "overshoot";
    case RecordStatus::kCollapsed:
      return "collapsed";
  }
  return "unknown";
}

std::optional<RecordStatus> parse_record_status(std::string_view t) {
  for (auto s : {RecordStatus::kValid, RecordStatus::kUndershoot, RecordStatus::kOvershoot, RecordStatus::kCollapsed}) {
    if (to_string(s) == t) return s;
  }
  return std::nullopt;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::kProfiling:
      return "profiling";
    case Phase::kAnalysis:
      return "analysis";
    case Phase::kPruning:
      return "pruning";
    case Phase::kFinetune:
      return "finetune";
    case Phase::kEvaluation:
      return "evaluation";
  }
  return "unknown";
}

nlohmann::ordered_json to_json(const RevisionRecord& r) {
  nlohmann::ordered_json j;
  j["revision"] = r.index;
  j["strategy"] = to_json(r.strategy);
  j["achieved_macs"] = r.achieved_macs;
  j["mac_error_pct"] = r.mac_error_pct;
  j["zero_shot_acc"] = optional_json(r.zero_shot_acc);
  j["inline_ft_acc"] = optional_json(r.inline_ft_acc);
  j["status"] = std::string(to_string(r.status));
  j["mac_status"] = std::string(to_string(r.mac_status));
  j["phase_seconds"] = r.phase_seconds;
  j["corrections"] = r.corrections;
  j["oracle_event"] = r.oracle_event;
  if (!r.origin.empty()) j["origin"] = r.origin;
  j["input_tokens"] = r.input_tokens;
  j["output_tokens"] = r.output_tokens;
  return j;
}

RevisionRecord record_from_json(const nlohmann::json& doc) {
  RevisionRecord r;
  try {
    r.index = doc.at("revision").get<int>();
    r.strategy = strategy_from_json(doc.at("strategy"));
    r.achieved_macs = doc.at("achieved_macs").get<double>();
    r.mac_error_pct = doc.value("mac_error_pct", 0.0);
    r.zero_shot_acc = optional_number(doc, "zero_shot_acc");
    r.inline_ft_acc = optional_number(doc, "inline_ft_acc");
    if (doc.contains("status")) {
      const auto s = parse_record_status(doc["status"].get<std::string>());
      if (!s) throw std::runtime_error("unknown status");
      r.status = *s;
    }
    if (doc.contains("mac_status")) {
      const auto s = parse_mac_status(doc["mac_status"].get<std::string>());
      if (!s) throw std::runtime_error("unknown mac_status");
      r.mac_status = *s;
    }
    if (doc.contains("phase_seconds")) r.phase_seconds = doc["phase_seconds"].get<std::map<std::string, double>>();
    if (doc.contains("corrections")) r.corrections = doc["corrections"].get<std::vector<std::string>>();
    r.oracle_event = doc.value("oracle_event", "");
    r.origin = doc.value("origin", "");
    r.input_tokens = doc.value("input_tokens", std::int64_t{0});
    r.output_tokens = doc.value("output_tokens", std::int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed revision record: ") + e.what());
  }
  return r;
}

HistoryLog::HistoryLog(const std::string& path, bool truncate)
    : path_(path), out_(path, truncate ? std::ios::trunc : std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open history log " + path);
}

void HistoryLog::append(const RevisionRecord& r) {
  out_ << to_json(r).dump() << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("failed writing history log " + path_);
}

std::vector<RevisionRecord> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read history " + path);
  std::vector<RevisionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not valid JSON");
    try {
      out.push_back(record_from_json(doc));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace macprune
