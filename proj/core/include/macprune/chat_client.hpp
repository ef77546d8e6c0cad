// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Chat-completion transport used by the LLM oracle.

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace macprune {

struct ChatMessage {
  std::string role;  // "system", "user", "assistant"
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct ChatResponse {
  std::string content;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

// Transport failure after all retries, or no response available.
class OracleUnavailable : public std::runtime_error {
 public:
  explicit OracleUnavailable(const std::string& what) : std::runtime_error(what) {}
};

struct EndpointConfig {
  // "openai" (chat/completions schema) or "anthropic" (messages schema).
  std::string provider = "openai";
  std::string url = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "MACPRUNE_API_KEY";
  double timeout_s = 60.0;
  int retries = 2;
  double backoff_s = 1.0;  // doubled after every failed attempt
  int max_tokens = 1024;
  double rate_in_per_million = 3.0;
  double rate_out_per_million = 15.0;
};

nlohmann::ordered_json to_json(const EndpointConfig& c);
EndpointConfig endpoint_from_json(const nlohmann::json& doc, EndpointConfig base = {});

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string provider() const = 0;
};

// Request body in the provider's schema; exposed for tests.
nlohmann::json build_request_body(const EndpointConfig& config, const ChatRequest& request);
// Extracts text and usage from a provider response body.
ChatResponse parse_response_body(const EndpointConfig& config, const nlohmann::json& body);

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(EndpointConfig config);
  ChatResponse complete(const ChatRequest& request) override;
  std::string provider() const override { return config_.provider; }

 private:
  EndpointConfig config_;
};

// Offline client: the n-th call (1-based) returns the text of
// `<dir>/response_<nnn>.txt` (zero-padded to 3 digits). Token counts are
// estimated as ceil(characters / 4).
class CannedChatClient : public ChatClient {
 public:
  explicit CannedChatClient(std::string directory);
  ChatResponse complete(const ChatRequest& request) override;
  std::string provider() const override { return "canned"; }
  int calls() const { return calls_; }

 private:
  std::string dir_;
  int calls_ = 0;
};

std::int64_t estimate_tokens(const std::string& text);

}  // namespace macprune
