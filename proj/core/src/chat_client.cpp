// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/chat_client.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace macprune {

namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

UrlParts split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw std::invalid_argument("endpoint url must be http(s)://host/path: " + url);
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

}  // namespace

std::int64_t estimate_tokens(const std::string& text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

nlohmann::ordered_json to_json(const EndpointConfig& c) {
  return {{"provider", c.provider},
          {"url", c.url},
          {"model", c.model},
          {"api_key_env", c.api_key_env},
          {"timeout_s", c.timeout_s},
          {"retries", c.retries},
          {"backoff_s", c.backoff_s},
          {"max_tokens", c.max_tokens},
          {"rate_in_per_million", c.rate_in_per_million},
          {"rate_out_per_million", c.rate_out_per_million}};
}

EndpointConfig endpoint_from_json(const nlohmann::json& doc, EndpointConfig c) {
  c.provider = doc.value("provider", c.provider);
  c.url = doc.value("url", c.url);
  c.model = doc.value("model", c.model);
  c.api_key_env = doc.value("api_key_env", c.api_key_env);
  c.timeout_s = doc.value("timeout_s", c.timeout_s);
  c.retries = doc.value("retries", c.retries);
  c.backoff_s = doc.value("backoff_s", c.backoff_s);
  c.max_tokens = doc.value("max_tokens", c.max_tokens);
  c.rate_in_per_million = doc.value("rate_in_per_million", c.rate_in_per_million);
  c.rate_out_per_million = doc.value("rate_out_per_million", c.rate_out_per_million);
  if (c.provider != "openai" && c.provider != "anthropic") {
    throw std::invalid_argument("unknown provider '" + c.provider + "'");
  }
  return c;
}

nlohmann::json build_request_body(const EndpointConfig& config, const ChatRequest& request) {
  nlohmann::json body;
  body["model"] = request.model.empty() ? config.model : request.model;
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  auto msgs = nlohmann::json::array();
  std::string system;
  for (const auto& m : request.messages) {
    if (config.provider == "anthropic" && m.role == "system") {
      system += m.content;
      continue;
    }
    msgs.push_back({{"role", m.role}, {"content", m.content}});
  }
  if (!system.empty()) body["system"] = system;
  body["messages"] = std::move(msgs);
  return body;
}

ChatResponse parse_response_body(const EndpointConfig& config, const nlohmann::json& body) {
  ChatResponse r;
  try {
    if (config.provider == "anthropic") {
      for (const auto& part : body.at("content")) {
        if (part.value("type", "") == "text") r.content += part.at("text").get<std::string>();
      }
      r.input_tokens = body.at("usage").value("input_tokens", 0);
      r.output_tokens = body.at("usage").value("output_tokens", 0);
    } else {
      r.content = body.at("choices").at(0).at("message").at("content").get<std::string>();
      if (body.contains("usage")) {
        r.input_tokens = body["usage"].value("prompt_tokens", 0);
        r.output_tokens = body["usage"].value("completion_tokens", 0);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw OracleUnavailable(std::string("unexpected response schema: ") + e.what());
  }
  return r;
}

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)) {}

ChatResponse HttpChatClient::complete(const ChatRequest& request) {
  const UrlParts url = split_url(config_.url);
  const char* key = std::getenv(config_.api_key_env.c_str());
  httplib::Headers headers;
  if (key != nullptr) {
    if (config_.provider == "anthropic") {
      headers.emplace("x-api-key", key);
      headers.emplace("anthropic-version", "2023-06-01");
    } else {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const std::string body = build_request_body(config_, request).dump();
  const auto timeout = std::chrono::milliseconds(static_cast<long>(config_.timeout_s * 1000.0));
  double backoff = config_.backoff_s;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(backoff * 1000.0)));
      backoff *= 2.0;
    }
    httplib::Client cli(url.origin);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    auto res = cli.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
      continue;
    }
    auto doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) {
      last_error = "response body is not JSON";
      continue;
    }
    return parse_response_body(config_, doc);
  }
  throw OracleUnavailable("chat endpoint " + config_.url + " unavailable: " + last_error);
}

CannedChatClient::CannedChatClient(std::string directory) : dir_(std::move(directory)) {}

ChatResponse CannedChatClient::complete(const ChatRequest& request) {
  ++calls_;
  char name[32];
  std::snprintf(name, sizeof(name), "response_%03d.txt", calls_);
  const std::string path = dir_ + "/" + name;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OracleUnavailable("no canned response " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  ChatResponse r;
  r.content = ss.str();
  for (const auto& m : request.messages) r.input_tokens += estimate_tokens(m.content);
  r.output_tokens = estimate_tokens(r.content);
  return r;
}

}  // namespace macprune
