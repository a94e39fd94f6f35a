#pragma once

// Chat-completion client over HTTP. Kept out of semantics.hpp so the rest of
// the pipeline does not pay for the httplib include; only the CLI needs it.
// HTTPS endpoints require building with EDGESIGN_ENABLE_TLS.

#include <stdexcept>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "edgesign/semantics.hpp"

namespace edgesign {

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(LlmConfig config) : config_(std::move(config)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (config_.base_url.rfind("https://", 0) == 0) {
      throw SemanticsError(
          "https endpoint requires a build with EDGESIGN_ENABLE_TLS");
    }
#endif
  }

  std::string complete(const std::string& prompt) override {
    httplib::Client cli(config_.base_url);
    cli.set_read_timeout(config_.timeout_seconds, 0);
    cli.set_connection_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    const nlohmann::json body{
        {"model", config_.model},
        {"temperature", config_.temperature},
        {"messages",
         nlohmann::json::array(
             {nlohmann::json{{"role", "user"}, {"content", prompt}}})}};
    if (config_.debug_log) {
      std::cerr << "[http] POST " << config_.base_url << config_.path << ' '
                << body.dump() << '\n';
    }
    auto res = cli.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
      throw SemanticsError("chat endpoint unreachable: " +
                           httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw SemanticsError("chat endpoint returned status " +
                           std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw SemanticsError(std::string("chat endpoint: bad JSON: ") + e.what());
    }
    try {
      return parsed.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw SemanticsError(std::string("chat endpoint: unexpected shape: ") +
                           e.what());
    }
  }

 private:
  LlmConfig config_;
};

}  // namespace edgesign
