// Copyright 2026 The Panocap Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PANOCAP_CLIENT_HPP_
#define PANOCAP_CLIENT_HPP_

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "panocap/annotate.hpp"
#include "panocap/errors.hpp"

namespace panocap {

struct EndpointConfig {
  std::string base_url;                 // e.g. https://api.example.com
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string auth_env = "PANOCAP_API_TOKEN";  // secrets only via env
  int timeout_s = 60;
  int max_retries = 3;
  int retry_backoff_ms = 500;
  int request_budget = 0;  // 0 = unlimited live calls per run
};

inline EndpointConfig load_endpoint_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open endpoint config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid endpoint config: " + std::string(e.what()));
  }
  EndpointConfig cfg;
  cfg.base_url = j.at("base_url").get<std::string>();
  cfg.path = j.value("path", cfg.path);
  cfg.model = j.value("model", "");
  cfg.auth_env = j.value("auth_env", cfg.auth_env);
  cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
  cfg.max_retries = j.value("max_retries", cfg.max_retries);
  cfg.retry_backoff_ms = j.value("retry_backoff_ms", cfg.retry_backoff_ms);
  cfg.request_budget = j.value("request_budget", cfg.request_budget);
  return cfg;
}

struct LmmRequest {
  std::string model;
  std::string prompt;
  std::vector<std::uint8_t> image_png;
};

// Request fingerprint doubles as the idempotency key for replay and resume.
inline std::string request_fingerprint(const LmmRequest& req) {
  std::uint64_t h = detail::fnv1a64(req.model.data(), req.model.size());
  h = detail::fnv1a64(req.prompt.data(), req.prompt.size(), h);
  h = detail::fnv1a64(req.image_png.data(), req.image_png.size(), h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct LmmReply {
  std::string text;
  nlohmann::json usage = nlohmann::json::object();
  bool replayed = false;
  int retries = 0;
};

struct TransportResult {
  int status = 0;  // HTTP status; <= 0 means a transport-level failure
  std::string body;
};

// Abstract wire layer so live HTTP, cassette replay and in-process fakes all
// share the retry and parsing logic.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult post(const LmmRequest& request) = 0;
};

namespace detail {

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < data.size(); i += 3) {
    std::uint32_t v = data[i] << 16;
    if (i + 1 < data.size()) v |= data[i + 1] << 8;
    if (i + 2 < data.size()) v |= data[i + 2];
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < data.size() ? alphabet[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < data.size() ? alphabet[v & 63] : '=');
  }
  return out;
}

}  // namespace detail

// Retries transient failures (5xx, 429, transport errors) with exponential
// backoff; auth failures and malformed reply envelopes are terminal.
inline LmmReply call_lmm(Transport& transport, const EndpointConfig& cfg,
                         const LmmRequest& request) {
  int retries = 0;
  for (int attempt = 0;; ++attempt) {
    const TransportResult result = transport.post(request);
    if (result.status == 200) {
      try {
        const nlohmann::json j = nlohmann::json::parse(result.body);
        LmmReply reply;
        reply.text =
            j.at("choices").at(0).at("message").at("content").get<std::string>();
        reply.usage = j.value("usage", nlohmann::json::object());
        reply.retries = retries;
        return reply;
      } catch (const nlohmann::json::exception& e) {
        throw EndpointError(EndpointError::Kind::kMalformedReply,
                            "malformed reply envelope: " +
                                std::string(e.what()));
      }
    }
    if (result.status == 401 || result.status == 403)
      throw EndpointError(EndpointError::Kind::kAuth,
                          "authentication failed (" +
                              std::to_string(result.status) + ")");
    const bool transient =
        result.status == 429 || result.status >= 500 || result.status <= 0;
    if (!transient)
      throw EndpointError(EndpointError::Kind::kTransport,
                          "endpoint error " + std::to_string(result.status) +
                              ": " + result.body);
    if (attempt >= cfg.max_retries) {
      if (result.status == 429)
        throw EndpointError(EndpointError::Kind::kRateLimit,
                            "rate limit persisted after " +
                                std::to_string(retries) + " retries");
      throw EndpointError(EndpointError::Kind::kTransport,
                          "transient failure persisted after " +
                              std::to_string(retries) + " retries");
    }
    ++retries;
    if (cfg.retry_backoff_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(
          cfg.retry_backoff_ms << std::min(attempt, 6)));
  }
}

// Append-only fingerprint -> reply store backing both replay cassettes and
// the pipeline's resume log. Format: one JSON object per line.
class ReplyStore {
 public:
  ReplyStore() = default;

  static ReplyStore open(const std::filesystem::path& path,
                         bool must_exist = false) {
    ReplyStore store;
    store.path_ = path;
    std::ifstream in(path);
    if (!in) {
      if (must_exist)
        throw IoError("cannot open cassette " + path.string());
      return store;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      try {
        const nlohmann::json j = nlohmann::json::parse(line);
        store.entries_[j.at("fingerprint").get<std::string>()] =
            j.at("reply").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": bad cassette line: " + e.what());
      }
    }
    return store;
  }

  std::optional<std::string> lookup(const std::string& fingerprint) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    auto it = entries_.find(fingerprint);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void record(const std::string& fingerprint, const std::string& reply,
              const nlohmann::json& meta = nlohmann::json::object()) {
    std::lock_guard<std::mutex> lock(*mutex_);
    if (entries_.count(fingerprint)) return;
    entries_[fingerprint] = reply;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to " + path_.string());
    nlohmann::json j{{"fingerprint", fingerprint}, {"reply", reply}};
    if (!meta.empty()) j["meta"] = meta;
    out << j.dump() << "\n";
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(*mutex_);
    return entries_.size();
  }

 private:
  std::filesystem::path path_;
  std::unordered_map<std::string, std::string> entries_;
  // Behind a pointer so the store stays movable.
  mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

// Serves recorded replies only; a cassette miss is a transport failure that
// surfaces before any live call could be attempted.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const ReplyStore* store) : store_(store) {}

  TransportResult post(const LmmRequest& request) override {
    const auto reply = store_->lookup(request_fingerprint(request));
    if (!reply)
      return {404, "cassette miss for " + request_fingerprint(request)};
    nlohmann::json j{
        {"choices",
         nlohmann::json::array(
             {{{"message", {{"role", "assistant"}, {"content", *reply}}}}})},
        {"usage", nlohmann::json::object()}};
    return {200, j.dump()};
  }

 private:
  const ReplyStore* store_;
};

}  // namespace panocap

#endif  // PANOCAP_CLIENT_HPP_
