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

#ifndef PANOCAP_LIVE_TRANSPORT_HPP_
#define PANOCAP_LIVE_TRANSPORT_HPP_

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "panocap/client.hpp"

namespace panocap {

// Speaks the OpenAI-style chat completion wire format with the marked image
// inlined as a data URL.
class LiveTransport : public Transport {
 public:
  explicit LiveTransport(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw ConfigError("endpoint base_url missing");
    const char* token = std::getenv(cfg_.auth_env.c_str());
    token_ = token ? token : "";
  }

  TransportResult post(const LmmRequest& request) override {
    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(cfg_.timeout_s, 0);
    client.set_read_timeout(cfg_.timeout_s, 0);
    httplib::Headers headers;
    if (!token_.empty())
      headers.emplace("Authorization", "Bearer " + token_);

    nlohmann::json body{
        {"model", request.model},
        {"messages",
         nlohmann::json::array(
             {{{"role", "user"},
               {"content",
                nlohmann::json::array(
                    {{{"type", "text"}, {"text", request.prompt}},
                     {{"type", "image_url"},
                      {"image_url",
                       {{"url", "data:image/png;base64," +
                                    detail::base64_encode(
                                        request.image_png)}}}}})}}})}};
    const auto res =
        client.Post(cfg_.path, headers, body.dump(), "application/json");
    if (!res) return {-1, httplib::to_string(res.error())};
    return {res->status, res->body};
  }

 private:
  EndpointConfig cfg_;
  std::string token_;
};

}  // namespace panocap

#endif  // PANOCAP_LIVE_TRANSPORT_HPP_
