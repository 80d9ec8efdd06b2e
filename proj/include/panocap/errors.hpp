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

#ifndef PANOCAP_ERRORS_HPP_
#define PANOCAP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace panocap {

// Error taxonomy mirrors the CLI exit codes: format errors exit 2,
// consistency errors 3, endpoint errors 4.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConsistencyError : public std::runtime_error {
 public:
  explicit ConsistencyError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class EndpointError : public std::runtime_error {
 public:
  enum class Kind { kAuth, kRateLimit, kMalformedReply, kTransport, kBudget };
  EndpointError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace panocap

#endif  // PANOCAP_ERRORS_HPP_
