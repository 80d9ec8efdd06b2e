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

#ifndef PANOCAP_TEXT_HPP_
#define PANOCAP_TEXT_HPP_

#include <cctype>
#include <string>
#include <unordered_map>
#include <vector>

namespace panocap {

using TokenSequence = std::vector<std::string>;

// Lowercases and keeps maximal alphanumeric runs; apostrophes survive inside
// a word ("person's" stays one token), all other punctuation is dropped.
inline TokenSequence tokenize(const std::string& text) {
  TokenSequence tokens;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.front() == '\'') cur.erase(cur.begin());
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    if (!cur.empty()) tokens.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'' && !cur.empty()) {
      cur.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

inline std::string join_tokens(const TokenSequence& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

// N-gram multisets for n = 1..4, keyed by tokens joined with '\x1f'.
struct NgramProfile {
  static constexpr int kMaxN = 4;
  std::unordered_map<std::string, int> counts[kMaxN];
  std::size_t length = 0;  // token count

  static NgramProfile from_tokens(const TokenSequence& tokens) {
    NgramProfile p;
    p.length = tokens.size();
    for (int n = 1; n <= kMaxN; ++n) {
      for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int k = 1; k < n; ++k) {
          key.push_back('\x1f');
          key += tokens[i + k];
        }
        ++p.counts[n - 1][key];
      }
    }
    return p;
  }
};

}  // namespace panocap

#endif  // PANOCAP_TEXT_HPP_
