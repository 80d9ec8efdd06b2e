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

#ifndef PANOCAP_ANNOTATE_HPP_
#define PANOCAP_ANNOTATE_HPP_

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "panocap/errors.hpp"
#include "panocap/text.hpp"

namespace panocap {

// ---------------------------------------------------------------------------
// Prompt templates

inline constexpr const char* kNumInstancesPlaceholder = "<num instances>";
inline constexpr const char* kCategoriesPlaceholder = "<img categories>";

struct PromptTemplate {
  std::string id;
  std::string body;

  void check() const {
    if (body.find(kNumInstancesPlaceholder) == std::string::npos ||
        body.find(kCategoriesPlaceholder) == std::string::npos)
      throw ConfigError("template '" + id +
                        "' must contain both placeholders");
  }
};

// Placeholders substitute literally; category names serialize comma-separated
// in display-id order.
inline std::string build_prompt(const PromptTemplate& tmpl, int n,
                                const std::vector<std::string>& categories) {
  tmpl.check();
  if (n < 1 || categories.size() != static_cast<std::size_t>(n))
    throw ConfigError("instance count and category list length differ");
  std::string cats;
  for (const auto& c : categories) {
    if (!cats.empty()) cats += ", ";
    cats += c;
  }
  std::string out = tmpl.body;
  auto replace_all = [](std::string& s, const std::string& from,
                        const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all(out, kNumInstancesPlaceholder, std::to_string(n));
  replace_all(out, kCategoriesPlaceholder, cats);
  return out;
}

namespace detail {

inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Uniform, rerun-stable choice keyed by (seed, image key).
inline const PromptTemplate& select_template(
    const std::vector<PromptTemplate>& templates, const std::string& image_key,
    std::uint64_t seed) {
  if (templates.empty()) throw ConfigError("no prompt templates configured");
  const std::uint64_t h =
      detail::splitmix64(seed ^ detail::fnv1a64(image_key.data(),
                                                image_key.size()));
  return templates[h % templates.size()];
}

// ---------------------------------------------------------------------------
// Response parsing

struct ObjectEntry {
  int display_id = 0;
  std::string summary;
  std::string description;
};

struct InteractionEntry {
  int first_id = 0;
  int second_id = 0;
  std::string text;
};

struct EntryError {
  std::string code;  // "grouped entry", "malformed entry"
  std::string line;
};

struct ParsedResponse {
  std::vector<ObjectEntry> objects;
  std::vector<InteractionEntry> interactions;
  std::vector<EntryError> entry_errors;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.erase(s.begin());
  while (!s.empty() && is_space(s.back())) s.pop_back();
  return s;
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Display ids that overflow int are malformed, not fatal.
inline std::optional<int> parse_id(const std::string& digits) {
  try {
    return std::stoi(digits);
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
}

inline std::size_t find_ci(const std::string& haystack,
                           const std::string& needle, std::size_t from = 0) {
  const std::string h = lower(haystack);
  return h.find(lower(needle), from);
}

}  // namespace detail

// Matches the mandated reply format: an objects section with
// `<int> '.' <summary> ':' <description>` entries, optionally followed by an
// interactions section with `<int> 'and' <int> ':' <text>` entries. Headers
// are case-insensitive, trailing semicolons tolerated, malformed entries are
// collected without aborting the parse.
inline ParsedResponse parse_response(const std::string& raw) {
  static const std::string kObjectsHeader = "the objects include";
  static const std::string kInteractionsHeader = "the interactions include";

  const std::size_t obj_pos = detail::find_ci(raw, kObjectsHeader);
  if (obj_pos == std::string::npos)
    throw FormatError("reply has no objects section");
  const std::size_t inter_pos =
      detail::find_ci(raw, kInteractionsHeader, obj_pos);

  const std::size_t obj_start = obj_pos + kObjectsHeader.size();
  const std::string objects_text =
      inter_pos == std::string::npos
          ? raw.substr(obj_start)
          : raw.substr(obj_start, inter_pos - obj_start);
  const std::string interactions_text =
      inter_pos == std::string::npos
          ? std::string{}
          : raw.substr(inter_pos + kInteractionsHeader.size());

  static const std::regex object_re(R"(^\s*(\d+)\s*\.\s*([^:]*?)\s*:\s*(.*?)\s*$)");
  static const std::regex grouped_re(R"(^\s*\d+\s*-\s*\d+\s*\..*$)");
  static const std::regex interaction_re(
      R"(^\s*(\d+)\s+and\s+(\d+)\s*:\s*(.*?)\s*$)", std::regex::icase);

  ParsedResponse out;
  auto each_line = [](const std::string& text, auto&& fn) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      std::string line = detail::trim(text.substr(pos, end - pos));
      while (!line.empty() && (line.back() == ';' || line.back() == ':'))
        line = detail::trim(line.substr(0, line.size() - 1));
      if (!line.empty() && line != ":" && line != "'''") fn(line);
      pos = end + 1;
    }
  };

  each_line(objects_text, [&](const std::string& line) {
    std::smatch m;
    if (std::regex_match(line, m, grouped_re)) {
      out.entry_errors.push_back({"grouped entry", line});
      return;
    }
    if (std::regex_match(line, m, object_re)) {
      ObjectEntry entry;
      const auto id = detail::parse_id(m[1].str());
      entry.summary = detail::trim(m[2].str());
      entry.description = detail::trim(m[3].str());
      if (!id || entry.summary.empty() || entry.description.empty()) {
        out.entry_errors.push_back({"malformed entry", line});
        return;
      }
      entry.display_id = *id;
      out.objects.push_back(std::move(entry));
      return;
    }
    out.entry_errors.push_back({"malformed entry", line});
  });

  each_line(interactions_text, [&](const std::string& line) {
    std::smatch m;
    if (std::regex_match(line, m, interaction_re)) {
      InteractionEntry entry;
      const auto first = detail::parse_id(m[1].str());
      const auto second = detail::parse_id(m[2].str());
      entry.text = detail::trim(m[3].str());
      if (first && second && !entry.text.empty()) {
        entry.first_id = *first;
        entry.second_id = *second;
        out.interactions.push_back(std::move(entry));
        return;
      }
    }
    out.entry_errors.push_back({"malformed entry", line});
  });

  return out;
}

// Canonical rendering of a parsed reply; parse_response round-trips it.
inline std::string format_response(const ParsedResponse& parsed) {
  std::string out = "The objects include:\n";
  for (const auto& o : parsed.objects)
    out += std::to_string(o.display_id) + ". " + o.summary + ": " +
           o.description + ";\n";
  if (!parsed.interactions.empty()) {
    out += "The interactions include:\n";
    for (const auto& i : parsed.interactions)
      out += std::to_string(i.first_id) + " and " +
             std::to_string(i.second_id) + ": " + i.text + ";\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hard matching

struct FilterViolation {
  std::string code;  // missing id, duplicate id, unknown id,
                     // category mismatch, grouped entry
  std::string detail;
};

struct FilterVerdict {
  bool accepted = false;
  std::vector<FilterViolation> violations;
};

// Optional synonym table: canonical category -> accepted alternatives.
using SynonymTable = std::map<std::string, std::set<std::string>>;

namespace detail {

inline std::string normalize_category(const std::string& s) {
  return join_tokens(tokenize(s));
}

}  // namespace detail

// Accepts iff every expected display id appears exactly once, no unknown ids
// appear, and each summary agrees with the expected category under lowercase
// token equality (or a configured synonym).
inline FilterVerdict hard_match(const ParsedResponse& parsed,
                                const std::map<int, std::string>& expected,
                                const SynonymTable& synonyms = {}) {
  FilterVerdict verdict;
  auto violate = [&](const std::string& code, const std::string& detail) {
    verdict.violations.push_back({code, detail});
  };

  for (const auto& err : parsed.entry_errors)
    if (err.code == "grouped entry") violate("grouped entry", err.line);

  std::map<int, int> seen;
  for (const auto& obj : parsed.objects) ++seen[obj.display_id];
  for (const auto& [id, category] : expected) {
    auto it = seen.find(id);
    if (it == seen.end()) {
      violate("missing id", "missing id " + std::to_string(id));
    } else if (it->second > 1) {
      violate("duplicate id", "duplicate id " + std::to_string(id));
    }
  }
  for (const auto& [id, count] : seen) {
    if (!expected.count(id))
      violate("unknown id", "unknown id " + std::to_string(id));
  }

  for (const auto& obj : parsed.objects) {
    auto it = expected.find(obj.display_id);
    if (it == expected.end()) continue;
    const std::string want = detail::normalize_category(it->second);
    const std::string got = detail::normalize_category(obj.summary);
    bool ok = want == got;
    if (!ok) {
      auto syn = synonyms.find(want);
      ok = syn != synonyms.end() && syn->second.count(got);
    }
    if (!ok)
      violate("category mismatch",
              "id " + std::to_string(obj.display_id) + ": expected '" +
                  it->second + "', got '" + obj.summary + "'");
  }

  verdict.accepted = verdict.violations.empty();
  return verdict;
}

// ---------------------------------------------------------------------------
// Caption assembly

struct AssembledCaption {
  int display_id = 0;
  std::string caption;
  bool rephrase_fell_back = false;
};

// Base caption is the object description; every interaction mentioning the
// object's display id is appended as an extra clause. When a rephraser is
// given, the concatenation is rewritten into one caption; on failure the
// deterministic concatenation stands.
inline std::vector<AssembledCaption> assemble_captions(
    const ParsedResponse& parsed,
    const std::function<std::string(const std::string&)>* rephrase = nullptr) {
  std::vector<AssembledCaption> out;
  for (const auto& obj : parsed.objects) {
    AssembledCaption entry;
    entry.display_id = obj.display_id;
    std::string caption = obj.description;
    for (const auto& inter : parsed.interactions) {
      if (inter.first_id != obj.display_id &&
          inter.second_id != obj.display_id)
        continue;
      if (!caption.empty() && caption.back() != '.' && caption.back() != '!' &&
          caption.back() != '?')
        caption += '.';
      caption += ' ';
      caption += inter.text;
    }
    if (rephrase && *rephrase) {
      try {
        entry.caption = (*rephrase)(caption);
      } catch (const std::exception&) {
        entry.caption = caption;
        entry.rephrase_fell_back = true;
      }
    } else {
      entry.caption = caption;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

// Two bundled prompt templates; more can be loaded from files.
inline std::vector<PromptTemplate> bundled_templates() {
  const std::string format_block =
      "Your answer should contain details, and follow the following format:\n"
      "'''\n"
      "The objects include:\n"
      "object_id. summary of the object: description of the object (e.g., 1. "
      "Person: the person is wearing a pink jacket, black pants, and a pink "
      "beanie. They are holding ski poles and are skiing on a snowy "
      "mountain.);\n"
      "object_id. summary of the object: description of the object;\n"
      "The interactions include:\n"
      "object_id and object_id: interaction between them (e.g., 1 and 2: the "
      "person is skiing on the mountain using the skis.);\n"
      "object_id and object_id: interaction between them;\n"
      "'''\n";
  const std::string closing_block =
      "Please pay attention to the categories of these objects and don't "
      "change them. Also, keep in mind that you should not group the objects, "
      "e.g., 2-5. people: xxx, be sure to describe each object separately "
      "(one by one). Please start your answer:";
  const std::string detail_block =
      "Please describe the appearance of different visual objects and the "
      "interaction between them. Your description should be as detailed as "
      "possible, including details like color, shape, texture, emotion, "
      "motion, intention, object counts, the position of the objects, "
      "relative position between the objects.\n";
  const std::string uniqueness_block =
      "Note that I want to use your description to create a grounding "
      "dataset, therefore, your descriptions for different objects should be "
      "unique, i.e., if multiple objects of the same categories appear in "
      "the same image, your descriptions should be detailed enough to "
      "differentiate them.\n";

  PromptTemplate first;
  first.id = "prompt1";
  first.body =
      "You are an AI visual assistant that can analyze a single image. In "
      "the given image, I label <num instances> objects (or background) by "
      "marking each with a bright numeric ID at the center and its boundary. "
      "I could also tell you their categories: <img categories>.\n" +
      uniqueness_block + detail_block + format_block + closing_block;

  PromptTemplate second;
  second.id = "prompt2";
  second.body =
      "I have labeled <num instances> objects (or background) in this image "
      "and each with a bright numeric ID at the center and its boundary. "
      "Their categories are: <img categories>.\n" +
      detail_block + uniqueness_block + format_block + closing_block;

  return {first, second};
}

}  // namespace panocap

#endif  // PANOCAP_ANNOTATE_HPP_
