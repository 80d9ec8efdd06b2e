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

#ifndef PANOCAP_STATS_HPP_
#define PANOCAP_STATS_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "panocap/errors.hpp"
#include "panocap/text.hpp"

namespace panocap {

enum class PosClass { kNoun, kVerb, kAdjective, kAdverb, kOther };

inline const char* pos_name(PosClass pos) {
  switch (pos) {
    case PosClass::kNoun: return "noun";
    case PosClass::kVerb: return "verb";
    case PosClass::kAdjective: return "adjective";
    case PosClass::kAdverb: return "adverb";
    default: return "other";
  }
}

// Deterministic lexicon + suffix-rule tagger. Lexicon wins; unknown tokens
// fall through suffix rules and default to noun. Deliberately simple: POS
// parity with any particular statistical tagger is advisory, not contractual.
class PosTagger {
 public:
  PosTagger() = default;
  explicit PosTagger(std::unordered_map<std::string, PosClass> lexicon)
      : lexicon_(std::move(lexicon)) {}

  PosClass tag(const std::string& token) const {
    auto it = lexicon_.find(token);
    if (it != lexicon_.end()) return it->second;
    if (ends_with(token, "ly") && token.size() > 3) return PosClass::kAdverb;
    for (const char* suffix : {"ous", "ful", "ish", "ive", "able", "ible",
                               "less", "est"})
      if (ends_with(token, suffix) && token.size() > std::strlen(suffix) + 2)
        return PosClass::kAdjective;
    for (const char* suffix : {"ing", "ed"})
      if (ends_with(token, suffix) && token.size() > std::strlen(suffix) + 2)
        return PosClass::kVerb;
    return PosClass::kNoun;
  }

 private:
  static bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  std::unordered_map<std::string, PosClass> lexicon_;
};

inline PosTagger bundled_tagger() {
  std::unordered_map<std::string, PosClass> lex;
  auto add = [&](PosClass pos, std::initializer_list<const char*> words) {
    for (const char* w : words) lex.emplace(w, pos);
  };
  add(PosClass::kOther,
      {"a",    "an",   "the",  "and",  "or",    "but",  "of",   "in",
       "on",   "at",   "to",   "from", "with",  "by",   "for",  "as",
       "into", "onto", "over", "under", "above", "below", "near", "beside",
       "behind", "between", "through", "while", "this", "that", "these",
       "those", "it",  "its",  "his",  "her",   "their", "there", "he",
       "she",  "they", "them", "who",  "which", "what", "not",  "no",
       "up",   "down", "out",  "off",  "so",    "than", "then", "also",
       "each", "both", "some", "any",  "one",   "two",  "three", "next"});
  add(PosClass::kVerb,
      {"is",   "are",  "was",  "were", "be",    "been", "being", "has",
       "have", "had",  "do",   "does", "did",   "can",  "could", "will",
       "would", "wear", "wears", "hold", "holds", "stand", "stands", "sit",
       "sits", "ride",  "rides", "walk", "walks", "run",  "runs", "look",
       "looks", "appear", "appears", "seem", "seems", "lie",  "lies",
       "rest",  "rests", "face",  "faces", "ski",  "skis", "lean", "leans"});
  add(PosClass::kAdjective,
      {"red",    "orange", "yellow",  "green",  "blue",   "purple", "pink",
       "brown",  "black",  "white",   "gray",   "grey",   "beige",  "tan",
       "golden", "silver", "dark",    "light",  "bright", "pale",   "big",
       "large",  "huge",   "small",   "tiny",   "tall",   "short",  "long",
       "wide",   "narrow", "round",   "square", "flat",   "thick",  "thin",
       "wooden", "metal",  "plastic", "glass",  "stone",  "brick",  "leather",
       "young",  "old",    "new",     "clean",  "dirty",  "wet",    "dry",
       "open",   "closed", "empty",   "full",   "left",   "right",  "upper",
       "lower",  "front",  "back",    "middle", "several", "many",  "few"});
  add(PosClass::kAdverb,
      {"very", "quite", "too", "well", "almost", "here", "now", "often",
       "just", "still", "away", "together", "partially", "slightly"});
  return PosTagger(std::move(lex));
}

// Lexicon file: JSON object mapping POS class name to a word array.
inline PosTagger load_tagger(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tagger lexicon " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid tagger lexicon: " + std::string(e.what()));
  }
  static const std::map<std::string, PosClass> kNames{
      {"noun", PosClass::kNoun},
      {"verb", PosClass::kVerb},
      {"adjective", PosClass::kAdjective},
      {"adverb", PosClass::kAdverb},
      {"other", PosClass::kOther}};
  std::unordered_map<std::string, PosClass> lex;
  for (const auto& [name, words] : j.items()) {
    auto it = kNames.find(name);
    if (it == kNames.end())
      throw FormatError("unknown POS class in lexicon: " + name);
    for (const auto& w : words) lex[w.get<std::string>()] = it->second;
  }
  return PosTagger(std::move(lex));
}

// Colors, sizes, shapes, materials and textures that count as attributes even
// when the tagger calls them something else.
inline const std::unordered_set<std::string>& attribute_lexicon() {
  static const std::unordered_set<std::string> kLexicon{
      "red",     "orange",  "yellow", "green",   "blue",    "purple",
      "pink",    "brown",   "black",  "white",   "gray",    "grey",
      "beige",   "tan",     "golden", "silver",  "maroon",  "navy",
      "teal",    "cream",   "big",    "large",   "huge",    "small",
      "tiny",    "tall",    "short",  "long",    "wide",    "narrow",
      "thick",   "thin",    "round",  "square",  "oval",    "rectangular",
      "circular", "curved", "flat",   "pointed", "wooden",  "metal",
      "metallic", "plastic", "glass", "stone",   "brick",   "leather",
      "ceramic", "concrete", "fabric", "woolen", "cotton",  "striped",
      "checkered", "plaid", "floral", "dotted",  "smooth",  "rough",
      "shiny",   "glossy",  "matte",  "furry",   "fluffy",  "transparent"};
  return kLexicon;
}

struct CaptionStats {
  std::size_t characters = 0;
  std::size_t words = 0;
  std::size_t sentences = 0;
  std::size_t nouns = 0;
  std::size_t adjectives = 0;
  std::size_t adverbs = 0;
  std::size_t verbs = 0;
  std::size_t attributes = 0;
};

namespace detail {

inline std::string trim_outer(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Words that a trailing period usually abbreviates rather than terminates.
inline bool is_abbreviation(const std::string& word) {
  static const std::unordered_set<std::string> kGuard{
      "mr", "mrs", "ms", "dr", "st", "no", "etc", "vs", "fig", "eg", "ie",
      "e.g", "i.e"};
  if (word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0])))
    return true;
  std::string lower = word;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return kGuard.count(lower) > 0;
}

inline std::size_t count_sentences(const std::string& trimmed) {
  if (trimmed.empty()) return 0;
  std::size_t sentences = 0;
  bool span_has_content = false;
  std::string current_word;
  for (std::size_t i = 0; i < trimmed.size(); ++i) {
    const char c = trimmed[i];
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.') {
      if (c != '.') {
        current_word.push_back(c);
        span_has_content = true;
        continue;
      }
    } else {
      current_word.clear();
    }
    if (c == '.' || c == '!' || c == '?') {
      if (c == '.' && is_abbreviation(current_word)) {
        current_word.push_back(c);
        continue;
      }
      if (span_has_content) {
        ++sentences;
        span_has_content = false;
      }
      current_word.clear();
    }
  }
  if (span_has_content) ++sentences;
  return std::max<std::size_t>(sentences, 1);
}

}  // namespace detail

inline CaptionStats caption_stats(const std::string& caption,
                                  const PosTagger& tagger) {
  CaptionStats stats;
  const std::string trimmed = detail::trim_outer(caption);
  if (trimmed.empty()) return stats;
  stats.characters = trimmed.size();
  stats.sentences = detail::count_sentences(trimmed);
  const std::vector<std::string> tokens = tokenize(trimmed);
  stats.words = tokens.size();
  for (const auto& token : tokens) {
    const PosClass pos = tagger.tag(token);
    const bool lexical_attribute = attribute_lexicon().count(token) > 0;
    switch (pos) {
      case PosClass::kNoun: ++stats.nouns; break;
      case PosClass::kVerb: ++stats.verbs; break;
      case PosClass::kAdjective: ++stats.adjectives; break;
      case PosClass::kAdverb: ++stats.adverbs; break;
      default: break;
    }
    if (pos == PosClass::kAdjective || lexical_attribute) ++stats.attributes;
  }
  return stats;
}

struct WordCount {
  std::string word;
  std::size_t count = 0;
};

struct CorpusReport {
  std::size_t images = 0;
  std::size_t captions = 0;
  double captions_per_image = 0.0;
  double mean_characters = 0.0;
  double mean_words = 0.0;
  double mean_sentences = 0.0;
  double mean_nouns = 0.0;
  double mean_adjectives = 0.0;
  double mean_adverbs = 0.0;
  double mean_verbs = 0.0;
  double mean_attributes = 0.0;
  double multi_attribute_share = 0.0;  // captions with > 1 attribute
  // Bin i covers log10(words) in [i*kLogBinWidth, (i+1)*kLogBinWidth).
  std::map<int, std::size_t> log_word_histogram;
  std::map<std::size_t, std::size_t> attribute_histogram;
  std::map<std::string, std::vector<WordCount>> top_words;  // keyed by POS
};

inline constexpr double kLogBinWidth = 0.1;

// Captions grouped per image; the grouping only feeds captions_per_image.
inline CorpusReport corpus_report(
    const std::vector<std::vector<std::string>>& captions_by_image,
    const PosTagger& tagger, std::size_t top_k = 10) {
  CorpusReport report;
  report.images = captions_by_image.size();
  std::map<std::string, std::map<std::string, std::size_t>> word_tallies;
  double sum_chars = 0, sum_words = 0, sum_sentences = 0;
  double sum_nouns = 0, sum_adj = 0, sum_adv = 0, sum_verbs = 0, sum_attr = 0;
  std::size_t multi_attribute = 0;
  for (const auto& image_captions : captions_by_image) {
    for (const auto& caption : image_captions) {
      const CaptionStats s = caption_stats(caption, tagger);
      ++report.captions;
      sum_chars += static_cast<double>(s.characters);
      sum_words += static_cast<double>(s.words);
      sum_sentences += static_cast<double>(s.sentences);
      sum_nouns += static_cast<double>(s.nouns);
      sum_adj += static_cast<double>(s.adjectives);
      sum_adv += static_cast<double>(s.adverbs);
      sum_verbs += static_cast<double>(s.verbs);
      sum_attr += static_cast<double>(s.attributes);
      if (s.attributes > 1) ++multi_attribute;
      const int bin =
          s.words == 0
              ? 0
              : static_cast<int>(std::floor(
                    std::log10(static_cast<double>(s.words)) / kLogBinWidth));
      ++report.log_word_histogram[bin];
      ++report.attribute_histogram[s.attributes];
      for (const auto& token : tokenize(caption))
        ++word_tallies[pos_name(tagger.tag(token))][token];
    }
  }
  if (report.captions == 0) throw ConsistencyError("empty caption corpus");
  const double n = static_cast<double>(report.captions);
  report.captions_per_image =
      report.images ? n / static_cast<double>(report.images) : 0.0;
  report.mean_characters = sum_chars / n;
  report.mean_words = sum_words / n;
  report.mean_sentences = sum_sentences / n;
  report.mean_nouns = sum_nouns / n;
  report.mean_adjectives = sum_adj / n;
  report.mean_adverbs = sum_adv / n;
  report.mean_verbs = sum_verbs / n;
  report.mean_attributes = sum_attr / n;
  report.multi_attribute_share = static_cast<double>(multi_attribute) / n;
  for (const auto& [pos, tally] : word_tallies) {
    std::vector<WordCount> ranked;
    for (const auto& [word, count] : tally) ranked.push_back({word, count});
    std::sort(ranked.begin(), ranked.end(),
              [](const WordCount& a, const WordCount& b) {
                if (a.count != b.count) return a.count > b.count;
                return a.word < b.word;
              });
    if (ranked.size() > top_k) ranked.resize(top_k);
    report.top_words[pos] = std::move(ranked);
  }
  return report;
}

// Deterministic CSV emitters; rendering is left to external tools.
inline void emit_plot_data(const CorpusReport& report,
                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (out_dir / name).string());
    return out;
  };
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  {
    auto out = open("summary.csv");
    out << "metric,value\n";
    out << "images," << report.images << "\n";
    out << "captions," << report.captions << "\n";
    out << "captions_per_image," << fmt(report.captions_per_image) << "\n";
    out << "mean_characters," << fmt(report.mean_characters) << "\n";
    out << "mean_words," << fmt(report.mean_words) << "\n";
    out << "mean_sentences," << fmt(report.mean_sentences) << "\n";
    out << "mean_nouns," << fmt(report.mean_nouns) << "\n";
    out << "mean_adjectives," << fmt(report.mean_adjectives) << "\n";
    out << "mean_adverbs," << fmt(report.mean_adverbs) << "\n";
    out << "mean_verbs," << fmt(report.mean_verbs) << "\n";
    out << "mean_attributes," << fmt(report.mean_attributes) << "\n";
    out << "multi_attribute_share," << fmt(report.multi_attribute_share)
        << "\n";
  }
  {
    auto out = open("length_hist.csv");
    out << "log10_words_lo,log10_words_hi,captions\n";
    for (const auto& [bin, count] : report.log_word_histogram)
      out << fmt(bin * kLogBinWidth) << "," << fmt((bin + 1) * kLogBinWidth)
          << "," << count << "\n";
  }
  {
    auto out = open("attribute_hist.csv");
    out << "attributes,captions\n";
    for (const auto& [attrs, count] : report.attribute_histogram)
      out << attrs << "," << count << "\n";
  }
  {
    auto out = open("top_words.csv");
    out << "pos,word,count\n";
    for (const auto& [pos, words] : report.top_words)
      for (const auto& wc : words)
        out << pos << "," << wc.word << "," << wc.count << "\n";
  }
}

}  // namespace panocap

#endif  // PANOCAP_STATS_HPP_
