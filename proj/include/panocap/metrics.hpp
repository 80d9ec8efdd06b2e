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

#ifndef PANOCAP_METRICS_HPP_
#define PANOCAP_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "panocap/errors.hpp"
#include "panocap/stem.hpp"
#include "panocap/text.hpp"

namespace panocap {

// ---------------------------------------------------------------------------
// BLEU@4

struct BleuAccumulator {
  std::uint64_t hits[4] = {0, 0, 0, 0};
  std::uint64_t totals[4] = {0, 0, 0, 0};
  std::uint64_t candidate_len = 0;
  std::uint64_t reference_len = 0;

  void add(const TokenSequence& candidate,
           const std::vector<TokenSequence>& references) {
    const NgramProfile cand = NgramProfile::from_tokens(candidate);
    std::vector<NgramProfile> refs;
    refs.reserve(references.size());
    for (const auto& r : references) refs.push_back(NgramProfile::from_tokens(r));

    for (int n = 0; n < 4; ++n) {
      for (const auto& [ngram, count] : cand.counts[n]) {
        int best = 0;
        for (const auto& r : refs) {
          auto it = r.counts[n].find(ngram);
          if (it != r.counts[n].end()) best = std::max(best, it->second);
        }
        hits[n] += std::min(count, best);
        totals[n] += count;
      }
    }
    candidate_len += candidate.size();
    // Closest reference length; ties resolved toward the shorter reference.
    std::uint64_t best_ref = 0;
    std::uint64_t best_diff = UINT64_MAX;
    for (const auto& r : references) {
      const std::uint64_t diff =
          r.size() > candidate.size() ? r.size() - candidate.size()
                                      : candidate.size() - r.size();
      if (diff < best_diff || (diff == best_diff && r.size() < best_ref)) {
        best_diff = diff;
        best_ref = r.size();
      }
    }
    reference_len += best_ref;
  }

  // Unsmoothed by default: any zero n-gram precision zeroes the score.
  double score(std::optional<double> smoothing_epsilon = std::nullopt) const {
    if (candidate_len == 0) return 0.0;
    double log_sum = 0.0;
    for (int n = 0; n < 4; ++n) {
      double p;
      if (smoothing_epsilon) {
        p = (static_cast<double>(hits[n]) + *smoothing_epsilon) /
            (static_cast<double>(totals[n]) + *smoothing_epsilon);
      } else {
        if (hits[n] == 0 || totals[n] == 0) return 0.0;
        p = static_cast<double>(hits[n]) / static_cast<double>(totals[n]);
      }
      log_sum += std::log(p);
    }
    const double bp =
        candidate_len >= reference_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(reference_len) /
                                 static_cast<double>(candidate_len));
    return bp * std::exp(log_sum / 4.0);
  }
};

inline double bleu4(const TokenSequence& candidate,
                    const std::vector<TokenSequence>& references,
                    std::optional<double> smoothing_epsilon = std::nullopt) {
  if (references.empty()) throw ConfigError("bleu4 requires a reference");
  BleuAccumulator acc;
  acc.add(candidate, references);
  return acc.score(smoothing_epsilon);
}

// ---------------------------------------------------------------------------
// ROUGE-L

inline std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// LCS F-measure with recall weight beta = 1.2, max over references.
inline double rouge_l(const TokenSequence& candidate,
                      const std::vector<TokenSequence>& references,
                      double beta = 1.2) {
  if (references.empty()) throw ConfigError("rouge_l requires a reference");
  if (candidate.empty()) return 0.0;
  double best = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const double lcs = static_cast<double>(lcs_length(candidate, ref));
    if (lcs == 0.0) continue;
    const double prec = lcs / candidate.size();
    const double rec = lcs / ref.size();
    const double f = (1.0 + beta * beta) * prec * rec /
                     (rec + beta * beta * prec);
    best = std::max(best, f);
  }
  return best;
}

// ---------------------------------------------------------------------------
// METEOR (exact + stem stages)

struct MeteorParams {
  double alpha = 0.9;   // precision weight in the harmonic mean
  double gamma = 0.5;   // fragmentation penalty weight
  double beta = 3.0;    // fragmentation penalty exponent
};

namespace detail {

struct MeteorAlignment {
  // matched[i] = reference position matched to candidate position i, or -1.
  std::vector<int> matched;
  int match_count = 0;
  int chunk_count = 0;
};

// Staged alignment: exact tokens first, then Porter stems on the leftovers.
// Within a stage candidate positions are visited left to right; a position
// takes the reference slot continuing the previous match when possible,
// otherwise the lowest-index free slot. This keeps the alignment
// deterministic without a global chunk-minimization search.
inline MeteorAlignment meteor_align(const TokenSequence& cand,
                                    const TokenSequence& ref,
                                    const PorterStemmer& stemmer) {
  MeteorAlignment out;
  out.matched.assign(cand.size(), -1);
  std::vector<char> ref_used(ref.size(), 0);

  auto run_stage = [&](const std::vector<std::string>& ckeys,
                       const std::vector<std::string>& rkeys) {
    int prev = -2;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (out.matched[i] != -1) continue;
      int pick = -1;
      if (prev + 1 >= 0 && prev + 1 < static_cast<int>(ref.size()) &&
          !ref_used[prev + 1] && rkeys[prev + 1] == ckeys[i]) {
        pick = prev + 1;
      } else {
        for (std::size_t j = 0; j < ref.size(); ++j) {
          if (!ref_used[j] && rkeys[j] == ckeys[i]) {
            pick = static_cast<int>(j);
            break;
          }
        }
      }
      if (pick != -1) {
        out.matched[i] = pick;
        ref_used[pick] = 1;
        prev = pick;
      }
    }
  };

  run_stage(cand, ref);

  std::vector<std::string> cstems(cand.size()), rstems(ref.size());
  for (std::size_t i = 0; i < cand.size(); ++i) cstems[i] = stemmer.stem(cand[i]);
  for (std::size_t j = 0; j < ref.size(); ++j) rstems[j] = stemmer.stem(ref[j]);
  run_stage(cstems, rstems);

  int prev_ref = -2;
  bool in_chunk = false;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (out.matched[i] == -1) {
      in_chunk = false;
      continue;
    }
    ++out.match_count;
    if (!in_chunk || out.matched[i] != prev_ref + 1) ++out.chunk_count;
    in_chunk = true;
    prev_ref = out.matched[i];
  }
  return out;
}

}  // namespace detail

inline double meteor(const TokenSequence& candidate,
                     const std::vector<TokenSequence>& references,
                     const MeteorParams& params = {}) {
  if (references.empty()) throw ConfigError("meteor requires a reference");
  if (candidate.empty()) return 0.0;
  static const PorterStemmer stemmer;
  double best = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const auto align = detail::meteor_align(candidate, ref, stemmer);
    if (align.match_count == 0) continue;
    const double matches = align.match_count;
    const double prec = matches / candidate.size();
    const double rec = matches / ref.size();
    const double f =
        prec * rec / (params.alpha * prec + (1.0 - params.alpha) * rec);
    const double frag = static_cast<double>(align.chunk_count) / matches;
    const double penalty = params.gamma * std::pow(frag, params.beta);
    best = std::max(best, f * (1.0 - penalty));
  }
  return best;
}

// ---------------------------------------------------------------------------
// CIDEr-D

struct CorpusDfTable {
  std::unordered_map<std::string, int> df[NgramProfile::kMaxN];
  std::size_t document_count = 0;

  bool empty() const { return document_count == 0; }
};

// One document = one reference set; an n-gram counts once per document.
inline CorpusDfTable build_df(
    const std::vector<std::vector<TokenSequence>>& reference_sets) {
  if (reference_sets.empty()) throw ConfigError("empty reference corpus");
  CorpusDfTable table;
  table.document_count = reference_sets.size();
  for (const auto& refs : reference_sets) {
    std::unordered_set<std::string> seen[NgramProfile::kMaxN];
    for (const auto& ref : refs) {
      const NgramProfile p = NgramProfile::from_tokens(ref);
      for (int n = 0; n < NgramProfile::kMaxN; ++n)
        for (const auto& [ngram, _] : p.counts[n]) seen[n].insert(ngram);
    }
    for (int n = 0; n < NgramProfile::kMaxN; ++n)
      for (const auto& ngram : seen[n]) ++table.df[n][ngram];
  }
  return table;
}

struct CiderParams {
  double sigma = 6.0;
  double scale = 10.0;
};

namespace detail {

struct TfidfVec {
  std::unordered_map<std::string, double> vec[NgramProfile::kMaxN];
  double norm[NgramProfile::kMaxN] = {0, 0, 0, 0};
  std::size_t length = 0;
};

inline TfidfVec tfidf(const TokenSequence& tokens, const CorpusDfTable& df) {
  TfidfVec out;
  out.length = tokens.size();
  const double log_n = std::log(static_cast<double>(df.document_count));
  const NgramProfile p = NgramProfile::from_tokens(tokens);
  for (int n = 0; n < NgramProfile::kMaxN; ++n) {
    double sq = 0.0;
    for (const auto& [ngram, count] : p.counts[n]) {
      auto it = df.df[n].find(ngram);
      const double d = it == df.df[n].end() ? 0.0
                                            : std::log(std::max(
                                                  1.0, double(it->second)));
      const double w = count * (log_n - d);
      out.vec[n][ngram] = w;
      sq += w * w;
    }
    out.norm[n] = std::sqrt(sq);
  }
  return out;
}

}  // namespace detail

// CIDEr-D per-pair score: clipped tf-idf cosine per n with a Gaussian
// length penalty, averaged over n = 1..4 and references, scaled by 10.
inline double cider_d(const TokenSequence& candidate,
                      const std::vector<TokenSequence>& references,
                      const CorpusDfTable& df, const CiderParams& params = {}) {
  if (df.empty()) throw ConfigError("CIDEr requires a non-empty df table");
  if (references.empty()) throw ConfigError("cider requires a reference");
  const detail::TfidfVec cand = detail::tfidf(candidate, df);
  double total[NgramProfile::kMaxN] = {0, 0, 0, 0};
  for (const auto& ref : references) {
    const detail::TfidfVec rv = detail::tfidf(ref, df);
    const double delta =
        static_cast<double>(cand.length) - static_cast<double>(rv.length);
    const double length_penalty =
        std::exp(-delta * delta / (2.0 * params.sigma * params.sigma));
    for (int n = 0; n < NgramProfile::kMaxN; ++n) {
      double dot = 0.0;
      for (const auto& [ngram, w] : cand.vec[n]) {
        auto it = rv.vec[n].find(ngram);
        if (it != rv.vec[n].end()) dot += std::min(w, it->second) * it->second;
      }
      if (cand.norm[n] > 0.0 && rv.norm[n] > 0.0)
        total[n] += length_penalty * dot / (cand.norm[n] * rv.norm[n]);
    }
  }
  double score = 0.0;
  for (int n = 0; n < NgramProfile::kMaxN; ++n)
    score += total[n] / references.size();
  return params.scale * score / NgramProfile::kMaxN;
}

struct CiderResult {
  std::vector<double> per_pair;
  double mean = 0.0;
};

inline CiderResult cider(
    const std::vector<TokenSequence>& candidates,
    const std::vector<std::vector<TokenSequence>>& reference_sets,
    const CorpusDfTable& df, const CiderParams& params = {}) {
  if (candidates.size() != reference_sets.size())
    throw ConfigError("candidate/reference count mismatch");
  CiderResult out;
  out.per_pair.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    out.per_pair.push_back(cider_d(candidates[i], reference_sets[i], df, params));
  if (!out.per_pair.empty()) {
    double sum = 0.0;
    for (double v : out.per_pair) sum += v;
    out.mean = sum / out.per_pair.size();
  }
  return out;
}

}  // namespace panocap

#endif  // PANOCAP_METRICS_HPP_
