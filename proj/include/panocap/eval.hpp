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

#ifndef PANOCAP_EVAL_HPP_
#define PANOCAP_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "panocap/errors.hpp"
#include "panocap/metrics.hpp"
#include "panocap/panoptic.hpp"
#include "panocap/text.hpp"

namespace panocap {

struct GtInstance {
  SegmentId id = 0;
  int category_id = 0;
  bool is_thing = false;
  BinaryMask mask;
  std::string caption;
};

struct Prediction {
  BinaryMask mask;
  std::string caption;
  double score = 0.0;
};

struct ImageSample {
  std::string image_key;
  std::vector<GtInstance> gt;
  std::vector<Prediction> predictions;
};

struct ThresholdGrid {
  std::vector<double> iou_thresholds = {0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<double> meteor_thresholds = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25};

  void check() const {
    auto increasing = [](const std::vector<double>& v) {
      return !v.empty() && std::is_sorted(v.begin(), v.end()) &&
             std::adjacent_find(v.begin(), v.end()) == v.end();
    };
    if (!increasing(iou_thresholds) || !increasing(meteor_thresholds))
      throw ConfigError("threshold lists must be strictly increasing");
  }
};

struct MatchEntry {
  int pred_index = -1;           // index into ImageSample::predictions
  std::optional<SegmentId> gt;   // matched ground-truth id
  int gt_index = -1;             // index into ImageSample::gt, -1 if FP
  double iou = 0.0;
  double meteor = 0.0;
};

struct CellMatch {
  std::vector<MatchEntry> entries;  // in rank order
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

// Pairwise IoU / METEOR tables computed once per image and reused by every
// grid cell.
struct ImageOverlap {
  std::vector<std::vector<double>> iou;     // [pred][gt]
  std::vector<std::vector<double>> meteor;  // [pred][gt]
  std::vector<int> rank_order;              // prediction indices, rank order
};

// Predictions rank by score descending; ties break on larger mask area,
// then input order.
inline std::vector<int> rank_predictions(const std::vector<Prediction>& preds) {
  std::vector<int> order(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (preds[a].score != preds[b].score) return preds[a].score > preds[b].score;
    return preds[a].mask.area() > preds[b].mask.area();
  });
  return order;
}

inline ImageOverlap compute_overlap(const ImageSample& image) {
  ImageOverlap out;
  const std::size_t np = image.predictions.size();
  const std::size_t ng = image.gt.size();
  out.iou.assign(np, std::vector<double>(ng, 0.0));
  out.meteor.assign(np, std::vector<double>(ng, 0.0));
  std::vector<TokenSequence> gt_tokens(ng);
  for (std::size_t g = 0; g < ng; ++g)
    gt_tokens[g] = tokenize(image.gt[g].caption);
  for (std::size_t p = 0; p < np; ++p) {
    const TokenSequence cand = tokenize(image.predictions[p].caption);
    for (std::size_t g = 0; g < ng; ++g) {
      out.iou[p][g] = iou(image.predictions[p].mask, image.gt[g].mask);
      if (out.iou[p][g] > 0.0)
        out.meteor[p][g] = meteor(cand, {gt_tokens[g]});
    }
  }
  out.rank_order = rank_predictions(image.predictions);
  return out;
}

// Greedy matching in rank order: a prediction takes the highest-IoU still
// unmatched gt passing both thresholds, otherwise it is a false positive.
// Both comparisons are inclusive, so meteor_t = 0 degenerates to
// localization-only matching.
inline CellMatch match_cell(const ImageSample& image,
                            const ImageOverlap& overlap, double iou_t,
                            double meteor_t) {
  CellMatch cell;
  std::vector<char> gt_taken(image.gt.size(), 0);
  for (int p : overlap.rank_order) {
    MatchEntry entry;
    entry.pred_index = p;
    int best_g = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < image.gt.size(); ++g) {
      if (gt_taken[g]) continue;
      if (overlap.iou[p][g] >= iou_t && overlap.meteor[p][g] >= meteor_t &&
          overlap.iou[p][g] > best_iou) {
        best_iou = overlap.iou[p][g];
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0) {
      gt_taken[best_g] = 1;
      entry.gt = image.gt[best_g].id;
      entry.gt_index = best_g;
      entry.iou = overlap.iou[p][best_g];
      entry.meteor = overlap.meteor[p][best_g];
      ++cell.tp;
    } else {
      ++cell.fp;
    }
    cell.entries.push_back(entry);
  }
  cell.fn = image.gt.size() - cell.tp;
  return cell;
}

// One globally ranked detection for AP computation.
struct RankedDetection {
  double score = 0.0;
  std::uint64_t area = 0;
  int image_index = 0;
  int pred_index = 0;
  bool is_tp = false;
};

inline bool rank_less(const RankedDetection& a, const RankedDetection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.area != b.area) return a.area > b.area;
  if (a.image_index != b.image_index) return a.image_index < b.image_index;
  return a.pred_index < b.pred_index;
}

// Area under the PR curve with an all-point interpolation: the precision
// envelope is made monotone non-increasing before integration.
inline double average_precision(std::vector<RankedDetection> dets,
                                std::uint64_t n_gt) {
  if (n_gt == 0) throw ConsistencyError("AP undefined with zero ground truth");
  if (dets.empty()) return 0.0;
  std::sort(dets.begin(), dets.end(), rank_less);
  std::vector<double> precision, recall;
  std::uint64_t tp = 0, fp = 0;
  for (const auto& d : dets) {
    d.is_tp ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / n_gt);
  }
  for (std::size_t i = precision.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

struct MAtKResult {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  double factor = 0.0;        // tp / (tp + fp + fn)
  double metric_value = 0.0;  // corpus-level metric over TP pairs
  double score = 0.0;         // factor * metric_value
  bool defined = true;
};

struct PqResult {
  // Percentages.
  double pq = 0.0, sq = 0.0, rq = 0.0;
  double pq_things = 0.0, pq_stuff = 0.0;
  std::uint64_t tp = 0, fp = 0, fn = 0;
  double iou_sum = 0.0;
};

struct EvalReport {
  ThresholdGrid grid;
  std::vector<std::vector<double>> ap_grid;  // [iou][meteor], NaN if excluded
  double map = 0.0;
  int excluded_cells = 0;
  std::map<std::string, MAtKResult> m_at_k;  // keyed by metric name
  std::optional<PqResult> pq;
  // Diagnostics at (min iou_t, 0): per image, rank-ordered match entries.
  std::vector<std::pair<std::string, CellMatch>> diagnostics;
};

class Evaluator {
 public:
  explicit Evaluator(ThresholdGrid grid = {}) : grid_(std::move(grid)) {
    grid_.check();
  }

  EvalReport evaluate(const std::vector<ImageSample>& images,
                      double k = 0.5) const {
    EvalReport report;
    report.grid = grid_;

    std::vector<ImageOverlap> overlaps;
    overlaps.reserve(images.size());
    std::uint64_t n_gt = 0;
    for (const auto& image : images) {
      overlaps.push_back(compute_overlap(image));
      n_gt += image.gt.size();
    }

    const auto& its = grid_.iou_thresholds;
    const auto& mts = grid_.meteor_thresholds;
    report.ap_grid.assign(its.size(), std::vector<double>(mts.size(), 0.0));
    double ap_sum = 0.0;
    int counted = 0;
    for (std::size_t i = 0; i < its.size(); ++i) {
      for (std::size_t m = 0; m < mts.size(); ++m) {
        if (n_gt == 0) {
          report.ap_grid[i][m] = std::nan("");
          ++report.excluded_cells;
          continue;
        }
        std::vector<RankedDetection> dets;
        for (std::size_t im = 0; im < images.size(); ++im) {
          const CellMatch cell =
              match_cell(images[im], overlaps[im], its[i], mts[m]);
          for (const auto& e : cell.entries) {
            dets.push_back({images[im].predictions[e.pred_index].score,
                            images[im].predictions[e.pred_index].mask.area(),
                            static_cast<int>(im), e.pred_index,
                            e.gt.has_value()});
          }
        }
        const double ap = average_precision(std::move(dets), n_gt);
        report.ap_grid[i][m] = ap;
        ap_sum += ap;
        ++counted;
      }
    }
    report.map = counted > 0 ? ap_sum / counted : std::nan("");

    compute_m_at_k(images, overlaps, k, report);

    for (std::size_t im = 0; im < images.size(); ++im) {
      report.diagnostics.emplace_back(
          images[im].image_key,
          match_cell(images[im], overlaps[im], its.front(), 0.0));
    }
    return report;
  }

 private:
  void compute_m_at_k(const std::vector<ImageSample>& images,
                      const std::vector<ImageOverlap>& overlaps, double k,
                      EvalReport& report) const {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    std::vector<std::pair<TokenSequence, TokenSequence>> pairs;  // cand, ref
    for (std::size_t im = 0; im < images.size(); ++im) {
      const CellMatch cell = match_cell(images[im], overlaps[im], k, 0.0);
      tp += cell.tp;
      fp += cell.fp;
      fn += cell.fn;
      for (const auto& e : cell.entries) {
        if (!e.gt) continue;
        pairs.emplace_back(
            tokenize(images[im].predictions[e.pred_index].caption),
            tokenize(images[im].gt[e.gt_index].caption));
      }
    }
    const std::uint64_t denom = tp + fp + fn;
    const double factor =
        denom == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(denom);

    auto make = [&](double metric_value) {
      MAtKResult r;
      r.tp = tp;
      r.fp = fp;
      r.fn = fn;
      r.defined = denom != 0;
      r.factor = factor;
      r.metric_value = metric_value;
      r.score = factor * metric_value;
      return r;
    };

    // BLEU@4 is aggregated corpus-level over the TP pairs; ROUGE-L, METEOR
    // and CIDEr-D are per-pair means. The CIDEr df comes from every
    // ground-truth caption of the split, independent of the matching.
    BleuAccumulator bleu;
    double rouge_sum = 0.0, meteor_sum = 0.0;
    for (const auto& [cand, ref] : pairs) {
      bleu.add(cand, {ref});
      rouge_sum += rouge_l(cand, {ref});
      meteor_sum += meteor(cand, {ref});
    }
    const double n_pairs = pairs.empty() ? 1.0 : double(pairs.size());
    report.m_at_k["bleu4"] = make(pairs.empty() ? 0.0 : bleu.score());
    report.m_at_k["rouge_l"] = make(rouge_sum / n_pairs);
    report.m_at_k["meteor"] = make(meteor_sum / n_pairs);

    std::vector<std::vector<TokenSequence>> df_docs;
    for (const auto& image : images)
      for (const auto& gt : image.gt) df_docs.push_back({tokenize(gt.caption)});
    if (!df_docs.empty()) {
      const CorpusDfTable df = build_df(df_docs);
      double cider_sum = 0.0;
      for (const auto& [cand, ref] : pairs) cider_sum += cider_d(cand, {ref}, df);
      report.m_at_k["cider"] = make(cider_sum / n_pairs);
    }
  }

  ThresholdGrid grid_;
};

// Merges externally computed per-pair scores (e.g. SPICE) into the m@kIoU
// family. `scores` maps (image_key, gt id) to a per-pair score.
inline MAtKResult external_m_at_k(
    const std::vector<ImageSample>& images, double k,
    const std::map<std::pair<std::string, SegmentId>, double>& scores) {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  double sum = 0.0;
  std::uint64_t found = 0;
  for (const auto& image : images) {
    const ImageOverlap overlap = compute_overlap(image);
    const CellMatch cell = match_cell(image, overlap, k, 0.0);
    tp += cell.tp;
    fp += cell.fp;
    fn += cell.fn;
    for (const auto& e : cell.entries) {
      if (!e.gt) continue;
      auto it = scores.find({image.image_key, *e.gt});
      if (it == scores.end())
        throw ConsistencyError("external score missing for image " +
                               image.image_key + " segment " +
                               std::to_string(*e.gt));
      sum += it->second;
      ++found;
    }
  }
  MAtKResult r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  const std::uint64_t denom = tp + fp + fn;
  r.defined = denom != 0;
  r.factor = denom == 0 ? 0.0 : double(tp) / double(denom);
  r.metric_value = found == 0 ? 0.0 : sum / double(found);
  r.score = r.factor * r.metric_value;
  return r;
}

// ---------------------------------------------------------------------------
// Panoptic Quality

// Category-tagged match with iou > 0.5 (provably unique). Predictions mostly
// covering void (> 0.5 of their area) are excluded from the FP count.
inline PqResult panoptic_quality_accumulate(
    const std::vector<std::pair<const PanopticLabelMap*,
                                const PanopticLabelMap*>>& image_pairs) {
  struct Split {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    double iou_sum = 0.0;
  };
  Split all, things, stuff;

  for (const auto& [gt, pred] : image_pairs) {
    const IntersectionTable table = pairwise_intersections(*gt, *pred);

    std::unordered_map<SegmentId, std::uint64_t> gt_area, pred_area;
    for (const auto& s : gt->segments()) gt_area[s.id] = 0;
    for (const auto& s : pred->segments()) pred_area[s.id] = 0;
    for (auto id : gt->ids())
      if (id != kVoidId) ++gt_area[id];
    for (auto id : pred->ids())
      if (id != kVoidId) ++pred_area[id];

    // Intersection of each prediction with gt void.
    std::unordered_map<SegmentId, std::uint64_t> pred_void;
    {
      const auto& a = gt->ids();
      const auto& b = pred->ids();
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == kVoidId && b[i] != kVoidId) ++pred_void[b[i]];
    }

    std::unordered_map<SegmentId, SegmentId> gt_matched, pred_matched;
    for (const auto& [key, inter] : table) {
      const auto [gid, pid_raw] = key;
      const SegmentId pid = static_cast<SegmentId>(pid_raw);
      const SegmentInfo* gs = gt->find(gid);
      const SegmentInfo* ps = pred->find(pid);
      if (!ps)
        throw ConsistencyError("prediction raster id " + std::to_string(pid) +
                               " missing from segment table");
      if (gs->category_id != ps->category_id) continue;
      const double u =
          static_cast<double>(gt_area[gid] + pred_area[pid] - inter);
      const double pair_iou = static_cast<double>(inter) / u;
      if (pair_iou > 0.5) {
        gt_matched[gid] = pid;
        pred_matched[pid] = gid;
        all.tp += 1;
        all.iou_sum += pair_iou;
        Split& split = gs->is_thing ? things : stuff;
        split.tp += 1;
        split.iou_sum += pair_iou;
      }
    }
    for (const auto& s : gt->segments()) {
      if (gt_matched.count(s.id)) continue;
      all.fn += 1;
      (s.is_thing ? things : stuff).fn += 1;
    }
    for (const auto& s : pred->segments()) {
      if (pred_matched.count(s.id)) continue;
      const std::uint64_t area = pred_area[s.id];
      auto it = pred_void.find(s.id);
      const std::uint64_t void_inter = it == pred_void.end() ? 0 : it->second;
      if (area > 0 && static_cast<double>(void_inter) > 0.5 * area) continue;
      all.fp += 1;
      (s.is_thing ? things : stuff).fp += 1;
    }
  }

  auto pq_of = [](const Split& s) {
    const double denom = s.tp + 0.5 * s.fp + 0.5 * s.fn;
    return denom == 0.0 ? 0.0 : 100.0 * s.iou_sum / denom;
  };

  PqResult r;
  r.tp = all.tp;
  r.fp = all.fp;
  r.fn = all.fn;
  r.iou_sum = all.iou_sum;
  r.pq = pq_of(all);
  r.sq = all.tp == 0 ? 0.0 : 100.0 * all.iou_sum / all.tp;
  const double denom = all.tp + 0.5 * all.fp + 0.5 * all.fn;
  r.rq = denom == 0.0 ? 0.0 : 100.0 * all.tp / denom;
  r.pq_things = pq_of(things);
  r.pq_stuff = pq_of(stuff);
  return r;
}

inline PqResult panoptic_quality(const PanopticLabelMap& gt,
                                 const PanopticLabelMap& pred) {
  return panoptic_quality_accumulate({{&gt, &pred}});
}

}  // namespace panocap

#endif  // PANOCAP_EVAL_HPP_
