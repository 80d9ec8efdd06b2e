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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <tuple>

#include "panocap/eval.hpp"
#include "panocap/metrics.hpp"
#include "panocap/panoptic.hpp"

using namespace panocap;

namespace {

BinaryMask strip(int width, int from, int to) {
  BinaryMask m(width, 1);
  for (int x = from; x <= to; ++x) m.set(x, 0);
  return m;
}

// Plain re-statement of the matching contract, written independently of the
// library implementation: rank by (score desc, area desc, input order), each
// prediction takes the eligible unmatched gt with the highest IoU.
struct OracleCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  std::vector<int> tp_pred_indices;
};

double oracle_iou(const BinaryMask& a, const BinaryMask& b) {
  std::uint64_t inter = 0, uni = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      const bool pa = a.get(x, y), pb = b.get(x, y);
      inter += pa && pb;
      uni += pa || pb;
    }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

OracleCounts oracle_match(const ImageSample& image, double iou_t,
                          double meteor_t) {
  std::vector<int> order;
  for (std::size_t i = 0; i < image.predictions.size(); ++i)
    order.push_back(static_cast<int>(i));
  // Selection sort to keep this oracle independent of std::stable_sort use.
  for (std::size_t a = 0; a < order.size(); ++a) {
    std::size_t best = a;
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const Prediction& pb = image.predictions[order[b]];
      const Prediction& pbest = image.predictions[order[best]];
      if (pb.score > pbest.score ||
          (pb.score == pbest.score && pb.mask.area() > pbest.mask.area()) ||
          (pb.score == pbest.score && pb.mask.area() == pbest.mask.area() &&
           order[b] < order[best]))
        best = b;
    }
    std::swap(order[a], order[best]);
  }
  OracleCounts out;
  std::vector<bool> taken(image.gt.size(), false);
  for (int p : order) {
    int pick = -1;
    double pick_iou = -1.0;
    for (std::size_t g = 0; g < image.gt.size(); ++g) {
      if (taken[g]) continue;
      const double i = oracle_iou(image.predictions[p].mask, image.gt[g].mask);
      if (i >= iou_t &&
          meteor(tokenize(image.predictions[p].caption),
                 {tokenize(image.gt[g].caption)}) >= meteor_t &&
          i > pick_iou) {
        pick = static_cast<int>(g);
        pick_iou = i;
      }
    }
    if (pick >= 0) {
      taken[pick] = true;
      out.tp += 1;
      out.tp_pred_indices.push_back(p);
    } else {
      out.fp += 1;
    }
  }
  out.fn = image.gt.size() - out.tp;
  return out;
}

// AP as the sum over true positives of interpolated precision steps:
// AP = sum_TP max_{r' >= r(tp)} precision(r') / n_gt.
double oracle_ap(const std::vector<std::pair<double, bool>>& scored,
                 std::uint64_t n_gt, const std::vector<std::uint64_t>& areas,
                 const std::vector<std::pair<int, int>>& ids) {
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].first != scored[b].first)
      return scored[a].first > scored[b].first;
    if (areas[a] != areas[b]) return areas[a] > areas[b];
    return ids[a] < ids[b];
  });
  std::vector<double> precision;
  std::vector<bool> is_tp;
  std::uint64_t tp = 0, seen = 0;
  for (std::size_t i : order) {
    ++seen;
    tp += scored[i].second ? 1 : 0;
    precision.push_back(double(tp) / double(seen));
    is_tp.push_back(scored[i].second);
  }
  double ap = 0.0;
  for (std::size_t r = 0; r < precision.size(); ++r) {
    if (!is_tp[r]) continue;
    double best = 0.0;
    for (std::size_t q = r; q < precision.size(); ++q)
      best = std::max(best, precision[q]);
    ap += best / double(n_gt);
  }
  return ap;
}

ImageSample random_scene(std::mt19937& rng, bool caption_noise = true) {
  const std::vector<std::string> vocab = {"red",  "car", "dog",
                                          "tree", "big", "runs"};
  auto caption = [&] {
    std::string s;
    const int len = 3 + static_cast<int>(rng() % 6);
    for (int i = 0; i < len; ++i) {
      if (!s.empty()) s += ' ';
      s += vocab[rng() % vocab.size()];
    }
    return s;
  };
  const int w = 4 + static_cast<int>(rng() % 13);
  const int h = 4 + static_cast<int>(rng() % 13);
  ImageSample image;
  image.image_key = "scene";
  // Disjoint gt from a random 0..3 label raster.
  std::vector<int> labels(static_cast<std::size_t>(w) * h);
  for (auto& l : labels) l = static_cast<int>(rng() % 4);
  for (int lab = 1; lab <= 3; ++lab) {
    BinaryMask m(w, h);
    bool any = false;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (labels[static_cast<std::size_t>(y) * w + x] == lab) {
          m.set(x, y);
          any = true;
        }
    if (any && image.gt.size() < 3)
      image.gt.push_back({static_cast<SegmentId>(lab), lab, true, m,
                          caption()});
  }
  const int np = static_cast<int>(rng() % 4);
  for (int p = 0; p < np; ++p) {
    Prediction pred;
    BinaryMask m(w, h);
    if (!image.gt.empty() && rng() % 2 == 0) {
      // Perturbed copy of a gt mask keeps IoU values interesting.
      const BinaryMask& base = image.gt[rng() % image.gt.size()].mask;
      m = base;
      for (int flips = static_cast<int>(rng() % 20); flips > 0; --flips) {
        const int x = static_cast<int>(rng() % w);
        const int y = static_cast<int>(rng() % h);
        m.set(x, y, !m.get(x, y));
      }
    } else {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (rng() % 3 == 0) m.set(x, y);
    }
    pred.mask = m;
    if (!image.gt.empty() && !caption_noise) {
      pred.caption = image.gt[rng() % image.gt.size()].caption;
    } else if (!image.gt.empty() && rng() % 2 == 0) {
      pred.caption = image.gt[rng() % image.gt.size()].caption;
    } else {
      pred.caption = caption();
    }
    pred.score = static_cast<double>(rng() % 4) / 4.0;  // ties on purpose
    image.predictions.push_back(std::move(pred));
  }
  return image;
}

}  // namespace

TEST_CASE("match_cell hand-checked scene") {
  // gt A = x0..7, gt B = x10..15; pred1 overlaps A at IoU 0.6, pred2 is off.
  ImageSample image;
  image.image_key = "img";
  image.gt.push_back({1, 1, true, strip(20, 0, 7), "a red car"});
  image.gt.push_back({2, 1, true, strip(20, 10, 15), "a tall tree"});
  image.predictions.push_back({strip(20, 2, 9), "a red car", 0.9});
  image.predictions.push_back({strip(20, 17, 19), "a dog", 0.8});
  const ImageOverlap overlap = compute_overlap(image);

  const CellMatch strict = match_cell(image, overlap, 0.5, 0.0);
  CHECK(strict.tp == 1);
  CHECK(strict.fp == 1);
  CHECK(strict.fn == 1);
  REQUIRE(strict.entries.size() == 2);
  CHECK(strict.entries[0].pred_index == 0);
  CHECK(strict.entries[0].gt == std::optional<SegmentId>(1));
  CHECK(strict.entries[0].iou == Catch::Approx(0.6));

  const CellMatch loose = match_cell(image, overlap, 0.7, 0.0);
  CHECK(loose.tp == 0);
  CHECK(loose.fn == 2);
}

TEST_CASE("average_precision oracle cases") {
  auto det = [](double score, bool tp) {
    RankedDetection d;
    d.score = score;
    d.is_tp = tp;
    return d;
  };
  SECTION("[TP, FP, TP] with two gt scores 5/6") {
    // [DERIVED] precisions 1, 1/2, 2/3 -> envelope 1, 2/3, 2/3;
    // AP = 0.5 * 1 + 0.5 * 2/3.
    const double ap = average_precision(
        {det(0.9, true), det(0.8, false), det(0.7, true)}, 2);
    CHECK(ap == Catch::Approx(5.0 / 6.0).epsilon(1e-12));
  }
  SECTION("all hits") {
    CHECK(average_precision({det(0.9, true), det(0.8, true)}, 2) ==
          Catch::Approx(1.0));
  }
  SECTION("no detections") {
    CHECK(average_precision({}, 2) == 0.0);
  }
  SECTION("zero gt throws") {
    CHECK_THROWS_AS(average_precision({det(0.9, false)}, 0),
                    ConsistencyError);
  }
  SECTION("unreached gt caps recall") {
    CHECK(average_precision({det(0.9, true)}, 4) == Catch::Approx(0.25));
  }
}

TEST_CASE("brute-force equivalence on 500 random scenes") {
  std::mt19937 rng(20260823);
  const ThresholdGrid grid;
  int nonempty = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const ImageSample image = random_scene(rng);
    const ImageOverlap overlap = compute_overlap(image);
    for (double iou_t : grid.iou_thresholds) {
      for (double meteor_t : grid.meteor_thresholds) {
        const CellMatch got = match_cell(image, overlap, iou_t, meteor_t);
        const OracleCounts want = oracle_match(image, iou_t, meteor_t);
        REQUIRE(got.tp == want.tp);
        REQUIRE(got.fp == want.fp);
        REQUIRE(got.fn == want.fn);
      }
    }
    if (image.gt.empty()) continue;
    ++nonempty;
    // Single-image AP vs the PR-curve enumeration oracle.
    const Evaluator evaluator(grid);
    const EvalReport report = evaluator.evaluate({image});
    for (std::size_t i = 0; i < grid.iou_thresholds.size(); ++i) {
      for (std::size_t m = 0; m < grid.meteor_thresholds.size(); ++m) {
        const CellMatch cell = match_cell(image, overlap,
                                          grid.iou_thresholds[i],
                                          grid.meteor_thresholds[m]);
        std::vector<std::pair<double, bool>> scored;
        std::vector<std::uint64_t> areas;
        std::vector<std::pair<int, int>> ids;
        for (const auto& e : cell.entries) {
          scored.emplace_back(image.predictions[e.pred_index].score,
                              e.gt.has_value());
          areas.push_back(image.predictions[e.pred_index].mask.area());
          ids.emplace_back(0, e.pred_index);
        }
        const double want = oracle_ap(scored, image.gt.size(), areas, ids);
        REQUIRE(report.ap_grid[i][m] == Catch::Approx(want).margin(1e-9));
      }
    }
  }
  CHECK(nonempty > 300);  // the sweep actually exercised scenes with gt
}

TEST_CASE("grid monotonicity on 100 random scenes") {
  std::mt19937 rng(99);
  const ThresholdGrid grid;
  const Evaluator evaluator(grid);
  for (int trial = 0; trial < 100; ++trial) {
    ImageSample image = random_scene(rng, /*caption_noise=*/false);
    if (image.gt.empty()) continue;
    const EvalReport report = evaluator.evaluate({image});
    for (std::size_t i = 0; i < grid.iou_thresholds.size(); ++i)
      for (std::size_t m = 0; m < grid.meteor_thresholds.size(); ++m) {
        if (i + 1 < grid.iou_thresholds.size())
          CHECK(report.ap_grid[i + 1][m] <= report.ap_grid[i][m] + 1e-12);
        if (m + 1 < grid.meteor_thresholds.size())
          CHECK(report.ap_grid[i][m + 1] <= report.ap_grid[i][m] + 1e-12);
      }
  }
}

TEST_CASE("single-pair derived cell arithmetic") {
  // [DERIVED] IoU = 0.6 passes 4 of 5 IoU thresholds; the identical caption
  // passes every METEOR threshold, so 24 of 30 cells hold AP 1.
  ImageSample image;
  image.image_key = "img";
  const std::string caption = "a red car parked on the street";
  image.gt.push_back({1, 1, true, strip(10, 0, 7), caption});
  image.predictions.push_back({strip(10, 2, 9), caption, 1.0});
  const Evaluator evaluator;
  const EvalReport report = evaluator.evaluate({image});
  CHECK(report.map == Catch::Approx(0.8).epsilon(1e-12));
  CHECK(report.excluded_cells == 0);
}

TEST_CASE("oracle identity: gt as predictions") {
  std::mt19937 rng(5);
  std::vector<ImageSample> images;
  for (int i = 0; i < 8; ++i) {
    ImageSample image = random_scene(rng);
    if (image.gt.empty()) continue;
    image.image_key = "img" + std::to_string(i);
    image.predictions.clear();
    for (const auto& g : image.gt)
      image.predictions.push_back({g.mask, g.caption, 1.0});
    images.push_back(std::move(image));
  }
  REQUIRE(!images.empty());
  const Evaluator evaluator;
  const EvalReport report = evaluator.evaluate(images);
  CHECK(report.map == Catch::Approx(1.0));
  for (const auto& [name, r] : report.m_at_k) {
    INFO(name);
    CHECK(r.factor == Catch::Approx(1.0));
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
  }
  CHECK(report.m_at_k.at("rouge_l").metric_value == Catch::Approx(1.0));
}

TEST_CASE("m@k factor arithmetic") {
  // One TP, one FP, one FN -> factor = 1/3.
  ImageSample image;
  image.image_key = "img";
  image.gt.push_back({1, 1, true, strip(20, 0, 7), "a red car"});
  image.gt.push_back({2, 1, true, strip(20, 10, 15), "a tall tree"});
  image.predictions.push_back({strip(20, 0, 7), "a red car", 0.9});
  image.predictions.push_back({strip(20, 17, 19), "a dog", 0.8});
  const Evaluator evaluator;
  const EvalReport report = evaluator.evaluate({image}, 0.5);
  const MAtKResult& r = report.m_at_k.at("meteor");
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.factor == Catch::Approx(1.0 / 3.0));
  const double self_meteor =
      meteor(tokenize("a red car"), {tokenize("a red car")});
  CHECK(r.metric_value == Catch::Approx(self_meteor));
  CHECK(r.score == Catch::Approx(self_meteor / 3.0));
}

TEST_CASE("external per-pair scores") {
  ImageSample image;
  image.image_key = "img";
  image.gt.push_back({1, 1, true, strip(10, 0, 5), "a red car"});
  image.predictions.push_back({strip(10, 0, 5), "a red car", 1.0});
  SECTION("present scores average into the factor") {
    const MAtKResult r = external_m_at_k({image}, 0.5, {{{"img", 1}, 0.4}});
    CHECK(r.factor == Catch::Approx(1.0));
    CHECK(r.metric_value == Catch::Approx(0.4));
    CHECK(r.score == Catch::Approx(0.4));
  }
  SECTION("missing scores are a consistency error") {
    CHECK_THROWS_AS(external_m_at_k({image}, 0.5, {}), ConsistencyError);
  }
}

TEST_CASE("zero-gt split excludes every cell") {
  ImageSample image;
  image.image_key = "img";
  image.predictions.push_back({strip(10, 0, 5), "a red car", 1.0});
  const Evaluator evaluator;
  const EvalReport report = evaluator.evaluate({image});
  CHECK(report.excluded_cells == 30);
  CHECK(std::isnan(report.map));
}

// ---------------------------------------------------------------------------
// Panoptic quality

namespace {

PanopticLabelMap line_map(const std::vector<SegmentId>& ids,
                          std::vector<SegmentInfo> segments) {
  return PanopticLabelMap(static_cast<int>(ids.size()), 1, ids,
                          std::move(segments));
}

}  // namespace

TEST_CASE("panoptic quality oracle cases") {
  SECTION("identity scores 100") {
    const PanopticLabelMap gt =
        line_map({1, 1, 1, 2, 2, 0}, {{1, 1, true, 3}, {2, 2, false, 2}});
    const PqResult r = panoptic_quality(gt, gt);
    CHECK(r.pq == Catch::Approx(100.0));
    CHECK(r.sq == Catch::Approx(100.0));
    CHECK(r.rq == Catch::Approx(100.0));
    CHECK(r.pq_things == Catch::Approx(100.0));
    CHECK(r.pq_stuff == Catch::Approx(100.0));
  }
  SECTION("single pair at IoU 0.6 scores 60") {
    // [DERIVED] tp = 1, iou_sum = 0.6, no fp/fn.
    std::vector<SegmentId> g(10, 0), p(10, 0);
    for (int x = 0; x <= 7; ++x) g[x] = 1;
    for (int x = 2; x <= 9; ++x) p[x] = 1;
    const PqResult r = panoptic_quality(line_map(g, {{1, 1, true, 8}}),
                                        line_map(p, {{1, 1, true, 8}}));
    CHECK(r.pq == Catch::Approx(60.0).epsilon(1e-12));
    CHECK(r.sq == Catch::Approx(60.0).epsilon(1e-12));
    CHECK(r.rq == Catch::Approx(100.0));
    CHECK(r.pq == Catch::Approx(r.sq * r.rq / 100.0).margin(1e-9));
  }
  SECTION("category mismatch forbids the match") {
    const PanopticLabelMap gt = line_map({1, 1, 1, 1}, {{1, 1, true, 4}});
    const PanopticLabelMap pred = line_map({5, 5, 5, 5}, {{5, 2, true, 4}});
    const PqResult r = panoptic_quality(gt, pred);
    CHECK(r.tp == 0);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
    CHECK(r.pq == Catch::Approx(0.0));
  }
  SECTION("IoU exactly 0.5 does not match") {
    // gt covers x0..3, pred x2..5: inter 2, union 6 -> 1/3; use x0..3 vs
    // x0..1 within a 4px void-free map: inter 2, union 4 -> 0.5 exactly.
    const PanopticLabelMap gt = line_map({1, 1, 1, 1}, {{1, 1, true, 4}});
    const PanopticLabelMap pred =
        line_map({1, 1, 2, 2}, {{1, 1, true, 2}, {2, 1, true, 2}});
    const PqResult r = panoptic_quality(gt, pred);
    CHECK(r.tp == 0);
    CHECK(r.fn == 1);
    CHECK(r.fp == 2);
  }
  SECTION("void-covered predictions are not false positives") {
    // pred segment 2 lies mostly on gt void.
    const PanopticLabelMap gt =
        line_map({1, 1, 1, 0, 0, 0}, {{1, 1, true, 3}});
    const PanopticLabelMap pred =
        line_map({1, 1, 1, 2, 2, 2}, {{1, 1, true, 3}, {2, 1, true, 3}});
    const PqResult r = panoptic_quality(gt, pred);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
    CHECK(r.pq == Catch::Approx(100.0));
  }
  SECTION("things/stuff split") {
    const PanopticLabelMap gt =
        line_map({1, 1, 2, 2}, {{1, 1, true, 2}, {2, 2, false, 2}});
    const PanopticLabelMap pred =
        line_map({1, 1, 3, 3}, {{1, 1, true, 2}, {3, 3, false, 2}});
    const PqResult r = panoptic_quality(gt, pred);
    CHECK(r.pq_things == Catch::Approx(100.0));
    CHECK(r.pq_stuff == Catch::Approx(0.0));
  }
  SECTION("pq = sq * rq / 100 on random maps") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 6 + static_cast<int>(rng() % 20);
      std::vector<SegmentId> g(n), p(n);
      for (auto& v : g) v = rng() % 4;
      for (auto& v : p) v = rng() % 4;
      auto table = [&](const std::vector<SegmentId>& ids) {
        std::vector<SegmentInfo> segs;
        for (SegmentId id = 1; id <= 3; ++id) {
          std::uint64_t area = 0;
          for (auto v : ids) area += v == id;
          if (area) segs.push_back({id, static_cast<int>(id % 2 + 1),
                                    id % 2 == 0, area});
        }
        return segs;
      };
      const PqResult r =
          panoptic_quality(line_map(g, table(g)), line_map(p, table(p)));
      CHECK(r.pq == Catch::Approx(r.sq * r.rq / 100.0).margin(1e-9));
    }
  }
}
