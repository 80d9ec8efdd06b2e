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

#ifndef PANOCAP_REPORT_HPP_
#define PANOCAP_REPORT_HPP_

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "panocap/eval.hpp"
#include "panocap/som.hpp"

namespace panocap {

// Excluded (zero-gt) cells serialize as null so the JSON stays valid.
inline nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["grid"] = {{"iou_thresholds", report.grid.iou_thresholds},
               {"meteor_thresholds", report.grid.meteor_thresholds}};
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& row : report.ap_grid) {
    nlohmann::json r = nlohmann::json::array();
    for (double ap : row)
      r.push_back(std::isnan(ap) ? nlohmann::json(nullptr)
                                 : nlohmann::json(ap));
    grid.push_back(std::move(r));
  }
  j["ap_grid"] = std::move(grid);
  j["map"] = std::isnan(report.map) ? nlohmann::json(nullptr)
                                    : nlohmann::json(report.map);
  j["excluded_cells"] = report.excluded_cells;
  nlohmann::json matk = nlohmann::json::object();
  for (const auto& [name, r] : report.m_at_k)
    matk[name] = {{"tp", r.tp},
                  {"fp", r.fp},
                  {"fn", r.fn},
                  {"factor", r.factor},
                  {"metric_value", r.metric_value},
                  {"score", r.score},
                  {"defined", r.defined}};
  j["m_at_0.5iou"] = std::move(matk);
  if (report.pq) {
    const PqResult& pq = *report.pq;
    j["pq"] = {{"pq", pq.pq},           {"sq", pq.sq},
               {"rq", pq.rq},           {"pq_things", pq.pq_things},
               {"pq_stuff", pq.pq_stuff}, {"tp", pq.tp},
               {"fp", pq.fp},           {"fn", pq.fn}};
  }
  nlohmann::json diags = nlohmann::json::array();
  for (const auto& [key, cell] : report.diagnostics) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : cell.entries) {
      nlohmann::json entry{{"pred_index", e.pred_index},
                           {"iou", e.iou},
                           {"meteor", e.meteor}};
      entry["gt_id"] = e.gt ? nlohmann::json(*e.gt) : nlohmann::json(nullptr);
      entries.push_back(std::move(entry));
    }
    diags.push_back({{"image_id", key},
                     {"tp", cell.tp},
                     {"fp", cell.fp},
                     {"fn", cell.fn},
                     {"matches", std::move(entries)}});
  }
  j["diagnostics"] = std::move(diags);
  return j;
}

inline nlohmann::json to_json(const PqResult& pq) {
  return {{"pq", pq.pq},           {"sq", pq.sq},
          {"rq", pq.rq},           {"pq_things", pq.pq_things},
          {"pq_stuff", pq.pq_stuff}, {"tp", pq.tp},
          {"fp", pq.fp},           {"fn", pq.fn},
          {"iou_sum", pq.iou_sum}};
}

// Overlay sidecar mapping display ids back to segment ids, so parsed replies
// can be resolved without re-rendering.
inline nlohmann::json to_json(const MarkOverlay& overlay) {
  nlohmann::json marks = nlohmann::json::array();
  for (const auto& seg : overlay.segments) {
    nlohmann::json boundary = nlohmann::json::array();
    for (const auto& loop : seg.boundary) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& pt : loop)
        pts.push_back(nlohmann::json::array({pt.x, pt.y}));
      boundary.push_back(std::move(pts));
    }
    marks.push_back({{"segment_id", seg.segment_id},
                     {"display_id", seg.display_id},
                     {"anchor", nlohmann::json::array(
                                    {seg.anchor.x, seg.anchor.y})},
                     {"color", nlohmann::json::array(
                                   {seg.color.r, seg.color.g, seg.color.b})},
                     {"boundary", std::move(boundary)}});
  }
  return {{"marks", std::move(marks)}};
}

// Compact fixed-width table for terminal output.
inline std::string render_table(const EvalReport& report) {
  char buf[128];
  std::string out;
  auto row = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof(buf), fmt, args...);
    out += buf;
    out += '\n';
  };
  row("%-18s %8.4f", "mAP", report.map);
  for (const auto& [name, r] : report.m_at_k)
    row("%-18s %8.4f  (factor %.4f, metric %.4f)",
        (name + "@0.5IoU").c_str(), r.score, r.factor, r.metric_value);
  if (report.pq) {
    row("%-18s %8.2f", "PQ", report.pq->pq);
    row("%-18s %8.2f", "SQ", report.pq->sq);
    row("%-18s %8.2f", "RQ", report.pq->rq);
    row("%-18s %8.2f", "PQ_things", report.pq->pq_things);
    row("%-18s %8.2f", "PQ_stuff", report.pq->pq_stuff);
  }
  return out;
}

}  // namespace panocap

#endif  // PANOCAP_REPORT_HPP_
