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

#ifndef PANOCAP_PIPELINE_HPP_
#define PANOCAP_PIPELINE_HPP_

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "panocap/annotate.hpp"
#include "panocap/client.hpp"
#include "panocap/dataset.hpp"
#include "panocap/errors.hpp"
#include "panocap/png_io.hpp"
#include "panocap/som.hpp"

namespace panocap {

struct AnnotateOptions {
  std::filesystem::path images_dir;
  std::filesystem::path panoptic_index;
  std::filesystem::path templates_dir;  // empty -> bundled templates
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> cassette;
  bool allow_live = false;
  int concurrency = 4;
  EndpointConfig endpoint;
  std::optional<EndpointConfig> rephrase_endpoint;
  SynonymTable synonyms;
};

struct RejectedImage {
  std::string image_key;
  std::vector<FilterViolation> violations;
};

struct AnnotateStats {
  std::size_t live_calls = 0;
  std::size_t replayed = 0;   // served from the cassette
  std::size_t resumed = 0;    // served from a previous run's request log
  std::size_t accepted_images = 0;
  std::size_t rejected_images = 0;
  std::size_t rephrase_fallbacks = 0;
};

struct AnnotateResult {
  AnnotateStats stats;
  std::vector<RejectedImage> rejects;
};

inline std::vector<PromptTemplate> load_templates(
    const std::filesystem::path& dir) {
  if (dir.empty()) return bundled_templates();
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<PromptTemplate> templates;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read template " + file.string());
    PromptTemplate tmpl;
    tmpl.id = file.stem().string();
    tmpl.body.assign(std::istreambuf_iterator<char>(in), {});
    tmpl.check();
    templates.push_back(std::move(tmpl));
  }
  if (templates.empty())
    throw ConfigError("no .txt templates in " + dir.string());
  return templates;
}

// Steps 2-3 of the annotation flow: mark, prompt, call, parse, filter,
// assemble. Request fingerprints in the out-dir log make reruns resume
// without duplicate endpoint calls.
inline AnnotateResult run_annotate(const AnnotateOptions& options,
                                   Transport* transport_override = nullptr) {
  const GroundTruthDataset ds = load_ground_truth(options.panoptic_index);
  const std::vector<PromptTemplate> templates =
      load_templates(options.templates_dir);

  std::filesystem::create_directories(options.out_dir);
  ReplyStore request_log =
      ReplyStore::open(options.out_dir / "requests.jsonl");
  std::optional<ReplyStore> cassette;
  if (options.cassette)
    cassette = ReplyStore::open(*options.cassette, /*must_exist=*/true);

  std::unique_ptr<Transport> owned_transport;
  Transport* transport = transport_override;
  if (!transport) {
    if (!cassette)
      throw ConfigError(
          "no cassette given and no live transport configured; refusing to "
          "run blind");
    owned_transport = std::make_unique<ReplayTransport>(&*cassette);
    transport = owned_transport.get();
  }

  AnnotateStats stats;
  std::mutex stats_mutex;
  std::atomic<std::size_t> live_budget_used{0};

  auto fetch_reply = [&](const LmmRequest& request) -> std::string {
    const std::string fp = request_fingerprint(request);
    if (auto hit = request_log.lookup(fp)) {
      std::lock_guard<std::mutex> lock(stats_mutex);
      ++stats.resumed;
      return *hit;
    }
    if (cassette) {
      if (auto hit = cassette->lookup(fp)) {
        request_log.record(fp, *hit);
        std::lock_guard<std::mutex> lock(stats_mutex);
        ++stats.replayed;
        return *hit;
      }
    }
    if (options.endpoint.request_budget > 0 &&
        static_cast<int>(live_budget_used.fetch_add(1) + 1) >
            options.endpoint.request_budget)
      throw EndpointError(EndpointError::Kind::kBudget,
                          "per-run request budget exhausted");
    const LmmReply reply = call_lmm(*transport, options.endpoint, request);
    request_log.record(fp, reply.text);
    std::lock_guard<std::mutex> lock(stats_mutex);
    ++stats.live_calls;
    return reply.text;
  };

  struct ImageOutcome {
    bool accepted = false;
    RejectedImage reject;
    DatasetImage annotated;
    std::optional<PanopticLabelMap> map;
    std::size_t rephrase_fallbacks = 0;
  };
  std::vector<ImageOutcome> outcomes(ds.images.size());

  auto process_image = [&](std::size_t index) {
    const DatasetImage& image = ds.images[index];
    ImageOutcome& outcome = outcomes[index];
    outcome.reject.image_key = image.key;

    const PanopticLabelMap map = load_label_map(ds, image, /*strict=*/false);
    const RgbIdPng photo =
        read_rgb_png((options.images_dir / image.file_name).string());
    const RenderResult marked = render_marks(photo, map);

    std::map<int, std::string> expected;
    std::vector<std::string> categories;
    for (const auto& seg : marked.overlay.segments) {
      const SegmentInfo* info = map.find(seg.segment_id);
      const Category* cat = ds.find_category(info->category_id);
      const std::string name = cat ? cat->name : "unknown";
      expected[seg.display_id] = name;
      categories.push_back(name);
    }
    if (categories.empty()) {
      outcome.reject.violations.push_back({"empty image", "no segments"});
      return;
    }

    const PromptTemplate& tmpl =
        select_template(templates, image.key, options.seed);
    LmmRequest request;
    request.model = options.endpoint.model;
    request.prompt = build_prompt(tmpl, static_cast<int>(categories.size()),
                                  categories);
    request.image_png = encode_rgb_png(marked.image);

    ParsedResponse parsed;
    try {
      parsed = parse_response(fetch_reply(request));
    } catch (const FormatError& e) {
      outcome.reject.violations.push_back({"parse error", e.what()});
      return;
    }

    const FilterVerdict verdict =
        hard_match(parsed, expected, options.synonyms);
    if (!verdict.accepted) {
      outcome.reject.violations = verdict.violations;
      return;
    }

    std::function<std::string(const std::string&)> rephrase;
    if (options.rephrase_endpoint) {
      rephrase = [&](const std::string& text) {
        LmmRequest r;
        r.model = options.rephrase_endpoint->model;
        r.prompt = "Rewrite the following fragments as one fluent caption, "
                   "preserving every stated detail:\n" + text;
        return fetch_reply(r);
      };
    }
    const std::vector<AssembledCaption> captions = assemble_captions(
        parsed, options.rephrase_endpoint ? &rephrase : nullptr);

    std::map<int, SegmentId> display_to_segment;
    for (const auto& seg : marked.overlay.segments)
      display_to_segment[seg.display_id] = seg.segment_id;

    DatasetImage annotated;
    annotated.key = image.key;
    annotated.file_name = image.file_name;
    annotated.width = map.width();
    annotated.height = map.height();
    for (const auto& cap : captions) {
      const SegmentId sid = display_to_segment.at(cap.display_id);
      const SegmentInfo* info = map.find(sid);
      annotated.segments.push_back(
          {sid, info->category_id, info->area, cap.caption});
      outcome.rephrase_fallbacks += cap.rephrase_fell_back ? 1 : 0;
    }
    outcome.annotated = std::move(annotated);
    outcome.map = map;
    outcome.accepted = true;
  };

  const int workers =
      std::max(1, std::min<int>(options.concurrency,
                                static_cast<int>(ds.images.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < ds.images.size(); ++i) process_image(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= ds.images.size()) return;
          try {
            process_image(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  AnnotateResult result;
  std::vector<std::pair<DatasetImage, PanopticLabelMap>> accepted;
  for (auto& outcome : outcomes) {
    stats.rephrase_fallbacks += outcome.rephrase_fallbacks;
    if (outcome.accepted) {
      ++stats.accepted_images;
      accepted.emplace_back(std::move(outcome.annotated), *outcome.map);
    } else {
      ++stats.rejected_images;
      result.rejects.push_back(std::move(outcome.reject));
    }
  }
  save_ground_truth(options.out_dir / "dataset", ds.categories, accepted);

  nlohmann::json rejects_json = nlohmann::json::array();
  for (const auto& r : result.rejects) {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& violation : r.violations)
      v.push_back({{"code", violation.code}, {"detail", violation.detail}});
    rejects_json.push_back({{"image_id", r.image_key}, {"violations", v}});
  }
  std::ofstream rejects_out(options.out_dir / "rejects.json");
  if (!rejects_out)
    throw IoError("cannot write rejects file in " + options.out_dir.string());
  rejects_out << rejects_json.dump(2) << "\n";

  result.stats = stats;
  return result;
}

}  // namespace panocap

#endif  // PANOCAP_PIPELINE_HPP_
