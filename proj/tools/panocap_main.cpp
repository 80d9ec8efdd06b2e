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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "panocap/annotate.hpp"
#include "panocap/client.hpp"
#include "panocap/dataset.hpp"
#include "panocap/errors.hpp"
#include "panocap/eval.hpp"
#include "panocap/live_transport.hpp"
#include "panocap/panoptic.hpp"
#include "panocap/pipeline.hpp"
#include "panocap/png_io.hpp"
#include "panocap/report.hpp"
#include "panocap/som.hpp"
#include "panocap/stats.hpp"

namespace {

// Exit codes: 0 success, 1 usage, 2 format, 3 consistency, 4 endpoint.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFormat = 2;
constexpr int kConsistency = 3;
constexpr int kEndpoint = 4;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw panocap::IoError("cannot write " + path.string());
  out << text;
}

int run_eval(const std::string& gt, const std::string& pred,
             const std::string& out, const std::vector<double>& iou_ts,
             const std::vector<double>& meteor_ts, double k, bool strict,
             bool table) {
  panocap::ThresholdGrid grid;
  if (!iou_ts.empty()) grid.iou_thresholds = iou_ts;
  if (!meteor_ts.empty()) grid.meteor_thresholds = meteor_ts;
  const panocap::GroundTruthDataset ds = panocap::load_ground_truth(gt);
  const panocap::PredictionFile preds = panocap::load_predictions(pred);
  for (const auto& w : preds.warnings) std::cerr << "warning: " << w << "\n";
  const std::vector<panocap::ImageSample> samples =
      panocap::make_samples(ds, preds, strict);
  const panocap::Evaluator evaluator(grid);
  const panocap::EvalReport report = evaluator.evaluate(samples, k);
  if (!out.empty()) write_text(out, panocap::to_json(report).dump(2) + "\n");
  if (table || out.empty()) std::cout << panocap::render_table(report);
  return kOk;
}

int run_pq(const std::string& gt, const std::string& pred,
           const std::string& out) {
  const panocap::GroundTruthDataset gt_ds = panocap::load_ground_truth(gt);
  const panocap::GroundTruthDataset pred_ds = panocap::load_ground_truth(pred);
  std::vector<panocap::PanopticLabelMap> maps;
  std::vector<std::pair<const panocap::PanopticLabelMap*,
                        const panocap::PanopticLabelMap*>> pairs;
  maps.reserve(2 * gt_ds.images.size());
  for (const auto& image : gt_ds.images) {
    const panocap::DatasetImage* other = pred_ds.find_image(image.key);
    if (!other)
      throw panocap::ConsistencyError("prediction set lacks image " +
                                      image.key);
    maps.push_back(panocap::load_label_map(gt_ds, image, /*strict=*/false));
    maps.push_back(panocap::load_label_map(pred_ds, *other, /*strict=*/false));
  }
  for (std::size_t i = 0; i < maps.size(); i += 2)
    pairs.emplace_back(&maps[i], &maps[i + 1]);
  const panocap::PqResult result = panocap::panoptic_quality_accumulate(pairs);
  const std::string text = panocap::to_json(result).dump(2) + "\n";
  if (!out.empty()) write_text(out, text);
  std::printf("PQ %.2f  SQ %.2f  RQ %.2f  PQ_th %.2f  PQ_st %.2f\n", result.pq,
              result.sq, result.rq, result.pq_things, result.pq_stuff);
  return kOk;
}

int run_stats(const std::string& dataset, const std::string& out,
              const std::string& tagger_path, std::size_t top_k) {
  const panocap::GroundTruthDataset ds = panocap::load_ground_truth(dataset);
  const panocap::PosTagger tagger = tagger_path.empty()
                                        ? panocap::bundled_tagger()
                                        : panocap::load_tagger(tagger_path);
  std::vector<std::vector<std::string>> captions;
  for (const auto& image : ds.images) {
    std::vector<std::string> list;
    for (const auto& seg : image.segments) list.push_back(seg.caption);
    captions.push_back(std::move(list));
  }
  const panocap::CorpusReport report =
      panocap::corpus_report(captions, tagger, top_k);
  panocap::emit_plot_data(report, out);
  std::printf("captions %zu  captions/image %.2f  words %.2f  chars %.2f\n",
              report.captions, report.captions_per_image, report.mean_words,
              report.mean_characters);
  return kOk;
}

int run_som_render(const std::string& image_path, const std::string& index,
                   const std::string& image_id, const std::string& out,
                   const std::string& overlay_out) {
  const panocap::GroundTruthDataset ds = panocap::load_ground_truth(index);
  const panocap::DatasetImage* image = nullptr;
  if (!image_id.empty()) {
    image = ds.find_image(image_id);
    if (!image)
      throw panocap::ConsistencyError("image id not in index: " + image_id);
  } else if (ds.images.size() == 1) {
    image = &ds.images.front();
  } else {
    throw panocap::ConfigError(
        "--image-id required when the index holds several images");
  }
  const panocap::PanopticLabelMap map =
      panocap::load_label_map(ds, *image, /*strict=*/false);
  const panocap::RgbIdPng photo = panocap::read_rgb_png(image_path);
  const panocap::RenderResult result = panocap::render_marks(photo, map);
  panocap::write_rgb_png(out, result.image);
  if (!overlay_out.empty())
    write_text(overlay_out, panocap::to_json(result.overlay).dump(2) + "\n");
  return kOk;
}

int run_annotate_cmd(const panocap::AnnotateOptions& options) {
  std::unique_ptr<panocap::LiveTransport> live;
  if (options.allow_live) {
    live = std::make_unique<panocap::LiveTransport>(options.endpoint);
  }
  const panocap::AnnotateResult result =
      panocap::run_annotate(options, live.get());
  std::printf(
      "accepted %zu  rejected %zu  live %zu  replayed %zu  resumed %zu\n",
      result.stats.accepted_images, result.stats.rejected_images,
      result.stats.live_calls, result.stats.replayed, result.stats.resumed);
  return kOk;
}

int run_parse(const std::string& in_path, const std::string& out_path) {
  std::string raw;
  if (in_path.empty() || in_path == "-") {
    raw.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw panocap::IoError("cannot open " + in_path);
    raw.assign(std::istreambuf_iterator<char>(in), {});
  }
  const panocap::ParsedResponse parsed = panocap::parse_response(raw);
  nlohmann::json j;
  j["objects"] = nlohmann::json::array();
  for (const auto& o : parsed.objects)
    j["objects"].push_back({{"id", o.display_id},
                            {"summary", o.summary},
                            {"description", o.description}});
  j["interactions"] = nlohmann::json::array();
  for (const auto& i : parsed.interactions)
    j["interactions"].push_back(
        {{"ids", nlohmann::json::array({i.first_id, i.second_id})},
         {"text", i.text}});
  j["entry_errors"] = nlohmann::json::array();
  for (const auto& e : parsed.entry_errors)
    j["entry_errors"].push_back({{"code", e.code}, {"line", e.line}});
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
  return kOk;
}

int run_validate(const std::string& gt, const std::string& pred) {
  std::vector<std::string> violations;
  if (!gt.empty()) {
    for (const auto& v : panocap::validate_ground_truth(gt))
      violations.push_back(v);
  }
  if (!pred.empty()) {
    for (const auto& v : panocap::validate_predictions(pred))
      violations.push_back(v);
  }
  for (const auto& v : violations) std::cout << v << "\n";
  return violations.empty() ? kOk : kConsistency;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panocap: panoptic segmentation-captioning benchmark toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key-value config file; flags take precedence");

  std::string gt, pred, out, overlay_out, image_path, image_id, tagger_path;
  std::string in_path, endpoint_cfg, rephrase_cfg;
  std::vector<double> iou_ts, meteor_ts;
  double k = 0.5;
  bool strict = false, table = false;
  std::size_t top_k = 10;
  panocap::AnnotateOptions annotate_options;
  std::string annotate_images, annotate_index, annotate_templates, annotate_out;
  std::string annotate_replay;
  bool allow_live = false;

  auto* eval = app.add_subcommand("eval", "dual-threshold mAP and m@kIoU");
  eval->add_option("--gt", gt, "ground-truth index.json")->required();
  eval->add_option("--pred", pred, "prediction file")->required();
  eval->add_option("--out", out, "report JSON path");
  eval->add_option("--iou-thresholds", iou_ts, "IoU threshold overrides");
  eval->add_option("--meteor-thresholds", meteor_ts,
                   "METEOR threshold overrides");
  eval->add_option("--k", k, "IoU cut for m@kIoU");
  eval->add_flag("--strict", strict, "reject declared-area mismatches");
  eval->add_flag("--table", table, "print the human-readable table");

  auto* pq = app.add_subcommand("pq", "panoptic quality only");
  pq->add_option("--gt", gt, "ground-truth index.json")->required();
  pq->add_option("--pred", pred, "prediction index.json")->required();
  pq->add_option("--out", out, "result JSON path");

  auto* stats = app.add_subcommand("stats", "corpus statistics and plot data");
  stats->add_option("--dataset", gt, "dataset index.json")->required();
  stats->add_option("--out", out, "output directory")->required();
  stats->add_option("--tagger", tagger_path, "POS lexicon JSON");
  stats->add_option("--top-k", top_k, "top word list length");

  auto* som = app.add_subcommand("som-render", "set-of-mark overlay renderer");
  som->add_option("--image", image_path, "photo PNG")->required();
  som->add_option("--panoptic", gt, "panoptic index.json")->required();
  som->add_option("--image-id", image_id, "image key within the index");
  som->add_option("--out", out, "marked PNG path")->required();
  som->add_option("--overlay", overlay_out, "overlay JSON path");

  auto* annotate = app.add_subcommand("annotate", "SoM-prompted captioning");
  annotate->add_option("--images", annotate_images, "photo directory")
      ->required();
  annotate->add_option("--panoptic", annotate_index, "panoptic index.json")
      ->required();
  annotate->add_option("--templates", annotate_templates,
                       "prompt template directory (default: bundled)");
  annotate->add_option("--seed", annotate_options.seed, "template seed");
  annotate->add_option("--out", annotate_out, "output dataset directory")
      ->required();
  annotate->add_option("--replay", annotate_replay, "replay cassette");
  annotate->add_option("--endpoint", endpoint_cfg, "endpoint config JSON");
  annotate->add_option("--rephrase-endpoint", rephrase_cfg,
                       "rephrase endpoint config JSON");
  annotate->add_option("--concurrency", annotate_options.concurrency,
                       "worker pool size");
  annotate->add_flag("--live", allow_live, "permit live endpoint calls");

  auto* parse = app.add_subcommand("parse", "parse a reply transcript");
  parse->add_option("--in", in_path, "reply text file ('-' for stdin)");
  parse->add_option("--out", out, "parsed JSON path");

  auto* validate = app.add_subcommand("validate", "schema/consistency checks");
  validate->add_option("--gt", gt, "ground-truth index.json");
  validate->add_option("--pred", pred, "prediction file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (eval->parsed())
      return run_eval(gt, pred, out, iou_ts, meteor_ts, k, strict, table);
    if (pq->parsed()) return run_pq(gt, pred, out);
    if (stats->parsed()) return run_stats(gt, out, tagger_path, top_k);
    if (som->parsed())
      return run_som_render(image_path, gt, image_id, out, overlay_out);
    if (annotate->parsed()) {
      annotate_options.images_dir = annotate_images;
      annotate_options.panoptic_index = annotate_index;
      annotate_options.templates_dir = annotate_templates;
      annotate_options.out_dir = annotate_out;
      annotate_options.allow_live = allow_live;
      if (!annotate_replay.empty()) annotate_options.cassette = annotate_replay;
      if (!endpoint_cfg.empty())
        annotate_options.endpoint = panocap::load_endpoint_config(endpoint_cfg);
      if (!rephrase_cfg.empty())
        annotate_options.rephrase_endpoint =
            panocap::load_endpoint_config(rephrase_cfg);
      return run_annotate_cmd(annotate_options);
    }
    if (parse->parsed()) return run_parse(in_path, out);
    if (validate->parsed()) {
      if (gt.empty() && pred.empty())
        throw panocap::ConfigError("validate needs --gt and/or --pred");
      return run_validate(gt, pred);
    }
  } catch (const panocap::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const panocap::EndpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEndpoint;
  } catch (const panocap::ConsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConsistency;
  } catch (const panocap::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFormat;
  } catch (const panocap::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
