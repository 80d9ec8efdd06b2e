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

#ifndef PANOCAP_DATASET_HPP_
#define PANOCAP_DATASET_HPP_

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "panocap/errors.hpp"
#include "panocap/eval.hpp"
#include "panocap/panoptic.hpp"
#include "panocap/png_io.hpp"

namespace panocap {

struct Category {
  int id = 0;
  std::string name;
  bool is_thing = false;
};

struct DatasetSegment {
  SegmentId id = 0;
  int category_id = 0;
  std::uint64_t area = 0;
  std::string caption;
};

struct DatasetImage {
  std::string key;        // image id rendered as a string
  std::string file_name;  // id-encoded PNG, relative to the index directory
  int width = 0;
  int height = 0;
  std::vector<DatasetSegment> segments;
};

struct GroundTruthDataset {
  std::filesystem::path root;
  std::vector<Category> categories;
  std::vector<DatasetImage> images;

  const Category* find_category(int id) const {
    for (const auto& c : categories)
      if (c.id == id) return &c;
    return nullptr;
  }
  const DatasetImage* find_image(const std::string& key) const {
    for (const auto& im : images)
      if (im.key == key) return &im;
    return nullptr;
  }
};

namespace detail {

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline std::string key_of(const nlohmann::json& id) {
  return id.is_string() ? id.get<std::string>() : nlohmann::to_string(id);
}

}  // namespace detail

inline GroundTruthDataset load_ground_truth(
    const std::filesystem::path& index_path) {
  const nlohmann::json j = detail::load_json_file(index_path);
  GroundTruthDataset ds;
  ds.root = index_path.parent_path();
  try {
    for (const auto& c : j.at("categories")) {
      Category cat;
      cat.id = c.at("id").get<int>();
      cat.name = c.at("name").get<std::string>();
      cat.is_thing = c.at("isthing").get<int>() != 0;
      ds.categories.push_back(std::move(cat));
    }
    std::unordered_map<std::string, DatasetImage> images;
    std::vector<std::string> order;
    for (const auto& im : j.at("images")) {
      DatasetImage di;
      di.key = detail::key_of(im.at("id"));
      di.file_name = im.value("file_name", "");
      di.width = im.value("width", 0);
      di.height = im.value("height", 0);
      order.push_back(di.key);
      images.emplace(di.key, std::move(di));
    }
    for (const auto& ann : j.at("annotations")) {
      const std::string key = detail::key_of(ann.at("image_id"));
      auto it = images.find(key);
      if (it == images.end())
        throw ConsistencyError("annotation references unknown image " + key);
      if (ann.contains("file_name"))
        it->second.file_name = ann.at("file_name").get<std::string>();
      for (const auto& s : ann.at("segments_info")) {
        DatasetSegment seg;
        seg.id = s.at("id").get<SegmentId>();
        seg.category_id = s.at("category_id").get<int>();
        seg.area = s.value("area", std::uint64_t{0});
        seg.caption = s.value("caption", "");
        it->second.segments.push_back(std::move(seg));
      }
    }
    for (const auto& key : order) ds.images.push_back(std::move(images.at(key)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("ground-truth index schema error: " +
                      std::string(e.what()));
  }
  return ds;
}

inline PanopticLabelMap load_label_map(const GroundTruthDataset& ds,
                                       const DatasetImage& image,
                                       bool strict = true) {
  const RgbIdPng png = read_rgb_png((ds.root / image.file_name).string());
  std::vector<SegmentInfo> segments;
  for (const auto& s : image.segments) {
    const Category* cat = ds.find_category(s.category_id);
    if (!cat)
      throw ConsistencyError("segment " + std::to_string(s.id) +
                             " references unknown category " +
                             std::to_string(s.category_id));
    segments.push_back({s.id, s.category_id, cat->is_thing, s.area});
  }
  return load_panoptic(png, std::move(segments), strict);
}

// Writes the ground-truth layout: <dir>/index.json plus one id-encoded PNG
// per image.
inline void save_ground_truth(
    const std::filesystem::path& dir, const std::vector<Category>& categories,
    const std::vector<std::pair<DatasetImage, PanopticLabelMap>>& images) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["categories"] = nlohmann::json::array();
  for (const auto& c : categories)
    j["categories"].push_back(
        {{"id", c.id}, {"name", c.name}, {"isthing", c.is_thing ? 1 : 0}});
  j["images"] = nlohmann::json::array();
  j["annotations"] = nlohmann::json::array();
  for (const auto& [image, map] : images) {
    j["images"].push_back({{"id", image.key},
                           {"file_name", image.file_name},
                           {"width", map.width()},
                           {"height", map.height()}});
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : image.segments) {
      segs.push_back({{"id", s.id},
                      {"category_id", s.category_id},
                      {"area", s.area},
                      {"caption", s.caption}});
    }
    j["annotations"].push_back({{"image_id", image.key},
                                {"file_name", image.file_name},
                                {"segments_info", segs}});
    RgbIdPng png(map.width(), map.height());
    for (int y = 0; y < map.height(); ++y)
      for (int x = 0; x < map.width(); ++x)
        png.set(x, y, encode_id(map.id_at(x, y)));
    write_rgb_png((dir / image.file_name).string(), png);
  }
  std::ofstream out(dir / "index.json");
  if (!out) throw IoError("cannot write " + (dir / "index.json").string());
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Predictions

struct PredictionFile {
  // image key -> predictions, in file order
  std::vector<std::pair<std::string, std::vector<Prediction>>> images;
  std::vector<std::string> warnings;
};

namespace detail {

inline BinaryMask parse_mask(const nlohmann::json& m,
                             const std::filesystem::path& root) {
  if (m.contains("counts")) {
    RunLengthMask rle;
    const auto& size = m.at("size");
    rle.height = size.at(0).get<int>();
    rle.width = size.at(1).get<int>();
    const std::string order = m.value("order", "F");
    if (order == "F") {
      rle.order = RleOrder::kColumnMajor;
    } else if (order == "C") {
      rle.order = RleOrder::kRowMajor;
    } else {
      throw FormatError("unknown RLE order flag: " + order);
    }
    rle.counts = m.at("counts").get<std::vector<std::uint32_t>>();
    return BinaryMask::decode_rle(rle);
  }
  if (m.contains("png")) {
    const RgbIdPng png = read_rgb_png((root / m.at("png").get<std::string>()).string());
    const SegmentId id = m.at("id").get<SegmentId>();
    BinaryMask mask(png.width, png.height);
    for (int y = 0; y < png.height; ++y)
      for (int x = 0; x < png.width; ++x) {
        const Rgb c = png.at(x, y);
        if (decode_id(c.r, c.g, c.b) == id) mask.set(x, y);
      }
    return mask;
  }
  throw FormatError("mask object needs either counts or a png reference");
}

}  // namespace detail

inline PredictionFile load_predictions(const std::filesystem::path& path) {
  const nlohmann::json j = detail::load_json_file(path);
  PredictionFile out;
  try {
    bool missing_scores = false;
    for (const auto& rec : j.at("predictions")) {
      const std::string key = detail::key_of(rec.at("image_id"));
      std::vector<Prediction> preds;
      int index = 0;
      for (const auto& obj : rec.at("objects")) {
        Prediction p;
        p.mask = detail::parse_mask(obj.at("mask"), path.parent_path());
        p.caption = obj.value("caption", "");
        if (obj.contains("score")) {
          p.score = obj.at("score").get<double>();
          if (!std::isfinite(p.score))
            throw FormatError("non-finite prediction score");
        } else {
          missing_scores = true;
          p.score = -static_cast<double>(index);  // file order
        }
        ++index;
        preds.push_back(std::move(p));
      }
      out.images.emplace_back(key, std::move(preds));
    }
    if (missing_scores)
      out.warnings.push_back(
          "predictions without confidence scores: ranked by file order");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("prediction file schema error: " + std::string(e.what()));
  }
  return out;
}

// Joins ground truth and predictions into per-image evaluation samples.
// Images without predictions get an empty prediction list; predictions for
// unknown images are a consistency error.
inline std::vector<ImageSample> make_samples(const GroundTruthDataset& ds,
                                             const PredictionFile& preds,
                                             bool strict = true) {
  std::unordered_map<std::string, const std::vector<Prediction>*> by_key;
  for (const auto& [key, list] : preds.images) {
    if (!ds.find_image(key))
      throw ConsistencyError("predictions reference unknown image " + key);
    by_key[key] = &list;
  }
  std::vector<ImageSample> samples;
  for (const auto& image : ds.images) {
    ImageSample sample;
    sample.image_key = image.key;
    const PanopticLabelMap map = load_label_map(ds, image, strict);
    for (const auto& seg : image.segments) {
      const Category* cat = ds.find_category(seg.category_id);
      sample.gt.push_back({seg.id, seg.category_id, cat && cat->is_thing,
                           map.mask_of(seg.id), seg.caption});
    }
    if (auto it = by_key.find(image.key); it != by_key.end())
      sample.predictions = *it->second;
    samples.push_back(std::move(sample));
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Validation

inline std::vector<std::string> validate_ground_truth(
    const std::filesystem::path& index_path) {
  std::vector<std::string> violations;
  GroundTruthDataset ds;
  try {
    ds = load_ground_truth(index_path);
  } catch (const std::exception& e) {
    violations.push_back(e.what());
    return violations;
  }
  for (const auto& image : ds.images) {
    for (const auto& seg : image.segments) {
      if (!ds.find_category(seg.category_id))
        violations.push_back("image " + image.key + " segment " +
                             std::to_string(seg.id) + ": unknown category " +
                             std::to_string(seg.category_id));
      std::string trimmed = seg.caption;
      trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
      if (trimmed.empty())
        violations.push_back("image " + image.key + " segment " +
                             std::to_string(seg.id) + ": empty caption");
    }
    try {
      load_label_map(ds, image, /*strict=*/true);
    } catch (const std::exception& e) {
      violations.push_back("image " + image.key + ": " + e.what());
    }
  }
  return violations;
}

inline std::vector<std::string> validate_predictions(
    const std::filesystem::path& path) {
  std::vector<std::string> violations;
  try {
    const PredictionFile preds = load_predictions(path);
    for (const auto& w : preds.warnings) violations.push_back(w);
    for (const auto& [key, list] : preds.images)
      for (std::size_t i = 0; i < list.size(); ++i)
        if (list[i].mask.empty())
          violations.push_back("image " + key + " object " +
                               std::to_string(i) + ": empty mask");
  } catch (const std::exception& e) {
    violations.push_back(e.what());
  }
  return violations;
}

}  // namespace panocap

#endif  // PANOCAP_DATASET_HPP_
