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

#ifndef PANOCAP_PANOPTIC_HPP_
#define PANOCAP_PANOPTIC_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "panocap/errors.hpp"

namespace panocap {

// Segment ids are 24-bit integers packed into RGB channels, id 0 is void.
using SegmentId = std::uint32_t;
inline constexpr SegmentId kVoidId = 0;
inline constexpr std::uint32_t kMaxSegmentId = (1u << 24) - 1;

inline SegmentId decode_id(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<SegmentId>(r) + 256u * g + 65536u * b;
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

inline Rgb encode_id(SegmentId id) {
  if (id > kMaxSegmentId) {
    throw std::out_of_range("segment id " + std::to_string(id) +
                            " exceeds 24-bit range");
  }
  return Rgb{static_cast<std::uint8_t>(id & 0xff),
             static_cast<std::uint8_t>((id >> 8) & 0xff),
             static_cast<std::uint8_t>((id >> 16) & 0xff)};
}

// Raw RGB raster, row-major, 3 bytes per pixel.
struct RgbIdPng {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // size = 3 * width * height

  RgbIdPng() = default;
  RgbIdPng(int w, int h) : width(w), height(h), pixels(3u * w * h, 0) {
    if (w <= 0 || h <= 0) throw FormatError("non-positive PNG dimensions");
  }

  Rgb at(int x, int y) const {
    const std::size_t off = 3u * (static_cast<std::size_t>(y) * width + x);
    return Rgb{pixels[off], pixels[off + 1], pixels[off + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t off = 3u * (static_cast<std::size_t>(y) * width + x);
    pixels[off] = c.r;
    pixels[off + 1] = c.g;
    pixels[off + 2] = c.b;
  }
};

struct SegmentInfo {
  SegmentId id = 0;
  int category_id = 0;
  bool is_thing = false;
  std::uint64_t area = 0;
};

struct CaptionedSegment {
  SegmentInfo segment;
  std::string caption;
};

enum class RleOrder { kColumnMajor, kRowMajor };

// Uncompressed run-length mask: alternating runs starting with a zero-run.
struct RunLengthMask {
  int width = 0;
  int height = 0;
  RleOrder order = RleOrder::kColumnMajor;
  std::vector<std::uint32_t> counts;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int w, int h) : width_(w), height_(h), bits_(1u * w * h, 0) {
    if (w <= 0 || h <= 0) throw FormatError("non-positive mask dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool get(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v = true) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  const std::vector<std::uint8_t>& raw() const { return bits_; }

  std::uint64_t area() const {
    std::uint64_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }
  bool empty() const { return area() == 0; }

  bool operator==(const BinaryMask&) const = default;

  RunLengthMask encode_rle(RleOrder order = RleOrder::kColumnMajor) const {
    RunLengthMask rle;
    rle.width = width_;
    rle.height = height_;
    rle.order = order;
    std::uint8_t cur = 0;  // runs start with a zero-run
    std::uint32_t run = 0;
    auto flush = [&](std::uint8_t next) {
      rle.counts.push_back(run);
      run = 0;
      cur = next;
    };
    auto feed = [&](std::uint8_t v) {
      if (v != cur) flush(v);
      ++run;
    };
    if (order == RleOrder::kColumnMajor) {
      for (int x = 0; x < width_; ++x)
        for (int y = 0; y < height_; ++y) feed(get(x, y) ? 1 : 0);
    } else {
      for (auto b : bits_) feed(b);
    }
    rle.counts.push_back(run);
    return rle;
  }

  static BinaryMask decode_rle(const RunLengthMask& rle) {
    if (rle.width <= 0 || rle.height <= 0)
      throw FormatError("non-positive RLE dimensions");
    std::uint64_t total = 0;
    for (auto c : rle.counts) total += c;
    const std::uint64_t expected =
        static_cast<std::uint64_t>(rle.width) * rle.height;
    if (total != expected)
      throw FormatError("RLE counts sum to " + std::to_string(total) +
                        ", expected " + std::to_string(expected));
    BinaryMask mask(rle.width, rle.height);
    std::uint64_t pos = 0;
    std::uint8_t val = 0;
    for (auto c : rle.counts) {
      if (val) {
        for (std::uint32_t i = 0; i < c; ++i) {
          const std::uint64_t p = pos + i;
          if (rle.order == RleOrder::kColumnMajor) {
            mask.set(static_cast<int>(p / rle.height),
                     static_cast<int>(p % rle.height));
          } else {
            mask.set(static_cast<int>(p % rle.width),
                     static_cast<int>(p / rle.width));
          }
        }
      }
      pos += c;
      val ^= 1;
    }
    return mask;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline std::uint64_t intersection_area(const BinaryMask& a,
                                       const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw FormatError("mask dimension mismatch");
  const auto& x = a.raw();
  const auto& y = b.raw();
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) n += x[i] & y[i];
  return n;
}

// IoU over set bits; both-empty pairs score 0 by convention.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  const std::uint64_t inter = intersection_area(a, b);
  const std::uint64_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Disjoint segment-id raster plus its segment table.
class PanopticLabelMap {
 public:
  PanopticLabelMap() = default;
  PanopticLabelMap(int w, int h, std::vector<SegmentId> ids,
                   std::vector<SegmentInfo> segments)
      : width_(w), height_(h), ids_(std::move(ids)),
        segments_(std::move(segments)) {
    if (w <= 0 || h <= 0) throw FormatError("non-positive map dimensions");
    if (ids_.size() != static_cast<std::size_t>(w) * h)
      throw FormatError("raster size does not match dimensions");
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (segments_[i].id == kVoidId)
        throw ConsistencyError("segment table contains void id 0");
      if (!index_.emplace(segments_[i].id, i).second)
        throw ConsistencyError("duplicate segment id " +
                               std::to_string(segments_[i].id));
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  SegmentId id_at(int x, int y) const {
    return ids_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<SegmentId>& ids() const { return ids_; }
  const std::vector<SegmentInfo>& segments() const { return segments_; }

  const SegmentInfo* find(SegmentId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &segments_[it->second];
  }

  std::uint64_t void_area() const {
    std::uint64_t n = 0;
    for (auto id : ids_) n += (id == kVoidId);
    return n;
  }

  BinaryMask mask_of(SegmentId id) const {
    if (id == kVoidId || !find(id))
      throw ConsistencyError("segment id " + std::to_string(id) +
                             " not present in map");
    BinaryMask mask(width_, height_);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        if (id_at(x, y) == id) mask.set(x, y);
    return mask;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<SegmentId> ids_;
  std::vector<SegmentInfo> segments_;
  std::unordered_map<SegmentId, std::size_t> index_;
};

// Decodes an id-encoded raster against its segment table. Strict mode
// rejects declared-vs-counted area mismatches; lenient mode recomputes.
inline PanopticLabelMap load_panoptic(const RgbIdPng& png,
                                      std::vector<SegmentInfo> segments,
                                      bool strict = true) {
  std::vector<SegmentId> ids;
  ids.reserve(static_cast<std::size_t>(png.width) * png.height);
  std::unordered_map<SegmentId, std::uint64_t> counted;
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      const Rgb c = png.at(x, y);
      const SegmentId id = decode_id(c.r, c.g, c.b);
      ids.push_back(id);
      if (id != kVoidId) ++counted[id];
    }
  }
  for (auto& seg : segments) {
    auto it = counted.find(seg.id);
    const std::uint64_t actual = it == counted.end() ? 0 : it->second;
    if (seg.area != actual) {
      if (strict)
        throw ConsistencyError("segment " + std::to_string(seg.id) +
                               ": declared area " + std::to_string(seg.area) +
                               " != counted area " + std::to_string(actual));
      seg.area = actual;
    }
    if (it != counted.end()) counted.erase(it);
  }
  if (!counted.empty())
    throw ConsistencyError("raster id " +
                           std::to_string(counted.begin()->first) +
                           " missing from segment table");
  return PanopticLabelMap(png.width, png.height, std::move(ids),
                          std::move(segments));
}

// Sparse confusion table keyed by (gt id, pred key). Void pixels on either
// side contribute nothing.
using IntersectionTable =
    std::map<std::pair<SegmentId, std::uint32_t>, std::uint64_t>;

inline IntersectionTable pairwise_intersections(const PanopticLabelMap& gt,
                                                const PanopticLabelMap& pred) {
  if (gt.width() != pred.width() || gt.height() != pred.height())
    throw FormatError("label map dimension mismatch");
  IntersectionTable table;
  const auto& a = gt.ids();
  const auto& b = pred.ids();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != kVoidId && b[i] != kVoidId) ++table[{a[i], b[i]}];
  }
  return table;
}

// Prediction side given as independent masks; key is the mask index.
inline IntersectionTable pairwise_intersections(
    const PanopticLabelMap& gt, const std::vector<BinaryMask>& preds) {
  IntersectionTable table;
  for (std::uint32_t p = 0; p < preds.size(); ++p) {
    const auto& mask = preds[p];
    if (gt.width() != mask.width() || gt.height() != mask.height())
      throw FormatError("mask dimension mismatch");
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) {
        if (!mask.get(x, y)) continue;
        const SegmentId id = gt.id_at(x, y);
        if (id != kVoidId) ++table[{id, p}];
      }
    }
  }
  return table;
}

}  // namespace panocap

#endif  // PANOCAP_PANOPTIC_HPP_
