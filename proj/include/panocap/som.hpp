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

#ifndef PANOCAP_SOM_HPP_
#define PANOCAP_SOM_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "panocap/errors.hpp"
#include "panocap/panoptic.hpp"

namespace panocap {

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

using Polyline = std::vector<Point>;

// Border following after Suzuki & Abe: emits one closed polyline per outer
// border and one per hole border; every vertex is a mask border pixel.
inline std::vector<Polyline> trace_boundary(const BinaryMask& mask) {
  if (mask.empty()) throw FormatError("cannot trace an empty mask");
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::vector<int>> f(h, std::vector<int>(w, 0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f[y][x] = mask.get(x, y) ? 1 : 0;

  auto at = [&](int y, int x) -> int {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0;
    return f[y][x];
  };

  // Clockwise 8-neighborhood starting east.
  static constexpr std::array<std::array<int, 2>, 8> kDirs = {{
      {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}}};
  auto dir_index = [&](int cy, int cx, int ny, int nx) {
    for (int d = 0; d < 8; ++d)
      if (cy + kDirs[d][0] == ny && cx + kDirs[d][1] == nx) return d;
    return -1;
  };

  std::vector<Polyline> contours;
  int nbd = 1;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      int i2, j2;
      if (f[i][j] == 1 && at(i, j - 1) == 0) {
        i2 = i; j2 = j - 1;          // outer border start
      } else if (f[i][j] >= 1 && at(i, j + 1) == 0) {
        i2 = i; j2 = j + 1;          // hole border start
      } else {
        continue;
      }
      ++nbd;

      Polyline contour;
      const int start_d = dir_index(i, j, i2, j2);
      int d = start_d;
      int i1 = -1, j1 = -1;
      for (int k = 1; k <= 8; ++k) {  // clockwise scan for first nonzero
        const int dd = (d + k) % 8;
        const int ny = i + kDirs[dd][0], nx = j + kDirs[dd][1];
        if (at(ny, nx) != 0) {
          i1 = ny; j1 = nx;
          break;
        }
      }
      if (i1 < 0) {  // isolated pixel
        f[i][j] = -nbd;
        contours.push_back({{j, i}});
        continue;
      }

      i2 = i1; j2 = j1;
      int i3 = i, j3 = j;
      while (true) {
        contour.push_back({j3, i3});
        // Counterclockwise scan from the neighbor after (i2, j2).
        const int from = dir_index(i3, j3, i2, j2);
        int i4 = -1, j4 = -1;
        bool examined_east_zero = false;
        for (int k = 1; k <= 8; ++k) {
          const int dd = ((from - k) % 8 + 8) % 8;
          const int ny = i3 + kDirs[dd][0], nx = j3 + kDirs[dd][1];
          if (at(ny, nx) != 0) {
            i4 = ny; j4 = nx;
            break;
          }
          if (ny == i3 && nx == j3 + 1) examined_east_zero = true;
        }
        if (examined_east_zero) {
          f[i3][j3] = -nbd;
        } else if (f[i3][j3] == 1) {
          f[i3][j3] = nbd;
        }
        if (i4 == i && j4 == j && i3 == i1 && j3 == j1) break;
        i2 = i3; j2 = j3;
        i3 = i4; j3 = j4;
      }
      contours.push_back(std::move(contour));
    }
  }
  return contours;
}

namespace detail {

// Felzenszwalb-Huttenlocher exact 1-D squared distance transform.
inline void edt_1d(const std::vector<double>& in, std::vector<double>& out) {
  const int n = static_cast<int>(in.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((in[q] + q * q) - (in[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    out[q] = (q - v[k]) * static_cast<double>(q - v[k]) + in[v[k]];
  }
}

}  // namespace detail

// Exact squared Euclidean distance to the mask complement; pixels outside the
// image count as complement, so a full-frame mask peaks at its center.
inline std::vector<double> distance_to_complement_sq(const BinaryMask& mask) {
  const int w = mask.width() + 2;
  const int h = mask.height() + 2;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.get(x, y)) grid[(y + 1) * static_cast<std::size_t>(w) + x + 1] = inf;

  std::vector<double> col_in(h), col_out(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col_in[y] = grid[y * static_cast<std::size_t>(w) + x];
    detail::edt_1d(col_in, col_out);
    for (int y = 0; y < h; ++y) grid[y * static_cast<std::size_t>(w) + x] = col_out[y];
  }
  std::vector<double> row_in(w), row_out(w);
  std::vector<double> result(static_cast<std::size_t>(mask.width()) * mask.height());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row_in[x] = grid[y * static_cast<std::size_t>(w) + x];
    detail::edt_1d(row_in, row_out);
    if (y >= 1 && y <= mask.height())
      for (int x = 1; x <= mask.width(); ++x)
        result[(y - 1) * static_cast<std::size_t>(mask.width()) + x - 1] =
            row_out[x];
  }
  return result;
}

// Interior pole: the mask pixel farthest from the complement. Ties break on
// the lowest row, then the lowest column.
inline Point anchor_point(const BinaryMask& mask) {
  if (mask.empty()) throw FormatError("cannot anchor an empty mask");
  const std::vector<double> dist = distance_to_complement_sq(mask);
  Point best{0, 0};
  double best_d = -1.0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const double d = dist[y * static_cast<std::size_t>(mask.width()) + x];
      if (mask.get(x, y) && d > best_d) {
        best_d = d;
        best = {x, y};
      }
    }
  }
  return best;
}

struct MarkedSegment {
  SegmentId segment_id = 0;
  int display_id = 0;
  Point anchor;
  Rgb color;
  std::vector<Polyline> boundary;
};

struct MarkOverlay {
  std::vector<MarkedSegment> segments;
};

// Bright, high-saturation hue cycle.
inline const std::vector<Rgb>& mark_palette() {
  static const std::vector<Rgb> palette = {
      {255, 40, 40},  {40, 255, 40},   {80, 120, 255}, {255, 255, 40},
      {255, 40, 255}, {40, 255, 255},  {255, 150, 40}, {150, 255, 40},
      {255, 40, 150}, {140, 220, 255},
  };
  return palette;
}

namespace detail {

// 5x7 digit glyphs, one bit per pixel, rows top to bottom.
inline const std::array<std::array<std::uint8_t, 7>, 10>& digit_font() {
  static const std::array<std::array<std::uint8_t, 7>, 10> font = {{
      {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e},  // 0
      {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e},  // 1
      {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f},  // 2
      {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e},  // 3
      {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02},  // 4
      {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e},  // 5
      {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e},  // 6
      {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
      {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e},  // 8
      {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c},  // 9
  }};
  return font;
}

inline double luminance(Rgb c) {
  return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
}

inline double local_background_luminance(const RgbIdPng& image, Point p) {
  double sum = 0.0;
  int n = 0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      const int x = p.x + dx, y = p.y + dy;
      if (x < 0 || x >= image.width || y < 0 || y >= image.height) continue;
      sum += luminance(image.at(x, y));
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / n;
}

inline void draw_digits(RgbIdPng& image, Point anchor, int value, Rgb color,
                        int scale) {
  const std::string digits = std::to_string(value);
  const int glyph_w = 5 * scale, glyph_h = 7 * scale, gap = scale;
  const int total_w =
      static_cast<int>(digits.size()) * (glyph_w + gap) - gap;
  int x0 = anchor.x - total_w / 2;
  int y0 = anchor.y - glyph_h / 2;
  x0 = std::clamp(x0, 0, std::max(0, image.width - total_w));
  y0 = std::clamp(y0, 0, std::max(0, image.height - glyph_h));
  auto plot = [&](int x, int y, Rgb c) {
    if (x >= 0 && x < image.width && y >= 0 && y < image.height)
      image.set(x, y, c);
  };
  for (std::size_t d = 0; d < digits.size(); ++d) {
    const auto& glyph = digit_font()[digits[d] - '0'];
    const int gx = x0 + static_cast<int>(d) * (glyph_w + gap);
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (!(glyph[row] & (1u << (4 - col)))) continue;
        for (int sy = 0; sy < scale; ++sy)
          for (int sx = 0; sx < scale; ++sx) {
            const int px = gx + col * scale + sx;
            const int py = y0 + row * scale + sy;
            // One-pixel dark outline keeps the id legible on bright areas.
            for (int oy = -1; oy <= 1; ++oy)
              for (int ox = -1; ox <= 1; ++ox)
                if (ox || oy) {
                  const int qx = px + ox, qy = py + oy;
                  if (qx >= 0 && qx < image.width && qy >= 0 &&
                      qy < image.height) {
                    const Rgb cur = image.at(qx, qy);
                    bool is_glyph = false;
                    // Crude check: only outline over non-glyph pixels.
                    is_glyph = cur == color;
                    if (!is_glyph) plot(qx, qy, Rgb{0, 0, 0});
                  }
                }
            plot(px, py, color);
          }
      }
    }
  }
}

}  // namespace detail

struct RenderResult {
  RgbIdPng image;
  MarkOverlay overlay;
};

// Strokes every segment boundary and stamps its display id at the interior
// pole. Deterministic for a fixed input and palette.
inline RenderResult render_marks(const RgbIdPng& image,
                                 const PanopticLabelMap& map) {
  if (image.width != map.width() || image.height != map.height())
    throw FormatError("image and panoptic map dimensions differ");
  RenderResult out;
  out.image = image;
  const auto& palette = mark_palette();
  const int scale =
      std::max(1, std::min(image.width, image.height) / 128);
  int display_id = 0;
  std::size_t hue = 0;
  for (const auto& seg : map.segments()) {
    ++display_id;
    const BinaryMask mask = map.mask_of(seg.id);
    const Point anchor = anchor_point(mask);
    // Pick the next hue with enough contrast against the local background.
    const double bg = detail::local_background_luminance(image, anchor);
    Rgb color = palette[hue % palette.size()];
    for (std::size_t tries = 0; tries < palette.size(); ++tries) {
      color = palette[(hue + tries) % palette.size()];
      if (std::abs(detail::luminance(color) - bg) >= 60.0) {
        hue += tries;
        break;
      }
    }
    ++hue;

    MarkedSegment marked;
    marked.segment_id = seg.id;
    marked.display_id = display_id;
    marked.anchor = anchor;
    marked.color = color;
    marked.boundary = trace_boundary(mask);
    for (const auto& loop : marked.boundary)
      for (const auto& p : loop) out.image.set(p.x, p.y, color);
    detail::draw_digits(out.image, anchor, display_id, color, scale);
    out.overlay.segments.push_back(std::move(marked));
  }
  return out;
}

}  // namespace panocap

#endif  // PANOCAP_SOM_HPP_
