/* Copyright 2026 The Cadet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "cadet/mask.hpp"

#include <algorithm>
#include <cmath>

#include "cadet/error.hpp"

namespace cadet {

std::optional<BBox> tight_box(const Mask& m) {
  int min_x = m.width(), max_x = -1, min_y = m.height(), max_y = -1;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.grid(y, x)) continue;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) return std::nullopt;
  return BBox{static_cast<double>(min_x), static_cast<double>(min_y),
              static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)};
}

long mask_intersection(const Mask& a, const Mask& b) {
  return (a.grid.array().min(b.grid.array())).cast<long>().sum();
}

double mask_iou(const Mask& a, const Mask& b) {
  const long inter = mask_intersection(a, b);
  const long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<std::uint32_t> rle_encode(const Mask& m) {
  std::vector<std::uint32_t> counts;
  std::uint8_t current = 0;  // runs start with a zero count
  std::uint32_t run = 0;
  for (int x = 0; x < m.width(); ++x) {    // column-major scan
    for (int y = 0; y < m.height(); ++y) {
      const std::uint8_t v = m.grid(y, x) ? 1 : 0;
      if (v == current) {
        ++run;
      } else {
        counts.push_back(run);
        current = v;
        run = 1;
      }
    }
  }
  counts.push_back(run);
  if (counts.empty()) counts.push_back(0);
  return counts;
}

Mask rle_decode(const std::vector<std::uint32_t>& counts, int height, int width) {
  Mask m(height, width);
  long pos = 0;
  std::uint8_t value = 0;
  const long total = static_cast<long>(height) * width;
  for (std::uint32_t c : counts) {
    for (std::uint32_t k = 0; k < c; ++k) {
      require(pos < total, "rle_decode: counts exceed mask size ", height, "x", width);
      m.grid(static_cast<int>(pos % height), static_cast<int>(pos / height)) = value;
      ++pos;
    }
    value = value ? 0 : 1;
  }
  require(pos == total, "rle_decode: counts cover ", pos, " of ", total, " pixels");
  return m;
}

// Variable-length encoding of the counts array, storing differences
// cnts[i] - cnts[i-2] from the third element on, 5 bits per output char
// offset by 48. Matches the reference COCO mask string codec bit for bit.
std::string rle_counts_to_string(const std::vector<std::uint32_t>& counts) {
  std::string s;
  s.reserve(counts.size() * 6);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    long x = static_cast<long>(counts[i]);
    if (i > 2) x -= static_cast<long>(counts[i - 2]);
    bool more = true;
    while (more) {
      char c = static_cast<char>(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      c += 48;
      s.push_back(c);
    }
  }
  return s;
}

std::vector<std::uint32_t> rle_string_to_counts(const std::string& s) {
  std::vector<std::uint32_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    long x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      require(p < s.size(), "rle string truncated at byte ", p);
      const char c = static_cast<char>(s[p] - 48);
      x |= static_cast<long>(c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1L << (5 * k);
    }
    if (counts.size() > 2) x += static_cast<long>(counts[counts.size() - 2]);
    require(x >= 0, "rle string decodes to a negative run length");
    counts.push_back(static_cast<std::uint32_t>(x));
  }
  return counts;
}

Mask rasterize_polygon(const std::vector<double>& points, int height, int width) {
  require(points.size() >= 6 && points.size() % 2 == 0,
          "polygon needs at least 3 (x, y) pairs, got ", points.size(), " values");
  const int n = static_cast<int>(points.size() / 2);
  Mask m(height, width);
  for (int y = 0; y < height; ++y) {
    const double py = y + 0.5;
    // Collect x crossings of the horizontal line through the pixel centers.
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) {
      const double x0 = points[2 * i], y0 = points[2 * i + 1];
      const double x1 = points[2 * ((i + 1) % n)], y1 = points[2 * ((i + 1) % n) + 1];
      if ((y0 <= py) == (y1 <= py)) continue;
      xs.push_back(x0 + (py - y0) / (y1 - y0) * (x1 - x0));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      const int x_begin = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
      const int x_end = std::min(width - 1, static_cast<int>(std::floor(xs[i + 1] - 0.5)));
      for (int x = x_begin; x <= x_end; ++x) m.grid(y, x) = 1;
    }
  }
  return m;
}

}  // namespace cadet
