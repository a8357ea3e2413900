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
#ifndef CADET_MASK_HPP_
#define CADET_MASK_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cadet/geometry.hpp"

namespace cadet {

using MaskGrid =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Binary mask over an image grid. Stored dense in memory; files carry the
// COCO-style compressed RLE (see rle_* below).
struct Mask {
  MaskGrid grid;  // values 0/1, grid(y, x)

  Mask() = default;
  Mask(int height, int width) : grid(MaskGrid::Zero(height, width)) {}

  int height() const { return static_cast<int>(grid.rows()); }
  int width() const { return static_cast<int>(grid.cols()); }
  long area() const { return grid.cast<long>().sum(); }
  bool empty_mask() const { return area() == 0; }
};

inline bool operator==(const Mask& a, const Mask& b) {
  return a.grid.rows() == b.grid.rows() && a.grid.cols() == b.grid.cols() &&
         a.grid == b.grid;
}

// Tight integer bounding box of the set pixels, as a BBox in pixel
// coordinates (pixel (y, x) covers [x, x+1] x [y, y+1]). Empty mask -> nullopt.
std::optional<BBox> tight_box(const Mask& m);

long mask_intersection(const Mask& a, const Mask& b);
double mask_iou(const Mask& a, const Mask& b);

// Column-major run-length encoding, first run counting zeros. This is the
// de-facto COCO convention; the string form below round-trips bit-exactly
// against files produced by the reference tooling.
std::vector<std::uint32_t> rle_encode(const Mask& m);
Mask rle_decode(const std::vector<std::uint32_t>& counts, int height, int width);

std::string rle_counts_to_string(const std::vector<std::uint32_t>& counts);
std::vector<std::uint32_t> rle_string_to_counts(const std::string& s);

// Even-odd scanline fill sampled at pixel centers. Points are a flat
// [x0, y0, x1, y1, ...] list. Used when reading polygon segmentations.
Mask rasterize_polygon(const std::vector<double>& points, int height, int width);

}  // namespace cadet

#endif  // CADET_MASK_HPP_
