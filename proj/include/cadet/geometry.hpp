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
#ifndef CADET_GEOMETRY_HPP_
#define CADET_GEOMETRY_HPP_

#include <algorithm>

namespace cadet {

// Axis-aligned box in continuous pixel coordinates, corner convention
// (x1, y1) top-left exclusive of nothing, (x2, y2) bottom-right.
// Valid boxes have x2 > x1 and y2 > y1. The file codec converts from the
// COCO xywh convention at the boundary; everything in memory is xyxy.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool valid() const { return x2 > x1 && y2 > y1; }

  bool contains(double x, double y) const {
    return x >= x1 && x <= x2 && y >= y1 && y <= y2;
  }

  // Clip to the [0, w] x [0, h] extent of an image.
  BBox clipped(double w, double h) const {
    return BBox{std::clamp(x1, 0.0, w), std::clamp(y1, 0.0, h),
                std::clamp(x2, 0.0, w), std::clamp(y2, 0.0, h)};
  }
};

inline double intersection_area(const BBox& a, const BBox& b) {
  const double iw =
      std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih =
      std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  return iw * ih;
}

inline double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

inline bool operator==(const BBox& a, const BBox& b) {
  return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
}

}  // namespace cadet

#endif  // CADET_GEOMETRY_HPP_
