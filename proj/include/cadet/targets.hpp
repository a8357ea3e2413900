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
#ifndef CADET_TARGETS_HPP_
#define CADET_TARGETS_HPP_

#include <limits>

#include "cadet/dataset.hpp"
#include "cadet/detector.hpp"

namespace cadet::det {

using IntGrid = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-location supervision for one pyramid level.
//   cls:  0 = background, otherwise 1-based class index (always 1 when the
//         labels are class-agnostic)
//   ltrb: box offset targets in pixels, defined at positive locations
//   ctr:  centerness target in [0, 1]
//   inst: index of the assigned instance in the image, -1 at background
template <typename S>
struct LevelTargets {
  IntGrid cls;
  PlaneStack<S> ltrb;
  Mat<S> ctr;
  IntGrid inst;
};

template <typename S>
struct TargetMap {
  std::vector<LevelTargets<S>> levels;
  int num_pos = 0;
};

// FCOS-style assignment: a location is positive iff it falls inside an
// instance box and its max offset lies in the level's scale range
// (lo <= max < hi); when several boxes contain it, the smallest area wins,
// with ties broken towards the earliest instance. The centerness target is
// sqrt(min(l,r)/max(l,r) * min(t,b)/max(t,b)).
template <typename S>
TargetMap<S> assign_targets(const AnnotatedImage& im, const DetectorConfig& cfg,
                            Mode mode) {
  cfg.validate();
  TargetMap<S> tm;
  tm.levels.resize(static_cast<std::size_t>(cfg.num_levels()));
  const int hp = internal::pad_to(im.height, cfg.max_stride());
  const int wp = internal::pad_to(im.width, cfg.max_stride());

  for (int li = 0; li < cfg.num_levels(); ++li) {
    auto& lt = tm.levels[static_cast<std::size_t>(li)];
    const int stride = cfg.stride(li);
    const int gh = hp / stride, gw = wp / stride;
    lt.cls = IntGrid::Zero(gh, gw);
    lt.inst = IntGrid::Constant(gh, gw, -1);
    lt.ltrb.resize(4, gh, gw);
    lt.ctr = Mat<S>::Zero(gh, gw);
    const ScaleRange range = cfg.scale_ranges[static_cast<std::size_t>(li)];

    for (int i = 0; i < gh; ++i) {
      for (int j = 0; j < gw; ++j) {
        const double x = (j + 0.5) * stride;
        const double y = (i + 0.5) * stride;
        int best = -1;
        double best_area = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < im.instances.size(); ++k) {
          const BBox& b = im.instances[k].bbox;
          if (!b.contains(x, y)) continue;
          const double max_off = std::max(std::max(x - b.x1, b.x2 - x),
                                          std::max(y - b.y1, b.y2 - y));
          if (max_off < range.lo || max_off >= range.hi) continue;
          if (b.area() < best_area) {
            best_area = b.area();
            best = static_cast<int>(k);
          }
        }
        if (best < 0) continue;
        const Instance& inst = im.instances[static_cast<std::size_t>(best)];
        const BBox& b = inst.bbox;
        const double l = x - b.x1, t = y - b.y1, r = b.x2 - x, bt = b.y2 - y;
        int cls_index = 1;
        if (mode == Mode::kSpecific) {
          require(inst.class_id.has_value(), "image ", im.id,
                  ": class-specific targets need class ids");
          cls_index = *inst.class_id + 1;
        }
        lt.cls(i, j) = cls_index;
        lt.inst(i, j) = best;
        lt.ltrb[0](i, j) = static_cast<S>(l);
        lt.ltrb[1](i, j) = static_cast<S>(t);
        lt.ltrb[2](i, j) = static_cast<S>(r);
        lt.ltrb[3](i, j) = static_cast<S>(bt);
        const double cx = std::max(l, r) > 0 ? std::min(l, r) / std::max(l, r) : 0.0;
        const double cy = std::max(t, bt) > 0 ? std::min(t, bt) / std::max(t, bt) : 0.0;
        lt.ctr(i, j) = static_cast<S>(std::sqrt(cx * cy));
        ++tm.num_pos;
      }
    }
  }
  return tm;
}

}  // namespace cadet::det

#endif  // CADET_TARGETS_HPP_
