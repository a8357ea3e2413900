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
#include "cadet/augment.hpp"

#include <cmath>

#include "cadet/error.hpp"

namespace cadet::aug {

AugMode parse_aug_mode(const std::string& s) {
  if (s == "weak") return AugMode::kWeak;
  if (s == "strong") return AugMode::kStrong;
  throw Error("augment mode must be weak or strong, got \"" + s + "\"");
}

std::string aug_mode_name(AugMode m) {
  return m == AugMode::kWeak ? "weak" : "strong";
}

AugmentDraw sample_draw(const AugmentPolicy& policy, Rng& rng) {
  AugmentDraw d;
  if (policy.mode == AugMode::kWeak) {
    require(!policy.weak_scales.empty(), "augment policy: empty weak scale set");
    d.scale = policy.weak_scales[rng.uniform_index(policy.weak_scales.size())];
  } else {
    d.scale = rng.uniform(policy.strong_scale_lo, policy.strong_scale_hi);
    d.brightness = rng.uniform(-policy.brightness, policy.brightness);
    d.contrast = rng.uniform(policy.contrast_lo, policy.contrast_hi);
  }
  require(d.scale > 0, "augment draw: scale must be positive");
  return d;
}

Mat<float> resize_bilinear(const Mat<float>& src, int oh, int ow) {
  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  Mat<float> dst(oh, ow);
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int i = 0; i < oh; ++i) {
    const double fy = (i + 0.5) * sy - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, h - 1);
    const int y1 = std::clamp(y0 + 1, 0, h - 1);
    const double wy = std::clamp(fy - std::floor(fy), 0.0, 1.0);
    for (int j = 0; j < ow; ++j) {
      const double fx = (j + 0.5) * sx - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, w - 1);
      const int x1 = std::clamp(x0 + 1, 0, w - 1);
      const double wx = std::clamp(fx - std::floor(fx), 0.0, 1.0);
      const double v = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                       wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
      dst(i, j) = static_cast<float>(v);
    }
  }
  return dst;
}

namespace {

MaskGrid resize_nearest(const MaskGrid& src, int oh, int ow) {
  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  MaskGrid dst(oh, ow);
  for (int i = 0; i < oh; ++i) {
    const int y = std::min(h - 1, static_cast<int>((i + 0.5) * h / oh));
    for (int j = 0; j < ow; ++j) {
      const int x = std::min(w - 1, static_cast<int>((j + 0.5) * w / ow));
      dst(i, j) = src(y, x);
    }
  }
  return dst;
}

}  // namespace

AnnotatedImage apply(const AugmentPolicy& policy, const AnnotatedImage& image,
                     const AugmentDraw& draw) {
  (void)policy;
  const bool photometric_identity = draw.brightness == 0.0 && draw.contrast == 1.0;
  if (draw.scale == 1.0 && photometric_identity) return image;

  AnnotatedImage out;
  out.id = image.id;

  if (draw.scale == 1.0) {
    out.width = image.width;
    out.height = image.height;
    out.pixels = image.pixels;
    out.instances = image.instances;
  } else {
    out.width = std::max(1, static_cast<int>(std::lround(image.width * draw.scale)));
    out.height = std::max(1, static_cast<int>(std::lround(image.height * draw.scale)));
    const double sx = static_cast<double>(out.width) / image.width;
    const double sy = static_cast<double>(out.height) / image.height;
    if (image.has_pixels()) {
      out.pixels.planes.reserve(image.pixels.planes.size());
      for (const auto& plane : image.pixels.planes)
        out.pixels.planes.push_back(resize_bilinear(plane, out.height, out.width));
    }
    for (const Instance& inst : image.instances) {
      Instance scaled = inst;
      if (inst.mask) {
        Mask m;
        m.grid = resize_nearest(inst.mask->grid, out.height, out.width);
        const auto tb = tight_box(m);
        if (!tb) continue;  // vanished below one pixel
        scaled.mask = std::move(m);
        scaled.bbox = *tb;
      } else {
        scaled.bbox = BBox{inst.bbox.x1 * sx, inst.bbox.y1 * sy,
                           inst.bbox.x2 * sx, inst.bbox.y2 * sy}
                          .clipped(out.width, out.height);
        if (!scaled.bbox.valid() || scaled.bbox.area() < 1.0) continue;
      }
      out.instances.push_back(std::move(scaled));
    }
  }

  if (!photometric_identity && out.has_pixels()) {
    for (auto& plane : out.pixels.planes)
      plane = (((plane.array() - 0.5f) * static_cast<float>(draw.contrast)) +
               0.5f + static_cast<float>(draw.brightness))
                  .cwiseMax(0.0f)
                  .cwiseMin(1.0f)
                  .matrix();
  }
  return out;
}

}  // namespace cadet::aug
