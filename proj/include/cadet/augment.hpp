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
#ifndef CADET_AUGMENT_HPP_
#define CADET_AUGMENT_HPP_

#include <vector>

#include "cadet/dataset.hpp"
#include "cadet/rng.hpp"

namespace cadet::aug {

enum class AugMode { kWeak, kStrong };

AugMode parse_aug_mode(const std::string& s);
std::string aug_mode_name(AugMode m);

// Weak: multi-scale training over a fixed scale set. Strong: continuous
// scale jitter plus brightness/contrast jitter. Geometry and photometry are
// strictly separated: scale moves pixels, boxes and masks together;
// brightness/contrast touch pixels only.
struct AugmentPolicy {
  AugMode mode = AugMode::kWeak;
  std::vector<double> weak_scales = {0.75, 1.0, 1.25};
  double strong_scale_lo = 0.5, strong_scale_hi = 1.5;
  double brightness = 0.2;                       // delta ~ U[-b, b]
  double contrast_lo = 0.75, contrast_hi = 1.25; // factor ~ U[lo, hi]
};

struct AugmentDraw {
  double scale = 1.0;
  double brightness = 0.0;  // additive, applied after contrast
  double contrast = 1.0;    // multiplicative around 0.5
};

// Draw order is fixed (scale, brightness, contrast) so streams are stable.
AugmentDraw sample_draw(const AugmentPolicy& policy, Rng& rng);

// Pure given the draw. The identity draw returns the input unchanged.
// Pixels are resampled bilinearly, masks nearest-neighbour, and each
// instance box is retightened to its resampled mask; instances whose
// post-transform area falls below one pixel are dropped.
AnnotatedImage apply(const AugmentPolicy& policy, const AnnotatedImage& image,
                     const AugmentDraw& draw);

// Bilinear resize with half-pixel centers; exposed for tests.
Mat<float> resize_bilinear(const Mat<float>& src, int oh, int ow);

}  // namespace cadet::aug

#endif  // CADET_AUGMENT_HPP_
