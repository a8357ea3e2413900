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
#ifndef CADET_DATASET_HPP_
#define CADET_DATASET_HPP_

#include <optional>
#include <string>
#include <vector>

#include "cadet/geometry.hpp"
#include "cadet/mask.hpp"
#include "cadet/tensor.hpp"

namespace cadet {

enum class Kind { kThing, kStuff };

// One labeled or predicted region. A missing class_id means the label is
// class-agnostic; a present score means the instance is a prediction.
struct Instance {
  BBox bbox;
  std::optional<Mask> mask;
  std::optional<int> class_id;   // non-negative
  std::optional<double> score;   // in [0, 1]
  Kind kind = Kind::kThing;
};

struct AnnotatedImage {
  std::string id;
  int width = 0;
  int height = 0;
  Image pixels;  // 3 x height x width in [0, 1]; may be empty when only
                 // annotations were loaded
  std::vector<Instance> instances;

  bool has_pixels() const { return !pixels.empty(); }
};

enum class Role { kLabeled, kUnlabeled, kPseudo };

std::string role_name(Role role);

struct DatasetSplit {
  Role role = Role::kLabeled;
  std::vector<AnnotatedImage> images;
  std::optional<std::vector<std::string>> class_names;

  std::size_t instance_count() const {
    std::size_t n = 0;
    for (const auto& im : images) n += im.instances.size();
    return n;
  }
};

// Pixel-side tolerance for the mask/box consistency invariant: when an
// instance carries a mask, its box must be the mask's tight box to within
// one pixel per side.
inline constexpr double kTightBoxTolerance = 1.0;

// Checks every structural invariant of a split and throws Error with the
// offending image id and field on the first violation. Every pipeline stage
// calls this on entry.
//  - ids unique; instance geometry inside [0, W] x [0, H]; boxes valid
//  - mask dims match the image; mask/box tight within kTightBoxTolerance
//  - unlabeled: no instances; pseudo: >= 1 instance per image and scores
//    uniformly present (fresh pseudo labels) or uniformly absent (binarized)
//  - labeled: no scores
void validate_split(const DatasetSplit& split);

// True when every instance of every image satisfies pred.
template <typename Pred>
bool all_instances(const DatasetSplit& split, Pred pred) {
  for (const auto& im : split.images)
    for (const auto& inst : im.instances)
      if (!pred(inst)) return false;
  return true;
}

}  // namespace cadet

#endif  // CADET_DATASET_HPP_
