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
#include "cadet/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "cadet/error.hpp"

namespace cadet {

std::string role_name(Role role) {
  switch (role) {
    case Role::kLabeled:
      return "labeled";
    case Role::kUnlabeled:
      return "unlabeled";
    case Role::kPseudo:
      return "pseudo";
  }
  return "?";
}

namespace {

void validate_instance(const AnnotatedImage& im, std::size_t idx,
                       const Instance& inst) {
  const auto where = [&](const char* field) {
    return std::string("image ") + im.id + " instance " +
           std::to_string(idx) + ": " + field;
  };
  require(inst.bbox.valid(), where("bbox"), " has non-positive area");
  require(inst.bbox.x1 >= 0 && inst.bbox.y1 >= 0 &&
              inst.bbox.x2 <= im.width && inst.bbox.y2 <= im.height,
          where("bbox"), " extends outside the image");
  if (inst.class_id) require(*inst.class_id >= 0, where("class_id"), " is negative");
  if (inst.score)
    require(*inst.score >= 0.0 && *inst.score <= 1.0, where("score"),
            " outside [0, 1]");
  if (inst.mask) {
    require(inst.mask->height() == im.height && inst.mask->width() == im.width,
            where("mask"), " dims ", inst.mask->width(), "x",
            inst.mask->height(), " != image ", im.width, "x", im.height);
    const auto tb = tight_box(*inst.mask);
    require(tb.has_value(), where("mask"), " is empty");
    require(std::abs(tb->x1 - inst.bbox.x1) <= kTightBoxTolerance &&
                std::abs(tb->y1 - inst.bbox.y1) <= kTightBoxTolerance &&
                std::abs(tb->x2 - inst.bbox.x2) <= kTightBoxTolerance &&
                std::abs(tb->y2 - inst.bbox.y2) <= kTightBoxTolerance,
            where("bbox"), " not tight around mask");
  }
}

}  // namespace

void validate_split(const DatasetSplit& split) {
  std::unordered_set<std::string> ids;
  for (const auto& im : split.images) {
    require(!im.id.empty(), "image with empty id");
    require(ids.insert(im.id).second, "image ", im.id, ": duplicate id");
    require(im.width > 0 && im.height > 0, "image ", im.id, ": empty extent");
    if (im.has_pixels()) {
      require(im.pixels.height() == im.height && im.pixels.width() == im.width,
              "image ", im.id, ": pixels do not match declared extent");
      for (const auto& p : im.pixels.planes)
        require(p.minCoeff() >= 0.0f && p.maxCoeff() <= 1.0f, "image ", im.id,
                ": pixels outside [0, 1]");
    }
    for (std::size_t i = 0; i < im.instances.size(); ++i)
      validate_instance(im, i, im.instances[i]);

    switch (split.role) {
      case Role::kUnlabeled:
        require(im.instances.empty(), "image ", im.id,
                ": unlabeled split carries instances");
        break;
      case Role::kPseudo:
        require(!im.instances.empty(), "image ", im.id,
                ": pseudo split image has no instances");
        break;
      case Role::kLabeled:
        for (const auto& inst : im.instances)
          require(!inst.score.has_value(), "image ", im.id,
                  ": labeled split instance carries a score");
        break;
    }
  }
  if (split.role == Role::kPseudo) {
    // Fresh pseudo labels are uniformly scored; binarized ones uniformly not.
    bool any_scored = false, any_unscored = false;
    for (const auto& im : split.images)
      for (const auto& inst : im.instances)
        (inst.score ? any_scored : any_unscored) = true;
    require(!(any_scored && any_unscored),
            "pseudo split mixes scored and unscored instances");
  }
}

}  // namespace cadet
