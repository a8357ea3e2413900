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
#ifndef CADET_SYNTHGEN_HPP_
#define CADET_SYNTHGEN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cadet/dataset.hpp"

namespace cadet::synth {

// Deterministic shape-scene generator. Each image is two stuff bands (sky
// over ground) with up to max_things colored shapes drawn over them; later
// shapes occlude earlier ones and stored masks reflect visibility, so the
// instance masks of an image always partition the pixel grid.
struct SynthSpec {
  int height = 64;
  int width = 64;
  int num_images = 100;
  int max_things = 4;   // per-image count drawn uniformly from {0..max_things}
  double noise = 0.05;  // additive gaussian amplitude on pixels
  std::uint64_t seed = 7;

  std::vector<std::string> shapes = {"circle", "square", "triangle"};
  std::vector<std::string> colors = {"red", "green", "blue"};
  std::vector<std::string> stuff = {"sky", "ground"};
  double min_thing_size = 12.0;
  double max_thing_size = 26.0;
  std::string id_prefix = "im";

  // Thing class id = shape_index * colors.size() + color_index; stuff class
  // ids follow after all thing classes.
  int num_thing_classes() const {
    return static_cast<int>(shapes.size() * colors.size());
  }
  int num_classes() const {
    return num_thing_classes() + static_cast<int>(stuff.size());
  }
  std::vector<std::string> class_names() const;

  void validate() const;
};

// Labeled split with exact boxes, pixel-true visibility masks and class ids
// for every thing, plus stuff-band masks covering all remaining pixels.
// Fully determined by the spec (per-image streams are derived from
// (seed, image index), so any evaluation order gives identical output).
DatasetSplit generate(const SynthSpec& spec);

// Same images, no instances, ids suffixed "-u" so they can never collide
// with the labeled split they were derived from.
DatasetSplit derive_unlabeled(const DatasetSplit& labeled);

}  // namespace cadet::synth

#endif  // CADET_SYNTHGEN_HPP_
