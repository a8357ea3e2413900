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
#include <doctest.h>

#include <map>
#include <set>

#include "cadet/synthgen.hpp"

using namespace cadet;

namespace {

bool splits_identical(const DatasetSplit& a, const DatasetSplit& b) {
  if (a.images.size() != b.images.size()) return false;
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    const auto& x = a.images[i];
    const auto& y = b.images[i];
    if (x.id != y.id || !(x.pixels == y.pixels)) return false;
    if (x.instances.size() != y.instances.size()) return false;
    for (std::size_t k = 0; k < x.instances.size(); ++k) {
      const auto& p = x.instances[k];
      const auto& q = y.instances[k];
      if (!(p.bbox == q.bbox) || p.class_id != q.class_id || p.kind != q.kind)
        return false;
      if (p.mask.has_value() != q.mask.has_value()) return false;
      if (p.mask && !(*p.mask == *q.mask)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("zero images gives an empty split") {
  synth::SynthSpec spec;
  spec.num_images = 0;
  const DatasetSplit s = synth::generate(spec);
  CHECK(s.images.empty());
  CHECK(s.role == Role::kLabeled);
  REQUIRE(s.class_names.has_value());
  CHECK(s.class_names->size() == 11);
}

TEST_CASE("generation is deterministic in the spec") {
  synth::SynthSpec spec;
  spec.num_images = 12;
  spec.seed = 123;
  CHECK(splits_identical(synth::generate(spec), synth::generate(spec)));
}

TEST_CASE("masks partition the pixel grid") {
  synth::SynthSpec spec;
  spec.num_images = 20;
  spec.seed = 9;
  const DatasetSplit s = synth::generate(spec);
  for (const auto& im : s.images) {
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> cover =
        Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(im.height, im.width);
    for (const auto& inst : im.instances) {
      REQUIRE(inst.mask.has_value());
      for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
          if (inst.mask->grid(y, x)) cover(y, x) += 1;
    }
    // Every pixel covered exactly once: disjoint and exhaustive.
    CHECK((cover.array() == 1).all());
  }
}

TEST_CASE("boxes are tight around visible masks") {
  synth::SynthSpec spec;
  spec.num_images = 15;
  spec.seed = 21;
  const DatasetSplit s = synth::generate(spec);
  for (const auto& im : s.images)
    for (const auto& inst : im.instances) {
      const auto tb = tight_box(*inst.mask);
      REQUIRE(tb.has_value());
      CHECK(inst.bbox == *tb);
    }
}

TEST_CASE("golden snapshot of seed 7") {
  synth::SynthSpec spec;
  spec.seed = 7;
  spec.num_images = 100;
  spec.max_things = 5;
  const DatasetSplit s = synth::generate(spec);
  CHECK(s.instance_count() == 447);
  std::map<int, int> hist;
  for (const auto& im : s.images)
    for (const auto& inst : im.instances) hist[*inst.class_id] += 1;
  const std::map<int, int> expected = {{0, 29}, {1, 32}, {2, 27}, {3, 32},
                                       {4, 33}, {5, 17}, {6, 29}, {7, 26},
                                       {8, 22}, {9, 100}, {10, 100}};
  CHECK(hist == expected);
}

TEST_CASE("derive_unlabeled strips labels and keeps pixels") {
  synth::SynthSpec spec;
  spec.num_images = 10;
  spec.seed = 4;
  const DatasetSplit labeled = synth::generate(spec);
  const DatasetSplit unlabeled = synth::derive_unlabeled(labeled);
  CHECK(unlabeled.role == Role::kUnlabeled);
  REQUIRE(unlabeled.images.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(unlabeled.images[i].instances.empty());
    CHECK(unlabeled.images[i].pixels == labeled.images[i].pixels);
    CHECK(unlabeled.images[i].id != labeled.images[i].id);
  }
  // Id sets are disjoint.
  std::set<std::string> ids;
  for (const auto& im : labeled.images) ids.insert(im.id);
  for (const auto& im : unlabeled.images) CHECK(ids.count(im.id) == 0);

  CHECK_THROWS_AS(synth::derive_unlabeled(unlabeled), Error);
}

TEST_CASE("generated splits validate and stay in range") {
  synth::SynthSpec spec;
  spec.num_images = 8;
  spec.noise = 0.3;  // heavy noise still clamps into [0, 1]
  const DatasetSplit s = synth::generate(spec);
  validate_split(s);
  for (const auto& im : s.images)
    for (const auto& plane : im.pixels.planes) {
      CHECK(plane.minCoeff() >= 0.0f);
      CHECK(plane.maxCoeff() <= 1.0f);
    }
}

TEST_CASE("spec validation rejects bad inputs") {
  synth::SynthSpec spec;
  spec.height = 16;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = synth::SynthSpec{};
  spec.max_thing_size = 80;
  CHECK_THROWS_AS(spec.validate(), Error);
}
