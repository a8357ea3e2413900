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

#include "cadet/labels.hpp"
#include "cadet/synthgen.hpp"
#include "cadet/targets.hpp"
#include "gradcheck.hpp"

using namespace cadet;

namespace {

Mask rect_mask(int h, int w, int y0, int x0, int y1, int x1) {
  Mask m(h, w);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.grid(y, x) = 1;
  return m;
}

Instance masked_instance(Mask m, std::optional<int> cls, Kind kind) {
  Instance inst;
  inst.bbox = *tight_box(m);
  inst.mask = std::move(m);
  inst.class_id = cls;
  inst.kind = kind;
  return inst;
}

DatasetSplit small_labeled(std::uint64_t seed = 40, int n = 6) {
  synth::SynthSpec spec;
  spec.num_images = n;
  spec.seed = seed;
  return synth::generate(spec);
}

}  // namespace

TEST_CASE("to_class_agnostic strips classes and nothing else") {
  const DatasetSplit split = small_labeled();
  const DatasetSplit agn = labels::to_class_agnostic(split);
  CHECK(agn.images.size() == split.images.size());
  CHECK(agn.instance_count() == split.instance_count());
  CHECK(!agn.class_names.has_value());
  for (std::size_t i = 0; i < split.images.size(); ++i) {
    for (std::size_t k = 0; k < split.images[i].instances.size(); ++k) {
      const auto& a = agn.images[i].instances[k];
      const auto& b = split.images[i].instances[k];
      CHECK(!a.class_id.has_value());
      CHECK(a.bbox == b.bbox);
      CHECK(*a.mask == *b.mask);
      CHECK(a.kind == b.kind);
    }
  }
  // Idempotence.
  const DatasetSplit twice = labels::to_class_agnostic(agn);
  CHECK(twice.instance_count() == agn.instance_count());

  // Empty split passes through.
  DatasetSplit empty;
  CHECK(labels::to_class_agnostic(empty).images.empty());
}

TEST_CASE("things_only drops stuff") {
  const DatasetSplit split = small_labeled();
  const DatasetSplit things = labels::things_only(split);
  for (const auto& im : things.images)
    for (const auto& inst : im.instances) CHECK(inst.kind == Kind::kThing);
  CHECK(things.instance_count() < split.instance_count());
}

TEST_CASE("entity conversion: one object, two stuff regions -> three entities") {
  // A scene in the spirit of a clock against building and sky: object-style
  // labeling sees one instance, entity labeling sees three.
  DatasetSplit split;
  split.role = Role::kLabeled;
  AnnotatedImage im;
  im.id = "scene";
  im.width = im.height = 32;
  im.instances.push_back(
      masked_instance(rect_mask(32, 32, 0, 0, 15, 31), 9, Kind::kStuff));  // sky
  im.instances.push_back(
      masked_instance(rect_mask(32, 32, 16, 0, 31, 31), 10, Kind::kStuff));  // wall
  im.instances.push_back(
      masked_instance(rect_mask(32, 32, 10, 12, 20, 22), 0, Kind::kThing));  // clock
  split.images.push_back(im);

  CHECK(labels::things_only(split).instance_count() == 1);
  const DatasetSplit entities = labels::to_entities(split);
  CHECK(entities.images[0].instances.size() == 3);
  for (const auto& inst : entities.images[0].instances)
    CHECK(!inst.class_id.has_value());
}

TEST_CASE("entity conversion: pure stuff image gives one entity") {
  DatasetSplit split;
  split.role = Role::kLabeled;
  AnnotatedImage im;
  im.id = "flat";
  im.width = im.height = 16;
  im.instances.push_back(
      masked_instance(rect_mask(16, 16, 0, 0, 15, 15), 9, Kind::kStuff));
  split.images.push_back(im);
  const DatasetSplit entities = labels::to_entities(split);
  CHECK(entities.images[0].instances.size() == 1);
  CHECK(entities.images[0].instances[0].mask->area() == 256);
}

TEST_CASE("entity masks partition the grid under overlaps") {
  // Two overlapping things over two stuff bands; the later thing wins the
  // contested pixels, things beat stuff.
  DatasetSplit split;
  split.role = Role::kLabeled;
  AnnotatedImage im;
  im.id = "overlap";
  im.width = im.height = 32;
  im.instances.push_back(
      masked_instance(rect_mask(32, 32, 0, 0, 15, 31), 9, Kind::kStuff));
  im.instances.push_back(
      masked_instance(rect_mask(32, 32, 16, 0, 31, 31), 10, Kind::kStuff));
  im.instances.push_back(
      masked_instance(rect_mask(32, 32, 4, 4, 20, 20), 0, Kind::kThing));
  im.instances.push_back(
      masked_instance(rect_mask(32, 32, 12, 12, 28, 28), 1, Kind::kThing));
  split.images.push_back(im);

  const DatasetSplit entities = labels::to_entities(split);
  const auto& insts = entities.images[0].instances;
  REQUIRE(insts.size() == 4);

  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> cover =
      Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(32, 32);
  for (const auto& inst : insts)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (inst.mask->grid(y, x)) cover(y, x) += 1;
  CHECK((cover.array() == 1).all());

  // The contested pixel (16, 16) belongs to the later thing.
  CHECK(insts[3].mask->grid(16, 16) == 1);
  CHECK(insts[2].mask->grid(16, 16) == 0);
  // Thing interior beats stuff.
  CHECK(insts[0].mask->grid(8, 8) == 0);
}

TEST_CASE("entity conversion flags images without stuff") {
  DatasetSplit split;
  split.role = Role::kLabeled;
  AnnotatedImage im;
  im.id = "nostuff";
  im.width = im.height = 16;
  im.instances.push_back(
      masked_instance(rect_mask(16, 16, 2, 2, 9, 9), 0, Kind::kThing));
  split.images.push_back(im);
  labels::EntityReport report;
  const DatasetSplit entities = labels::to_entities(split, &report);
  CHECK(report.images_without_stuff == 1);
  CHECK(entities.images[0].instances.size() == 1);
}

TEST_CASE("filter_predictions uses a strict threshold") {
  std::vector<Instance> preds(3);
  for (int i = 0; i < 3; ++i) {
    preds[static_cast<std::size_t>(i)].bbox = BBox{0, 0, 4, 4};
    preds[static_cast<std::size_t>(i)].score = 0.2 * (i + 1);  // 0.2 0.4 0.6
  }
  CHECK(labels::filter_predictions(preds, {0.0}).size() == 3);
  CHECK(labels::filter_predictions(preds, {1.0}).empty());
  const auto kept = labels::filter_predictions(preds, {0.4});
  REQUIRE(kept.size() == 1);  // strictly greater than delta
  CHECK(*kept[0].score == doctest::Approx(0.6));

  std::vector<Instance> unscored(1);
  unscored[0].bbox = BBox{0, 0, 2, 2};
  CHECK_THROWS_AS(labels::filter_predictions(unscored, {0.5}), Error);
}

TEST_CASE("build_pseudo_dataset excludes empty images and is monotone in delta") {
  synth::SynthSpec spec;
  spec.num_images = 12;
  spec.seed = 77;
  const DatasetSplit unlabeled = synth::derive_unlabeled(synth::generate(spec));

  labels::Labeler labeler;
  labeler.config = gradcheck::tiny_config();
  labeler.config.num_classes = 1;
  Rng rng(123);
  labeler.params = det::init_params<float>(labeler.config, rng);
  labeler.options.score_floor = 0.01;

  CHECK(labels::build_pseudo_dataset(unlabeled, labeler, {1.0}).images.empty());

  std::size_t prev = 1 << 20;
  for (double delta : {0.05, 0.2, 0.5}) {
    const DatasetSplit pseudo = labels::build_pseudo_dataset(unlabeled, labeler, {delta});
    for (const auto& im : pseudo.images) CHECK(!im.instances.empty());
    CHECK(pseudo.images.size() <= prev);
    prev = pseudo.images.size();
    for (const auto& im : pseudo.images)
      for (const auto& inst : im.instances) CHECK(*inst.score > delta);
  }

  const DatasetSplit labeled = synth::generate(spec);
  CHECK_THROWS_AS(labels::build_pseudo_dataset(labeled, labeler, {0.5}), Error);
}

TEST_CASE("binarize_targets strips scores and classes, idempotently") {
  DatasetSplit pseudo;
  pseudo.role = Role::kPseudo;
  AnnotatedImage im;
  im.id = "p";
  im.width = im.height = 16;
  Instance inst;
  inst.bbox = BBox{2, 3, 9, 12};
  inst.score = 0.73;
  inst.class_id = 4;
  im.instances.push_back(inst);
  pseudo.images.push_back(im);

  const DatasetSplit hard = labels::binarize_targets(pseudo);
  REQUIRE(hard.images[0].instances.size() == 1);
  CHECK(!hard.images[0].instances[0].score.has_value());
  CHECK(!hard.images[0].instances[0].class_id.has_value());
  CHECK(hard.images[0].instances[0].bbox == inst.bbox);
  const DatasetSplit twice = labels::binarize_targets(hard);
  CHECK(!twice.images[0].instances[0].score.has_value());

  CHECK_THROWS_AS(labels::binarize_targets(DatasetSplit{}), Error);
}

TEST_CASE("binarized pseudo labels train exactly like agnostic ground truth") {
  // Same geometry through assign_targets + detection_loss in both forms.
  const det::DetectorConfig cfg = [&] {
    auto c = gradcheck::tiny_config();
    c.num_classes = 1;
    return c;
  }();
  synth::SynthSpec spec;
  spec.height = spec.width = 32;
  spec.num_images = 1;
  spec.seed = 50;
  const DatasetSplit gt = synth::generate(spec);

  DatasetSplit pseudo;
  pseudo.role = Role::kPseudo;
  pseudo.images = gt.images;
  for (auto& im : pseudo.images)
    for (auto& inst : im.instances) {
      inst.score = 0.8;
      inst.class_id.reset();
    }
  const DatasetSplit binarized = labels::binarize_targets(pseudo);
  const DatasetSplit agnostic = labels::to_class_agnostic(gt);

  Rng rng(3);
  const auto params = det::init_params<double>(cfg, rng);
  det::Workspace<double> ws;
  det::forward(cfg, params, gt.images[0].pixels, ws);
  const auto t_pseudo =
      det::assign_targets<double>(binarized.images[0], cfg, det::Mode::kAgnostic);
  const auto t_gt =
      det::assign_targets<double>(agnostic.images[0], cfg, det::Mode::kAgnostic);
  const auto l_pseudo = det::detection_loss<double>(cfg, ws.preds, t_pseudo,
                                                    det::Mode::kAgnostic);
  const auto l_gt = det::detection_loss<double>(cfg, ws.preds, t_gt,
                                                det::Mode::kAgnostic);
  CHECK(l_pseudo.total == l_gt.total);
  CHECK(l_pseudo.num_pos == l_gt.num_pos);
}
