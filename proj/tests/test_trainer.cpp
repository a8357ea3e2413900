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

#include "cadet/eval.hpp"
#include "cadet/synthgen.hpp"
#include "cadet/trainer.hpp"
#include "gradcheck.hpp"

using namespace cadet;
using train::StageConfig;

namespace {

det::DetectorConfig tiny_cfg(int classes = 1) {
  det::DetectorConfig cfg = gradcheck::tiny_config();
  cfg.num_classes = classes;
  return cfg;
}

DatasetSplit tiny_split(int n, std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.height = spec.width = 32;
  spec.num_images = n;
  spec.max_things = 2;
  spec.min_thing_size = 8;
  spec.max_thing_size = 14;
  spec.seed = seed;
  return synth::generate(spec);
}

StageConfig quick_stage(int epochs, std::uint64_t seed) {
  StageConfig sc;
  sc.epochs = epochs;
  sc.batch = 4;
  sc.lr = 0.02;
  sc.seed = seed;
  return sc;
}

bool params_equal(const det::DetectorParams<float>& a,
                  const det::DetectorParams<float>& b,
                  const det::DetectorConfig& cfg) {
  for (const auto& part : kAllParts)
    if (!params_part_equal(a, b, cfg, part)) return false;
  return true;
}

}  // namespace

TEST_CASE("zero epochs returns the initial parameters untouched") {
  const auto cfg = tiny_cfg();
  const DatasetSplit split = labels::to_class_agnostic(tiny_split(4, 3));
  const auto init = train::fresh_init(cfg, 5);
  const auto out = train::train_stage(cfg, init, split, quick_stage(0, 5),
                                      det::Mode::kAgnostic, true);
  CHECK(out.epoch_loss.empty());
  CHECK(params_equal(out.params, init, cfg));
}

TEST_CASE("training is deterministic in the seed and worker count") {
  const auto cfg = tiny_cfg();
  const DatasetSplit split = labels::to_class_agnostic(tiny_split(6, 11));
  StageConfig sc = quick_stage(2, 21);
  const auto a = train::train_stage(cfg, train::fresh_init(cfg, 1), split, sc,
                                    det::Mode::kAgnostic, true);
  sc.workers = 1;
  const auto b = train::train_stage(cfg, train::fresh_init(cfg, 1), split, sc,
                                    det::Mode::kAgnostic, true);
  sc.workers = 3;
  const auto c = train::train_stage(cfg, train::fresh_init(cfg, 1), split, sc,
                                    det::Mode::kAgnostic, true);
  CHECK(params_equal(a.params, b.params, cfg));
  CHECK(params_equal(a.params, c.params, cfg));
  CHECK(a.epoch_loss == b.epoch_loss);

  StageConfig other = sc;
  other.seed = 99;
  const auto d = train::train_stage(cfg, train::fresh_init(cfg, 1), split, other,
                                    det::Mode::kAgnostic, true);
  CHECK(!params_equal(a.params, d.params, cfg));
}

TEST_CASE("smoke run: the loss trace improves") {
  const auto cfg = tiny_cfg();
  const DatasetSplit split = labels::to_class_agnostic(tiny_split(24, 17));
  const auto out = train::train_stage(cfg, train::fresh_init(cfg, 2), split,
                                      quick_stage(8, 19), det::Mode::kAgnostic, true);
  REQUIRE(out.epoch_loss.size() == 8);
  CHECK(out.epoch_loss.back() < out.epoch_loss.front());
  CHECK(out.read_ids.size() == 24);
}

TEST_CASE("labeler training improves entity AP over fresh init") {
  const auto cfg = tiny_cfg();
  const DatasetSplit labeled = tiny_split(24, 29);
  const DatasetSplit val = tiny_split(12, 31);
  const DatasetSplit val_entities = labels::to_entities(val);

  auto ap_of = [&](const det::DetectorParams<float>& params) {
    det::InferOptions opt;
    std::vector<eval::ImageEval> data;
    for (std::size_t i = 0; i < val.images.size(); ++i) {
      eval::ImageEval e;
      e.id = val.images[i].id;
      e.preds = det::infer(cfg, params, val.images[i].pixels, opt,
                           det::Mode::kAgnostic);
      e.gts = val_entities.images[i].instances;
      data.push_back(std::move(e));
    }
    const auto r = eval::average_precision(data, eval::MatchKind::kMask,
                                           eval::ApMode::kAgnostic);
    return r.ap.value_or(0.0);
  };

  const double before = ap_of(train::fresh_init(cfg, quick_stage(0, 41).seed));
  const auto out = train::train_pseudo_labeler(labeled, train::LabelMode::kEntities,
                                               cfg, quick_stage(10, 41), "digest");
  CHECK(out.checkpoint.meta.stage == "labeler");
  CHECK(out.checkpoint.meta.mode == "agnostic");
  CHECK(out.checkpoint.meta.config_digest == "digest");
  const double after = ap_of(out.checkpoint.params);
  CHECK(after > before);
}

TEST_CASE("warmup rejects bad inputs") {
  const auto cfg = tiny_cfg();
  const DatasetSplit labeled = tiny_split(4, 51);
  std::set<std::string> labeled_ids;
  for (const auto& im : labeled.images) labeled_ids.insert(im.id);

  // Labeled role is a precondition violation.
  CHECK_THROWS_AS(train::warmup(labeled, labeled_ids, cfg, quick_stage(1, 1), "d"),
                  Error);

  // Empty pseudo split cannot warm anything up.
  DatasetSplit empty;
  empty.role = Role::kPseudo;
  CHECK_THROWS_AS(train::warmup(empty, labeled_ids, cfg, quick_stage(1, 1), "d"),
                  Error);

  // Id overlap with the labeled split is a hard error.
  DatasetSplit overlapping;
  overlapping.role = Role::kPseudo;
  AnnotatedImage im = labeled.images[0];
  for (auto& inst : im.instances) {
    inst.score = 0.9;
    inst.class_id.reset();
  }
  overlapping.images.push_back(im);
  CHECK_THROWS_WITH_AS(
      train::warmup(overlapping, labeled_ids, cfg, quick_stage(1, 1), "d"),
      doctest::Contains("overlap"), Error);
}

TEST_CASE("warmup trains on binarized pseudo labels and tags the checkpoint") {
  const auto cfg = tiny_cfg();
  const DatasetSplit labeled = tiny_split(4, 61);
  std::set<std::string> labeled_ids;
  for (const auto& im : labeled.images) labeled_ids.insert(im.id);

  DatasetSplit pseudo;
  pseudo.role = Role::kPseudo;
  for (const auto& im : tiny_split(6, 62).images) {
    AnnotatedImage copy = im;
    copy.id += "-u";
    for (auto& inst : copy.instances) {
      inst.score = 0.8;
      inst.class_id.reset();
    }
    pseudo.images.push_back(std::move(copy));
  }
  const auto out = train::warmup(pseudo, labeled_ids, cfg, quick_stage(2, 63), "dg");
  CHECK(out.checkpoint.meta.stage == "warmup");
  CHECK(out.checkpoint.meta.mode == "agnostic");
  CHECK(out.read_ids.size() == 6);
  for (const auto& id : out.read_ids) CHECK(labeled_ids.count(id) == 0);
}

TEST_CASE("finetune init spec controls exactly which parts transfer") {
  const auto agn_cfg = tiny_cfg(1);
  Checkpoint source;
  source.config = agn_cfg;
  source.params = train::fresh_init(agn_cfg, 71);
  source.meta = {"warmup", 71, 5, "dg", "agnostic"};

  auto spec_cfg = tiny_cfg(3);
  const std::uint64_t seed = 73;
  const auto fresh = train::fresh_init(spec_cfg, seed);

  SUBCASE("empty parts equal training from scratch") {
    const auto init = train::build_finetune_init(source, spec_cfg, {}, seed);
    CHECK(params_equal(init, fresh, spec_cfg));
  }
  SUBCASE("backbone-only transfers the backbone and nothing else") {
    train::InitSpec is;
    is.parts = {"backbone"};
    const auto init = train::build_finetune_init(source, spec_cfg, is, seed);
    CHECK(params_part_equal(init, source.params, spec_cfg, "backbone"));
    CHECK(params_part_equal(init, fresh, spec_cfg, "neck"));
    CHECK(params_part_equal(init, fresh, spec_cfg, "head"));
    CHECK(params_part_equal(init, fresh, spec_cfg, "classifier"));
  }
  SUBCASE("classifier copy-init replicates the binary channel") {
    train::InitSpec is;
    is.parts = kAllParts;
    is.classifier_init = train::InitSpec::ClassifierInit::kCopy;
    const auto init = train::build_finetune_init(source, spec_cfg, is, seed);
    for (int c = 0; c < 3; ++c) {
      CHECK(init.classifier.w.row(c) == source.params.classifier.w.row(0));
      CHECK(init.classifier.b[c] == source.params.classifier.b[0]);
    }
    // Non-classifier parts equal the loaded source regardless of the
    // classifier strategy.
    CHECK(params_part_equal(init, source.params, spec_cfg, "backbone"));
  }
  SUBCASE("random classifier init keeps the fresh classifier") {
    train::InitSpec is;
    is.parts = kAllParts;
    is.classifier_init = train::InitSpec::ClassifierInit::kRandom;
    const auto init = train::build_finetune_init(source, spec_cfg, is, seed);
    CHECK(params_part_equal(init, fresh, spec_cfg, "classifier"));
  }
  SUBCASE("copy without the classifier part is an error") {
    train::InitSpec is;
    is.parts = {"backbone"};
    is.classifier_init = train::InitSpec::ClassifierInit::kCopy;
    CHECK_THROWS_AS(train::build_finetune_init(source, spec_cfg, is, seed), Error);
  }
  SUBCASE("copy from a multi-class source is an error") {
    Checkpoint multi;
    multi.config = spec_cfg;
    multi.params = train::fresh_init(spec_cfg, 75);
    multi.meta = {"warmup", 75, 1, "dg", "specific"};
    train::InitSpec is;
    is.parts = kAllParts;
    is.classifier_init = train::InitSpec::ClassifierInit::kCopy;
    CHECK_THROWS_AS(train::build_finetune_init(multi, spec_cfg, is, seed), Error);
  }
}

TEST_CASE("finetune runs class-specific training from a warmup checkpoint") {
  const auto cfg = tiny_cfg();
  DatasetSplit labeled = tiny_split(6, 81);
  // Shrink the class table to keep the tiny model tiny.
  labeled.class_names = std::vector<std::string>{"c0", "c1", "c2"};
  for (auto& im : labeled.images)
    for (auto& inst : im.instances) inst.class_id = *inst.class_id % 3;

  Checkpoint warm;
  warm.config = tiny_cfg(1);
  warm.params = train::fresh_init(warm.config, 82);
  warm.meta = {"warmup", 82, 2, "dg", "agnostic"};

  train::InitSpec is;
  is.parts = kAllParts;
  is.classifier_init = train::InitSpec::ClassifierInit::kCopy;
  const auto out = train::finetune(warm, labeled, is, cfg, quick_stage(1, 83), "dg");
  CHECK(out.checkpoint.meta.stage == "finetuned");
  CHECK(out.checkpoint.meta.mode == "specific");
  CHECK(out.checkpoint.config.num_classes == 3);

  Checkpoint bad = warm;
  bad.meta.stage = "finetuned";
  CHECK_THROWS_AS(train::finetune(bad, labeled, is, cfg, quick_stage(1, 83), "dg"),
                  Error);
}
