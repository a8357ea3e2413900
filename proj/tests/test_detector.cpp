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

#include "cadet/infer.hpp"
#include "cadet/synthgen.hpp"
#include "cadet/targets.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace cadet;
using det::DetectorConfig;
using det::Mode;

namespace {

Image random_image(Rng& rng, int h, int w) {
  Image img(3, h, w);
  for (auto& plane : img.planes)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) plane(y, x) = static_cast<float>(rng.uniform());
  return img;
}

DetectorConfig default_config(int num_classes = 1) {
  DetectorConfig cfg;
  cfg.num_classes = num_classes;
  return cfg;
}

// Fabricated single-level predictions/targets on a 1 x 2 grid for the scalar
// loss oracle; no network involved.
struct ToyCase {
  DetectorConfig cfg;
  det::DensePredictions<double> preds;
  det::TargetMap<double> targets;
};

ToyCase make_toy(int num_classes) {
  ToyCase t;
  t.cfg = gradcheck::tiny_config();
  t.cfg.num_classes = num_classes;
  t.cfg.pyramid_levels = {3};
  t.cfg.scale_ranges = {{0.0, std::numeric_limits<double>::infinity()}};

  det::LevelPreds<double> lp;
  lp.level = 3;
  lp.stride = 8;
  lp.cls.resize(num_classes, 1, 2);
  lp.box.resize(4, 1, 2);
  lp.ctr.resize(1, 1, 2);
  lp.ker.resize(t.cfg.dynamic_param_count(), 1, 2);
  t.preds.levels.push_back(std::move(lp));
  t.preds.padded_h = 8;
  t.preds.padded_w = 16;
  t.preds.image_h = 8;
  t.preds.image_w = 16;

  det::LevelTargets<double> lt;
  lt.cls = det::IntGrid::Zero(1, 2);
  lt.inst = det::IntGrid::Constant(1, 2, -1);
  lt.ltrb.resize(4, 1, 2);
  lt.ctr = Mat<double>::Zero(1, 2);
  t.targets.levels.push_back(std::move(lt));
  t.targets.num_pos = 0;
  return t;
}

double focal_ref(double x, bool pos) {
  const double p = 1.0 / (1.0 + std::exp(-x));
  if (pos) return -0.25 * std::pow(1.0 - p, 2.0) * std::log(p);
  return -0.75 * std::pow(p, 2.0) * std::log(1.0 - p);
}

double iou_loss_ref(const double* pred, const double* gt) {
  const double iw = std::min(pred[0], gt[0]) + std::min(pred[2], gt[2]);
  const double ih = std::min(pred[1], gt[1]) + std::min(pred[3], gt[3]);
  const double inter = iw * ih;
  const double uni = (pred[0] + pred[2]) * (pred[1] + pred[3]) +
                     (gt[0] + gt[2]) * (gt[1] + gt[3]) - inter;
  return -std::log(inter / uni);
}

double bce_ref(double x, double target) {
  const double p = 1.0 / (1.0 + std::exp(-x));
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

}  // namespace

TEST_CASE("forward output shapes follow the stride arithmetic") {
  const DetectorConfig cfg = default_config();
  Rng rng(1);
  const auto params = det::init_params<float>(cfg, rng);
  det::Workspace<float> ws;
  Image img(3, 64, 64);  // all zeros
  det::forward(cfg, params, img, ws);
  REQUIRE(ws.preds.levels.size() == 2);
  CHECK(ws.preds.levels[0].stride == 8);
  CHECK(ws.preds.levels[0].cls.height() == 8);
  CHECK(ws.preds.levels[0].cls.width() == 8);
  CHECK(ws.preds.levels[1].stride == 16);
  CHECK(ws.preds.levels[1].cls.height() == 4);
  CHECK(ws.preds.levels[1].cls.width() == 4);
  CHECK(ws.preds.mask_feats.channels() == cfg.mask_channels);
  CHECK(ws.preds.mask_feats.height() == 8);
  // Offsets are positive after activation.
  for (int c = 0; c < 4; ++c)
    CHECK(ws.preds.levels[0].box[c].minCoeff() > 0.0f);
}

TEST_CASE("forward pads non-multiple extents") {
  const DetectorConfig cfg = default_config();
  Rng rng(2);
  const auto params = det::init_params<float>(cfg, rng);
  det::Workspace<float> ws;
  det::forward(cfg, params, random_image(rng, 50, 70), ws);
  CHECK(ws.preds.padded_h == 64);
  CHECK(ws.preds.padded_w == 80);
  CHECK(ws.preds.image_h == 50);
  CHECK(ws.preds.levels[0].cls.height() == 8);
  CHECK(ws.preds.levels[0].cls.width() == 10);
}

TEST_CASE("identical inputs in a batch give identical outputs") {
  const DetectorConfig cfg = default_config();
  Rng rng(3);
  const auto params = det::init_params<float>(cfg, rng);
  const Image img = random_image(rng, 32, 32);
  det::Workspace<float> a, b;
  det::forward(cfg, params, img, a);
  det::forward(cfg, params, img, b);
  for (std::size_t li = 0; li < a.preds.levels.size(); ++li) {
    CHECK(a.preds.levels[li].cls == b.preds.levels[li].cls);
    CHECK(a.preds.levels[li].box == b.preds.levels[li].box);
  }
  CHECK(a.preds.mask_feats == b.preds.mask_feats);
}

TEST_CASE("fuzz: forward stays finite over 100 random draws") {
  const DetectorConfig cfg = gradcheck::tiny_config();
  det::Workspace<float> ws;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(1000 + static_cast<std::uint64_t>(trial));
    const auto params = det::init_params<float>(cfg, rng);
    const Image img = random_image(rng, 16 + 8 * (trial % 4), 16 + 8 * (trial % 3));
    det::forward(cfg, params, img, ws);
    CHECK(ws.preds.all_finite());
  }
}

TEST_CASE("target assignment: empty image is all background") {
  const DetectorConfig cfg = default_config();
  AnnotatedImage im;
  im.id = "e";
  im.width = im.height = 64;
  const auto tm = det::assign_targets<float>(im, cfg, Mode::kAgnostic);
  CHECK(tm.num_pos == 0);
  for (const auto& lt : tm.levels) CHECK((lt.cls.array() == 0).all());
}

TEST_CASE("target assignment matches a brute-force per-location oracle") {
  const DetectorConfig cfg = default_config();
  AnnotatedImage im;
  im.id = "a";
  im.width = im.height = 64;
  Instance inst;
  inst.bbox = BBox{16, 16, 48, 48};
  inst.class_id = 0;
  im.instances.push_back(inst);

  const auto tm = det::assign_targets<float>(im, cfg, Mode::kAgnostic);

  // Independent re-derivation: a location is positive iff its center falls
  // inside the box and its max offset lies in the level range.
  int expected_pos = 0;
  for (int li = 0; li < 2; ++li) {
    const int stride = li == 0 ? 8 : 16;
    const double lo = cfg.scale_ranges[static_cast<std::size_t>(li)].lo;
    const double hi = cfg.scale_ranges[static_cast<std::size_t>(li)].hi;
    const int g = 64 / stride;
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const double x = (j + 0.5) * stride, y = (i + 0.5) * stride;
        bool pos = x >= 16 && x <= 48 && y >= 16 && y <= 48;
        if (pos) {
          const double mo = std::max({x - 16, 48 - x, y - 16, 48 - y});
          pos = mo >= lo && mo < hi;
        }
        if (pos) ++expected_pos;
        CHECK((tm.levels[static_cast<std::size_t>(li)].cls(i, j) != 0) == pos);
      }
    }
  }
  CHECK(tm.num_pos == expected_pos);
  CHECK(expected_pos == 16);  // the 4x4 interior of the stride-8 grid
}

TEST_CASE("target assignment: exact center has centerness 1") {
  const DetectorConfig cfg = default_config();
  AnnotatedImage im;
  im.id = "c";
  im.width = im.height = 64;
  Instance inst;
  inst.bbox = BBox{4, 4, 20, 20};  // center (12, 12) = center of location (1,1)
  im.instances.push_back(inst);
  const auto tm = det::assign_targets<float>(im, cfg, Mode::kAgnostic);
  CHECK(tm.levels[0].cls(1, 1) == 1);
  CHECK(tm.levels[0].ctr(1, 1) == doctest::Approx(1.0));
  CHECK(tm.levels[0].ltrb[0](1, 1) == doctest::Approx(8.0));
}

TEST_CASE("target assignment: overlapping boxes resolve to the smaller") {
  const DetectorConfig cfg = default_config();
  AnnotatedImage im;
  im.id = "s";
  im.width = im.height = 64;
  Instance big, small;
  big.bbox = BBox{8, 8, 56, 56};
  small.bbox = BBox{24, 24, 40, 40};
  im.instances.push_back(big);
  im.instances.push_back(small);
  const auto tm = det::assign_targets<float>(im, cfg, Mode::kAgnostic);
  // Location (4, 4) at (36, 36) lies inside both; the small box (area 256)
  // must win over the big one (area 2304).
  CHECK(tm.levels[0].inst(4, 4) == 1);
}

TEST_CASE("detection loss matches a scalar re-implementation") {
  ToyCase t = make_toy(2);
  // Location 0: positive, class index 1. Location 1: background.
  t.targets.levels[0].cls(0, 0) = 2;
  t.targets.levels[0].inst(0, 0) = 0;
  t.targets.num_pos = 1;
  const double gt_ltrb[4] = {3.0, 2.0, 5.0, 6.0};
  for (int c = 0; c < 4; ++c) t.targets.levels[0].ltrb[c](0, 0) = gt_ltrb[c];
  t.targets.levels[0].ctr(0, 0) = 0.62;

  Rng rng(17);
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < 2; ++j)
      t.preds.levels[0].cls[c](0, j) = rng.uniform(-3, 3);
  double pred_ltrb[4];
  for (int c = 0; c < 4; ++c) {
    pred_ltrb[c] = rng.uniform(0.5, 8.0);
    t.preds.levels[0].box[c](0, 0) = pred_ltrb[c];
    t.preds.levels[0].box[c](0, 1) = rng.uniform(0.5, 8.0);
  }
  t.preds.levels[0].ctr[0](0, 0) = rng.uniform(-2, 2);
  t.preds.levels[0].ctr[0](0, 1) = rng.uniform(-2, 2);

  const auto loss = det::detection_loss<double>(t.cfg, t.preds, t.targets,
                                                Mode::kSpecific);

  double cls_ref = 0;
  cls_ref += focal_ref(t.preds.levels[0].cls[0](0, 0), false);
  cls_ref += focal_ref(t.preds.levels[0].cls[1](0, 0), true);
  cls_ref += focal_ref(t.preds.levels[0].cls[0](0, 1), false);
  cls_ref += focal_ref(t.preds.levels[0].cls[1](0, 1), false);
  const double loc_ref = iou_loss_ref(pred_ltrb, gt_ltrb);
  const double ctr_ref = bce_ref(t.preds.levels[0].ctr[0](0, 0), 0.62);

  CHECK(loss.num_pos == 1);
  CHECK(loss.cls == doctest::Approx(cls_ref).epsilon(1e-9));
  CHECK(loss.loc == doctest::Approx(loc_ref).epsilon(1e-9));
  CHECK(loss.ctr == doctest::Approx(ctr_ref).epsilon(1e-9));
  CHECK(loss.total == doctest::Approx(cls_ref + loc_ref + ctr_ref).epsilon(1e-9));
}

TEST_CASE("detection loss: perfect predictions have zero box loss") {
  ToyCase t = make_toy(1);
  t.targets.levels[0].cls(0, 0) = 1;
  t.targets.num_pos = 1;
  for (int c = 0; c < 4; ++c) {
    t.targets.levels[0].ltrb[c](0, 0) = 4.0;
    t.preds.levels[0].box[c](0, 0) = 4.0;
    t.preds.levels[0].box[c](0, 1) = 1.0;
  }
  t.targets.levels[0].ctr(0, 0) = 1.0;
  t.preds.levels[0].ctr[0](0, 0) = 30.0;  // saturated towards target 1
  const auto loss = det::detection_loss<double>(t.cfg, t.preds, t.targets,
                                                Mode::kAgnostic);
  CHECK(loss.loc == 0.0);
  CHECK(loss.ctr < 1e-12);
}

TEST_CASE("detection loss: all-background map has exactly zero box loss") {
  ToyCase t = make_toy(1);
  Rng rng(5);
  for (int j = 0; j < 2; ++j) {
    t.preds.levels[0].cls[0](0, j) = rng.uniform(-2, 2);
    t.preds.levels[0].ctr[0](0, j) = rng.uniform(-2, 2);
    for (int c = 0; c < 4; ++c) t.preds.levels[0].box[c](0, j) = rng.uniform(1, 5);
  }
  const auto loss = det::detection_loss<double>(t.cfg, t.preds, t.targets,
                                                Mode::kAgnostic);
  CHECK(loss.loc == 0.0);
  CHECK(loss.ctr == 0.0);
  CHECK(loss.cls > 0.0);
  CHECK(loss.num_pos == 0);
}

TEST_CASE("agnostic and specific losses coincide for one class") {
  ToyCase t = make_toy(1);
  Rng rng(23);
  t.targets.levels[0].cls(0, 1) = 1;
  t.targets.levels[0].inst(0, 1) = 0;
  t.targets.num_pos = 1;
  for (int c = 0; c < 4; ++c) {
    t.targets.levels[0].ltrb[c](0, 1) = rng.uniform(1, 6);
    t.preds.levels[0].box[c](0, 0) = rng.uniform(1, 6);
    t.preds.levels[0].box[c](0, 1) = rng.uniform(1, 6);
  }
  t.targets.levels[0].ctr(0, 1) = 0.4;
  for (int j = 0; j < 2; ++j) {
    t.preds.levels[0].cls[0](0, j) = rng.uniform(-2, 2);
    t.preds.levels[0].ctr[0](0, j) = rng.uniform(-2, 2);
  }
  const auto a = det::detection_loss<double>(t.cfg, t.preds, t.targets, Mode::kAgnostic);
  const auto s = det::detection_loss<double>(t.cfg, t.preds, t.targets, Mode::kSpecific);
  CHECK(a.total == s.total);
  CHECK(a.cls == s.cls);
}

TEST_CASE("soft dice trivial and random cases") {
  // Identical indicator -> 0.
  MaskGrid g = MaskGrid::Zero(4, 4);
  g(1, 1) = g(1, 2) = g(2, 1) = 1;
  Mat<double> p = Mat<double>::Zero(4, 4);
  p(1, 1) = p(1, 2) = p(2, 1) = 1.0;
  CHECK(det::soft_dice<double>(p, g) == 0.0);

  // Disjoint -> 1.
  Mat<double> q = Mat<double>::Zero(4, 4);
  q(0, 0) = 1.0;
  CHECK(det::soft_dice<double>(q, g) == 1.0);

  // Both empty -> 0 by convention.
  CHECK(det::soft_dice<double>(Mat<double>::Zero(4, 4), MaskGrid::Zero(4, 4)) == 0.0);

  // Random 8x8 soft mask against the direct formula.
  Rng rng(77);
  Mat<double> soft(8, 8);
  MaskGrid hard(8, 8);
  double sp = 0, sg = 0, spg = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      soft(y, x) = rng.uniform();
      hard(y, x) = rng.uniform() < 0.5 ? 1 : 0;
      sp += soft(y, x);
      sg += hard(y, x);
      spg += soft(y, x) * hard(y, x);
    }
  CHECK(det::soft_dice<double>(soft, hard) ==
        doctest::Approx(1.0 - 2.0 * spg / (sp + sg)).epsilon(1e-9));
}

TEST_CASE("mask loss equals the dice of the dynamic head's probabilities") {
  const DetectorConfig cfg = gradcheck::tiny_config();
  const auto batch = gradcheck::tiny_batch();
  Rng rng(31);
  const auto params = det::init_params<double>(cfg, rng);

  std::vector<det::Workspace<double>> ws(batch.size());
  std::vector<det::TargetMap<double>> tms(batch.size());
  std::vector<const det::DensePredictions<double>*> preds;
  std::vector<const det::TargetMap<double>*> targets;
  std::vector<const AnnotatedImage*> images;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    det::forward(cfg, params, batch[i].pixels, ws[i]);
    tms[i] = det::assign_targets<double>(batch[i], cfg, Mode::kSpecific);
    preds.push_back(&ws[i].preds);
    targets.push_back(&tms[i]);
    images.push_back(&batch[i]);
  }
  const auto samples =
      det::sample_mask_locations<double>(targets, images, 1 << 20, nullptr);
  REQUIRE(!samples.empty());
  const double loss = det::mask_loss<double>(cfg, preds, images, samples);

  double ref = 0;
  for (const auto& s : samples) {
    const auto logits = det::dynamic_mask_logits(
        cfg, ws[static_cast<std::size_t>(s.image)].preds, s.level_index, s.y, s.x);
    Mat<double> prob(logits.rows(), logits.cols());
    for (long i = 0; i < logits.rows(); ++i)
      for (long j = 0; j < logits.cols(); ++j) prob(i, j) = nn::sigmoid(logits(i, j));
    const auto& inst =
        images[static_cast<std::size_t>(s.image)]->instances[static_cast<std::size_t>(s.inst)];
    ref += det::soft_dice<double>(prob, inst.mask->grid);
  }
  ref /= static_cast<double>(samples.size());
  CHECK(loss == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("mask loss with no positives is zero") {
  const DetectorConfig cfg = gradcheck::tiny_config();
  AnnotatedImage im;
  im.id = "none";
  im.width = im.height = 32;
  im.pixels.resize(3, 32, 32);
  Rng rng(3);
  const auto params = det::init_params<double>(cfg, rng);
  det::Workspace<double> ws;
  det::forward(cfg, params, im.pixels, ws);
  const auto tm = det::assign_targets<double>(im, cfg, Mode::kAgnostic);
  std::vector<const det::TargetMap<double>*> targets{&tm};
  std::vector<const AnnotatedImage*> images{&im};
  const auto samples = det::sample_mask_locations<double>(targets, images, 16, nullptr);
  CHECK(samples.empty());
  std::vector<const det::DensePredictions<double>*> preds{&ws.preds};
  CHECK(det::mask_loss<double>(cfg, preds, images, samples) == 0.0);
}

TEST_CASE("gradients match central finite differences (unit slice)") {
  const auto results = gradcheck::check_random_coordinates(
      gradcheck::tiny_config(), /*seed=*/2024, /*count=*/12);
  for (const auto& r : results) {
    INFO("coord ", r.coord, " analytic ", r.analytic, " numeric ", r.numeric);
    CHECK(r.ok);
  }
}

TEST_CASE("infer: score floor of 1.0 yields no detections") {
  DetectorConfig acfg = gradcheck::tiny_config();
  acfg.num_classes = 1;
  Rng rng(8);
  const auto params = det::init_params<float>(acfg, rng);
  det::InferOptions opt;
  opt.score_floor = 1.0;
  const auto out = det::infer(acfg, params, random_image(rng, 32, 32), opt,
                              Mode::kAgnostic);
  CHECK(out.empty());
}

TEST_CASE("nms: duplicate candidates collapse to one") {
  std::vector<det::Candidate> cands(2);
  cands[0].score = 0.9;
  cands[0].box = BBox{4, 4, 20, 20};
  cands[1].score = 0.8;
  cands[1].box = BBox{4, 4, 20, 20};
  const auto keep = det::greedy_nms(cands, 0.5, false);
  REQUIRE(keep.size() == 1);
  CHECK(keep[0] == 0);
}

TEST_CASE("nms agrees with the O(n^2) reference on random candidates") {
  Rng rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<det::Candidate> cands;
    const int n = rng.uniform_int(0, 40);
    for (int i = 0; i < n; ++i) {
      det::Candidate c;
      const double x = rng.uniform(0, 48), y = rng.uniform(0, 48);
      c.box = BBox{x, y, x + rng.uniform(2, 16), y + rng.uniform(2, 16)};
      c.score = rng.uniform();
      c.class_id = rng.uniform_int(0, 2);
      cands.push_back(c);
    }
    for (bool aware : {false, true}) {
      CHECK(det::greedy_nms(cands, 0.5, aware) ==
            oracle::reference_nms(cands, 0.5, aware));
      CHECK(det::greedy_nms(cands, 0.3, aware) ==
            oracle::reference_nms(cands, 0.3, aware));
    }
  }
}

TEST_CASE("infer survivors equal reference NMS over the decoded candidates") {
  DetectorConfig cfg = gradcheck::tiny_config();
  cfg.num_classes = 1;
  Rng rng(91);
  const auto params = det::init_params<float>(cfg, rng);
  const Image img = random_image(rng, 32, 32);
  det::Workspace<float> ws;
  det::forward(cfg, params, img, ws);
  det::InferOptions opt;
  opt.score_floor = 0.01;
  opt.with_masks = false;
  const auto cands = det::decode_candidates(cfg, ws.preds, opt, Mode::kAgnostic);
  const auto keep = det::greedy_nms(cands, opt.nms_iou, false);
  CHECK(keep == oracle::reference_nms(cands, opt.nms_iou, false));

  const auto insts = det::infer(cfg, params, img, opt, Mode::kAgnostic);
  REQUIRE(insts.size() == keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    CHECK(insts[i].bbox == cands[keep[i]].box);
    CHECK(*insts[i].score == doctest::Approx(cands[keep[i]].score));
  }
  // Deterministic and sorted by descending score.
  for (std::size_t i = 1; i < insts.size(); ++i)
    CHECK(*insts[i - 1].score >= *insts[i].score);
  const auto again = det::infer(cfg, params, img, opt, Mode::kAgnostic);
  CHECK(again.size() == insts.size());
}

TEST_CASE("infer: masked instances keep the mask/box invariant") {
  DetectorConfig cfg = gradcheck::tiny_config();
  cfg.num_classes = 1;
  Rng rng(19);
  const auto params = det::init_params<float>(cfg, rng);
  const auto out = det::infer(cfg, params, random_image(rng, 32, 32),
                              det::InferOptions{}, Mode::kAgnostic);
  for (const auto& inst : out) {
    if (!inst.mask) continue;
    const auto tb = tight_box(*inst.mask);
    REQUIRE(tb.has_value());
    CHECK(inst.bbox == *tb);
  }
}
