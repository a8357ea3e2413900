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

#include <filesystem>
#include <fstream>

#include "cadet/checkpoint.hpp"
#include "cadet/coco_json.hpp"
#include "cadet/pixpack.hpp"
#include "cadet/rng.hpp"

using namespace cadet;

namespace {

std::string temp_dir() {
  static int counter = 0;
  const std::string dir =
      (std::filesystem::temp_directory_path() /
       ("cadet_dm_" + std::to_string(::getpid()) + "_" + std::to_string(counter++)))
          .string();
  std::filesystem::create_directories(dir);
  return dir;
}

Mask random_mask(Rng& rng, int h, int w, double density = 0.4) {
  Mask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.grid(y, x) = rng.uniform() < density ? 1 : 0;
  return m;
}

// A random but invariant-satisfying labeled or pseudo split.
DatasetSplit random_split(Rng& rng, int n_images, bool scored) {
  DatasetSplit split;
  split.role = scored ? Role::kPseudo : Role::kLabeled;
  if (!scored) split.class_names = std::vector<std::string>{"a", "b", "c"};
  for (int i = 0; i < n_images; ++i) {
    AnnotatedImage im;
    im.id = "t-" + std::to_string(i);
    im.height = 16 + 2 * rng.uniform_int(0, 8);
    im.width = 16 + 2 * rng.uniform_int(0, 8);
    const int n_inst = scored ? rng.uniform_int(1, 4) : rng.uniform_int(0, 4);
    for (int k = 0; k < n_inst; ++k) {
      Instance inst;
      if (rng.uniform() < 0.7) {
        Mask m(im.height, im.width);
        const int y0 = rng.uniform_int(0, im.height - 4);
        const int x0 = rng.uniform_int(0, im.width - 4);
        const int y1 = y0 + rng.uniform_int(2, 3), x1 = x0 + rng.uniform_int(2, 3);
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x)
            m.grid(y, x) = rng.uniform() < 0.8 ? 1 : 0;
        m.grid(y0, x0) = 1;
        m.grid(y1, x1) = 1;
        inst.mask = m;
        inst.bbox = *tight_box(m);
      } else {
        const double x0 = rng.uniform(0, im.width - 3);
        const double y0 = rng.uniform(0, im.height - 3);
        inst.bbox = BBox{x0, y0, x0 + rng.uniform(1, 2), y0 + rng.uniform(1, 2)};
      }
      if (!scored) inst.class_id = rng.uniform_int(0, 2);
      if (scored) inst.score = rng.uniform();
      inst.kind = rng.uniform() < 0.2 ? Kind::kStuff : Kind::kThing;
      im.instances.push_back(std::move(inst));
    }
    split.images.push_back(std::move(im));
  }
  validate_split(split);
  return split;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("rle codec round-trips 1000 random masks") {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = rng.uniform_int(1, 128);
    const int w = rng.uniform_int(1, 128);
    const Mask m = random_mask(rng, h, w, rng.uniform());
    const auto counts = rle_encode(m);
    CHECK(rle_decode(counts, h, w) == m);
    const std::string s = rle_counts_to_string(counts);
    CHECK(rle_string_to_counts(s) == counts);
  }
}

TEST_CASE("rle string codec matches the reference encoding") {
  // A 3x3 mask with first column set, scanned column-major:
  // 3 ones then 6 zeros -> counts [0, 3, 6].
  Mask m(3, 3);
  m.grid(0, 0) = m.grid(1, 0) = m.grid(2, 0) = 1;
  const auto counts = rle_encode(m);
  CHECK(counts == std::vector<std::uint32_t>{0, 3, 6});
  // All-zero mask: one run of h*w zeros.
  Mask z(4, 2);
  CHECK(rle_encode(z) == std::vector<std::uint32_t>{8});
}

TEST_CASE("tight_box and mask helpers") {
  Mask m(8, 8);
  m.grid(2, 3) = 1;
  m.grid(5, 6) = 1;
  const auto tb = tight_box(m);
  REQUIRE(tb.has_value());
  CHECK(tb->x1 == 3.0);
  CHECK(tb->y1 == 2.0);
  CHECK(tb->x2 == 7.0);
  CHECK(tb->y2 == 6.0);
  CHECK(!tight_box(Mask(4, 4)).has_value());
}

TEST_CASE("coco json: empty file round trip") {
  const std::string dir = temp_dir();
  DatasetSplit empty;
  write_coco_json(empty, dir + "/empty.json");
  const DatasetSplit back = read_coco_json(dir + "/empty.json");
  CHECK(back.images.empty());
}

TEST_CASE("coco json: xywh becomes xyxy") {
  const std::string dir = temp_dir();
  std::ofstream f(dir + "/a.json");
  f << R"({"images": [{"id": "x", "width": 64, "height": 64, "file_name": "x.pix"}],
          "annotations": [{"id": 1, "image_id": "x", "bbox": [10, 20, 30, 40],
                           "iskind": "thing"}],
          "categories": []})";
  f.close();
  const DatasetSplit split = read_coco_json(dir + "/a.json");
  REQUIRE(split.images.size() == 1);
  REQUIRE(split.images[0].instances.size() == 1);
  const BBox& b = split.images[0].instances[0].bbox;
  CHECK(b == BBox{10, 20, 40, 60});
  CHECK(split.role == Role::kLabeled);
}

TEST_CASE("coco json: malformed records name image and field") {
  const std::string dir = temp_dir();
  {
    std::ofstream f(dir + "/bad_box.json");
    f << R"({"images": [{"id": "im9", "width": 32, "height": 32}],
            "annotations": [{"id": 1, "image_id": "im9", "bbox": [4, 4, 0, 5]}],
            "categories": []})";
  }
  CHECK_THROWS_WITH_AS(read_coco_json(dir + "/bad_box.json"),
                       doctest::Contains("im9"), Error);
  {
    std::ofstream f(dir + "/bad_ref.json");
    f << R"({"images": [], "annotations":
            [{"id": 1, "image_id": "ghost", "bbox": [1, 1, 2, 2]}],
            "categories": []})";
  }
  CHECK_THROWS_WITH_AS(read_coco_json(dir + "/bad_ref.json"),
                       doctest::Contains("ghost"), Error);
}

TEST_CASE("coco json: stuff kind and scores survive") {
  const std::string dir = temp_dir();
  DatasetSplit split;
  split.role = Role::kPseudo;
  AnnotatedImage im;
  im.id = "p0";
  im.width = im.height = 16;
  Instance inst;
  inst.bbox = BBox{2, 2, 10, 12};
  inst.score = 0.73;
  inst.kind = Kind::kStuff;
  im.instances.push_back(inst);
  split.images.push_back(im);
  write_coco_json(split, dir + "/s.json");

  const std::string text = slurp(dir + "/s.json");
  CHECK(text.find("\"iskind\": \"stuff\"") != std::string::npos);
  const DatasetSplit back = read_coco_json(dir + "/s.json");
  CHECK(back.role == Role::kPseudo);
  CHECK(back.images[0].instances[0].kind == Kind::kStuff);
  CHECK(back.images[0].instances[0].score == doctest::Approx(0.73).epsilon(1e-12));
}

TEST_CASE("coco json: randomized 50-image round trip is field-identical") {
  Rng rng(7);
  const std::string dir = temp_dir();
  const DatasetSplit split = random_split(rng, 50, false);
  write_coco_json(split, dir + "/a.json");
  const DatasetSplit back = read_coco_json(dir + "/a.json");
  write_coco_json(back, dir + "/b.json");
  CHECK(slurp(dir + "/a.json") == slurp(dir + "/b.json"));

  // Determinism: two writes of the same split are byte-identical.
  write_coco_json(split, dir + "/c.json");
  CHECK(slurp(dir + "/a.json") == slurp(dir + "/c.json"));
}

TEST_CASE("coco json: role inference") {
  Rng rng(11);
  const std::string dir = temp_dir();
  const DatasetSplit pseudo = random_split(rng, 5, true);
  write_coco_json(pseudo, dir + "/p.json");
  CHECK(read_coco_json(dir + "/p.json").role == Role::kPseudo);

  DatasetSplit unlabeled;
  unlabeled.role = Role::kUnlabeled;
  AnnotatedImage im;
  im.id = "u0";
  im.width = im.height = 8;
  unlabeled.images.push_back(im);
  write_coco_json(unlabeled, dir + "/u.json");
  CHECK(read_coco_json(dir + "/u.json").role == Role::kUnlabeled);
}

TEST_CASE("pixpack round trip is bit exact") {
  Rng rng(3);
  const std::string dir = temp_dir();
  DatasetSplit split = random_split(rng, 4, false);
  for (auto& im : split.images) {
    im.pixels.resize(3, im.height, im.width);
    for (auto& plane : im.pixels.planes)
      for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
          plane(y, x) = static_cast<float>(rng.uniform());
  }
  save_split(split, dir);
  const DatasetSplit back = load_split(dir);
  REQUIRE(back.images.size() == split.images.size());
  for (std::size_t i = 0; i < split.images.size(); ++i)
    CHECK(back.images[i].pixels == split.images[i].pixels);
}

TEST_CASE("validate_split enforces role invariants") {
  DatasetSplit split;
  split.role = Role::kUnlabeled;
  AnnotatedImage im;
  im.id = "im0";
  im.width = im.height = 8;
  Instance inst;
  inst.bbox = BBox{1, 1, 3, 3};
  im.instances.push_back(inst);
  split.images.push_back(im);
  CHECK_THROWS_AS(validate_split(split), Error);

  split.role = Role::kPseudo;  // instance without score is fine (binarized),
  validate_split(split);       // but an empty image is not
  split.images[0].instances.clear();
  CHECK_THROWS_AS(validate_split(split), Error);
}

namespace {

det::DetectorConfig tiny_config(int num_classes = 1) {
  det::DetectorConfig cfg;
  cfg.backbone_widths = {4, 6, 8, 8};
  cfg.head_depth = 1;
  cfg.head_width = 6;
  cfg.mask_channels = 2;
  cfg.mask_hidden = 4;
  cfg.kernel_hidden = 2;
  cfg.num_classes = num_classes;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoint save/load round trip is bit exact") {
  const std::string dir = temp_dir();
  const det::DetectorConfig cfg = tiny_config();
  Rng rng(99);
  const auto params = det::init_params<float>(cfg, rng);
  CheckpointMeta meta{"labeler", 99, 7, "deadbeef", "agnostic"};
  checkpoint_save(cfg, params, meta, dir + "/a.ckpt");
  const Checkpoint back = checkpoint_read(dir + "/a.ckpt");
  CHECK(back.meta.stage == "labeler");
  CHECK(back.meta.seed == 99);
  CHECK(back.meta.epoch == 7);
  CHECK(back.meta.config_digest == "deadbeef");
  CHECK(back.config == cfg);
  for (const auto& part : kAllParts)
    CHECK(params_part_equal(back.params, params, cfg, part));
}

TEST_CASE("checkpoint partial load touches only requested parts") {
  const std::string dir = temp_dir();
  const det::DetectorConfig cfg = tiny_config();
  Rng rng_a(1), rng_b(2);
  const auto source = det::init_params<float>(cfg, rng_a);
  CheckpointMeta meta{"warmup", 1, 1, "d", "agnostic"};
  checkpoint_save(cfg, source, meta, dir + "/w.ckpt");
  const Checkpoint ck = checkpoint_read(dir + "/w.ckpt");

  SUBCASE("full filter restores everything") {
    auto target = det::init_params<float>(cfg, rng_b);
    checkpoint_load_parts(ck, kAllParts, cfg, target);
    for (const auto& part : kAllParts)
      CHECK(params_part_equal(target, source, cfg, part));
  }
  SUBCASE("empty filter changes nothing") {
    auto fresh = det::init_params<float>(cfg, rng_b);
    auto target = fresh;
    checkpoint_load_parts(ck, {}, cfg, target);
    for (const auto& part : kAllParts)
      CHECK(params_part_equal(target, fresh, cfg, part));
  }
  SUBCASE("backbone only") {
    Rng rng_c(2);
    auto fresh = det::init_params<float>(cfg, rng_c);
    auto target = fresh;
    checkpoint_load_parts(ck, {"backbone"}, cfg, target);
    CHECK(params_part_equal(target, source, cfg, "backbone"));
    CHECK(params_part_equal(target, fresh, cfg, "neck"));
    CHECK(params_part_equal(target, fresh, cfg, "head"));
    CHECK(params_part_equal(target, fresh, cfg, "classifier"));
    CHECK(!params_part_equal(target, source, cfg, "neck"));
  }
  SUBCASE("shape mismatch names the tensor") {
    det::DetectorConfig other = cfg;
    other.head_width = 8;
    auto target = det::init_params<float>(other, rng_b);
    CHECK_THROWS_WITH_AS(checkpoint_load_parts(ck, {"head"}, other, target),
                         doctest::Contains("head."), Error);
  }
}

TEST_CASE("forward pass identical after full checkpoint restore") {
  const std::string dir = temp_dir();
  const det::DetectorConfig cfg = tiny_config();
  Rng rng(5);
  const auto params = det::init_params<float>(cfg, rng);
  Image img(3, 32, 32);
  for (auto& plane : img.planes)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) plane(y, x) = static_cast<float>(rng.uniform());

  det::Workspace<float> ws1, ws2;
  det::forward(cfg, params, img, ws1);

  checkpoint_save(cfg, params, {"labeler", 5, 0, "d", "agnostic"}, dir + "/f.ckpt");
  const Checkpoint back = checkpoint_read(dir + "/f.ckpt");
  det::forward(back.config, back.params, img, ws2);
  for (std::size_t li = 0; li < ws1.preds.levels.size(); ++li) {
    CHECK(ws1.preds.levels[li].cls == ws2.preds.levels[li].cls);
    CHECK(ws1.preds.levels[li].box == ws2.preds.levels[li].box);
    CHECK(ws1.preds.levels[li].ctr == ws2.preds.levels[li].ctr);
    CHECK(ws1.preds.levels[li].ker == ws2.preds.levels[li].ker);
  }
  CHECK(ws1.preds.mask_feats == ws2.preds.mask_feats);
}
