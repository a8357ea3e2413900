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
#include "cadet/synthgen.hpp"

#include <array>
#include <cmath>

#include "cadet/error.hpp"
#include "cadet/rng.hpp"

namespace cadet::synth {
namespace {

struct Rgb {
  double r, g, b;
};

Rgb base_color(const std::string& name) {
  if (name == "red") return {0.85, 0.20, 0.20};
  if (name == "green") return {0.20, 0.75, 0.25};
  if (name == "blue") return {0.20, 0.30, 0.90};
  if (name == "yellow") return {0.85, 0.80, 0.20};
  if (name == "sky") return {0.55, 0.75, 0.95};
  if (name == "ground") return {0.40, 0.60, 0.35};
  // Unknown names get a deterministic pseudo-color.
  Rng rng(fnv1a(name));
  return {0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(),
          0.2 + 0.6 * rng.uniform()};
}

struct Thing {
  int shape_index;
  int color_index;
  double cx, cy, size;
  Rgb color;
};

bool inside_shape(const Thing& th, const std::string& shape, double px, double py) {
  const double half = th.size / 2.0;
  if (shape == "circle") {
    const double dx = px - th.cx, dy = py - th.cy;
    return dx * dx + dy * dy <= half * half;
  }
  if (shape == "square") {
    return std::abs(px - th.cx) <= half && std::abs(py - th.cy) <= half;
  }
  // Upward isoceles triangle: apex on top, base at the bottom.
  const double top = th.cy - half;
  if (py < top || py > th.cy + half) return false;
  const double frac = (py - top) / th.size;  // 0 at apex, 1 at base
  return std::abs(px - th.cx) <= frac * half;
}

AnnotatedImage make_image(const SynthSpec& spec, int index) {
  Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(index)));
  const int h = spec.height, w = spec.width;

  AnnotatedImage im;
  im.id = spec.id_prefix + "-" + std::to_string(spec.seed) + "-" + std::to_string(index);
  im.width = w;
  im.height = h;

  // Horizon between the two stuff bands.
  const int horizon = static_cast<int>(std::lround(h * rng.uniform(0.35, 0.65)));
  std::array<Rgb, 2> stuff_colors{};
  for (std::size_t s = 0; s < spec.stuff.size() && s < 2; ++s) {
    Rgb c = base_color(spec.stuff[s]);
    c.r += rng.uniform(-0.05, 0.05);
    c.g += rng.uniform(-0.05, 0.05);
    c.b += rng.uniform(-0.05, 0.05);
    stuff_colors[s] = c;
  }

  const int n_things = rng.uniform_int(0, spec.max_things);
  std::vector<Thing> things;
  things.reserve(static_cast<std::size_t>(n_things));
  for (int k = 0; k < n_things; ++k) {
    Thing th;
    th.shape_index = rng.uniform_int(0, static_cast<int>(spec.shapes.size()) - 1);
    th.color_index = rng.uniform_int(0, static_cast<int>(spec.colors.size()) - 1);
    th.size = rng.uniform(spec.min_thing_size, spec.max_thing_size);
    const double margin = th.size / 2.0 + 1.0;
    th.cx = rng.uniform(margin, w - margin);
    th.cy = rng.uniform(margin, h - margin);
    Rgb c = base_color(spec.colors[static_cast<std::size_t>(th.color_index)]);
    c.r += rng.uniform(-0.06, 0.06);
    c.g += rng.uniform(-0.06, 0.06);
    c.b += rng.uniform(-0.06, 0.06);
    th.color = c;
    things.push_back(th);
  }

  // Per-pixel owner: 0..n_stuff-1 for bands, n_stuff + k for thing k.
  const int n_stuff = static_cast<int>(spec.stuff.size());
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> owner(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      owner(y, x) = (y < horizon || n_stuff < 2) ? 0 : 1;
  for (int k = 0; k < n_things; ++k) {
    const Thing& th = things[static_cast<std::size_t>(k)];
    const std::string& shape = spec.shapes[static_cast<std::size_t>(th.shape_index)];
    const int y0 = std::max(0, static_cast<int>(th.cy - th.size / 2 - 1));
    const int y1 = std::min(h - 1, static_cast<int>(th.cy + th.size / 2 + 1));
    const int x0 = std::max(0, static_cast<int>(th.cx - th.size / 2 - 1));
    const int x1 = std::min(w - 1, static_cast<int>(th.cx + th.size / 2 + 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (inside_shape(th, shape, x + 0.5, y + 0.5)) owner(y, x) = n_stuff + k;
  }

  // Paint pixels, then noise.
  im.pixels.resize(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int o = owner(y, x);
      const Rgb c = o < n_stuff ? stuff_colors[static_cast<std::size_t>(o)]
                                : things[static_cast<std::size_t>(o - n_stuff)].color;
      im.pixels[0](y, x) = static_cast<float>(c.r);
      im.pixels[1](y, x) = static_cast<float>(c.g);
      im.pixels[2](y, x) = static_cast<float>(c.b);
    }
  }
  if (spec.noise > 0) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          im.pixels[c](y, x) = static_cast<float>(std::clamp(
              static_cast<double>(im.pixels[c](y, x)) + spec.noise * rng.normal(),
              0.0, 1.0));
  }

  // Visibility masks. Fully occluded instances are dropped.
  auto push_instance = [&](int owner_id, int class_id, Kind kind) {
    Mask m(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (owner(y, x) == owner_id) m.grid(y, x) = 1;
    const auto tb = tight_box(m);
    if (!tb) return;
    Instance inst;
    inst.bbox = *tb;
    inst.mask = std::move(m);
    inst.class_id = class_id;
    inst.kind = kind;
    im.instances.push_back(std::move(inst));
  };
  for (int k = 0; k < n_things; ++k) {
    const Thing& th = things[static_cast<std::size_t>(k)];
    const int class_id =
        th.shape_index * static_cast<int>(spec.colors.size()) + th.color_index;
    push_instance(n_stuff + k, class_id, Kind::kThing);
  }
  for (int s = 0; s < n_stuff; ++s)
    push_instance(s, spec.num_thing_classes() + s, Kind::kStuff);

  return im;
}

}  // namespace

std::vector<std::string> SynthSpec::class_names() const {
  std::vector<std::string> names;
  for (const auto& shape : shapes)
    for (const auto& color : colors) names.push_back(color + "_" + shape);
  for (const auto& s : stuff) names.push_back(s);
  return names;
}

void SynthSpec::validate() const {
  require(height >= 32 && width >= 32, "synth spec: image extent must be >= 32");
  require(!shapes.empty() && !colors.empty(), "synth spec: empty thing class table");
  require(!stuff.empty() && stuff.size() <= 2, "synth spec: need 1 or 2 stuff classes");
  require(max_things >= 0, "synth spec: max_things must be >= 0");
  require(min_thing_size >= 4 && max_thing_size >= min_thing_size,
          "synth spec: bad thing size range");
  require(max_thing_size + 2 < std::min(height, width),
          "synth spec: things must fit inside the image");
  require(noise >= 0, "synth spec: noise must be >= 0");
}

DatasetSplit generate(const SynthSpec& spec) {
  spec.validate();
  DatasetSplit split;
  split.role = Role::kLabeled;
  split.class_names = spec.class_names();
  split.images.reserve(static_cast<std::size_t>(spec.num_images));
  for (int i = 0; i < spec.num_images; ++i)
    split.images.push_back(make_image(spec, i));
  validate_split(split);
  return split;
}

DatasetSplit derive_unlabeled(const DatasetSplit& labeled) {
  require(labeled.role == Role::kLabeled,
          "derive_unlabeled: input role must be labeled, got ",
          role_name(labeled.role));
  DatasetSplit out;
  out.role = Role::kUnlabeled;
  out.images.reserve(labeled.images.size());
  for (const auto& im : labeled.images) {
    AnnotatedImage u;
    u.id = im.id + "-u";
    u.width = im.width;
    u.height = im.height;
    u.pixels = im.pixels;
    out.images.push_back(std::move(u));
  }
  return out;
}

}  // namespace cadet::synth
