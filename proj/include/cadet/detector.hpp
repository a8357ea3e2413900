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
#ifndef CADET_DETECTOR_HPP_
#define CADET_DETECTOR_HPP_

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "cadet/error.hpp"
#include "cadet/nn.hpp"
#include "cadet/rng.hpp"
#include "cadet/tensor.hpp"

// A miniature CondInst-style dense detector: a four-stage conv backbone, a
// two-level FPN neck, an FCOS-style shared head with classification, box,
// centerness and kernel branches, and a mask-feature branch whose per-pixel
// features are convolved with location-generated dynamic 1x1 kernels to
// produce instance masks.
namespace cadet::det {

struct ScaleRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

enum class Mode { kAgnostic, kSpecific };

struct DetectorConfig {
  int in_channels = 3;
  std::array<int, 4> backbone_widths{16, 32, 64, 64};  // stage strides 2,4,8,16
  std::vector<int> pyramid_levels{3, 4};               // stride = 1 << level
  int head_depth = 2;
  int head_width = 32;
  int num_classes = 1;   // 1 in class-agnostic mode
  int mask_channels = 4; // shared mask-feature map width
  int mask_hidden = 8;   // mask branch hidden width
  int kernel_hidden = 4; // dynamic mask head hidden width
  // A location is assigned to the level whose range contains its max
  // regression offset: lo <= max(l, t, r, b) < hi. The 32px boundary keeps
  // small shapes on the stride-8 level and image-wide stuff bands (whose max
  // offset is always >= half their 64px extent) on the stride-16 level, so
  // band locations cannot drown out small-object supervision.
  std::vector<ScaleRange> scale_ranges{{0.0, 32.0},
                                       {32.0, std::numeric_limits<double>::infinity()}};

  int num_levels() const { return static_cast<int>(pyramid_levels.size()); }
  int stride(int level_index) const { return 1 << pyramid_levels[static_cast<std::size_t>(level_index)]; }
  int max_stride() const { return stride(num_levels() - 1); }
  int finest_stride() const { return stride(0); }
  // Dynamic head input: mask features plus two relative-coordinate channels.
  int dyn_in() const { return mask_channels + 2; }
  int dynamic_param_count() const {
    return dyn_in() * kernel_hidden + kernel_hidden + kernel_hidden + 1;
  }
  // Relative coordinates are normalized by a per-level scale tied to the
  // assignment ranges so the dynamic head sees size-comparable inputs.
  double coord_scale(int level_index) const { return 48.0 * stride(level_index) / 8.0; }

  void validate() const {
    require(num_classes >= 1, "detector config: num_classes must be >= 1");
    require(!pyramid_levels.empty(), "detector config: no pyramid levels");
    for (std::size_t i = 0; i < pyramid_levels.size(); ++i) {
      require(pyramid_levels[i] == 3 || pyramid_levels[i] == 4,
              "detector config: pyramid level must be 3 or 4");
      if (i > 0)
        require(pyramid_levels[i] > pyramid_levels[i - 1],
                "detector config: pyramid strides must be strictly increasing");
    }
    require(scale_ranges.size() == pyramid_levels.size(),
            "detector config: one scale range per pyramid level");
    require(head_depth >= 1 && head_width >= 1 && mask_channels >= 1 &&
                mask_hidden >= 1 && kernel_hidden >= 1,
            "detector config: widths must be positive");
  }
};

inline bool operator==(const DetectorConfig& a, const DetectorConfig& b) {
  auto ranges_equal = [&] {
    if (a.scale_ranges.size() != b.scale_ranges.size()) return false;
    for (std::size_t i = 0; i < a.scale_ranges.size(); ++i)
      if (a.scale_ranges[i].lo != b.scale_ranges[i].lo ||
          a.scale_ranges[i].hi != b.scale_ranges[i].hi)
        return false;
    return true;
  };
  return a.in_channels == b.in_channels && a.backbone_widths == b.backbone_widths &&
         a.pyramid_levels == b.pyramid_levels && a.head_depth == b.head_depth &&
         a.head_width == b.head_width && a.num_classes == b.num_classes &&
         a.mask_channels == b.mask_channels && a.mask_hidden == b.mask_hidden &&
         a.kernel_hidden == b.kernel_hidden && ranges_equal();
}

template <typename S>
struct DetectorParams {
  std::array<nn::ConvParam<S>, 4> backbone;
  std::vector<nn::ConvParam<S>> lateral;  // one per pyramid level, 1x1
  std::vector<nn::ConvParam<S>> fpn_out;  // one per pyramid level, 3x3
  std::vector<nn::ConvParam<S>> tower;    // head_depth shared 3x3 convs
  nn::ConvParam<S> box, ctr, kernel;      // branch heads, 3x3
  nn::ConvParam<S> mask1, mask2;          // mask branch, 3x3
  nn::ConvParam<S> classifier;            // 3x3, num_classes outputs

  void set_zero() {
    for (auto& c : backbone) c.set_zero();
    for (auto& c : lateral) c.set_zero();
    for (auto& c : fpn_out) c.set_zero();
    for (auto& c : tower) c.set_zero();
    box.set_zero();
    ctr.set_zero();
    kernel.set_zero();
    mask1.set_zero();
    mask2.set_zero();
    classifier.set_zero();
  }

  template <typename T>
  DetectorParams<T> cast() const {
    DetectorParams<T> out;
    for (int i = 0; i < 4; ++i) out.backbone[static_cast<std::size_t>(i)] = backbone[static_cast<std::size_t>(i)].template cast<T>();
    for (const auto& c : lateral) out.lateral.push_back(c.template cast<T>());
    for (const auto& c : fpn_out) out.fpn_out.push_back(c.template cast<T>());
    for (const auto& c : tower) out.tower.push_back(c.template cast<T>());
    out.box = box.template cast<T>();
    out.ctr = ctr.template cast<T>();
    out.kernel = kernel.template cast<T>();
    out.mask1 = mask1.template cast<T>();
    out.mask2 = mask2.template cast<T>();
    out.classifier = classifier.template cast<T>();
    return out;
  }
};

// Deterministic enumeration of every parameter tensor with its checkpoint
// name and part tag. The four parts are the unit of partial initialization.
template <typename S, typename Fn>
void visit_params(DetectorParams<S>& p, const DetectorConfig& cfg, Fn&& fn) {
  for (int i = 0; i < 4; ++i)
    fn("backbone.stage" + std::to_string(i + 1), "backbone", p.backbone[static_cast<std::size_t>(i)]);
  for (int li = 0; li < cfg.num_levels(); ++li) {
    const std::string lvl = std::to_string(cfg.pyramid_levels[static_cast<std::size_t>(li)]);
    fn("neck.lateral" + lvl, "neck", p.lateral[static_cast<std::size_t>(li)]);
    fn("neck.out" + lvl, "neck", p.fpn_out[static_cast<std::size_t>(li)]);
  }
  for (int d = 0; d < cfg.head_depth; ++d)
    fn("head.tower" + std::to_string(d + 1), "head", p.tower[static_cast<std::size_t>(d)]);
  fn("head.box", "head", p.box);
  fn("head.ctr", "head", p.ctr);
  fn("head.kernel", "head", p.kernel);
  fn("head.mask1", "head", p.mask1);
  fn("head.mask2", "head", p.mask2);
  fn("classifier", "classifier", p.classifier);
}

template <typename S, typename Fn>
void visit_params(const DetectorParams<S>& p, const DetectorConfig& cfg, Fn&& fn) {
  visit_params(const_cast<DetectorParams<S>&>(p), cfg,
               [&](const std::string& name, const std::string& part,
                   nn::ConvParam<S>& cp) { fn(name, part, static_cast<const nn::ConvParam<S>&>(cp)); });
}

template <typename S>
DetectorParams<S> make_param_shell(const DetectorConfig& cfg) {
  cfg.validate();
  DetectorParams<S> p;
  int cin = cfg.in_channels;
  for (int i = 0; i < 4; ++i) {
    p.backbone[static_cast<std::size_t>(i)].resize(cfg.backbone_widths[static_cast<std::size_t>(i)], cin, 3, 3);
    cin = cfg.backbone_widths[static_cast<std::size_t>(i)];
  }
  p.lateral.resize(static_cast<std::size_t>(cfg.num_levels()));
  p.fpn_out.resize(static_cast<std::size_t>(cfg.num_levels()));
  for (int li = 0; li < cfg.num_levels(); ++li) {
    const int tap_width = cfg.backbone_widths[static_cast<std::size_t>(cfg.pyramid_levels[static_cast<std::size_t>(li)] - 1)];
    p.lateral[static_cast<std::size_t>(li)].resize(cfg.head_width, tap_width, 1, 1);
    p.fpn_out[static_cast<std::size_t>(li)].resize(cfg.head_width, cfg.head_width, 3, 3);
  }
  p.tower.resize(static_cast<std::size_t>(cfg.head_depth));
  for (auto& t : p.tower) t.resize(cfg.head_width, cfg.head_width, 3, 3);
  p.box.resize(4, cfg.head_width, 3, 3);
  p.ctr.resize(1, cfg.head_width, 3, 3);
  p.kernel.resize(cfg.dynamic_param_count(), cfg.head_width, 3, 3);
  p.mask1.resize(cfg.mask_hidden, cfg.head_width, 3, 3);
  p.mask2.resize(cfg.mask_channels, cfg.mask_hidden, 3, 3);
  p.classifier.resize(cfg.num_classes, cfg.head_width, 3, 3);
  return p;
}

// Focal-loss prior so that initial class probabilities sit near 1%.
inline double classifier_prior_bias() { return -std::log((1.0 - 0.01) / 0.01); }

template <typename S>
DetectorParams<S> init_params(const DetectorConfig& cfg, Rng& rng) {
  DetectorParams<S> p = make_param_shell<S>(cfg);
  visit_params(p, cfg, [&](const std::string& name, const std::string&, nn::ConvParam<S>& cp) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(cp.cin * cp.kh * cp.kw));
    for (long i = 0; i < cp.w.rows(); ++i)
      for (long j = 0; j < cp.w.cols(); ++j)
        cp.w(i, j) = static_cast<S>(rng.normal() * std_dev);
    cp.b.setZero();
    if (name == "classifier")
      cp.b.setConstant(static_cast<S>(classifier_prior_bias()));
  });
  return p;
}

template <typename S>
long param_count(const DetectorParams<S>& p, const DetectorConfig& cfg) {
  long n = 0;
  visit_params(p, cfg, [&](const std::string&, const std::string&, const nn::ConvParam<S>& cp) { n += cp.size(); });
  return n;
}

template <typename S>
struct LevelPreds {
  int level = 0;
  int stride = 8;
  PlaneStack<S> cls;  // logits, num_classes planes
  PlaneStack<S> box;  // l, t, r, b in pixels (non-negative, post-activation)
  PlaneStack<S> ctr;  // logits, 1 plane
  PlaneStack<S> ker;  // dynamic head parameters per location
};

template <typename S>
struct DensePredictions {
  std::vector<LevelPreds<S>> levels;
  PlaneStack<S> mask_feats;  // at finest stride
  int mask_stride = 8;
  int padded_h = 0, padded_w = 0;
  int image_h = 0, image_w = 0;

  bool all_finite() const {
    for (const auto& l : levels)
      if (!(l.cls.all_finite() && l.box.all_finite() && l.ctr.all_finite() &&
            l.ker.all_finite()))
        return false;
    return mask_feats.all_finite();
  }
};

// Box branch activation: offsets = exp(min(raw, kBoxRawCap)) * stride keeps
// offsets positive; the cap only exists to avoid inf on wild inputs.
inline constexpr double kBoxRawCap = 12.0;

template <typename S>
struct Workspace {
  // Forward activations. Column matrices are kept for the backward GEMMs.
  PlaneStack<S> x0;
  std::array<PlaneStack<S>, 4> bb;
  std::array<Mat<S>, 4> bb_col;
  std::vector<PlaneStack<S>> lat;
  std::vector<Mat<S>> lat_col;
  PlaneStack<S> up;       // upsampled coarse lateral (two-level neck)
  PlaneStack<S> p3_pre;   // lateral sum feeding the finest out conv
  std::vector<PlaneStack<S>> fpn;
  std::vector<Mat<S>> fpn_col;
  struct HeadAct {
    std::vector<PlaneStack<S>> t;
    std::vector<Mat<S>> t_col;
    Mat<S> cls_col, box_col, ctr_col, ker_col;
    PlaneStack<S> box_raw;
  };
  std::vector<HeadAct> head;
  PlaneStack<S> m1;
  Mat<S> m1_col, m2_col;

  DensePredictions<S> preds;
  DensePredictions<S> dpreds;  // loss gradients, same shapes as preds

  // Scratch for backward.
  Mat<S> dcol;

  void zero_dpreds() {
    for (auto& l : dpreds.levels) {
      l.cls.set_zero();
      l.box.set_zero();
      l.ctr.set_zero();
      l.ker.set_zero();
    }
    dpreds.mask_feats.set_zero();
  }
};

// Runs the network on one image (pixels centered at 0.5, padded with zeros
// to a multiple of the coarsest stride). Deterministic; activations stay in
// ws for a subsequent backward().
template <typename S>
void forward(const DetectorConfig& cfg, const DetectorParams<S>& params,
             const Image& image, Workspace<S>& ws);

// Propagates ws.dpreds through the network, accumulating parameter
// gradients into grads (same shapes as params).
template <typename S>
void backward(const DetectorConfig& cfg, const DetectorParams<S>& params,
              Workspace<S>& ws, DetectorParams<S>& grads);

}  // namespace cadet::det

#include "cadet/detector_impl.hpp"

#endif  // CADET_DETECTOR_HPP_
