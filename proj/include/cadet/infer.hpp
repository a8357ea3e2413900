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
#ifndef CADET_INFER_HPP_
#define CADET_INFER_HPP_

#include <algorithm>

#include "cadet/dataset.hpp"
#include "cadet/losses.hpp"

namespace cadet::det {

struct InferOptions {
  double score_floor = 0.05;
  double nms_iou = 0.6;
  bool use_centerness = true;  // score = sqrt(sig(cls) * sig(ctr)), else sig(cls)
  bool with_masks = true;
  double mask_threshold = 0.5;
  int max_detections = -1;  // < 0 means uncapped
};

struct Candidate {
  double score = 0;
  BBox box;           // decoded and clipped to the image
  int class_id = -1;  // -1 in agnostic mode
  int level_index = 0;
  int y = 0, x = 0;
};

// Forward-only evaluation of the dynamic mask head at one location,
// upsampled to padded image resolution. Shared by training and inference.
template <typename S>
Mat<S> dynamic_mask_logits(const DetectorConfig& cfg,
                           const DensePredictions<S>& pr, int level_index,
                           int y, int x) {
  const LevelPreds<S>& lp = pr.levels[static_cast<std::size_t>(level_index)];
  const int gh = pr.mask_feats.height(), gw = pr.mask_feats.width();
  const int n = gh * gw;
  const int din = cfg.dyn_in();
  const int kh = cfg.kernel_hidden;
  const int stride = pr.mask_stride;

  Vec<S> k(cfg.dynamic_param_count());
  for (int c = 0; c < cfg.dynamic_param_count(); ++c) k[c] = lp.ker[c](y, x);
  Eigen::Map<const Mat<S>> w1(k.data(), kh, din);
  Eigen::Map<const Vec<S>> b1(k.data() + kh * din, kh);
  Eigen::Map<const Vec<S>> w2(k.data() + kh * din + kh, kh);
  const S b2 = k[static_cast<Eigen::Index>(kh * din + kh + kh)];

  const double cx = (x + 0.5) * lp.stride;
  const double cy = (y + 0.5) * lp.stride;
  const double coord_scale = cfg.coord_scale(level_index);
  Mat<S> feat(din, n);
  for (int c = 0; c < cfg.mask_channels; ++c)
    feat.row(c) = Eigen::Map<const Mat<S>>(pr.mask_feats[c].data(), 1, n);
  for (int i = 0; i < gh; ++i) {
    for (int j = 0; j < gw; ++j) {
      const double px = (j + 0.5) * stride, py = (i + 0.5) * stride;
      feat(cfg.mask_channels, i * gw + j) = static_cast<S>((px - cx) / coord_scale);
      feat(cfg.mask_channels + 1, i * gw + j) = static_cast<S>((py - cy) / coord_scale);
    }
  }
  Mat<S> h1 = ((w1 * feat).colwise() + b1).cwiseMax(S(0));
  Mat<S> logit_row = (w2.transpose() * h1).array() + b2;
  Mat<S> logit = Eigen::Map<Mat<S>>(logit_row.data(), gh, gw);
  Mat<S> up;
  nn::upsample_bilinear(logit, stride, up);
  return up;
}

// Per-location candidates above the score floor, in deterministic decode
// order (level, row, column, class). Scores are sqrt(cls * centerness)
// sigmoid products by default; boxes are decoded from the offsets and
// clipped to the original image extent.
template <typename S>
std::vector<Candidate> decode_candidates(const DetectorConfig& cfg,
                                         const DensePredictions<S>& pr,
                                         const InferOptions& opt, Mode mode) {
  if (mode == Mode::kAgnostic)
    require(cfg.num_classes == 1, "infer: agnostic mode needs num_classes == 1");
  std::vector<Candidate> out;
  for (std::size_t li = 0; li < pr.levels.size(); ++li) {
    const LevelPreds<S>& lp = pr.levels[li];
    const int gh = lp.cls.height(), gw = lp.cls.width();
    for (int i = 0; i < gh; ++i) {
      for (int j = 0; j < gw; ++j) {
        const double s_ctr = nn::sigmoid(static_cast<double>(lp.ctr[0](i, j)));
        for (int c = 0; c < cfg.num_classes; ++c) {
          const double s_cls = nn::sigmoid(static_cast<double>(lp.cls[c](i, j)));
          const double score =
              opt.use_centerness ? std::sqrt(s_cls * s_ctr) : s_cls;
          if (score < opt.score_floor) continue;
          const double cx = (j + 0.5) * lp.stride;
          const double cy = (i + 0.5) * lp.stride;
          const BBox box =
              BBox{cx - static_cast<double>(lp.box[0](i, j)),
                   cy - static_cast<double>(lp.box[1](i, j)),
                   cx + static_cast<double>(lp.box[2](i, j)),
                   cy + static_cast<double>(lp.box[3](i, j))}
                  .clipped(pr.image_w, pr.image_h);
          if (!box.valid()) continue;
          Candidate cand;
          cand.score = score;
          cand.box = box;
          cand.class_id = mode == Mode::kSpecific ? c : -1;
          cand.level_index = static_cast<int>(li);
          cand.y = i;
          cand.x = j;
          out.push_back(cand);
        }
      }
    }
  }
  return out;
}

// Greedy NMS in descending score order (stable towards decode order on
// ties). Suppresses candidates with IoU strictly above the threshold; in
// class-aware mode only same-class pairs suppress each other. Returns the
// surviving indices into `cands`, ordered by descending score.
inline std::vector<std::size_t> greedy_nms(const std::vector<Candidate>& cands,
                                           double nms_iou, bool class_aware) {
  std::vector<std::size_t> order(cands.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cands[a].score > cands[b].score;
  });
  std::vector<std::size_t> keep;
  std::vector<bool> dead(cands.size(), false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (dead[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (dead[j]) continue;
      if (class_aware && cands[i].class_id != cands[j].class_id) continue;
      if (iou(cands[i].box, cands[j].box) > nms_iou) dead[j] = true;
    }
  }
  return keep;
}

// Full inference on one image. Survivor masks come from thresholding the
// dynamic-head probabilities at opt.mask_threshold inside the decoded box;
// when the thresholded mask is non-empty the instance box is tightened to
// the mask so the mask/box invariant of Instance holds by construction.
template <typename S>
std::vector<Instance> infer(const DetectorConfig& cfg,
                            const DetectorParams<S>& params, const Image& image,
                            const InferOptions& opt, Mode mode,
                            Workspace<S>* scratch = nullptr) {
  Workspace<S> local;
  Workspace<S>& ws = scratch ? *scratch : local;
  forward(cfg, params, image, ws);
  const DensePredictions<S>& pr = ws.preds;

  std::vector<Candidate> cands = decode_candidates(cfg, pr, opt, mode);
  std::vector<std::size_t> keep =
      greedy_nms(cands, opt.nms_iou, mode == Mode::kSpecific);
  if (opt.max_detections >= 0 &&
      keep.size() > static_cast<std::size_t>(opt.max_detections))
    keep.resize(static_cast<std::size_t>(opt.max_detections));

  std::vector<Instance> out;
  out.reserve(keep.size());
  for (std::size_t idx : keep) {
    const Candidate& cand = cands[idx];
    Instance inst;
    inst.bbox = cand.box;
    inst.score = cand.score;
    if (mode == Mode::kSpecific) inst.class_id = cand.class_id;
    if (opt.with_masks) {
      const Mat<S> logits =
          dynamic_mask_logits(cfg, pr, cand.level_index, cand.y, cand.x);
      Mask m(pr.image_h, pr.image_w);
      for (int i = 0; i < pr.image_h; ++i) {
        for (int j = 0; j < pr.image_w; ++j) {
          if (nn::sigmoid(static_cast<double>(logits(i, j))) <= opt.mask_threshold)
            continue;
          if (!cand.box.contains(j + 0.5, i + 0.5)) continue;
          m.grid(i, j) = 1;
        }
      }
      if (!m.empty_mask()) {
        inst.bbox = *tight_box(m);
        inst.mask = std::move(m);
      }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace cadet::det

#endif  // CADET_INFER_HPP_
