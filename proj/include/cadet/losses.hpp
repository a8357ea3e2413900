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
#ifndef CADET_LOSSES_HPP_
#define CADET_LOSSES_HPP_

#include <vector>

#include "cadet/targets.hpp"

namespace cadet::det {

inline constexpr double kFocalGamma = 2.0;
inline constexpr double kFocalAlpha = 0.25;

template <typename S>
struct LossWeights {
  S cls = 1, loc = 1, ctr = 1, dice = 1;
};

template <typename S>
struct LossBreakdown {
  S cls = 0, loc = 0, ctr = 0, dice = 0, total = 0;
  int num_pos = 0;

  bool finite() const {
    return std::isfinite(static_cast<double>(total));
  }
};

namespace internal {

// Focal terms for one logit. Returns the loss; *dx gets the derivative.
template <typename S>
S focal_term(S x, bool positive, S* dx) {
  const S p = nn::sigmoid(x);
  const S alpha = static_cast<S>(kFocalAlpha);
  const S gamma = static_cast<S>(kFocalGamma);
  if (positive) {
    const S one_minus_p = S(1) - p;
    const S mod = std::pow(one_minus_p, gamma);
    const S log_p = -nn::softplus(-x);
    if (dx) *dx = alpha * mod * (gamma * p * log_p - one_minus_p);
    return alpha * mod * (-log_p);
  }
  const S mod = std::pow(p, gamma);
  const S log_1mp = -nn::softplus(x);
  if (dx) *dx = (S(1) - alpha) * mod * (gamma * (S(1) - p) * (-log_1mp) + p);
  return (S(1) - alpha) * mod * (-log_1mp);
}

}  // namespace internal

// Composite detection loss over a batch:
//   cls: focal loss over every location and class, / max(1, num_pos)
//   loc: -log IoU between predicted and target offsets over positives,
//        / max(1, num_pos)
//   ctr: binary cross-entropy on centerness logits over positives,
//        / max(1, num_pos)
// total = weighted sum of the three (the dice term is mask_loss's job).
// When dpreds is given, gradients of `total` are accumulated into it.
template <typename S>
LossBreakdown<S> detection_loss(
    const DetectorConfig& cfg,
    const std::vector<const DensePredictions<S>*>& preds,
    const std::vector<const TargetMap<S>*>& targets, Mode mode,
    const LossWeights<S>& w,
    const std::vector<DensePredictions<S>*>& dpreds = {}) {
  require(preds.size() == targets.size(), "detection_loss: batch size mismatch");
  require(dpreds.empty() || dpreds.size() == preds.size(),
          "detection_loss: gradient batch size mismatch");
  if (mode == Mode::kAgnostic)
    require(cfg.num_classes == 1, "detection_loss: agnostic mode needs num_classes == 1");

  int num_pos = 0;
  for (const auto* tm : targets) num_pos += tm->num_pos;
  const S inv_pos = S(1) / static_cast<S>(std::max(1, num_pos));

  LossBreakdown<S> out;
  out.num_pos = num_pos;

  for (std::size_t n = 0; n < preds.size(); ++n) {
    const DensePredictions<S>& pr = *preds[n];
    const TargetMap<S>& tm = *targets[n];
    require(pr.levels.size() == tm.levels.size(),
            "detection_loss: preds/targets level count mismatch");
    DensePredictions<S>* gr = dpreds.empty() ? nullptr : dpreds[n];

    for (std::size_t li = 0; li < pr.levels.size(); ++li) {
      const LevelPreds<S>& lp = pr.levels[li];
      const LevelTargets<S>& lt = tm.levels[li];
      const int gh = static_cast<int>(lt.cls.rows()), gw = static_cast<int>(lt.cls.cols());
      require(lp.cls.height() == gh && lp.cls.width() == gw,
              "detection_loss: grid shape mismatch at level ", li);
      require(lp.cls.channels() == cfg.num_classes,
              "detection_loss: class channel mismatch");

      for (int i = 0; i < gh; ++i) {
        for (int j = 0; j < gw; ++j) {
          const int cls_target = lt.cls(i, j);
          for (int c = 0; c < cfg.num_classes; ++c) {
            const bool positive = cls_target == c + 1;
            S dx = 0;
            out.cls += internal::focal_term(lp.cls[c](i, j), positive,
                                            gr ? &dx : nullptr);
            if (gr) gr->levels[li].cls[c](i, j) += w.cls * inv_pos * dx;
          }
          if (cls_target == 0) continue;

          // IoU loss between offset vectors rooted at the same location.
          const S l = lp.box[0](i, j), t = lp.box[1](i, j);
          const S r = lp.box[2](i, j), b = lp.box[3](i, j);
          const S lg = lt.ltrb[0](i, j), tg = lt.ltrb[1](i, j);
          const S rg = lt.ltrb[2](i, j), bg = lt.ltrb[3](i, j);
          const S iw = std::min(l, lg) + std::min(r, rg);
          const S ih = std::min(t, tg) + std::min(b, bg);
          const S inter = iw * ih;
          const S area_p = (l + r) * (t + b);
          const S area_g = (lg + rg) * (tg + bg);
          const S uni = area_p + area_g - inter;
          const S iou_v = inter / uni;
          out.loc += -std::log(iou_v);
          if (gr) {
            // d(-log(I/U))/dq = dU/dq / U - dI/dq / I for each offset q.
            const S di_dl = (l < lg ? S(1) : S(0)) * ih;
            const S di_dr = (r < rg ? S(1) : S(0)) * ih;
            const S di_dt = (t < tg ? S(1) : S(0)) * iw;
            const S di_db = (b < bg ? S(1) : S(0)) * iw;
            const S dap_dl = t + b, dap_dr = t + b;
            const S dap_dt = l + r, dap_db = l + r;
            const S scale = w.loc * inv_pos;
            gr->levels[li].box[0](i, j) += scale * ((dap_dl - di_dl) / uni - di_dl / inter);
            gr->levels[li].box[1](i, j) += scale * ((dap_dt - di_dt) / uni - di_dt / inter);
            gr->levels[li].box[2](i, j) += scale * ((dap_dr - di_dr) / uni - di_dr / inter);
            gr->levels[li].box[3](i, j) += scale * ((dap_db - di_db) / uni - di_db / inter);
          }

          const S xc = lp.ctr[0](i, j);
          const S ct = lt.ctr(i, j);
          out.ctr += nn::softplus(xc) - ct * xc;
          if (gr)
            gr->levels[li].ctr[0](i, j) += w.ctr * inv_pos * (nn::sigmoid(xc) - ct);
        }
      }
    }
  }

  out.cls *= inv_pos;
  out.loc *= inv_pos;
  out.ctr *= inv_pos;
  out.total = w.cls * out.cls + w.loc * out.loc + w.ctr * out.ctr;
  return out;
}

// Convenience single-image form.
template <typename S>
LossBreakdown<S> detection_loss(const DetectorConfig& cfg,
                                const DensePredictions<S>& preds,
                                const TargetMap<S>& targets, Mode mode,
                                const LossWeights<S>& w = {}) {
  return detection_loss<S>(cfg, {&preds}, {&targets}, mode, w);
}

// Soft dice loss 1 - 2|P.G| / (|P| + |G|) between a probability map and a
// binary mask (zero-padded to the probability map's extent when smaller).
// Both-empty inputs give 0.
template <typename S>
S soft_dice(const Mat<S>& prob, const MaskGrid& gt) {
  S sum_p = 0, sum_g = 0, sum_pg = 0;
  for (long i = 0; i < prob.rows(); ++i) {
    for (long j = 0; j < prob.cols(); ++j) {
      const S p = prob(i, j);
      const S g = (i < gt.rows() && j < gt.cols() && gt(i, j)) ? S(1) : S(0);
      sum_p += p;
      sum_g += g;
      sum_pg += p * g;
    }
  }
  const S denom = sum_p + sum_g;
  return denom > S(0) ? S(1) - S(2) * sum_pg / denom : S(0);
}

struct MaskSample {
  int image = 0;        // index into the batch
  int level_index = 0;  // index into preds.levels
  int y = 0, x = 0;     // location on the level grid
  int inst = 0;         // instance index within the image
};

// Positive locations whose instance carries a mask, at most max_per_image
// per image drawn without replacement (all of them when rng is null).
template <typename S>
std::vector<MaskSample> sample_mask_locations(
    const std::vector<const TargetMap<S>*>& targets,
    const std::vector<const AnnotatedImage*>& images, int max_per_image,
    Rng* rng) {
  std::vector<MaskSample> samples;
  for (std::size_t n = 0; n < targets.size(); ++n) {
    std::vector<MaskSample> mine;
    const TargetMap<S>& tm = *targets[n];
    for (std::size_t li = 0; li < tm.levels.size(); ++li) {
      const auto& lt = tm.levels[li];
      for (int i = 0; i < lt.inst.rows(); ++i)
        for (int j = 0; j < lt.inst.cols(); ++j) {
          const int k = lt.inst(i, j);
          if (k < 0) continue;
          if (!images[n]->instances[static_cast<std::size_t>(k)].mask) continue;
          mine.push_back(MaskSample{static_cast<int>(n), static_cast<int>(li), i, j, k});
        }
    }
    if (rng && static_cast<int>(mine.size()) > max_per_image) {
      rng->shuffle(mine);
      mine.resize(static_cast<std::size_t>(max_per_image));
    }
    samples.insert(samples.end(), mine.begin(), mine.end());
  }
  return samples;
}

// Dice loss of the dynamic-kernel mask head, averaged over samples.
// For each sampled location the kernel branch output parameterizes a two
// layer 1x1 conv head applied to [mask features; relative coords]; the
// logit map is bilinearly upsampled to image resolution and compared to the
// instance mask with soft dice 1 - 2|P.G| / (|P| + |G|).
// Gradients (scaled by grad_weight) are accumulated into dpreds.
template <typename S>
S mask_loss(const DetectorConfig& cfg,
            const std::vector<const DensePredictions<S>*>& preds,
            const std::vector<const AnnotatedImage*>& images,
            const std::vector<MaskSample>& samples,
            const std::vector<DensePredictions<S>*>& dpreds = {},
            S grad_weight = S(1)) {
  if (samples.empty()) return S(0);
  const S inv_n = S(1) / static_cast<S>(samples.size());
  S total = 0;

  for (const MaskSample& s : samples) {
    const DensePredictions<S>& pr = *preds[static_cast<std::size_t>(s.image)];
    const AnnotatedImage& im = *images[static_cast<std::size_t>(s.image)];
    const LevelPreds<S>& lp = pr.levels[static_cast<std::size_t>(s.level_index)];
    const Mask& gt = *im.instances[static_cast<std::size_t>(s.inst)].mask;

    const int gh = pr.mask_feats.height(), gw = pr.mask_feats.width();
    const int n = gh * gw;
    const int din = cfg.dyn_in();
    const int kh = cfg.kernel_hidden;
    const int stride = pr.mask_stride;

    // Unpack dynamic parameters for this location.
    Vec<S> k(cfg.dynamic_param_count());
    for (int c = 0; c < cfg.dynamic_param_count(); ++c) k[c] = lp.ker[c](s.y, s.x);
    Eigen::Map<const Mat<S>> w1(k.data(), kh, din);
    Eigen::Map<const Vec<S>> b1(k.data() + kh * din, kh);
    Eigen::Map<const Vec<S>> w2(k.data() + kh * din + kh, kh);
    const S b2 = k[static_cast<Eigen::Index>(kh * din + kh + kh)];

    // Dynamic-head input: mask features plus location-relative coordinates.
    const double cx = (s.x + 0.5) * lp.stride;
    const double cy = (s.y + 0.5) * lp.stride;
    const double coord_scale = cfg.coord_scale(s.level_index);
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

    Mat<S> z1 = (w1 * feat).colwise() + b1;      // kh x n
    Mat<S> h1 = z1.cwiseMax(S(0));
    Mat<S> logit_row = (w2.transpose() * h1).array() + b2;  // 1 x n
    Mat<S> logit = Eigen::Map<Mat<S>>(logit_row.data(), gh, gw);

    Mat<S> logit_up;
    nn::upsample_bilinear(logit, stride, logit_up);

    // Padded ground truth and soft dice.
    const int hp = pr.padded_h, wp = pr.padded_w;
    Mat<S> prob(hp, wp);
    S sum_p = 0, sum_g = 0, sum_pg = 0;
    for (int i = 0; i < hp; ++i) {
      for (int j = 0; j < wp; ++j) {
        const S p = nn::sigmoid(logit_up(i, j));
        prob(i, j) = p;
        const S g = (i < gt.height() && j < gt.width() && gt.grid(i, j)) ? S(1) : S(0);
        sum_p += p;
        sum_g += g;
        sum_pg += p * g;
      }
    }
    const S denom = sum_p + sum_g;
    const S dice = denom > S(0) ? S(1) - S(2) * sum_pg / denom : S(0);
    total += dice;

    if (dpreds.empty() || denom <= S(0)) continue;
    DensePredictions<S>& gr = *dpreds[static_cast<std::size_t>(s.image)];

    // d(dice)/dp = (2*sum_pg - 2*g*denom) / denom^2, then through sigmoid.
    Mat<S> dlogit_up(hp, wp);
    const S inv_denom2 = S(1) / (denom * denom);
    for (int i = 0; i < hp; ++i) {
      for (int j = 0; j < wp; ++j) {
        const S g = (i < gt.height() && j < gt.width() && gt.grid(i, j)) ? S(1) : S(0);
        const S ddice_dp = (S(2) * sum_pg - S(2) * g * denom) * inv_denom2;
        const S p = prob(i, j);
        dlogit_up(i, j) = grad_weight * inv_n * ddice_dp * p * (S(1) - p);
      }
    }
    Mat<S> dlogit = Mat<S>::Zero(gh, gw);
    nn::upsample_bilinear_backward_add(dlogit_up, stride, dlogit);

    Eigen::Map<Mat<S>> dlogit_row(dlogit.data(), 1, n);
    Vec<S> dk = Vec<S>::Zero(cfg.dynamic_param_count());
    Eigen::Map<Mat<S>> dw1(dk.data(), kh, din);
    Eigen::Map<Vec<S>> db1(dk.data() + kh * din, kh);
    Eigen::Map<Vec<S>> dw2(dk.data() + kh * din + kh, kh);

    dw2 = h1 * dlogit_row.transpose();
    dk[static_cast<Eigen::Index>(kh * din + kh + kh)] = dlogit_row.sum();
    Mat<S> dh1 = w2 * dlogit_row;  // kh x n
    Mat<S> dz1 = (z1.array() > S(0)).select(dh1, Mat<S>::Zero(kh, n));
    dw1 = dz1 * feat.transpose();
    db1 = dz1.rowwise().sum();
    Mat<S> dfeat = w1.transpose() * dz1;  // din x n

    for (int c = 0; c < cfg.dynamic_param_count(); ++c)
      gr.levels[static_cast<std::size_t>(s.level_index)].ker[c](s.y, s.x) += dk[c];
    for (int c = 0; c < cfg.mask_channels; ++c)
      gr.mask_feats[c] += Eigen::Map<const Mat<S>>(dfeat.data() + static_cast<long>(c) * n, gh, gw);
  }
  return total * inv_n;
}

}  // namespace cadet::det

#endif  // CADET_LOSSES_HPP_
