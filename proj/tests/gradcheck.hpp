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
//
// Central finite-difference checking of the analytic gradients, in double
// precision on a tiny config. Shared by the unit tests and the acceptance
// suite.
#ifndef CADET_TESTS_GRADCHECK_HPP_
#define CADET_TESTS_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "cadet/losses.hpp"
#include "cadet/synthgen.hpp"
#include "cadet/targets.hpp"

namespace gradcheck {

using cadet::det::DetectorConfig;
using cadet::det::DetectorParams;

inline DetectorConfig tiny_config() {
  DetectorConfig cfg;
  cfg.backbone_widths = {4, 6, 8, 8};
  cfg.head_depth = 1;
  cfg.head_width = 6;
  cfg.num_classes = 2;
  cfg.mask_channels = 2;
  cfg.mask_hidden = 4;
  cfg.kernel_hidden = 2;
  cfg.scale_ranges = {{0.0, 24.0}, {24.0, std::numeric_limits<double>::infinity()}};
  return cfg;
}

// A small batch with positives on both levels and masks on every instance.
inline std::vector<cadet::AnnotatedImage> tiny_batch() {
  cadet::synth::SynthSpec spec;
  spec.height = spec.width = 32;
  spec.num_images = 2;
  spec.max_things = 3;
  spec.min_thing_size = 8;
  spec.max_thing_size = 16;
  spec.noise = 0.02;
  spec.seed = 314;
  cadet::DatasetSplit split = cadet::synth::generate(spec);
  // Keep class ids within the tiny config's 2 classes.
  for (auto& im : split.images)
    for (auto& inst : im.instances) inst.class_id = *inst.class_id % 2;
  return split.images;
}

// Total loss (detection + dice over every positive) of the batch, in double.
inline double total_loss(const DetectorConfig& cfg,
                         const DetectorParams<double>& params,
                         const std::vector<cadet::AnnotatedImage>& batch,
                         std::vector<cadet::det::Workspace<double>>* keep_ws = nullptr) {
  using namespace cadet;
  std::vector<det::Workspace<double>> local(batch.size());
  std::vector<det::Workspace<double>>& ws = keep_ws ? *keep_ws : local;
  if (keep_ws) ws.resize(batch.size());
  std::vector<det::TargetMap<double>> tms(batch.size());
  std::vector<const det::DensePredictions<double>*> preds;
  std::vector<const det::TargetMap<double>*> targets;
  std::vector<det::DensePredictions<double>*> dpreds;
  std::vector<const AnnotatedImage*> images;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    det::forward(cfg, params, batch[i].pixels, ws[i]);
    tms[i] = det::assign_targets<double>(batch[i], cfg, det::Mode::kSpecific);
    preds.push_back(&ws[i].preds);
    targets.push_back(&tms[i]);
    dpreds.push_back(&ws[i].dpreds);
    images.push_back(&batch[i]);
  }
  const det::LossWeights<double> w;
  det::LossBreakdown<double> loss =
      det::detection_loss<double>(cfg, preds, targets, det::Mode::kSpecific, w,
                                  keep_ws ? dpreds : std::vector<det::DensePredictions<double>*>{});
  const auto samples = det::sample_mask_locations<double>(targets, images,
                                                          /*max_per_image=*/1 << 20,
                                                          /*rng=*/nullptr);
  const double dice = det::mask_loss<double>(
      cfg, preds, images, samples,
      keep_ws ? dpreds : std::vector<det::DensePredictions<double>*>{}, w.dice);
  return static_cast<double>(loss.total) + w.dice * dice;
}

// Analytic gradient of total_loss as one flat vector in visit order.
inline std::vector<double> analytic_gradient(const DetectorConfig& cfg,
                                             const DetectorParams<double>& params,
                                             const std::vector<cadet::AnnotatedImage>& batch) {
  using namespace cadet;
  std::vector<det::Workspace<double>> ws;
  total_loss(cfg, params, batch, &ws);
  DetectorParams<double> grads = det::make_param_shell<double>(cfg);
  for (auto& w : ws) det::backward(cfg, params, w, grads);
  std::vector<double> flat;
  det::visit_params(grads, cfg, [&](const std::string&, const std::string&,
                                    nn::ConvParam<double>& cp) {
    for (long i = 0; i < cp.w.size(); ++i) flat.push_back(cp.w.data()[i]);
    for (long i = 0; i < cp.b.size(); ++i) flat.push_back(cp.b.data()[i]);
  });
  return flat;
}

struct CoordResult {
  long coord;
  double analytic, numeric, error;  // error = |a-n| / max(|a|,|n|,1)-ish
  bool ok;
};

// Checks `count` random coordinates with central differences. A coordinate
// passes at |a - n| <= rtol * max(|a|, |n|) or |a - n| <= atol (for the
// near-zero gradients where the quotient is dominated by roundoff).
inline std::vector<CoordResult> check_random_coordinates(
    const DetectorConfig& cfg, std::uint64_t seed, int count,
    double rtol = 1e-3, double atol = 1e-8) {
  using namespace cadet;
  Rng rng(seed);
  DetectorParams<double> params = det::init_params<double>(cfg, rng);
  const auto batch = tiny_batch();
  const std::vector<double> grad = analytic_gradient(cfg, params, batch);

  std::vector<double*> slots;
  det::visit_params(params, cfg, [&](const std::string&, const std::string&,
                                     nn::ConvParam<double>& cp) {
    for (long i = 0; i < cp.w.size(); ++i) slots.push_back(cp.w.data() + i);
    for (long i = 0; i < cp.b.size(); ++i) slots.push_back(cp.b.data() + i);
  });

  std::vector<CoordResult> results;
  for (int k = 0; k < count; ++k) {
    const long c = static_cast<long>(rng.uniform_index(slots.size()));
    double* slot = slots[static_cast<std::size_t>(c)];
    const double saved = *slot;
    const double h = 1e-5 * std::max(1.0, std::abs(saved));
    *slot = saved + h;
    const double up = total_loss(cfg, params, batch);
    *slot = saved - h;
    const double down = total_loss(cfg, params, batch);
    *slot = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = grad[static_cast<std::size_t>(c)];
    const double diff = std::abs(analytic - numeric);
    CoordResult r;
    r.coord = c;
    r.analytic = analytic;
    r.numeric = numeric;
    r.error = diff / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    r.ok = diff <= rtol * std::max(std::abs(analytic), std::abs(numeric)) ||
           diff <= atol;
    results.push_back(r);
  }
  return results;
}

}  // namespace gradcheck

#endif  // CADET_TESTS_GRADCHECK_HPP_
