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
#include "cadet/trainer.hpp"

#include <cmath>
#include <functional>
#include <thread>

#include "cadet/parallel.hpp"
#include "cadet/targets.hpp"

namespace cadet::train {
namespace {

using det::DetectorConfig;
using det::DetectorParams;
using det::Mode;

// Stream tags for the independent random streams of one stage.
enum Stream : std::uint64_t {
  kStreamInit = 1,
  kStreamShuffle = 2,
  kStreamAugment = 3,
  kStreamMaskSample = 4,
};

std::uint64_t stream_seed(std::uint64_t seed, Stream purpose, std::uint64_t epoch) {
  return mix_seed(seed, (static_cast<std::uint64_t>(purpose) << 32) | epoch);
}

template <typename Fn>
void for_each_tensor(DetectorParams<float>& p, const DetectorConfig& cfg, Fn&& fn) {
  det::visit_params(p, cfg, [&](const std::string&, const std::string&,
                                nn::ConvParam<float>& cp) { fn(cp); });
}

double grad_sqnorm(DetectorParams<float>& g, const DetectorConfig& cfg) {
  double n = 0;
  for_each_tensor(g, cfg, [&](nn::ConvParam<float>& cp) {
    n += cp.w.cast<double>().squaredNorm() + cp.b.cast<double>().squaredNorm();
  });
  return n;
}

}  // namespace

void StageConfig::validate() const {
  require(epochs >= 0, "stage config: epochs must be >= 0");
  require(batch >= 1, "stage config: batch must be >= 1");
  require(lr > 0, "stage config: learning rate must be > 0");
  require(optimizer == "sgd", "stage config: unknown optimizer \"", optimizer, "\"");
  require(momentum >= 0 && momentum < 1, "stage config: momentum out of range");
  require(mask_samples_per_image >= 1, "stage config: mask_samples_per_image must be >= 1");
}

det::DetectorParams<float> fresh_init(const DetectorConfig& cfg, std::uint64_t seed) {
  Rng rng(stream_seed(seed, kStreamInit, 0));
  return det::init_params<float>(cfg, rng);
}

TrainResult train_stage(const DetectorConfig& cfg, DetectorParams<float> init,
                        const DatasetSplit& split, const StageConfig& sc,
                        Mode mode, bool with_masks) {
  sc.validate();
  cfg.validate();
  validate_split(split);
  if (mode == Mode::kAgnostic)
    require(cfg.num_classes == 1, "train_stage: agnostic mode needs num_classes == 1");
  if (mode == Mode::kSpecific)
    require(split.role == Role::kLabeled,
            "train_stage: class-specific training needs a labeled split");

  TrainResult result;
  result.params = std::move(init);
  if (sc.epochs == 0 || split.images.empty()) return result;
  for (const auto& im : split.images)
    require(im.has_pixels(), "train_stage: image ", im.id, " has no pixels");

  const int n = static_cast<int>(split.images.size());
  const int batch = std::min(sc.batch, n);
  const int workers = sc.workers > 0
                          ? sc.workers
                          : std::max(1u, std::thread::hardware_concurrency());

  aug::AugmentPolicy policy;
  policy.mode = sc.augment_mode;

  DetectorParams<float> velocity = det::make_param_shell<float>(cfg);
  DetectorParams<float> grads = det::make_param_shell<float>(cfg);
  std::vector<DetectorParams<float>> slot_grads(
      static_cast<std::size_t>(batch), det::make_param_shell<float>(cfg));
  std::vector<det::Workspace<float>> ws(static_cast<std::size_t>(batch));
  std::vector<AnnotatedImage> slot_image(static_cast<std::size_t>(batch));
  std::vector<det::TargetMap<float>> slot_targets(static_cast<std::size_t>(batch));

  const det::LossWeights<float>& w = sc.weights;
  long step = 0;

  for (int epoch = 0; epoch < sc.epochs; ++epoch) {
    // Step LR decay at the milestone fractions of the epoch budget.
    double lr = sc.lr;
    for (double frac : sc.milestones)
      if (epoch >= static_cast<int>(frac * sc.epochs)) lr *= sc.lr_decay;

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng shuffle_rng(stream_seed(sc.seed, kStreamShuffle, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss_sum = 0.0;

    for (int begin = 0; begin < n; begin += batch) {
      const int bsz = std::min(batch, n - begin);

      parallel_for(bsz, workers, [&](int s) {
        const int idx = order[static_cast<std::size_t>(begin + s)];
        const AnnotatedImage& im = split.images[static_cast<std::size_t>(idx)];
        Rng aug_rng(mix_seed(
            stream_seed(sc.seed, kStreamAugment, static_cast<std::uint64_t>(epoch)),
            static_cast<std::uint64_t>(begin + s)));
        const aug::AugmentDraw draw = aug::sample_draw(policy, aug_rng);
        slot_image[static_cast<std::size_t>(s)] = aug::apply(policy, im, draw);
        const AnnotatedImage& a = slot_image[static_cast<std::size_t>(s)];
        det::forward(cfg, result.params, a.pixels, ws[static_cast<std::size_t>(s)]);
        slot_targets[static_cast<std::size_t>(s)] =
            det::assign_targets<float>(a, cfg, mode);
      });
      for (int s = 0; s < bsz; ++s) {
        const int idx = order[static_cast<std::size_t>(begin + s)];
        result.read_ids.insert(split.images[static_cast<std::size_t>(idx)].id);
      }

      std::vector<const det::DensePredictions<float>*> preds;
      std::vector<const det::TargetMap<float>*> targets;
      std::vector<det::DensePredictions<float>*> dpreds;
      std::vector<const AnnotatedImage*> images;
      for (int s = 0; s < bsz; ++s) {
        preds.push_back(&ws[static_cast<std::size_t>(s)].preds);
        targets.push_back(&slot_targets[static_cast<std::size_t>(s)]);
        dpreds.push_back(&ws[static_cast<std::size_t>(s)].dpreds);
        images.push_back(&slot_image[static_cast<std::size_t>(s)]);
      }

      det::LossBreakdown<float> loss =
          det::detection_loss<float>(cfg, preds, targets, mode, w, dpreds);
      if (with_masks) {
        Rng mask_rng(mix_seed(
            stream_seed(sc.seed, kStreamMaskSample, static_cast<std::uint64_t>(epoch)),
            static_cast<std::uint64_t>(begin)));
        const auto samples = det::sample_mask_locations<float>(
            targets, images, sc.mask_samples_per_image, &mask_rng);
        loss.dice = det::mask_loss<float>(cfg, preds, images, samples, dpreds, w.dice);
        loss.total += w.dice * loss.dice;
      }
      require(loss.finite(), "train_stage: non-finite loss at step ", step,
              " (cls=", loss.cls, " loc=", loss.loc, " ctr=", loss.ctr,
              " dice=", loss.dice, ")");
      epoch_loss_sum += static_cast<double>(loss.total) * bsz;

      parallel_for(bsz, workers, [&](int s) {
        slot_grads[static_cast<std::size_t>(s)].set_zero();
        det::backward(cfg, result.params, ws[static_cast<std::size_t>(s)],
                      slot_grads[static_cast<std::size_t>(s)]);
      });
      grads.set_zero();
      std::vector<nn::ConvParam<float>*> grad_tensors;
      for_each_tensor(grads, cfg, [&](nn::ConvParam<float>& cp) { grad_tensors.push_back(&cp); });
      for (int s = 0; s < bsz; ++s) {
        std::size_t t = 0;
        for_each_tensor(slot_grads[static_cast<std::size_t>(s)], cfg,
                        [&](nn::ConvParam<float>& src) {
          grad_tensors[t]->w += src.w;
          grad_tensors[t]->b += src.b;
          ++t;
        });
      }

      const double norm = std::sqrt(grad_sqnorm(grads, cfg));
      if (sc.clip_norm > 0 && norm > sc.clip_norm) {
        const float scale = static_cast<float>(sc.clip_norm / norm);
        for_each_tensor(grads, cfg, [&](nn::ConvParam<float>& cp) {
          cp.w *= scale;
          cp.b *= scale;
        });
      }

      // Momentum SGD: v = mu * v + g; p -= lr * v.
      {
        const float mu = static_cast<float>(sc.momentum);
        const float step_lr = static_cast<float>(lr);
        std::vector<nn::ConvParam<float>*> vs, gs, ps;
        for_each_tensor(velocity, cfg, [&](nn::ConvParam<float>& cp) { vs.push_back(&cp); });
        for_each_tensor(grads, cfg, [&](nn::ConvParam<float>& cp) { gs.push_back(&cp); });
        for_each_tensor(result.params, cfg, [&](nn::ConvParam<float>& cp) { ps.push_back(&cp); });
        for (std::size_t i = 0; i < vs.size(); ++i) {
          vs[i]->w = mu * vs[i]->w + gs[i]->w;
          vs[i]->b = mu * vs[i]->b + gs[i]->b;
          ps[i]->w -= step_lr * vs[i]->w;
          ps[i]->b -= step_lr * vs[i]->b;
        }
      }
      ++step;
    }
    result.epoch_loss.push_back(epoch_loss_sum / n);
  }
  return result;
}

LabelMode parse_label_mode(const std::string& s) {
  if (s == "objects") return LabelMode::kObjects;
  if (s == "entities") return LabelMode::kEntities;
  throw Error("label mode must be objects or entities, got \"" + s + "\"");
}

std::string label_mode_name(LabelMode m) {
  return m == LabelMode::kObjects ? "objects" : "entities";
}

StageOutput train_pseudo_labeler(const DatasetSplit& labeled, LabelMode mode,
                                 const DetectorConfig& base_cfg,
                                 const StageConfig& sc,
                                 const std::string& config_digest) {
  require(labeled.role == Role::kLabeled,
          "train_pseudo_labeler: input role must be labeled");
  DetectorConfig cfg = base_cfg;
  cfg.num_classes = 1;

  const DatasetSplit training = mode == LabelMode::kObjects
                                    ? labels::to_class_agnostic(labels::things_only(labeled))
                                    : labels::to_entities(labeled);
  TrainResult r = train_stage(cfg, fresh_init(cfg, sc.seed), training, sc,
                              Mode::kAgnostic, /*with_masks=*/true);
  StageOutput out;
  out.checkpoint.config = cfg;
  out.checkpoint.params = std::move(r.params);
  out.checkpoint.meta = {"labeler", sc.seed, sc.epochs, config_digest, "agnostic"};
  out.loss_trace = std::move(r.epoch_loss);
  out.read_ids = std::move(r.read_ids);
  return out;
}

StageOutput warmup(const DatasetSplit& pseudo,
                   const std::set<std::string>& labeled_ids,
                   const DetectorConfig& base_cfg, const StageConfig& sc,
                   const std::string& config_digest) {
  require(pseudo.role == Role::kPseudo, "warmup: input role must be pseudo, got ",
          role_name(pseudo.role));
  require(!pseudo.images.empty(), "warmup: pseudo split is empty");
  for (const auto& im : pseudo.images)
    require(labeled_ids.count(im.id) == 0,
            "warmup: pseudo image ", im.id, " overlaps the labeled split");

  DetectorConfig cfg = base_cfg;
  cfg.num_classes = 1;
  const DatasetSplit binarized = labels::binarize_targets(pseudo);
  TrainResult r = train_stage(cfg, fresh_init(cfg, sc.seed), binarized, sc,
                              Mode::kAgnostic, /*with_masks=*/true);
  StageOutput out;
  out.checkpoint.config = cfg;
  out.checkpoint.params = std::move(r.params);
  out.checkpoint.meta = {"warmup", sc.seed, sc.epochs, config_digest, "agnostic"};
  out.loss_trace = std::move(r.epoch_loss);
  out.read_ids = std::move(r.read_ids);
  return out;
}

det::DetectorParams<float> build_finetune_init(const Checkpoint& source,
                                               const DetectorConfig& target_cfg,
                                               const InitSpec& init,
                                               std::uint64_t seed) {
  for (const auto& part : init.parts)
    require(kAllParts.count(part) == 1, "init spec: unknown part \"", part, "\"");
  if (init.classifier_init == InitSpec::ClassifierInit::kCopy) {
    require(init.parts.count("classifier") == 1,
            "init spec: classifier copy-init requires the classifier part");
    require(source.config.num_classes == 1,
            "init spec: classifier copy-init needs a 1-channel agnostic source");
  }

  DetectorParams<float> params = fresh_init(target_cfg, seed);
  std::set<std::string> loadable = init.parts;
  loadable.erase("classifier");  // shape changes across class counts
  checkpoint_load_parts(source, loadable, target_cfg, params);

  if (init.parts.count("classifier") == 1 &&
      init.classifier_init == InitSpec::ClassifierInit::kCopy) {
    const auto& src = source.params.classifier;
    require(src.cin == params.classifier.cin && src.kh == params.classifier.kh &&
                src.kw == params.classifier.kw,
            "init spec: classifier shapes incompatible for copy");
    for (int c = 0; c < target_cfg.num_classes; ++c) {
      params.classifier.w.row(c) = src.w.row(0);
      params.classifier.b[c] = src.b[0];
    }
  }
  return params;
}

StageOutput finetune(const Checkpoint& warmed, const DatasetSplit& labeled,
                     const InitSpec& init, const DetectorConfig& base_cfg,
                     const StageConfig& sc, const std::string& config_digest) {
  require(labeled.role == Role::kLabeled, "finetune: input role must be labeled");
  require(warmed.meta.stage == "warmup" || warmed.meta.stage == "labeler",
          "finetune: source checkpoint stage must be warmup or labeler, got ",
          warmed.meta.stage);
  require(labeled.class_names.has_value(),
          "finetune: labeled split needs class names for the class count");

  DetectorConfig cfg = base_cfg;
  cfg.num_classes = static_cast<int>(labeled.class_names->size());
  DetectorParams<float> start = build_finetune_init(warmed, cfg, init, sc.seed);

  TrainResult r = train_stage(cfg, std::move(start), labeled, sc, Mode::kSpecific,
                              /*with_masks=*/true);
  StageOutput out;
  out.checkpoint.config = cfg;
  out.checkpoint.params = std::move(r.params);
  out.checkpoint.meta = {"finetuned", sc.seed, sc.epochs, config_digest, "specific"};
  out.loss_trace = std::move(r.epoch_loss);
  out.read_ids = std::move(r.read_ids);
  return out;
}

}  // namespace cadet::train
