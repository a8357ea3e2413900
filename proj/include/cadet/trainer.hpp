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
#ifndef CADET_TRAINER_HPP_
#define CADET_TRAINER_HPP_

#include <set>
#include <string>
#include <vector>

#include "cadet/augment.hpp"
#include "cadet/checkpoint.hpp"
#include "cadet/labels.hpp"
#include "cadet/losses.hpp"

// The cascaded training stages: pseudo-labeler training on class-agnostic
// ground truth, warmup training on binarized pseudo labels only, and
// class-specific finetuning from (parts of) the warmed-up weights. All three
// share one SGD loop that is a pure function of (init params, split, seed).
namespace cadet::train {

struct StageConfig {
  int epochs = 12;
  int batch = 8;
  double lr = 0.02;
  std::string optimizer = "sgd";  // momentum SGD is the only optimizer
  double momentum = 0.9;
  std::vector<double> milestones = {2.0 / 3.0, 8.0 / 9.0};  // epoch fractions
  double lr_decay = 0.1;
  aug::AugMode augment_mode = aug::AugMode::kWeak;
  std::uint64_t seed = 0;
  det::LossWeights<float> weights;
  double clip_norm = 10.0;  // global gradient norm
  int mask_samples_per_image = 16;
  int workers = 0;  // 0 = hardware concurrency; never affects results

  void validate() const;
};

struct TrainResult {
  det::DetectorParams<float> params;
  std::vector<double> epoch_loss;      // per-epoch mean total loss
  std::set<std::string> read_ids;      // every image id the loop touched
};

// Runs epochs x ceil(|split| / batch) momentum-SGD steps with per-epoch
// seed-derived data order, per-image augmentation draws, batch-normalized
// losses, global-norm gradient clipping and step LR decay at the milestone
// fractions. Deterministic given the seed; a NaN loss aborts with the step
// index and component values.
TrainResult train_stage(const det::DetectorConfig& cfg,
                        det::DetectorParams<float> init,
                        const DatasetSplit& split, const StageConfig& sc,
                        det::Mode mode, bool with_masks);

enum class LabelMode { kObjects, kEntities };
LabelMode parse_label_mode(const std::string& s);
std::string label_mode_name(LabelMode m);

struct StageOutput {
  Checkpoint checkpoint;
  std::vector<double> loss_trace;
  std::set<std::string> read_ids;
};

// Stage 1: class-agnostic pseudo-labeler training with masks. Object mode
// trains on the class-agnostic thing annotations; entity mode trains on the
// thing-plus-stuff entity partition.
StageOutput train_pseudo_labeler(const DatasetSplit& labeled, LabelMode mode,
                                 const det::DetectorConfig& base_cfg,
                                 const StageConfig& sc,
                                 const std::string& config_digest);

// Stage 2: warmup on the pseudo split only. The pseudo image ids must be
// disjoint from the labeled ids registered for the experiment; targets are
// binarized before training. No ground-truth data is touched here.
StageOutput warmup(const DatasetSplit& pseudo,
                   const std::set<std::string>& labeled_ids,
                   const det::DetectorConfig& base_cfg, const StageConfig& sc,
                   const std::string& config_digest);

// How the finetuning model is initialized from the warmup checkpoint.
struct InitSpec {
  std::set<std::string> parts;  // subset of {backbone, neck, head, classifier}
  enum class ClassifierInit { kRandom, kCopy } classifier_init = ClassifierInit::kRandom;
};

// Builds the class-specific model for finetuning: fresh seed-derived init,
// then the requested parts loaded from the source checkpoint. classifier
// copy-init replicates the source's single agnostic output channel into
// every class channel (and requires "classifier" among the parts and a
// 1-channel source).
det::DetectorParams<float> build_finetune_init(const Checkpoint& source,
                                               const det::DetectorConfig& target_cfg,
                                               const InitSpec& init,
                                               std::uint64_t seed);

// Stage 3: class-specific finetuning on ground truth.
StageOutput finetune(const Checkpoint& warmed, const DatasetSplit& labeled,
                     const InitSpec& init, const det::DetectorConfig& base_cfg,
                     const StageConfig& sc, const std::string& config_digest);

// Seed stream used for fresh parameter initialization in every stage, so a
// finetune with no transferred parts equals training from scratch.
det::DetectorParams<float> fresh_init(const det::DetectorConfig& cfg,
                                      std::uint64_t seed);

}  // namespace cadet::train

#endif  // CADET_TRAINER_HPP_
