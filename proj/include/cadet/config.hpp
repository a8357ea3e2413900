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
#ifndef CADET_CONFIG_HPP_
#define CADET_CONFIG_HPP_

#include <map>
#include <string>

#include "cadet/eval.hpp"
#include "cadet/synthgen.hpp"
#include "cadet/trainer.hpp"

namespace cadet {

// Flat "[section] key = value" text with '#' comments. Human-editable and
// diffable; unknown keys are rejected when resolving an ExperimentConfig.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig parse_file(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Everything one experiment needs: dataset recipe, label mode, threshold,
// per-stage training configs, initialization strategy and eval knobs.
struct ExperimentConfig {
  // [dataset]
  int labeled_images = 200;
  int unlabeled_images = 800;
  int val_images = 150;
  int image_size = 64;
  int max_things = 4;
  double noise = 0.05;
  std::uint64_t seed = 7;

  // [experiment]
  train::LabelMode label_mode = train::LabelMode::kEntities;
  double delta = 0.4;  // pseudo-label score threshold
  std::set<std::string> init_parts = kAllParts;
  train::InitSpec::ClassifierInit classifier_init =
      train::InitSpec::ClassifierInit::kCopy;

  // [labeler] / [warmup] / [finetune]
  train::StageConfig labeler, warmup, finetune;

  // [eval]
  double score_floor = 0.05;
  double nms_iou = 0.6;
  bool use_centerness = true;
  double pq_score_floor = 0.35;  // detections entering the entity partition
  eval::EvalOptions eval_options;

  det::DetectorConfig detector;  // num_classes is set per stage

  static ExperimentConfig defaults();
  // defaults() overridden by the file's sections.
  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_kv(const KeyValueConfig& kv);

  // Canonical resolved form: parse(canonical_text()) == *this, and the hex
  // digest of this text identifies the experiment in checkpoints/reports.
  std::string canonical_text() const;
  std::string digest() const;

  // Same experiment under a different base seed; stage seeds re-derive.
  ExperimentConfig with_seed(std::uint64_t new_seed) const;

  synth::SynthSpec labeled_spec() const;
  synth::SynthSpec unlabeled_spec() const;  // distinct seed stream
  synth::SynthSpec val_spec() const;
  train::InitSpec init_spec() const;
  det::InferOptions infer_options() const;
  labels::ThresholdPolicy threshold_policy() const;
};

}  // namespace cadet

#endif  // CADET_CONFIG_HPP_
