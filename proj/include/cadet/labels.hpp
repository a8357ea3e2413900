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
#ifndef CADET_LABELS_HPP_
#define CADET_LABELS_HPP_

#include "cadet/dataset.hpp"
#include "cadet/infer.hpp"

// Label-space transforms: class-agnostic conversion, entity conversion,
// score-threshold filtering, pseudo-dataset assembly and target
// binarization. Nothing here ever consults class names.
namespace cadet::labels {

// The single constant score threshold applied to pseudo-label candidates.
// One scalar for every candidate; deliberately no per-class table.
struct ThresholdPolicy {
  double delta = 0.4;
};

// Removes class information from every instance; geometry, order and count
// are untouched. Idempotent.
DatasetSplit to_class_agnostic(const DatasetSplit& split);

// Keeps only kind == thing instances. Object-style annotations are the
// things subset of a scene; entity-style annotations also include stuff.
DatasetSplit things_only(const DatasetSplit& split);

struct EntityReport {
  int images_without_stuff = 0;
};

// Converts a labeled split to class-free entities: all thing masks plus all
// stuff masks, resolved to a pixel partition (things paint over stuff, later
// things paint over earlier ones). Instances whose visible mask becomes
// empty are dropped. Images with no stuff annotations pass through things
// only and are counted in the report.
DatasetSplit to_entities(const DatasetSplit& split, EntityReport* report = nullptr);

// Keeps predictions with score strictly greater than delta, preserving
// order. Errors on an unscored instance.
std::vector<Instance> filter_predictions(const std::vector<Instance>& preds,
                                         const ThresholdPolicy& policy);

// A trained class-agnostic detector used for pseudo labeling.
struct Labeler {
  det::DetectorConfig config;
  det::DetectorParams<float> params;
  det::InferOptions options;
};

// Runs the labeler over every unlabeled image, filters by the threshold
// policy, and keeps only images with a non-empty label set. Output role is
// pseudo and instances keep their scores (binarization happens at training
// time). Images are processed independently; output order follows input.
DatasetSplit build_pseudo_dataset(const DatasetSplit& unlabeled,
                                  const Labeler& labeler,
                                  const ThresholdPolicy& policy);

// Turns scored pseudo labels into hard class-free positives: scores and
// class ids stripped, geometry untouched. Idempotent.
DatasetSplit binarize_targets(const DatasetSplit& split);

}  // namespace cadet::labels

#endif  // CADET_LABELS_HPP_
