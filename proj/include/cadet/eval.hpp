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
#ifndef CADET_EVAL_HPP_
#define CADET_EVAL_HPP_

#include <map>
#include <optional>
#include <vector>

#include "cadet/dataset.hpp"

// From-scratch metric suite: IoU, greedy matching, COCO-style average
// precision (class-specific or class-agnostic, box or mask geometry, per-IoU
// and per-size variants with 101-point interpolation) and panoptic quality.
namespace cadet::eval {

enum class MatchKind { kBox, kMask };
enum class ApMode { kSpecific, kAgnostic };

// Predictions and ground truth for one image.
struct ImageEval {
  std::string id;
  std::vector<Instance> preds;
  std::vector<Instance> gts;
};

struct EvalOptions {
  // Size-bucket thresholds on instance area. COCO uses 32^2 / 96^2; these
  // degenerate on small synthetic images, so desk-scale defaults are 8^2
  // and 20^2 and both are configurable.
  double area_small = 64.0;
  double area_large = 400.0;
  int max_detections = -1;  // per image, < 0 = uncapped
};

// One interpolated precision-recall curve: precision at the 101 recall
// points 0.00, 0.01, ..., 1.00 (averaged over classes in specific mode).
struct PrCurve {
  double iou_threshold = 0.5;
  std::vector<double> precision;
};

struct ApReport {
  std::optional<double> ap;  // mean over IoU 0.50:0.05:0.95, absent if no GT
  std::optional<double> ap50, ap75;
  std::optional<double> ap_small, ap_medium, ap_large;
  std::map<int, double> per_class;  // specific mode, classes present in GT
  std::vector<PrCurve> pr_curves;
};

struct PqReport {
  double pq = 0.0;  // sum of matched IoU / (TP + FP/2 + FN/2); 0 when empty
  int tp = 0, fp = 0, fn = 0;
  double sum_iou = 0.0;
};

// IoU between two instances of the same geometry kind. Mask kind requires
// masks on both sides to overlap; an instance without a mask has IoU 0 with
// everything.
double iou_of(const Instance& a, const Instance& b, MatchKind kind);

double instance_area(const Instance& inst, MatchKind kind);

// Greedy one-to-one matching: predictions in descending score order each
// take the unmatched GT with the highest IoU >= iou_floor, ties towards the
// lowest GT index. Equal prediction scores order by a canonical content key
// (geometry, class, mask), which makes every metric here invariant under
// permutation of equal-scored predictions.
struct GreedyMatch {
  std::vector<int> pred_to_gt;  // -1 when unmatched
  int tp = 0, fp = 0, fn = 0;
};
GreedyMatch match(const std::vector<Instance>& preds,
                  const std::vector<Instance>& gts, double iou_floor,
                  MatchKind kind);

inline const std::vector<double>& coco_iou_thresholds() {
  static const std::vector<double> t = {0.50, 0.55, 0.60, 0.65, 0.70,
                                        0.75, 0.80, 0.85, 0.90, 0.95};
  return t;
}

ApReport average_precision(const std::vector<ImageEval>& data, MatchKind kind,
                           ApMode mode, const EvalOptions& options = {});

// Panoptic quality over disjoint segmentations. Masks must be pairwise
// disjoint within each image on both sides (validated), and a match is any
// pair with IoU > 0.5 (provably unique under disjointness; asserted).
// class_aware additionally requires equal class ids to match.
PqReport panoptic_quality(const std::vector<ImageEval>& data, bool class_aware);

// Resolves overlapping scored instance masks into a disjoint entity
// partition: each pixel goes to the highest-scoring instance covering it
// (ties towards the earlier instance). Maskless instances are dropped.
std::vector<Instance> entity_partition(const std::vector<Instance>& preds,
                                       int height, int width);

// Pairs prediction and ground-truth splits by image id. Every prediction
// image must exist in the ground truth; GT images without predictions get
// an empty prediction list.
std::vector<ImageEval> pair_by_id(const DatasetSplit& preds,
                                  const DatasetSplit& gts);

}  // namespace cadet::eval

#endif  // CADET_EVAL_HPP_
