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
#include "cadet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "cadet/error.hpp"

namespace cadet::eval {
namespace {

constexpr int kRecallPoints = 101;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct AreaRange {
  double lo = 0.0, hi = kInf;
  bool contains(double area) const { return area >= lo && area < hi; }
};

// Canonical content ordering for predictions with equal scores, so that
// every ranking below is invariant under permutation of the input lists.
bool content_less(const Instance& a, const Instance& b) {
  const auto key = [](const Instance& i) {
    return std::make_tuple(i.bbox.x1, i.bbox.y1, i.bbox.x2, i.bbox.y2,
                           i.class_id.value_or(-1),
                           i.mask ? i.mask->area() : long(-1));
  };
  const auto ka = key(a), kb = key(b);
  if (ka != kb) return ka < kb;
  if (a.mask && b.mask) {
    for (int y = 0; y < a.mask->height(); ++y)
      for (int x = 0; x < a.mask->width(); ++x)
        if (a.mask->grid(y, x) != b.mask->grid(y, x))
          return a.mask->grid(y, x) < b.mask->grid(y, x);
  }
  return false;
}

bool score_then_content(const Instance& a, const Instance& b) {
  if (*a.score != *b.score) return *a.score > *b.score;
  return content_less(a, b);
}

std::vector<std::size_t> score_order(const std::vector<Instance>& preds) {
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score_then_content(preds[a], preds[b]);
  });
  return order;
}

// One image, one class bucket, one IoU threshold, one area range.
// Predictions walk in descending score order; each takes the not-yet-matched
// GT with the highest IoU >= threshold, preferring non-ignored GTs (an
// ignored GT can only be taken when no eligible non-ignored GT exists).
// A prediction ends up ignored when it matched an ignored GT, or is
// unmatched with an area outside the range.
struct ImageClassEval {
  std::vector<double> scores;   // in descending order
  std::vector<char> matched;
  std::vector<char> ignored;
  int num_gt = 0;  // non-ignored ground truth
};

ImageClassEval evaluate_image_class(const std::vector<const Instance*>& preds,
                                    const std::vector<const Instance*>& gts,
                                    double threshold, MatchKind kind,
                                    const AreaRange& range) {
  std::vector<char> gt_ignored(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g)
    gt_ignored[g] = !range.contains(instance_area(*gts[g], kind));

  // Non-ignored GTs first, each group in input order.
  std::vector<std::size_t> gt_order;
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gt_ignored[g]) gt_order.push_back(g);
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (gt_ignored[g]) gt_order.push_back(g);

  std::vector<std::size_t> pred_order(preds.size());
  for (std::size_t i = 0; i < pred_order.size(); ++i) pred_order[i] = i;
  std::sort(pred_order.begin(), pred_order.end(),
            [&](std::size_t a, std::size_t b) {
              return score_then_content(*preds[a], *preds[b]);
            });

  ImageClassEval out;
  std::vector<char> gt_taken(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gt_ignored[g]) ++out.num_gt;

  for (std::size_t pi : pred_order) {
    const Instance& pred = *preds[pi];
    double best = threshold;
    int best_gt = -1;
    for (std::size_t gi : gt_order) {
      if (gt_taken[gi]) continue;
      if (best_gt >= 0 && !gt_ignored[static_cast<std::size_t>(best_gt)] && gt_ignored[gi])
        break;  // a real match beats any ignored candidate
      const double v = iou_of(pred, *gts[gi], kind);
      if (v < best) continue;
      if (v == best && best_gt >= 0) continue;  // ties to the earlier GT
      best = v;
      best_gt = static_cast<int>(gi);
    }
    out.scores.push_back(*pred.score);
    if (best_gt >= 0) {
      gt_taken[static_cast<std::size_t>(best_gt)] = 1;
      out.matched.push_back(1);
      out.ignored.push_back(gt_ignored[static_cast<std::size_t>(best_gt)]);
    } else {
      out.matched.push_back(0);
      out.ignored.push_back(!range.contains(instance_area(pred, kind)));
    }
  }
  return out;
}

// 101-point interpolated AP from the dataset-wide accumulation, or nullopt
// when the bucket has no ground truth. Also emits the interpolated curve.
struct Accumulated {
  std::optional<double> ap;
  std::vector<double> curve;  // precision at the 101 recall points
};

Accumulated accumulate_class(const std::vector<std::pair<double, const ImageClassEval*>>&,
                             int);

// Entries are (deterministic image order, per-image eval). Score ties break
// towards earlier images, then earlier (higher-scored) predictions.
Accumulated accumulate(const std::vector<ImageClassEval>& evals) {
  struct Det {
    double score;
    std::size_t image, slot;
    char matched, ignored;
  };
  std::vector<Det> dets;
  int num_gt = 0;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    num_gt += evals[i].num_gt;
    for (std::size_t s = 0; s < evals[i].scores.size(); ++s)
      dets.push_back({evals[i].scores[s], i, s, evals[i].matched[s],
                      evals[i].ignored[s]});
  }
  Accumulated out;
  if (num_gt == 0) return out;

  std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) {
    return a.score > b.score;
  });

  std::vector<double> recall, precision;
  long tp = 0, fp = 0;
  for (const Det& d : dets) {
    if (d.ignored) continue;
    (d.matched ? tp : fp) += 1;
    recall.push_back(static_cast<double>(tp) / num_gt);
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  // Precision envelope from the right, then sample at the recall grid.
  for (std::size_t i = precision.size(); i > 1; --i)
    precision[i - 2] = std::max(precision[i - 2], precision[i - 1]);

  out.curve.assign(kRecallPoints, 0.0);
  double ap_sum = 0.0;
  for (int r = 0; r < kRecallPoints; ++r) {
    const double want = static_cast<double>(r) / (kRecallPoints - 1);
    const auto it = std::lower_bound(recall.begin(), recall.end(), want);
    if (it != recall.end()) {
      const double p = precision[static_cast<std::size_t>(it - recall.begin())];
      out.curve[static_cast<std::size_t>(r)] = p;
      ap_sum += p;
    }
  }
  out.ap = ap_sum / kRecallPoints;
  return out;
}

}  // namespace

double instance_area(const Instance& inst, MatchKind kind) {
  if (kind == MatchKind::kMask && inst.mask)
    return static_cast<double>(inst.mask->area());
  return inst.bbox.area();
}

double iou_of(const Instance& a, const Instance& b, MatchKind kind) {
  if (kind == MatchKind::kBox) return iou(a.bbox, b.bbox);
  if (!a.mask || !b.mask) return 0.0;
  if (a.mask->height() != b.mask->height() || a.mask->width() != b.mask->width())
    return 0.0;
  return mask_iou(*a.mask, *b.mask);
}

GreedyMatch match(const std::vector<Instance>& preds,
                  const std::vector<Instance>& gts, double iou_floor,
                  MatchKind kind) {
  for (const auto& p : preds)
    require(p.score.has_value(), "match: prediction without score");
  GreedyMatch out;
  out.pred_to_gt.assign(preds.size(), -1);
  std::vector<char> taken(gts.size());
  for (std::size_t pi : score_order(preds)) {
    double best = iou_floor;
    int best_gt = -1;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (taken[gi]) continue;
      const double v = iou_of(preds[pi], gts[gi], kind);
      if (v < best) continue;
      if (v == best && best_gt >= 0) continue;
      best = v;
      best_gt = static_cast<int>(gi);
    }
    if (best_gt >= 0) {
      taken[static_cast<std::size_t>(best_gt)] = 1;
      out.pred_to_gt[pi] = best_gt;
      ++out.tp;
    } else {
      ++out.fp;
    }
  }
  out.fn = static_cast<int>(gts.size()) - out.tp;
  return out;
}

ApReport average_precision(const std::vector<ImageEval>& data, MatchKind kind,
                           ApMode mode, const EvalOptions& options) {
  // Work on per-image prediction lists truncated to max_detections.
  std::vector<std::vector<const Instance*>> preds_by_image(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (const auto& p : data[i].preds)
      require(p.score.has_value(), "average_precision: prediction without score");
    auto order = score_order(data[i].preds);
    if (options.max_detections >= 0 &&
        order.size() > static_cast<std::size_t>(options.max_detections))
      order.resize(static_cast<std::size_t>(options.max_detections));
    // Keep input order within the truncated set so tie-breaks stay stable.
    std::sort(order.begin(), order.end());
    for (std::size_t k : order) preds_by_image[i].push_back(&data[i].preds[k]);
  }

  // Class buckets. Agnostic mode has the single bucket -1 and ignores any
  // class ids; specific mode requires them on both sides.
  std::set<int> classes;
  if (mode == ApMode::kSpecific) {
    for (const auto& im : data) {
      for (const auto& g : im.gts) {
        require(g.class_id.has_value(),
                "average_precision: specific mode needs GT class ids");
        classes.insert(*g.class_id);
      }
      for (const auto* p : preds_by_image[&im - data.data()])
        require(p->class_id.has_value(),
                "average_precision: specific mode needs prediction class ids");
    }
  } else {
    classes.insert(-1);
  }

  const std::vector<AreaRange> ranges = {
      {0.0, kInf},
      {0.0, options.area_small},
      {options.area_small, options.area_large},
      {options.area_large, kInf}};

  // ap_sum[range][threshold] accumulated over classes with GT.
  const auto& thresholds = coco_iou_thresholds();
  std::vector<std::vector<double>> ap_sum(ranges.size(),
                                          std::vector<double>(thresholds.size(), 0.0));
  std::vector<std::vector<int>> ap_cnt(ranges.size(),
                                       std::vector<int>(thresholds.size(), 0));
  std::vector<std::vector<double>> curve_sum(
      thresholds.size(), std::vector<double>(kRecallPoints, 0.0));
  std::vector<int> curve_cnt(thresholds.size(), 0);
  ApReport report;

  for (int cls : classes) {
    auto select = [&](const std::vector<const Instance*>& from,
                      std::vector<const Instance*>& to) {
      for (const Instance* inst : from)
        if (cls < 0 || (inst->class_id && *inst->class_id == cls))
          to.push_back(inst);
    };
    std::vector<std::vector<const Instance*>> cls_preds(data.size());
    std::vector<std::vector<const Instance*>> cls_gts(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      select(preds_by_image[i], cls_preds[i]);
      std::vector<const Instance*> g;
      for (const auto& inst : data[i].gts) g.push_back(&inst);
      select(g, cls_gts[i]);
    }

    double class_ap_sum = 0.0;
    int class_ap_cnt = 0;
    for (std::size_t ri = 0; ri < ranges.size(); ++ri) {
      for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
        std::vector<ImageClassEval> evals;
        evals.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
          evals.push_back(evaluate_image_class(cls_preds[i], cls_gts[i],
                                               thresholds[ti], kind, ranges[ri]));
        const Accumulated acc = accumulate(evals);
        if (!acc.ap) continue;
        ap_sum[ri][ti] += *acc.ap;
        ap_cnt[ri][ti] += 1;
        if (ri == 0) {
          class_ap_sum += *acc.ap;
          ++class_ap_cnt;
          for (int r = 0; r < kRecallPoints; ++r)
            curve_sum[ti][static_cast<std::size_t>(r)] += acc.curve[static_cast<std::size_t>(r)];
          curve_cnt[ti] += 1;
        }
      }
    }
    if (mode == ApMode::kSpecific && class_ap_cnt > 0)
      report.per_class[cls] = class_ap_sum / class_ap_cnt;
  }

  auto range_mean = [&](std::size_t ri) -> std::optional<double> {
    double sum = 0.0;
    int cnt = 0;
    for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
      if (ap_cnt[ri][ti] == 0) continue;
      sum += ap_sum[ri][ti] / ap_cnt[ri][ti];
      ++cnt;
    }
    if (cnt == 0) return std::nullopt;
    return sum / cnt;
  };
  report.ap = range_mean(0);
  report.ap_small = range_mean(1);
  report.ap_medium = range_mean(2);
  report.ap_large = range_mean(3);
  auto threshold_mean = [&](double t) -> std::optional<double> {
    for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
      if (thresholds[ti] != t) continue;
      if (ap_cnt[0][ti] == 0) return std::nullopt;
      return ap_sum[0][ti] / ap_cnt[0][ti];
    }
    return std::nullopt;
  };
  report.ap50 = threshold_mean(0.50);
  report.ap75 = threshold_mean(0.75);

  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    if (curve_cnt[ti] == 0) continue;
    PrCurve c;
    c.iou_threshold = thresholds[ti];
    c.precision.resize(kRecallPoints);
    for (int r = 0; r < kRecallPoints; ++r)
      c.precision[static_cast<std::size_t>(r)] =
          curve_sum[ti][static_cast<std::size_t>(r)] / curve_cnt[ti];
    report.pr_curves.push_back(std::move(c));
  }
  return report;
}

PqReport panoptic_quality(const std::vector<ImageEval>& data, bool class_aware) {
  PqReport out;
  for (const auto& im : data) {
    auto validate_disjoint = [&](const std::vector<Instance>& insts,
                                 const char* side) {
      long total = 0;
      Mask canvas;
      for (const auto& inst : insts) {
        require(inst.mask.has_value(), "image ", im.id, ": ", side,
                " segment without mask");
        if (canvas.grid.size() == 0)
          canvas = Mask(inst.mask->height(), inst.mask->width());
        require(canvas.height() == inst.mask->height() &&
                    canvas.width() == inst.mask->width(),
                "image ", im.id, ": ", side, " segment grids differ");
        total += inst.mask->area();
        canvas.grid = canvas.grid.cwiseMax(inst.mask->grid);
      }
      if (canvas.grid.size() != 0)
        require(canvas.area() == total, "image ", im.id, ": ", side,
                " segments overlap");
    };
    validate_disjoint(im.preds, "prediction");
    validate_disjoint(im.gts, "ground-truth");

    std::vector<char> gt_taken(im.gts.size());
    for (const auto& pred : im.preds) {
      int match_count = 0;
      int match_gt = -1;
      double match_iou = 0.0;
      for (std::size_t g = 0; g < im.gts.size(); ++g) {
        if (class_aware) {
          require(pred.class_id && im.gts[g].class_id,
                  "image ", im.id, ": class-aware PQ needs class ids");
          if (*pred.class_id != *im.gts[g].class_id) continue;
        }
        const double v = iou_of(pred, im.gts[g], MatchKind::kMask);
        if (v > 0.5) {
          ++match_count;
          match_gt = static_cast<int>(g);
          match_iou = v;
        }
      }
      require(match_count <= 1, "image ", im.id,
              ": disjointness violated, a segment matched twice");
      if (match_gt >= 0) {
        require(!gt_taken[static_cast<std::size_t>(match_gt)], "image ", im.id,
                ": ground-truth segment matched twice");
        gt_taken[static_cast<std::size_t>(match_gt)] = 1;
        ++out.tp;
        out.sum_iou += match_iou;
      } else {
        ++out.fp;
      }
    }
    for (std::size_t g = 0; g < im.gts.size(); ++g)
      if (!gt_taken[g]) ++out.fn;
  }
  const double denom = out.tp + 0.5 * out.fp + 0.5 * out.fn;
  out.pq = denom > 0 ? out.sum_iou / denom : 0.0;
  return out;
}

std::vector<Instance> entity_partition(const std::vector<Instance>& preds,
                                       int height, int width) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].mask) order.push_back(i);
  // Paint lowest score first so the highest-scoring instance owns a pixel;
  // among equal scores the earlier instance is painted last and wins.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = preds[a].score.value_or(1.0);
    const double sb = preds[b].score.value_or(1.0);
    if (sa != sb) return sa < sb;
    return a > b;
  });

  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> owner =
      Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(
          height, width, -1);
  for (std::size_t k : order) {
    const MaskGrid& g = preds[k].mask->grid;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (g(y, x)) owner(y, x) = static_cast<int>(k);
  }

  std::vector<Instance> out;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (!preds[k].mask) continue;
    Mask visible(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (owner(y, x) == static_cast<int>(k)) visible.grid(y, x) = 1;
    const auto tb = tight_box(visible);
    if (!tb) continue;
    Instance inst = preds[k];
    inst.bbox = *tb;
    inst.mask = std::move(visible);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<ImageEval> pair_by_id(const DatasetSplit& preds,
                                  const DatasetSplit& gts) {
  std::unordered_map<std::string, const AnnotatedImage*> pred_by_id;
  for (const auto& im : preds.images) pred_by_id[im.id] = &im;
  std::size_t used = 0;
  std::vector<ImageEval> out;
  out.reserve(gts.images.size());
  for (const auto& im : gts.images) {
    ImageEval e;
    e.id = im.id;
    e.gts = im.instances;
    const auto it = pred_by_id.find(im.id);
    if (it != pred_by_id.end()) {
      e.preds = it->second->instances;
      ++used;
    }
    out.push_back(std::move(e));
  }
  require(used == pred_by_id.size(),
          "pair_by_id: predictions reference images missing from the ground truth");
  return out;
}

}  // namespace cadet::eval
