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
#include "cadet/labels.hpp"

#include "cadet/error.hpp"

namespace cadet::labels {

DatasetSplit to_class_agnostic(const DatasetSplit& split) {
  require(split.role == Role::kLabeled,
          "to_class_agnostic: input role must be labeled, got ",
          role_name(split.role));
  DatasetSplit out = split;
  out.class_names.reset();
  for (auto& im : out.images)
    for (auto& inst : im.instances) inst.class_id.reset();
  return out;
}

DatasetSplit things_only(const DatasetSplit& split) {
  DatasetSplit out;
  out.role = split.role;
  out.class_names = split.class_names;
  out.images.reserve(split.images.size());
  for (const auto& im : split.images) {
    AnnotatedImage copy = im;
    copy.instances.clear();
    for (const auto& inst : im.instances)
      if (inst.kind == Kind::kThing) copy.instances.push_back(inst);
    out.images.push_back(std::move(copy));
  }
  return out;
}

DatasetSplit to_entities(const DatasetSplit& split, EntityReport* report) {
  require(split.role == Role::kLabeled,
          "to_entities: input role must be labeled, got ", role_name(split.role));
  DatasetSplit out;
  out.role = Role::kLabeled;
  out.images.reserve(split.images.size());
  if (report) *report = EntityReport{};

  for (const auto& im : split.images) {
    bool has_stuff = false;
    for (const auto& inst : im.instances) {
      require(inst.mask.has_value(), "image ", im.id,
              ": entity conversion needs masks on every instance");
      if (inst.kind == Kind::kStuff) has_stuff = true;
    }
    if (!has_stuff && report) ++report->images_without_stuff;

    // Ownership painting: stuff first, things after, later entries override.
    // The stored instance order is the draw order.
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> owner =
        Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(
            im.height, im.width, -1);
    for (int pass = 0; pass < 2; ++pass) {
      const Kind want = pass == 0 ? Kind::kStuff : Kind::kThing;
      for (std::size_t k = 0; k < im.instances.size(); ++k) {
        const Instance& inst = im.instances[k];
        if (inst.kind != want) continue;
        const MaskGrid& g = inst.mask->grid;
        for (int y = 0; y < im.height; ++y)
          for (int x = 0; x < im.width; ++x)
            if (g(y, x)) owner(y, x) = static_cast<int>(k);
      }
    }

    AnnotatedImage entity_im;
    entity_im.id = im.id;
    entity_im.width = im.width;
    entity_im.height = im.height;
    entity_im.pixels = im.pixels;
    for (std::size_t k = 0; k < im.instances.size(); ++k) {
      Mask visible(im.height, im.width);
      for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
          if (owner(y, x) == static_cast<int>(k)) visible.grid(y, x) = 1;
      const auto tb = tight_box(visible);
      if (!tb) continue;
      Instance entity;
      entity.bbox = *tb;
      entity.mask = std::move(visible);
      entity.kind = im.instances[k].kind;
      entity_im.instances.push_back(std::move(entity));
    }
    out.images.push_back(std::move(entity_im));
  }
  return out;
}

std::vector<Instance> filter_predictions(const std::vector<Instance>& preds,
                                         const ThresholdPolicy& policy) {
  std::vector<Instance> kept;
  for (const auto& p : preds) {
    require(p.score.has_value(), "filter_predictions: instance without score");
    if (*p.score > policy.delta) kept.push_back(p);
  }
  return kept;
}

DatasetSplit build_pseudo_dataset(const DatasetSplit& unlabeled,
                                  const Labeler& labeler,
                                  const ThresholdPolicy& policy) {
  validate_split(unlabeled);
  require(unlabeled.role == Role::kUnlabeled,
          "build_pseudo_dataset: input role must be unlabeled, got ",
          role_name(unlabeled.role));
  require(labeler.config.num_classes == 1,
          "build_pseudo_dataset: labeler must be class-agnostic");

  DatasetSplit out;
  out.role = Role::kPseudo;
  det::Workspace<float> ws;
  for (const auto& im : unlabeled.images) {
    require(im.has_pixels(), "image ", im.id,
            ": pseudo labeling needs pixels");
    std::vector<Instance> preds = det::infer(labeler.config, labeler.params,
                                             im.pixels, labeler.options,
                                             det::Mode::kAgnostic, &ws);
    std::vector<Instance> kept = filter_predictions(preds, policy);
    if (kept.empty()) continue;  // images with empty label sets are excluded
    AnnotatedImage pim;
    pim.id = im.id;
    pim.width = im.width;
    pim.height = im.height;
    pim.pixels = im.pixels;
    pim.instances = std::move(kept);
    out.images.push_back(std::move(pim));
  }
  validate_split(out);
  return out;
}

DatasetSplit binarize_targets(const DatasetSplit& split) {
  require(split.role == Role::kPseudo,
          "binarize_targets: input role must be pseudo, got ",
          role_name(split.role));
  DatasetSplit out = split;
  for (auto& im : out.images) {
    for (auto& inst : im.instances) {
      inst.score.reset();
      inst.class_id.reset();
    }
  }
  return out;
}

}  // namespace cadet::labels
