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
#ifndef CADET_EXPERIMENT_HPP_
#define CADET_EXPERIMENT_HPP_

#include <iosfwd>
#include <optional>

#include "cadet/config.hpp"

// Experiment orchestration: the full generate -> labeler -> pseudo-label ->
// warmup -> finetune -> evaluate pipeline, scripted ablation grids, audit
// logging and report/plot emission.
namespace cadet::exp {

// Per-(config, seed) dataset artifacts shared by pipeline and ablations.
struct Artifacts {
  ExperimentConfig config;
  DatasetSplit labeled;        // D^t with class ids, things + stuff
  DatasetSplit unlabeled;      // D^u, disjoint images
  DatasetSplit unlabeled_gt;   // the generator's ground truth for D^u
  DatasetSplit val;            // held-out evaluation split
  DatasetSplit val_entities;   // to_entities(val)
  DatasetSplit val_things;     // things_only(val)
  std::set<std::string> labeled_ids;
  int num_thing_classes = 0;
};

Artifacts make_artifacts(const ExperimentConfig& config);

// Batched inference over a split (images in parallel, deterministic order).
std::vector<std::vector<Instance>> predict_split(
    const det::DetectorConfig& cfg, const det::DetectorParams<float>& params,
    const DatasetSplit& split, const det::InferOptions& options, det::Mode mode);

// Class-agnostic entity AP (mask AP against the entity ground truth).
std::optional<double> eval_entity_ap(const det::DetectorConfig& cfg,
                                     const det::DetectorParams<float>& params,
                                     const Artifacts& art,
                                     eval::ApReport* full = nullptr);

struct FinalEval {
  std::optional<double> ap_det;  // class-specific box AP over thing classes
  std::optional<double> ap_seg;  // class-specific mask AP over thing classes
  double pq = 0.0;               // class-free entity PQ
  eval::ApReport det_report;     // full AP report of the box evaluation
};

FinalEval eval_final_model(const det::DetectorConfig& cfg,
                           const det::DetectorParams<float>& params,
                           const Artifacts& art);

struct PipelineReport {
  std::string config_digest;
  std::optional<double> labeler_ap_e;
  std::optional<double> warmup_ap_e;
  std::optional<double> final_ap_det;
  std::optional<double> final_ap_seg;
  double final_pq = 0.0;
  double pseudo_retained_fraction = 0.0;
  int pseudo_images = 0;
  std::vector<double> labeler_trace, warmup_trace, finetune_trace;

  std::string to_json() const;  // deterministic for a given run
  std::string to_text() const;
};

// Runs the three cascaded stages end to end, persisting every split and
// checkpoint under out_dir, skipping stages whose checkpoint already exists
// with a matching config digest, writing report.json / report.txt, the
// warmup audit log and SVG plots. Any stage failure is rethrown with the
// stage name prepended.
PipelineReport run_pipeline(const ExperimentConfig& config,
                            const std::string& out_dir,
                            std::ostream* log = nullptr);

struct AblationTable {
  std::string name;
  std::vector<std::string> columns;
  struct Row {
    std::string label;
    std::vector<std::optional<double>> values;  // seed-averaged
  };
  std::vector<Row> rows;

  std::string to_text() const;
  std::string to_json() const;
};

// Scripted desk-scale ablations: warmup-data, epochs, delta, init-parts,
// augmentation, unlabeled-scale. Cells are averaged over `seeds` seeds
// (base.seed, base.seed+1, ...). Artifacts land under out_dir when given.
AblationTable run_ablation(const std::string& name, const ExperimentConfig& base,
                           int seeds, const std::string& out_dir = "",
                           std::ostream* log = nullptr);

}  // namespace cadet::exp

#endif  // CADET_EXPERIMENT_HPP_
