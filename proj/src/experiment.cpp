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
#include "cadet/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "cadet/parallel.hpp"
#include "cadet/pixpack.hpp"
#include "cadet/plot.hpp"

namespace cadet::exp {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using train::StageOutput;

void log_line(std::ostream* log, const std::string& line) {
  if (log) (*log) << line << "\n" << std::flush;
}

json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "   -  ";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << std::setw(6) << (*v * 100.0);
  return os.str();
}

// Rethrow stage failures with the stage name so the CLI exit path can name
// the failing stage on stderr.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw Error("stage " + name + ": " + e.what());
  }
}

std::vector<Instance> filter_to_things(const std::vector<Instance>& preds,
                                       int num_thing_classes) {
  std::vector<Instance> out;
  for (const auto& p : preds)
    if (p.class_id && *p.class_id < num_thing_classes) out.push_back(p);
  return out;
}

}  // namespace

Artifacts make_artifacts(const ExperimentConfig& config) {
  Artifacts art;
  art.config = config;
  art.labeled = synth::generate(config.labeled_spec());
  art.unlabeled_gt = synth::generate(config.unlabeled_spec());
  art.unlabeled = synth::derive_unlabeled(art.unlabeled_gt);
  art.val = synth::generate(config.val_spec());
  art.val_entities = labels::to_entities(art.val);
  art.val_things = labels::things_only(art.val);
  for (const auto& im : art.labeled.images) art.labeled_ids.insert(im.id);
  art.num_thing_classes = config.labeled_spec().num_thing_classes();
  return art;
}

std::vector<std::vector<Instance>> predict_split(
    const det::DetectorConfig& cfg, const det::DetectorParams<float>& params,
    const DatasetSplit& split, const det::InferOptions& options, det::Mode mode) {
  std::vector<std::vector<Instance>> out(split.images.size());
  const int n = static_cast<int>(split.images.size());
  parallel_for(n, 0, [&](int i) {
    const auto& im = split.images[static_cast<std::size_t>(i)];
    require(im.has_pixels(), "predict_split: image ", im.id, " has no pixels");
    out[static_cast<std::size_t>(i)] =
        det::infer(cfg, params, im.pixels, options, mode);
  });
  return out;
}

std::optional<double> eval_entity_ap(const det::DetectorConfig& cfg,
                                     const det::DetectorParams<float>& params,
                                     const Artifacts& art, eval::ApReport* full) {
  const auto preds = predict_split(cfg, params, art.val, art.config.infer_options(),
                                   det::Mode::kAgnostic);
  std::vector<eval::ImageEval> data(art.val.images.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i].id = art.val_entities.images[i].id;
    data[i].preds = preds[i];
    data[i].gts = art.val_entities.images[i].instances;
  }
  const eval::ApReport report = eval::average_precision(
      data, eval::MatchKind::kMask, eval::ApMode::kAgnostic, art.config.eval_options);
  if (full) *full = report;
  return report.ap;
}

FinalEval eval_final_model(const det::DetectorConfig& cfg,
                           const det::DetectorParams<float>& params,
                           const Artifacts& art) {
  FinalEval out;
  const auto preds = predict_split(cfg, params, art.val, art.config.infer_options(),
                                   det::Mode::kSpecific);

  std::vector<eval::ImageEval> det_data(art.val.images.size());
  for (std::size_t i = 0; i < det_data.size(); ++i) {
    det_data[i].id = art.val.images[i].id;
    det_data[i].preds = filter_to_things(preds[i], art.num_thing_classes);
    det_data[i].gts = art.val_things.images[i].instances;
  }
  out.det_report = eval::average_precision(det_data, eval::MatchKind::kBox,
                                           eval::ApMode::kSpecific,
                                           art.config.eval_options);
  out.ap_det = out.det_report.ap;
  out.ap_seg = eval::average_precision(det_data, eval::MatchKind::kMask,
                                       eval::ApMode::kSpecific,
                                       art.config.eval_options)
                   .ap;

  std::vector<eval::ImageEval> pq_data(art.val.images.size());
  for (std::size_t i = 0; i < pq_data.size(); ++i) {
    const auto& im = art.val.images[i];
    std::vector<Instance> kept;
    for (const auto& p : preds[i])
      if (p.score && *p.score > art.config.pq_score_floor) kept.push_back(p);
    pq_data[i].id = im.id;
    pq_data[i].preds = eval::entity_partition(kept, im.height, im.width);
    pq_data[i].gts = art.val_entities.images[i].instances;
  }
  out.pq = eval::panoptic_quality(pq_data, /*class_aware=*/false).pq;
  return out;
}

std::string PipelineReport::to_json() const {
  json j;
  j["config_digest"] = config_digest;
  j["metrics"] = {{"labeler_ap_e", opt_json(labeler_ap_e)},
                  {"warmup_ap_e", opt_json(warmup_ap_e)},
                  {"final_ap_det", opt_json(final_ap_det)},
                  {"final_ap_seg", opt_json(final_ap_seg)},
                  {"final_pq", final_pq}};
  j["pseudo"] = {{"retained_fraction", pseudo_retained_fraction},
                 {"images", pseudo_images}};
  j["traces"] = {{"labeler", labeler_trace},
                 {"warmup", warmup_trace},
                 {"finetune", finetune_trace}};
  return j.dump(1) + "\n";
}

std::string PipelineReport::to_text() const {
  std::ostringstream os;
  os << "pipeline report (config " << config_digest << ")\n";
  os << "  pseudo dataset: " << pseudo_images << " images ("
     << std::fixed << std::setprecision(1) << pseudo_retained_fraction * 100
     << "% of the pool)\n";
  os << "  warmed-up model   |  finetuned model\n";
  os << "    AP^e            |    AP^det  AP^seg  PQ\n";
  os << "  " << pct(warmup_ap_e) << "          |  " << pct(final_ap_det)
     << "  " << pct(final_ap_seg) << "  " << pct(final_pq) << "\n";
  return os.str();
}

PipelineReport run_pipeline(const ExperimentConfig& config,
                            const std::string& out_dir, std::ostream* log) {
  const std::string digest = config.digest();
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/data");
  fs::create_directories(out_dir + "/checkpoints");
  fs::create_directories(out_dir + "/plots");
  {
    std::ofstream cf(out_dir + "/config.resolved.txt");
    cf << config.canonical_text();
  }

  PipelineReport report;
  report.config_digest = digest;

  Artifacts art = stage("generate", [&] {
    Artifacts a = make_artifacts(config);
    save_split(a.labeled, out_dir + "/data/labeled");
    save_split(a.unlabeled, out_dir + "/data/unlabeled");
    save_split(a.val, out_dir + "/data/val");
    return a;
  });
  log_line(log, "[generate] labeled=" + std::to_string(art.labeled.images.size()) +
                    " unlabeled=" + std::to_string(art.unlabeled.images.size()) +
                    " val=" + std::to_string(art.val.images.size()));

  // A stage is skipped when its checkpoint exists with a matching digest.
  auto resume = [&](const std::string& name, const std::string& stage_tag)
      -> std::optional<Checkpoint> {
    const std::string path = out_dir + "/checkpoints/" + name + ".ckpt";
    if (!fs::exists(path)) return std::nullopt;
    Checkpoint ck = checkpoint_read(path);
    if (ck.meta.stage != stage_tag || ck.meta.config_digest != digest)
      return std::nullopt;
    log_line(log, "[" + name + "] resumed from " + path);
    return ck;
  };

  bool labeler_resumed = false;
  Checkpoint labeler_ck;
  if (auto ck = resume("labeler", "labeler")) {
    labeler_ck = std::move(*ck);
    labeler_resumed = true;
  } else {
    StageOutput out = stage("labeler-train", [&] {
      return train::train_pseudo_labeler(art.labeled, config.label_mode,
                                         config.detector, config.labeler, digest);
    });
    labeler_ck = std::move(out.checkpoint);
    report.labeler_trace = out.loss_trace;
    checkpoint_save(labeler_ck.config, labeler_ck.params, labeler_ck.meta,
                    out_dir + "/checkpoints/labeler.ckpt");
  }
  report.labeler_ap_e = eval_entity_ap(labeler_ck.config, labeler_ck.params, art);
  log_line(log, "[labeler-train] AP^e=" + pct(report.labeler_ap_e));

  DatasetSplit pseudo;
  const std::string pseudo_dir = out_dir + "/data/pseudo";
  if (labeler_resumed && fs::exists(pseudo_dir + "/annotations.json")) {
    pseudo = stage("pseudo-label", [&] { return load_split(pseudo_dir, Role::kPseudo); });
    log_line(log, "[pseudo-label] resumed from " + pseudo_dir);
  } else {
    pseudo = stage("pseudo-label", [&] {
      labels::Labeler labeler{labeler_ck.config, labeler_ck.params,
                              config.infer_options()};
      DatasetSplit p = labels::build_pseudo_dataset(art.unlabeled, labeler,
                                                    config.threshold_policy());
      save_split(p, pseudo_dir);
      return p;
    });
  }
  report.pseudo_images = static_cast<int>(pseudo.images.size());
  report.pseudo_retained_fraction =
      art.unlabeled.images.empty()
          ? 0.0
          : static_cast<double>(pseudo.images.size()) / art.unlabeled.images.size();
  log_line(log, "[pseudo-label] kept " + std::to_string(report.pseudo_images) +
                    " images at delta=" + std::to_string(config.delta));

  Checkpoint warmup_ck;
  if (auto ck = resume("warmup", "warmup")) {
    warmup_ck = std::move(*ck);
  } else {
    StageOutput out = stage("warmup", [&] {
      return train::warmup(pseudo, art.labeled_ids, config.detector,
                           config.warmup, digest);
    });
    warmup_ck = std::move(out.checkpoint);
    report.warmup_trace = out.loss_trace;
    checkpoint_save(warmup_ck.config, warmup_ck.params, warmup_ck.meta,
                    out_dir + "/checkpoints/warmup.ckpt");

    // Audit: the warmup stage must never read a labeled image.
    json audit;
    std::vector<std::string> labeled_ids(art.labeled_ids.begin(), art.labeled_ids.end());
    std::vector<std::string> read_ids(out.read_ids.begin(), out.read_ids.end());
    std::vector<std::string> overlap;
    for (const auto& id : read_ids)
      if (art.labeled_ids.count(id)) overlap.push_back(id);
    audit["labeled_ids"] = labeled_ids;
    audit["warmup_read_ids"] = read_ids;
    audit["intersection"] = overlap;
    std::ofstream af(out_dir + "/audit.json");
    af << audit.dump(1) << "\n";
    require(overlap.empty(), "warmup audit: labeled ids were read");
  }
  report.warmup_ap_e = eval_entity_ap(warmup_ck.config, warmup_ck.params, art);
  log_line(log, "[warmup] AP^e=" + pct(report.warmup_ap_e));

  Checkpoint final_ck;
  if (auto ck = resume("final", "finetuned")) {
    final_ck = std::move(*ck);
  } else {
    StageOutput out = stage("finetune", [&] {
      return train::finetune(warmup_ck, art.labeled, config.init_spec(),
                             config.detector, config.finetune, digest);
    });
    final_ck = std::move(out.checkpoint);
    report.finetune_trace = out.loss_trace;
    checkpoint_save(final_ck.config, final_ck.params, final_ck.meta,
                    out_dir + "/checkpoints/final.ckpt");
  }

  eval::ApReport warm_report;
  eval_entity_ap(warmup_ck.config, warmup_ck.params, art, &warm_report);
  const FinalEval fin = stage("evaluate", [&] {
    return eval_final_model(final_ck.config, final_ck.params, art);
  });
  report.final_ap_det = fin.ap_det;
  report.final_ap_seg = fin.ap_seg;
  report.final_pq = fin.pq;
  log_line(log, "[evaluate] AP^det=" + pct(fin.ap_det) + " AP^seg=" +
                    pct(fin.ap_seg) + " PQ=" + pct(fin.pq));

  // Reports and plots.
  {
    std::ofstream jf(out_dir + "/report.json");
    jf << report.to_json();
    std::ofstream tf(out_dir + "/report.txt");
    tf << report.to_text();

    std::vector<plot::Series> traces;
    auto add_trace = [&](const std::string& label, const std::vector<double>& t) {
      if (t.empty()) return;
      plot::Series s;
      s.label = label;
      for (std::size_t i = 0; i < t.size(); ++i) {
        s.x.push_back(static_cast<double>(i));
        s.y.push_back(t[i]);
      }
      traces.push_back(std::move(s));
    };
    add_trace("labeler", report.labeler_trace);
    add_trace("warmup", report.warmup_trace);
    add_trace("finetune", report.finetune_trace);
    if (!traces.empty())
      plot::write_line_chart(out_dir + "/plots/loss_traces.svg",
                             "training loss per epoch", "epoch", "loss", traces);

    auto pr_series = [](const eval::ApReport& r) {
      std::vector<plot::Series> ss;
      for (const auto& c : r.pr_curves) {
        if (c.iou_threshold != 0.5 && c.iou_threshold != 0.75) continue;
        plot::Series s;
        std::ostringstream label;
        label << "IoU " << std::setprecision(2) << c.iou_threshold;
        s.label = label.str();
        for (std::size_t i = 0; i < c.precision.size(); ++i) {
          s.x.push_back(static_cast<double>(i) / (c.precision.size() - 1));
          s.y.push_back(c.precision[i]);
        }
        ss.push_back(std::move(s));
      }
      return ss;
    };
    if (!warm_report.pr_curves.empty())
      plot::write_line_chart(out_dir + "/plots/pr_warmup_entities.svg",
                             "warmup model entity PR", "recall", "precision",
                             pr_series(warm_report));
    if (!fin.det_report.pr_curves.empty())
      plot::write_line_chart(out_dir + "/plots/pr_final_det.svg",
                             "finetuned model detection PR", "recall",
                             "precision", pr_series(fin.det_report));
  }
  return report;
}

std::string AblationTable::to_text() const {
  std::ostringstream os;
  os << "ablation: " << name << "\n";
  std::size_t label_w = 12;
  for (const auto& r : rows) label_w = std::max(label_w, r.label.size() + 2);
  os << std::left << std::setw(static_cast<int>(label_w)) << "row";
  for (const auto& c : columns) os << std::right << std::setw(12) << c;
  os << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(label_w)) << r.label;
    for (const auto& v : r.values) {
      if (v)
        os << std::right << std::setw(12) << std::fixed << std::setprecision(1)
           << (*v * 100.0);
      else
        os << std::right << std::setw(12) << "-";
    }
    os << "\n";
  }
  return os.str();
}

std::string AblationTable::to_json() const {
  json j;
  j["name"] = name;
  j["columns"] = columns;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json vals = json::array();
    for (const auto& v : r.values) vals.push_back(opt_json(v));
    j["rows"].push_back({{"label", r.label}, {"values", vals}});
  }
  return j.dump(1) + "\n";
}

namespace {

// Mean over present samples; absent if none.
std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
  double sum = 0;
  int n = 0;
  for (const auto& x : xs)
    if (x) {
      sum += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// Accumulates per-seed row values into the table.
struct TableBuilder {
  AblationTable table;
  std::map<std::string, std::vector<std::vector<std::optional<double>>>> samples;
  std::vector<std::string> row_order;

  void add(const std::string& row, const std::vector<std::optional<double>>& values) {
    if (!samples.count(row)) row_order.push_back(row);
    samples[row].push_back(values);
  }
  AblationTable finish() {
    for (const auto& row : row_order) {
      AblationTable::Row r;
      r.label = row;
      const auto& per_seed = samples[row];
      const std::size_t ncol = per_seed.front().size();
      for (std::size_t c = 0; c < ncol; ++c) {
        std::vector<std::optional<double>> col;
        for (const auto& s : per_seed) col.push_back(s[c]);
        r.values.push_back(mean_of(col));
      }
      table.rows.push_back(std::move(r));
    }
    return std::move(table);
  }
};

// Class-specific pseudo labels for the Objects(P,S) row: a class-specific
// labeler's filtered predictions with classes kept and scores stripped, in
// labeled-split form so the class-specific trainer accepts it.
DatasetSplit specific_pseudo_as_labeled(const Artifacts& art,
                                        const Checkpoint& labeler_ck,
                                        const ExperimentConfig& cfg) {
  const auto preds = predict_split(labeler_ck.config, labeler_ck.params,
                                   art.unlabeled, cfg.infer_options(),
                                   det::Mode::kSpecific);
  DatasetSplit out;
  out.role = Role::kLabeled;
  out.class_names = art.labeled.class_names;
  for (std::size_t i = 0; i < art.unlabeled.images.size(); ++i) {
    const auto kept = labels::filter_predictions(preds[i], cfg.threshold_policy());
    if (kept.empty()) continue;
    AnnotatedImage im;
    im.id = art.unlabeled.images[i].id;
    im.width = art.unlabeled.images[i].width;
    im.height = art.unlabeled.images[i].height;
    im.pixels = art.unlabeled.images[i].pixels;
    im.instances = kept;
    for (auto& inst : im.instances) inst.score.reset();
    out.images.push_back(std::move(im));
  }
  return out;
}

// Ground-truth agnostic object annotations of the pool images, re-keyed to
// the unlabeled image ids (the Objects(G,A) row trains the target detector
// on ground truth of comparable scale, never on the labeled split).
DatasetSplit pool_gt_objects_agnostic(const Artifacts& art) {
  DatasetSplit gt = labels::to_class_agnostic(labels::things_only(art.unlabeled_gt));
  DatasetSplit out;
  out.role = Role::kLabeled;
  for (std::size_t i = 0; i < gt.images.size(); ++i) {
    AnnotatedImage im = gt.images[i];
    im.id = art.unlabeled.images[i].id;  // "-u" suffixed
    if (im.instances.empty()) continue;
    out.images.push_back(std::move(im));
  }
  return out;
}

struct WarmupArm {
  std::string label;
  std::optional<Checkpoint> warm;  // nullopt = train from scratch
  std::optional<double> warm_ap_e;
  std::optional<double> warm_ap_det;
  bool classifier_copyable = true;
};

std::optional<double> finetune_and_eval(const Artifacts& art,
                                        const ExperimentConfig& cfg,
                                        const WarmupArm& arm, FinalEval* full) {
  train::StageOutput out;
  if (arm.warm) {
    train::InitSpec init = cfg.init_spec();
    if (!arm.classifier_copyable)
      init.classifier_init = train::InitSpec::ClassifierInit::kRandom;
    out = train::finetune(*arm.warm, art.labeled, init, cfg.detector,
                          cfg.finetune, cfg.digest());
  } else {
    // Scratch arm: same machinery with nothing transferred.
    Checkpoint fresh;
    fresh.config = cfg.detector;
    fresh.config.num_classes = 1;
    fresh.params = train::fresh_init(fresh.config, cfg.warmup.seed);
    fresh.meta = {"warmup", cfg.warmup.seed, 0, cfg.digest(), "agnostic"};
    train::InitSpec none;
    out = train::finetune(fresh, art.labeled, none, cfg.detector, cfg.finetune,
                          cfg.digest());
  }
  const FinalEval fin =
      eval_final_model(out.checkpoint.config, out.checkpoint.params, art);
  if (full) *full = fin;
  return fin.ap_det;
}

}  // namespace

AblationTable run_ablation(const std::string& name, const ExperimentConfig& base,
                           int seeds, const std::string& out_dir,
                           std::ostream* log) {
  require(seeds >= 1, "run_ablation: need at least one seed");
  TableBuilder tb;
  tb.table.name = name;

  for (int s = 0; s < seeds; ++s) {
    const ExperimentConfig cfg = base.with_seed(base.seed + static_cast<std::uint64_t>(s));
    log_line(log, "ablation " + name + ": seed " + std::to_string(cfg.seed));
    Artifacts art = make_artifacts(cfg);
    const std::string digest = cfg.digest();

    auto agnostic_labeler = [&](train::LabelMode mode) {
      return train::train_pseudo_labeler(art.labeled, mode, cfg.detector,
                                         cfg.labeler, digest);
    };
    auto pseudo_from = [&](const Checkpoint& lab, double delta) {
      labels::Labeler labeler{lab.config, lab.params, cfg.infer_options()};
      return labels::build_pseudo_dataset(art.unlabeled, labeler,
                                          labels::ThresholdPolicy{delta});
    };
    auto warm_from = [&](const DatasetSplit& pseudo, const train::StageConfig& sc) {
      return train::warmup(pseudo, art.labeled_ids, cfg.detector, sc, digest);
    };

    if (name == "warmup-data") {
      tb.table.columns = {"AP^e", "AP^det-w", "AP^det", "AP^seg", "PQ"};
      std::vector<WarmupArm> arms;

      arms.push_back({"scratch", std::nullopt, std::nullopt, std::nullopt, true});

      {  // Objects(G, A): ground-truth agnostic objects of the pool.
        det::DetectorConfig acfg = cfg.detector;
        acfg.num_classes = 1;
        auto r = train::train_stage(acfg, train::fresh_init(acfg, cfg.warmup.seed),
                                    pool_gt_objects_agnostic(art), cfg.warmup,
                                    det::Mode::kAgnostic, true);
        Checkpoint ck;
        ck.config = acfg;
        ck.params = std::move(r.params);
        ck.meta = {"warmup", cfg.warmup.seed, cfg.warmup.epochs, digest, "agnostic"};
        WarmupArm arm{"objects(G,A)", std::move(ck), std::nullopt, std::nullopt, true};
        arm.warm_ap_e = eval_entity_ap(arm.warm->config, arm.warm->params, art);
        arms.push_back(std::move(arm));
      }

      {  // Objects(P, S): class-specific pseudo labels.
        det::DetectorConfig scfg = cfg.detector;
        scfg.num_classes = static_cast<int>(art.labeled.class_names->size());
        auto lab = train::train_stage(
            scfg, train::fresh_init(scfg, cfg.labeler.seed),
            labels::things_only(art.labeled), cfg.labeler, det::Mode::kSpecific, true);
        Checkpoint lab_ck;
        lab_ck.config = scfg;
        lab_ck.params = std::move(lab.params);
        lab_ck.meta = {"labeler", cfg.labeler.seed, cfg.labeler.epochs, digest,
                       "specific"};
        const DatasetSplit pseudo_s = specific_pseudo_as_labeled(art, lab_ck, cfg);
        require(!pseudo_s.images.empty(),
                "warmup-data ablation: class-specific pseudo split is empty");
        auto r = train::train_stage(scfg, train::fresh_init(scfg, cfg.warmup.seed),
                                    pseudo_s, cfg.warmup, det::Mode::kSpecific, true);
        Checkpoint ck;
        ck.config = scfg;
        ck.params = std::move(r.params);
        ck.meta = {"warmup", cfg.warmup.seed, cfg.warmup.epochs, digest, "specific"};
        WarmupArm arm{"objects(P,S)", std::move(ck), std::nullopt, std::nullopt, false};
        arm.warm_ap_det =
            eval_final_model(arm.warm->config, arm.warm->params, art).ap_det;
        arms.push_back(std::move(arm));
      }

      {  // Objects(P, A).
        auto lab = agnostic_labeler(train::LabelMode::kObjects);
        auto warm = warm_from(pseudo_from(lab.checkpoint, cfg.delta), cfg.warmup);
        WarmupArm arm{"objects(P,A)", std::move(warm.checkpoint), std::nullopt,
                      std::nullopt, true};
        arm.warm_ap_e = eval_entity_ap(arm.warm->config, arm.warm->params, art);
        arms.push_back(std::move(arm));
      }

      {  // Entities(P, A).
        auto lab = agnostic_labeler(train::LabelMode::kEntities);
        auto warm = warm_from(pseudo_from(lab.checkpoint, cfg.delta), cfg.warmup);
        WarmupArm arm{"entities(P,A)", std::move(warm.checkpoint), std::nullopt,
                      std::nullopt, true};
        arm.warm_ap_e = eval_entity_ap(arm.warm->config, arm.warm->params, art);
        arms.push_back(std::move(arm));
      }

      for (const auto& arm : arms) {
        FinalEval fin;
        finetune_and_eval(art, cfg, arm, &fin);
        tb.add(arm.label,
               {arm.warm_ap_e, arm.warm_ap_det, fin.ap_det, fin.ap_seg,
                std::optional<double>(fin.pq)});
        log_line(log, "  " + arm.label + ": AP^det=" + pct(fin.ap_det));
      }
    } else if (name == "epochs") {
      tb.table.columns = {"AP^det"};
      auto lab = agnostic_labeler(cfg.label_mode);
      const DatasetSplit pseudo = pseudo_from(lab.checkpoint, cfg.delta);
      auto fractions = [](int e) {
        std::vector<int> out;
        for (int k = 1; k <= 3; ++k) {
          const int v = std::max(1, (e * k + 2) / 3);
          if (out.empty() || out.back() != v) out.push_back(v);
        }
        return out;
      };
      for (int we : fractions(cfg.warmup.epochs)) {
        train::StageConfig wsc = cfg.warmup;
        wsc.epochs = we;
        auto warm = warm_from(pseudo, wsc);
        for (int fe : fractions(cfg.finetune.epochs)) {
          ExperimentConfig c2 = cfg;
          c2.finetune.epochs = fe;
          WarmupArm arm{"W" + std::to_string(we) + "xF" + std::to_string(fe),
                        warm.checkpoint, std::nullopt, std::nullopt, true};
          const auto ap = finetune_and_eval(art, c2, arm, nullptr);
          tb.add(arm.label, {ap});
          log_line(log, "  " + arm.label + ": AP^det=" + pct(ap));
        }
      }
    } else if (name == "delta") {
      tb.table.columns = {"kept", "AP^e", "AP^det"};
      auto lab = agnostic_labeler(cfg.label_mode);
      for (double d : {0.2, 0.3, 0.4, 0.5, 0.6}) {
        const DatasetSplit pseudo = pseudo_from(lab.checkpoint, d);
        std::ostringstream label;
        label << "delta=" << std::setprecision(2) << d;
        if (pseudo.images.empty()) {
          tb.add(label.str(), {std::optional<double>(0.0), std::nullopt, std::nullopt});
          continue;
        }
        auto warm = warm_from(pseudo, cfg.warmup);
        WarmupArm arm{label.str(), warm.checkpoint, std::nullopt, std::nullopt, true};
        arm.warm_ap_e = eval_entity_ap(arm.warm->config, arm.warm->params, art);
        const auto ap = finetune_and_eval(art, cfg, arm, nullptr);
        const double kept = static_cast<double>(pseudo.images.size()) /
                            static_cast<double>(art.unlabeled.images.size());
        tb.add(label.str(), {std::optional<double>(kept), arm.warm_ap_e, ap});
        log_line(log, "  " + label.str() + ": AP^det=" + pct(ap));
      }
    } else if (name == "init-parts") {
      tb.table.columns = {"AP^det", "AP50^det", "AP75^det"};
      auto lab = agnostic_labeler(cfg.label_mode);
      auto warm = warm_from(pseudo_from(lab.checkpoint, cfg.delta), cfg.warmup);
      const std::vector<std::pair<std::string, std::set<std::string>>> rows = {
          {"none", {}},
          {"+backbone", {"backbone"}},
          {"+neck", {"backbone", "neck"}},
          {"+head", {"backbone", "neck", "head"}},
          {"+classifier", {"backbone", "neck", "head", "classifier"}}};
      for (const auto& [label, parts] : rows) {
        ExperimentConfig c2 = cfg;
        c2.init_parts = parts;
        c2.classifier_init = parts.count("classifier")
                                 ? train::InitSpec::ClassifierInit::kCopy
                                 : train::InitSpec::ClassifierInit::kRandom;
        WarmupArm arm{label, warm.checkpoint, std::nullopt, std::nullopt, true};
        FinalEval fin;
        finetune_and_eval(art, c2, arm, &fin);
        tb.add(label, {fin.ap_det, fin.det_report.ap50, fin.det_report.ap75});
        log_line(log, "  " + label + ": AP^det=" + pct(fin.ap_det));
      }
    } else if (name == "augmentation") {
      tb.table.columns = {"AP^e", "AP^det"};
      auto lab = agnostic_labeler(cfg.label_mode);
      const DatasetSplit pseudo = pseudo_from(lab.checkpoint, cfg.delta);
      for (aug::AugMode wm : {aug::AugMode::kWeak, aug::AugMode::kStrong}) {
        train::StageConfig wsc = cfg.warmup;
        wsc.augment_mode = wm;
        auto warm = warm_from(pseudo, wsc);
        const auto warm_ap = eval_entity_ap(warm.checkpoint.config,
                                            warm.checkpoint.params, art);
        for (aug::AugMode fm : {aug::AugMode::kWeak, aug::AugMode::kStrong}) {
          ExperimentConfig c2 = cfg;
          c2.finetune.augment_mode = fm;
          const std::string label =
              "W-" + aug::aug_mode_name(wm) + "/F-" + aug::aug_mode_name(fm);
          WarmupArm arm{label, warm.checkpoint, warm_ap, std::nullopt, true};
          const auto ap = finetune_and_eval(art, c2, arm, nullptr);
          tb.add(label, {warm_ap, ap});
          log_line(log, "  " + label + ": AP^det=" + pct(ap));
        }
      }
    } else if (name == "unlabeled-scale") {
      tb.table.columns = {"AP^e", "AP^det"};
      auto lab = agnostic_labeler(cfg.label_mode);
      const int full = cfg.unlabeled_images;
      for (int size : {(full + 3) / 4, (full + 1) / 2, full}) {
        ExperimentConfig c2 = cfg;
        c2.unlabeled_images = size;
        Artifacts art2 = make_artifacts(c2);
        const DatasetSplit pseudo = [&] {
          labels::Labeler labeler{lab.checkpoint.config, lab.checkpoint.params,
                                  c2.infer_options()};
          return labels::build_pseudo_dataset(art2.unlabeled, labeler,
                                              c2.threshold_policy());
        }();
        auto warm = train::warmup(pseudo, art2.labeled_ids, c2.detector,
                                  c2.warmup, c2.digest());
        const std::string label = "U=" + std::to_string(size);
        WarmupArm arm{label, warm.checkpoint, std::nullopt, std::nullopt, true};
        arm.warm_ap_e = eval_entity_ap(arm.warm->config, arm.warm->params, art2);
        const auto ap = finetune_and_eval(art2, c2, arm, nullptr);
        tb.add(label, {arm.warm_ap_e, ap});
        log_line(log, "  " + label + ": AP^e=" + pct(arm.warm_ap_e));
      }
    } else {
      throw Error("unknown ablation \"" + name +
                  "\" (expected warmup-data, epochs, delta, init-parts, "
                  "augmentation or unlabeled-scale)");
    }
  }

  AblationTable table = tb.finish();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream tf(out_dir + "/ablation_" + name + ".txt");
    tf << table.to_text();
    std::ofstream jf(out_dir + "/ablation_" + name + ".json");
    jf << table.to_json();
    // Bar chart of the last column.
    std::vector<std::string> labels;
    std::vector<double> values;
    for (const auto& r : table.rows) {
      if (r.values.empty() || !r.values.back()) continue;
      labels.push_back(r.label);
      values.push_back(*r.values.back() * 100.0);
    }
    if (!values.empty())
      plot::write_bar_chart(out_dir + "/ablation_" + name + ".svg",
                            "ablation: " + name + " (" + table.columns.back() + ")",
                            labels, values);
  }
  return table;
}

}  // namespace cadet::exp
