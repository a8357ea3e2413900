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
// cadet: a desk-scale semi-supervised detection/segmentation bench.
//
//   cadet gen           synthesize a dataset split
//   cadet labeler-train train the class-agnostic pseudo labeler
//   cadet pseudo-label  run the labeler over unlabeled images
//   cadet warmup        warmup-train the target detector on pseudo labels
//   cadet finetune      class-specific finetuning from warmup parts
//   cadet evaluate      AP / PQ metrics between two annotation files
//   cadet run           the full pipeline
//   cadet ablate        scripted ablation grids

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cadet/coco_json.hpp"
#include "cadet/experiment.hpp"
#include "cadet/pixpack.hpp"

namespace {

using namespace cadet;

ExperimentConfig load_config(const std::string& config_path, long seed_override) {
  ExperimentConfig cfg = config_path.empty()
                             ? ExperimentConfig::defaults()
                             : ExperimentConfig::from_file(config_path);
  if (seed_override >= 0)
    cfg = cfg.with_seed(static_cast<std::uint64_t>(seed_override));
  return cfg;
}

// Loads a previously generated split, or generates it into <out>/data when
// missing, so subcommands can run standalone in any order.
DatasetSplit load_or_generate(const ExperimentConfig& cfg, const std::string& out,
                              const std::string& which) {
  const std::string dir = out + "/data/" + which;
  if (std::filesystem::exists(dir + "/annotations.json")) return load_split(dir);
  DatasetSplit split;
  if (which == "labeled") {
    split = synth::generate(cfg.labeled_spec());
  } else if (which == "unlabeled") {
    split = synth::derive_unlabeled(synth::generate(cfg.unlabeled_spec()));
  } else if (which == "val") {
    split = synth::generate(cfg.val_spec());
  } else {
    throw Error("unknown split \"" + which + "\"");
  }
  save_split(split, dir);
  return split;
}

int run_evaluate(const std::string& pred_path, const std::string& gt_path,
                 const std::string& metric, const std::string& kind_name,
                 const std::string& report_path, const ExperimentConfig& cfg) {
  const DatasetSplit gts = read_coco_json(gt_path);
  DatasetSplit preds = read_coco_json(pred_path);
  const auto data = eval::pair_by_id(preds, gts);
  const eval::MatchKind kind =
      kind_name == "mask" ? eval::MatchKind::kMask : eval::MatchKind::kBox;

  std::ostringstream out;
  if (metric == "ap" || metric == "ap-agnostic") {
    const eval::ApMode mode =
        metric == "ap" ? eval::ApMode::kSpecific : eval::ApMode::kAgnostic;
    eval::ApReport r = eval::average_precision(data, kind, mode, cfg.eval_options);
    auto put = [&](const char* k, const std::optional<double>& v) {
      out << "\"" << k << "\": " << (v ? std::to_string(*v) : "null") << ",\n ";
    };
    out << "{\n ";
    put("ap", r.ap);
    put("ap50", r.ap50);
    put("ap75", r.ap75);
    put("ap_small", r.ap_small);
    put("ap_medium", r.ap_medium);
    out << "\"ap_large\": " << (r.ap_large ? std::to_string(*r.ap_large) : "null")
        << "\n}\n";
  } else if (metric == "pq") {
    eval::PqReport r = eval::panoptic_quality(data, /*class_aware=*/false);
    out << "{\n \"pq\": " << r.pq << ",\n \"tp\": " << r.tp
        << ",\n \"fp\": " << r.fp << ",\n \"fn\": " << r.fn << "\n}\n";
  } else {
    throw Error("metric must be ap, ap-agnostic or pq");
  }

  std::cout << out.str();
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << out.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cadet: desk-scale class-agnostic semi-supervised detection bench"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/default";
  long seed_override = -1;
  app.add_option("--config", config_path, "experiment config file");
  app.add_option("--seed", seed_override, "override the experiment seed");
  app.add_option("--out", out_dir, "output directory");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic split");
  int gen_images = 100, gen_size = 64, gen_max_things = 4;
  double gen_noise = 0.05;
  long gen_seed = 7;
  bool gen_unlabeled = false;
  std::string gen_prefix = "im";
  std::string gen_shapes = "circle,square,triangle";
  std::string gen_colors = "red,green,blue";
  std::string gen_stuff = "sky,ground";
  double gen_min_size = 12.0, gen_max_size = 26.0;
  gen->add_option("--images", gen_images, "number of images");
  gen->add_option("--size", gen_size, "square image extent");
  gen->add_option("--max-things", gen_max_things, "max things per image");
  gen->add_option("--noise", gen_noise, "pixel noise amplitude");
  gen->add_option("--gen-seed", gen_seed, "generator seed");
  gen->add_option("--prefix", gen_prefix, "image id prefix");
  gen->add_option("--shapes", gen_shapes, "comma-separated shape names");
  gen->add_option("--colors", gen_colors, "comma-separated color names");
  gen->add_option("--stuff", gen_stuff, "comma-separated stuff names");
  gen->add_option("--min-thing-size", gen_min_size, "smallest thing extent");
  gen->add_option("--max-thing-size", gen_max_size, "largest thing extent");
  gen->add_flag("--unlabeled", gen_unlabeled, "strip labels from the output");

  // pseudo-label
  auto* pseudo = app.add_subcommand("pseudo-label", "label unlabeled images");
  std::string pl_ckpt, pl_in, pl_out;
  double pl_threshold = -1.0;
  pseudo->add_option("--labeler-checkpoint", pl_ckpt, "labeler checkpoint")->required();
  pseudo->add_option("--in", pl_in, "unlabeled split directory")->required();
  pseudo->add_option("--out", pl_out, "pseudo split directory")->required();
  pseudo->add_option("--threshold", pl_threshold, "score threshold delta");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "compute AP / PQ between files");
  std::string ev_pred, ev_gt, ev_metric = "ap", ev_kind = "box", ev_report;
  ev->add_option("--pred", ev_pred, "predictions json")->required();
  ev->add_option("--gt", ev_gt, "ground-truth json")->required();
  ev->add_option("--metric", ev_metric, "ap | ap-agnostic | pq");
  ev->add_option("--kind", ev_kind, "box | mask");
  ev->add_option("--report", ev_report, "write the report json here");

  // stage subcommands + run
  auto* labeler_cmd = app.add_subcommand("labeler-train", "train the pseudo labeler");
  auto* warmup_cmd = app.add_subcommand("warmup", "warmup training on pseudo labels");
  auto* finetune_cmd = app.add_subcommand("finetune", "class-specific finetuning");
  std::string ft_init_parts;
  std::string ft_classifier_init;
  finetune_cmd->add_option("--init-parts", ft_init_parts,
                           "comma list of backbone,neck,head,classifier or none");
  finetune_cmd->add_option("--classifier-init", ft_classifier_init, "random | copy");
  auto* run_cmd = app.add_subcommand("run", "full pipeline");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
  std::string ab_name;
  int ab_seeds = 3;
  ablate->add_option("--name", ab_name,
                     "warmup-data | epochs | delta | init-parts | augmentation | "
                     "unlabeled-scale")
      ->required();
  ablate->add_option("--seeds", ab_seeds, "number of seeds to average");

  CLI11_PARSE(app, argc, argv);

  std::string stage_name = "startup";
  try {
    ExperimentConfig cfg = load_config(config_path, seed_override);

    if (gen->parsed()) {
      stage_name = "gen";
      auto split_csv = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ','))
          if (!item.empty()) out.push_back(item);
        return out;
      };
      synth::SynthSpec spec;
      spec.height = spec.width = gen_size;
      spec.num_images = gen_images;
      spec.max_things = gen_max_things;
      spec.noise = gen_noise;
      spec.seed = static_cast<std::uint64_t>(gen_seed);
      spec.id_prefix = gen_prefix;
      spec.shapes = split_csv(gen_shapes);
      spec.colors = split_csv(gen_colors);
      spec.stuff = split_csv(gen_stuff);
      spec.min_thing_size = gen_min_size;
      spec.max_thing_size = gen_max_size;
      DatasetSplit split = synth::generate(spec);
      if (gen_unlabeled) split = synth::derive_unlabeled(split);
      save_split(split, out_dir);
      std::cout << "wrote " << split.images.size() << " images ("
                << split.instance_count() << " instances) to " << out_dir << "\n";
      return 0;
    }

    if (pseudo->parsed()) {
      stage_name = "pseudo-label";
      const Checkpoint ck = checkpoint_read(pl_ckpt);
      const DatasetSplit unlabeled = load_split(pl_in, Role::kUnlabeled);
      labels::ThresholdPolicy policy = cfg.threshold_policy();
      if (pl_threshold >= 0.0) policy.delta = pl_threshold;
      labels::Labeler labeler{ck.config, ck.params, cfg.infer_options()};
      const DatasetSplit out = labels::build_pseudo_dataset(unlabeled, labeler, policy);
      save_split(out, pl_out);
      std::cout << "kept " << out.images.size() << " of " << unlabeled.images.size()
                << " images at delta=" << policy.delta << "\n";
      return 0;
    }

    if (ev->parsed()) {
      stage_name = "evaluate";
      return run_evaluate(ev_pred, ev_gt, ev_metric, ev_kind, ev_report, cfg);
    }

    if (labeler_cmd->parsed()) {
      stage_name = "labeler-train";
      const DatasetSplit labeled = load_or_generate(cfg, out_dir, "labeled");
      auto out = train::train_pseudo_labeler(labeled, cfg.label_mode, cfg.detector,
                                             cfg.labeler, cfg.digest());
      std::filesystem::create_directories(out_dir + "/checkpoints");
      checkpoint_save(out.checkpoint.config, out.checkpoint.params,
                      out.checkpoint.meta, out_dir + "/checkpoints/labeler.ckpt");
      std::cout << "labeler checkpoint written\n";
      return 0;
    }

    if (warmup_cmd->parsed()) {
      stage_name = "warmup";
      const DatasetSplit labeled = load_or_generate(cfg, out_dir, "labeled");
      std::set<std::string> labeled_ids;
      for (const auto& im : labeled.images) labeled_ids.insert(im.id);
      const DatasetSplit pseudo_split =
          load_split(out_dir + "/data/pseudo", Role::kPseudo);
      auto out = train::warmup(pseudo_split, labeled_ids, cfg.detector, cfg.warmup,
                               cfg.digest());
      std::filesystem::create_directories(out_dir + "/checkpoints");
      checkpoint_save(out.checkpoint.config, out.checkpoint.params,
                      out.checkpoint.meta, out_dir + "/checkpoints/warmup.ckpt");
      std::cout << "warmup checkpoint written\n";
      return 0;
    }

    if (finetune_cmd->parsed()) {
      stage_name = "finetune";
      if (!ft_init_parts.empty()) {
        cfg.init_parts.clear();
        std::stringstream ss(ft_init_parts);
        std::string item;
        while (std::getline(ss, item, ','))
          if (!item.empty() && item != "none") cfg.init_parts.insert(item);
      }
      if (!ft_classifier_init.empty())
        cfg.classifier_init = ft_classifier_init == "copy"
                                  ? train::InitSpec::ClassifierInit::kCopy
                                  : train::InitSpec::ClassifierInit::kRandom;
      const DatasetSplit labeled = load_or_generate(cfg, out_dir, "labeled");
      const Checkpoint warm = checkpoint_read(out_dir + "/checkpoints/warmup.ckpt");
      auto out = train::finetune(warm, labeled, cfg.init_spec(), cfg.detector,
                                 cfg.finetune, cfg.digest());
      checkpoint_save(out.checkpoint.config, out.checkpoint.params,
                      out.checkpoint.meta, out_dir + "/checkpoints/final.ckpt");
      std::cout << "final checkpoint written\n";
      return 0;
    }

    if (run_cmd->parsed()) {
      stage_name = "run";
      const exp::PipelineReport report = exp::run_pipeline(cfg, out_dir, &std::cout);
      std::cout << report.to_text();
      return 0;
    }

    if (ablate->parsed()) {
      stage_name = "ablate";
      const exp::AblationTable table =
          exp::run_ablation(ab_name, cfg, ab_seeds, out_dir, &std::cout);
      std::cout << table.to_text();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << stage_name << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
