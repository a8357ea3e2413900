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
#include "cadet/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "cadet/error.hpp"

namespace cadet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::set<std::string> parse_parts(const std::string& csv) {
  std::set<std::string> parts;
  if (trim(csv) == "none" || trim(csv).empty()) return parts;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    require(kAllParts.count(item) == 1, "config: unknown init part \"", item, "\"");
    parts.insert(item);
  }
  return parts;
}

std::string parts_to_string(const std::set<std::string>& parts) {
  if (parts.empty()) return "none";
  std::string out;
  // Canonical pipeline order, not alphabetical.
  for (const char* p : {"backbone", "neck", "head", "classifier"})
    if (parts.count(p)) out += (out.empty() ? "" : ",") + std::string(p);
  return out;
}

void read_stage(const KeyValueConfig& kv, const std::string& section,
                train::StageConfig& sc) {
  sc.epochs = static_cast<int>(kv.get_int(section, "epochs", sc.epochs));
  sc.batch = static_cast<int>(kv.get_int(section, "batch", sc.batch));
  sc.lr = kv.get_double(section, "lr", sc.lr);
  sc.momentum = kv.get_double(section, "momentum", sc.momentum);
  sc.augment_mode = aug::parse_aug_mode(
      kv.get(section, "augment", aug::aug_mode_name(sc.augment_mode)));
  sc.weights.cls = static_cast<float>(kv.get_double(section, "w_cls", sc.weights.cls));
  sc.weights.loc = static_cast<float>(kv.get_double(section, "w_loc", sc.weights.loc));
  sc.weights.ctr = static_cast<float>(kv.get_double(section, "w_ctr", sc.weights.ctr));
  sc.weights.dice = static_cast<float>(kv.get_double(section, "w_dice", sc.weights.dice));
  sc.clip_norm = kv.get_double(section, "clip_norm", sc.clip_norm);
  sc.mask_samples_per_image = static_cast<int>(
      kv.get_int(section, "mask_samples", sc.mask_samples_per_image));
  sc.workers = static_cast<int>(kv.get_int(section, "workers", sc.workers));
}

void write_stage(std::ostream& os, const std::string& section,
                 const train::StageConfig& sc) {
  os << "[" << section << "]\n";
  os << "epochs = " << sc.epochs << "\n";
  os << "batch = " << sc.batch << "\n";
  os << "lr = " << sc.lr << "\n";
  os << "momentum = " << sc.momentum << "\n";
  os << "augment = " << aug::aug_mode_name(sc.augment_mode) << "\n";
  os << "w_cls = " << sc.weights.cls << "\n";
  os << "w_loc = " << sc.weights.loc << "\n";
  os << "w_ctr = " << sc.weights.ctr << "\n";
  os << "w_dice = " << sc.weights.dice << "\n";
  os << "clip_norm = " << sc.clip_norm << "\n";
  os << "mask_samples = " << sc.mask_samples_per_image << "\n";
  os << "workers = " << sc.workers << "\n";
}

const std::set<std::string> kKnownSections = {"dataset", "experiment", "labeler",
                                              "warmup", "finetune", "eval"};

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', "config line ", line_no, ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      require(!section.empty(), "config line ", line_no, ": empty section name");
      kv.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config line ", line_no,
            ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), "config line ", line_no, ": empty key");
    require(!section.empty(), "config line ", line_no, ": key outside a section");
    kv.sections_[section][key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config ", path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

bool KeyValueConfig::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string KeyValueConfig::get(const std::string& section, const std::string& key,
                                const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

long KeyValueConfig::get_int(const std::string& section, const std::string& key,
                             long fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  try {
    std::size_t pos = 0;
    const long out = std::stol(v, &pos);
    require(pos == v.size(), "");
    return out;
  } catch (...) {
    throw Error("config: [" + section + "] " + key + " = \"" + v +
                "\" is not an integer");
  }
}

double KeyValueConfig::get_double(const std::string& section, const std::string& key,
                                  double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    require(pos == v.size(), "");
    return out;
  } catch (...) {
    throw Error("config: [" + section + "] " + key + " = \"" + v +
                "\" is not a number");
  }
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.labeler.epochs = 20;
  c.labeler.lr = 0.02;
  c.warmup.epochs = 25;  // warmup:finetune epochs keep a 5:3 proportion
  c.warmup.lr = 0.02;
  c.finetune.epochs = 15;
  c.finetune.lr = 0.02;
  return c;
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
  for (const auto& [name, _] : kv.sections())
    require(kKnownSections.count(name) == 1, "config: unknown section [", name, "]");

  ExperimentConfig c = defaults();
  c.labeled_images = static_cast<int>(kv.get_int("dataset", "labeled_images", c.labeled_images));
  c.unlabeled_images = static_cast<int>(kv.get_int("dataset", "unlabeled_images", c.unlabeled_images));
  c.val_images = static_cast<int>(kv.get_int("dataset", "val_images", c.val_images));
  c.image_size = static_cast<int>(kv.get_int("dataset", "image_size", c.image_size));
  c.max_things = static_cast<int>(kv.get_int("dataset", "max_things", c.max_things));
  c.noise = kv.get_double("dataset", "noise", c.noise);
  c.seed = static_cast<std::uint64_t>(kv.get_int("dataset", "seed", static_cast<long>(c.seed)));

  c.label_mode = train::parse_label_mode(
      kv.get("experiment", "label_mode", train::label_mode_name(c.label_mode)));
  c.delta = kv.get_double("experiment", "delta", c.delta);
  require(c.delta >= 0.0 && c.delta <= 1.0, "config: delta must be in [0, 1]");
  if (kv.has("experiment", "init_parts"))
    c.init_parts = parse_parts(kv.get("experiment", "init_parts", ""));
  const std::string ci = kv.get("experiment", "classifier_init",
                                c.classifier_init == train::InitSpec::ClassifierInit::kCopy
                                    ? "copy"
                                    : "random");
  require(ci == "copy" || ci == "random",
          "config: classifier_init must be copy or random");
  c.classifier_init = ci == "copy" ? train::InitSpec::ClassifierInit::kCopy
                                   : train::InitSpec::ClassifierInit::kRandom;

  read_stage(kv, "labeler", c.labeler);
  read_stage(kv, "warmup", c.warmup);
  read_stage(kv, "finetune", c.finetune);

  c.score_floor = kv.get_double("eval", "score_floor", c.score_floor);
  c.nms_iou = kv.get_double("eval", "nms_iou", c.nms_iou);
  c.use_centerness = kv.get_int("eval", "use_centerness", c.use_centerness ? 1 : 0) != 0;
  c.pq_score_floor = kv.get_double("eval", "pq_score_floor", c.pq_score_floor);
  c.eval_options.area_small = kv.get_double("eval", "area_small", c.eval_options.area_small);
  c.eval_options.area_large = kv.get_double("eval", "area_large", c.eval_options.area_large);
  c.eval_options.max_detections = static_cast<int>(
      kv.get_int("eval", "max_detections", c.eval_options.max_detections));

  // Stage seeds derive from the dataset seed unless a stage pins its own.
  c.labeler.seed = static_cast<std::uint64_t>(
      kv.get_int("labeler", "seed", static_cast<long>(mix_seed(c.seed, 11))));
  c.warmup.seed = static_cast<std::uint64_t>(
      kv.get_int("warmup", "seed", static_cast<long>(mix_seed(c.seed, 12))));
  c.finetune.seed = static_cast<std::uint64_t>(
      kv.get_int("finetune", "seed", static_cast<long>(mix_seed(c.seed, 13))));
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_kv(KeyValueConfig::parse_file(path));
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "[dataset]\n";
  os << "labeled_images = " << labeled_images << "\n";
  os << "unlabeled_images = " << unlabeled_images << "\n";
  os << "val_images = " << val_images << "\n";
  os << "image_size = " << image_size << "\n";
  os << "max_things = " << max_things << "\n";
  os << "noise = " << noise << "\n";
  os << "seed = " << seed << "\n";
  os << "[experiment]\n";
  os << "label_mode = " << train::label_mode_name(label_mode) << "\n";
  os << "delta = " << delta << "\n";
  os << "init_parts = " << parts_to_string(init_parts) << "\n";
  os << "classifier_init = "
     << (classifier_init == train::InitSpec::ClassifierInit::kCopy ? "copy" : "random")
     << "\n";
  write_stage(os, "labeler", labeler);
  os << "seed = " << labeler.seed << "\n";
  write_stage(os, "warmup", warmup);
  os << "seed = " << warmup.seed << "\n";
  write_stage(os, "finetune", finetune);
  os << "seed = " << finetune.seed << "\n";
  os << "[eval]\n";
  os << "score_floor = " << score_floor << "\n";
  os << "nms_iou = " << nms_iou << "\n";
  os << "use_centerness = " << (use_centerness ? 1 : 0) << "\n";
  os << "pq_score_floor = " << pq_score_floor << "\n";
  os << "area_small = " << eval_options.area_small << "\n";
  os << "area_large = " << eval_options.area_large << "\n";
  os << "max_detections = " << eval_options.max_detections << "\n";
  return os.str();
}

ExperimentConfig ExperimentConfig::with_seed(std::uint64_t new_seed) const {
  ExperimentConfig c = *this;
  c.seed = new_seed;
  c.labeler.seed = mix_seed(new_seed, 11);
  c.warmup.seed = mix_seed(new_seed, 12);
  c.finetune.seed = mix_seed(new_seed, 13);
  return c;
}

std::string ExperimentConfig::digest() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical_text());
  return os.str();
}

synth::SynthSpec ExperimentConfig::labeled_spec() const {
  synth::SynthSpec s;
  s.height = s.width = image_size;
  s.num_images = labeled_images;
  s.max_things = max_things;
  s.noise = noise;
  s.seed = mix_seed(seed, 1);
  s.id_prefix = "lab";
  return s;
}

synth::SynthSpec ExperimentConfig::unlabeled_spec() const {
  synth::SynthSpec s = labeled_spec();
  s.num_images = unlabeled_images;
  s.seed = mix_seed(seed, 2);
  s.id_prefix = "pool";
  return s;
}

synth::SynthSpec ExperimentConfig::val_spec() const {
  synth::SynthSpec s = labeled_spec();
  s.num_images = val_images;
  s.seed = mix_seed(seed, 3);
  s.id_prefix = "val";
  return s;
}

train::InitSpec ExperimentConfig::init_spec() const {
  train::InitSpec i;
  i.parts = init_parts;
  i.classifier_init = classifier_init;
  return i;
}

det::InferOptions ExperimentConfig::infer_options() const {
  det::InferOptions o;
  o.score_floor = score_floor;
  o.nms_iou = nms_iou;
  o.use_centerness = use_centerness;
  o.max_detections = eval_options.max_detections;
  return o;
}

labels::ThresholdPolicy ExperimentConfig::threshold_policy() const {
  return labels::ThresholdPolicy{delta};
}

}  // namespace cadet
