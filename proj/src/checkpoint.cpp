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
#include "cadet/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "cadet/error.hpp"

namespace cadet {
namespace {

using json = nlohmann::ordered_json;
using det::DetectorConfig;
using det::DetectorParams;

constexpr char kMagic[8] = {'C', 'A', 'D', 'E', 'T', 'C', 'K', '1'};

json config_to_json(const DetectorConfig& c) {
  json j;
  j["in_channels"] = c.in_channels;
  j["backbone_widths"] = c.backbone_widths;
  j["pyramid_levels"] = c.pyramid_levels;
  j["head_depth"] = c.head_depth;
  j["head_width"] = c.head_width;
  j["num_classes"] = c.num_classes;
  j["mask_channels"] = c.mask_channels;
  j["mask_hidden"] = c.mask_hidden;
  j["kernel_hidden"] = c.kernel_hidden;
  json ranges = json::array();
  for (const auto& r : c.scale_ranges)
    ranges.push_back({{"lo", r.lo},
                      {"hi", std::isinf(r.hi) ? -1.0 : r.hi}});
  j["scale_ranges"] = ranges;
  return j;
}

DetectorConfig config_from_json(const json& j) {
  DetectorConfig c;
  c.in_channels = j["in_channels"].get<int>();
  const auto widths = j["backbone_widths"].get<std::vector<int>>();
  require(widths.size() == 4, "checkpoint: backbone_widths must have 4 entries");
  std::copy(widths.begin(), widths.end(), c.backbone_widths.begin());
  c.pyramid_levels = j["pyramid_levels"].get<std::vector<int>>();
  c.head_depth = j["head_depth"].get<int>();
  c.head_width = j["head_width"].get<int>();
  c.num_classes = j["num_classes"].get<int>();
  c.mask_channels = j["mask_channels"].get<int>();
  c.mask_hidden = j["mask_hidden"].get<int>();
  c.kernel_hidden = j["kernel_hidden"].get<int>();
  c.scale_ranges.clear();
  for (const auto& r : j["scale_ranges"]) {
    const double hi = r["hi"].get<double>();
    c.scale_ranges.push_back(
        {r["lo"].get<double>(),
         hi < 0 ? std::numeric_limits<double>::infinity() : hi});
  }
  c.validate();
  return c;
}

struct ArrayRef {
  std::string name;
  std::string part;
  std::vector<long> shape;
  const float* data;
  long count;
};

std::vector<ArrayRef> enumerate_arrays(const DetectorParams<float>& p,
                                       const DetectorConfig& cfg) {
  std::vector<ArrayRef> out;
  det::visit_params(p, cfg, [&](const std::string& name, const std::string& part,
                                const nn::ConvParam<float>& cp) {
    out.push_back({name + ".w", part,
                   {cp.cout, cp.cin, cp.kh, cp.kw}, cp.w.data(), cp.w.size()});
    out.push_back({name + ".b", part, {cp.cout}, cp.b.data(), cp.b.size()});
  });
  return out;
}

}  // namespace

void checkpoint_save(const DetectorConfig& config,
                     const DetectorParams<float>& params,
                     const CheckpointMeta& meta, const std::string& path) {
  const auto arrays = enumerate_arrays(params, config);

  json header;
  header["format"] = "cadet-checkpoint";
  header["version"] = 1;
  header["meta"] = {{"stage", meta.stage},
                    {"seed", meta.seed},
                    {"epoch", meta.epoch},
                    {"config_digest", meta.config_digest},
                    {"mode", meta.mode}};
  header["config"] = config_to_json(config);
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    dir.push_back({{"name", a.name},
                   {"part", a.part},
                   {"shape", a.shape},
                   {"dtype", "f32"},
                   {"offset", offset}});
    offset += static_cast<std::uint64_t>(a.count) * sizeof(float);
  }
  header["arrays"] = dir;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write checkpoint ", path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& a : arrays)
    out.write(reinterpret_cast<const char*>(a.data),
              static_cast<std::streamsize>(sizeof(float) * a.count));
  require(out.good(), "write failed for checkpoint ", path);
}

Checkpoint checkpoint_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint ", path);
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::equal(magic, magic + 8, kMagic), path,
          ": not a cadet checkpoint");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  require(in.good(), path, ": truncated checkpoint header");
  const json header = json::parse(header_str);

  Checkpoint ck;
  ck.config = config_from_json(header["config"]);
  const auto& m = header["meta"];
  ck.meta.stage = m["stage"].get<std::string>();
  ck.meta.seed = m["seed"].get<std::uint64_t>();
  ck.meta.epoch = m["epoch"].get<int>();
  ck.meta.config_digest = m["config_digest"].get<std::string>();
  ck.meta.mode = m["mode"].get<std::string>();
  ck.params = det::make_param_shell<float>(ck.config);

  auto arrays = enumerate_arrays(ck.params, ck.config);
  require(arrays.size() == header["arrays"].size(), path,
          ": array directory size mismatch");
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const auto& ja = header["arrays"][i];
    require(ja["name"].get<std::string>() == arrays[i].name, path,
            ": unexpected array ", ja["name"].get<std::string>());
    const auto shape = ja["shape"].get<std::vector<long>>();
    require(shape == arrays[i].shape, path, ": shape mismatch for tensor ",
            arrays[i].name);
    in.read(reinterpret_cast<char*>(const_cast<float*>(arrays[i].data)),
            static_cast<std::streamsize>(sizeof(float) * arrays[i].count));
    require(in.good(), path, ": truncated data for tensor ", arrays[i].name);
  }
  return ck;
}

void checkpoint_load_parts(const Checkpoint& ck,
                           const std::set<std::string>& parts_filter,
                           const DetectorConfig& target_config,
                           DetectorParams<float>& target) {
  for (const auto& part : parts_filter)
    require(kAllParts.count(part) == 1, "unknown model part \"", part, "\"");
  if (parts_filter.empty()) return;

  // Index the source tensors by name.
  std::vector<std::pair<std::string, const nn::ConvParam<float>*>> source;
  det::visit_params(ck.params, ck.config,
                    [&](const std::string& name, const std::string&,
                        const nn::ConvParam<float>& cp) { source.emplace_back(name, &cp); });
  auto find_source = [&](const std::string& name) -> const nn::ConvParam<float>* {
    for (const auto& [n, cp] : source)
      if (n == name) return cp;
    return nullptr;
  };

  det::visit_params(target, target_config,
                    [&](const std::string& name, const std::string& part,
                        nn::ConvParam<float>& dst) {
    if (parts_filter.count(part) == 0) return;
    const nn::ConvParam<float>* src = find_source(name);
    require(src != nullptr, "checkpoint is missing part \"", part,
            "\" tensor ", name);
    require(src->cout == dst.cout && src->cin == dst.cin &&
                src->kh == dst.kh && src->kw == dst.kw,
            "shape mismatch for part \"", part, "\" tensor ", name, ": source ",
            src->cout, "x", src->cin, "x", src->kh, "x", src->kw, ", target ",
            dst.cout, "x", dst.cin, "x", dst.kh, "x", dst.kw);
    dst.w = src->w;
    dst.b = src->b;
  });
}

bool params_part_equal(const DetectorParams<float>& a,
                       const DetectorParams<float>& b,
                       const DetectorConfig& config, const std::string& part) {
  bool equal = true;
  std::vector<std::pair<std::string, const nn::ConvParam<float>*>> bs;
  det::visit_params(b, config, [&](const std::string& name, const std::string&,
                                   const nn::ConvParam<float>& cp) { bs.emplace_back(name, &cp); });
  std::size_t i = 0;
  det::visit_params(a, config, [&](const std::string& name, const std::string& p,
                                   const nn::ConvParam<float>& cp) {
    const nn::ConvParam<float>* other = bs[i].second;
    require(bs[i].first == name, "params_part_equal: enumeration mismatch");
    ++i;
    if (p != part) return;
    if (cp.w != other->w || cp.b != other->b) equal = false;
  });
  return equal;
}

}  // namespace cadet
