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
#include "cadet/coco_json.hpp"

#include <fstream>
#include <json.hpp>
#include <map>
#include <unordered_map>

#include "cadet/error.hpp"

namespace cadet {
namespace {

using json = nlohmann::ordered_json;

json bbox_to_xywh(const BBox& b) {
  return json::array({b.x1, b.y1, b.x2 - b.x1, b.y2 - b.y1});
}

BBox xywh_to_bbox(const json& arr, const std::string& image_id) {
  require(arr.is_array() && arr.size() == 4, "image ", image_id,
          ": field bbox must be [x, y, w, h]");
  const double x = arr[0].get<double>(), y = arr[1].get<double>();
  const double w = arr[2].get<double>(), h = arr[3].get<double>();
  require(w > 0 && h > 0, "image ", image_id,
          ": field bbox has non-positive w/h");
  return BBox{x, y, x + w, y + h};
}

Mask parse_segmentation(const json& seg, int height, int width,
                        const std::string& image_id) {
  if (seg.is_object()) {
    require(seg.contains("size") && seg.contains("counts"), "image ", image_id,
            ": field segmentation missing size/counts");
    const auto& size = seg["size"];
    require(size.is_array() && size.size() == 2, "image ", image_id,
            ": field segmentation.size must be [h, w]");
    const int h = size[0].get<int>(), w = size[1].get<int>();
    require(h == height && w == width, "image ", image_id,
            ": field segmentation.size does not match the image");
    return rle_decode(rle_string_to_counts(seg["counts"].get<std::string>()), h, w);
  }
  require(seg.is_array() && !seg.empty(), "image ", image_id,
          ": field segmentation must be an RLE object or polygon list");
  Mask merged(height, width);
  for (const auto& poly : seg) {
    const auto pts = poly.get<std::vector<double>>();
    const Mask part = rasterize_polygon(pts, height, width);
    merged.grid = merged.grid.cwiseMax(part.grid);
  }
  return merged;
}

}  // namespace

DatasetSplit read_coco_json(const std::string& path,
                            std::optional<Role> expected_role) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path);
  json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw Error("failed to parse " + path + ": " + e.what());
  }
  require(root.contains("images") && root["images"].is_array(),
          path, ": missing top-level images list");
  require(root.contains("annotations") && root["annotations"].is_array(),
          path, ": missing top-level annotations list");

  DatasetSplit split;
  std::unordered_map<std::string, std::size_t> index_of;
  for (const auto& jim : root["images"]) {
    require(jim.contains("id"), path, ": image record without id");
    AnnotatedImage im;
    im.id = jim["id"].is_string() ? jim["id"].get<std::string>()
                                  : std::to_string(jim["id"].get<long>());
    require(jim.contains("width") && jim.contains("height"), "image ", im.id,
            ": field width/height missing");
    im.width = jim["width"].get<int>();
    im.height = jim["height"].get<int>();
    require(index_of.emplace(im.id, split.images.size()).second, "image ",
            im.id, ": duplicate id in file");
    split.images.push_back(std::move(im));
  }

  std::size_t n_annotations = 0, n_scored = 0;
  for (const auto& ja : root["annotations"]) {
    require(ja.contains("image_id"), path, ": annotation without image_id");
    const std::string image_id =
        ja["image_id"].is_string() ? ja["image_id"].get<std::string>()
                                   : std::to_string(ja["image_id"].get<long>());
    const auto it = index_of.find(image_id);
    require(it != index_of.end(), "image ", image_id,
            ": field image_id references an unknown image");
    AnnotatedImage& im = split.images[it->second];

    Instance inst;
    require(ja.contains("bbox"), "image ", image_id, ": field bbox missing");
    inst.bbox = xywh_to_bbox(ja["bbox"], image_id).clipped(im.width, im.height);
    if (ja.contains("segmentation") && !ja["segmentation"].is_null())
      inst.mask = parse_segmentation(ja["segmentation"], im.height, im.width, image_id);
    if (ja.contains("category_id")) inst.class_id = ja["category_id"].get<int>();
    if (ja.contains("score")) {
      inst.score = ja["score"].get<double>();
      ++n_scored;
    }
    std::string kind = ja.value("iskind", std::string("thing"));
    require(kind == "thing" || kind == "stuff", "image ", image_id,
            ": field iskind must be \"thing\" or \"stuff\"");
    inst.kind = kind == "stuff" ? Kind::kStuff : Kind::kThing;
    im.instances.push_back(std::move(inst));
    ++n_annotations;
  }

  if (root.contains("categories")) {
    std::map<int, std::string> by_id;
    for (const auto& jc : root["categories"])
      by_id[jc["id"].get<int>()] = jc["name"].get<std::string>();
    if (!by_id.empty()) {
      std::vector<std::string> names;
      for (const auto& [id, name] : by_id) {
        require(id == static_cast<int>(names.size()),
                path, ": category ids must be contiguous from 0, got ", id);
        names.push_back(name);
      }
      split.class_names = std::move(names);
    }
  }

  if (expected_role) {
    split.role = *expected_role;
  } else if (n_annotations == 0 && !split.images.empty()) {
    split.role = Role::kUnlabeled;
  } else if (n_annotations > 0 && n_scored == n_annotations) {
    split.role = Role::kPseudo;
  } else {
    split.role = Role::kLabeled;
  }
  validate_split(split);
  return split;
}

void write_coco_json(const DatasetSplit& split, const std::string& path) {
  validate_split(split);
  json root;
  root["images"] = json::array();
  root["annotations"] = json::array();
  root["categories"] = json::array();

  for (const auto& im : split.images) {
    root["images"].push_back({{"id", im.id},
                              {"width", im.width},
                              {"height", im.height},
                              {"file_name", im.id + ".pix"}});
  }
  long next_id = 1;
  for (const auto& im : split.images) {
    for (const auto& inst : im.instances) {
      json ja;
      ja["id"] = next_id++;
      ja["image_id"] = im.id;
      ja["bbox"] = bbox_to_xywh(inst.bbox);
      if (inst.mask) {
        ja["segmentation"] = {
            {"size", json::array({im.height, im.width})},
            {"counts", rle_counts_to_string(rle_encode(*inst.mask))}};
      }
      if (inst.class_id) ja["category_id"] = *inst.class_id;
      if (inst.score) ja["score"] = *inst.score;
      ja["iskind"] = inst.kind == Kind::kStuff ? "stuff" : "thing";
      root["annotations"].push_back(std::move(ja));
    }
  }
  if (split.class_names) {
    for (std::size_t i = 0; i < split.class_names->size(); ++i)
      root["categories"].push_back(
          {{"id", static_cast<int>(i)}, {"name", (*split.class_names)[i]}});
  }

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  out << root.dump(1) << "\n";
  require(out.good(), "write failed for ", path);
}

}  // namespace cadet
