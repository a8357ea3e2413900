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
#ifndef CADET_COCO_JSON_HPP_
#define CADET_COCO_JSON_HPP_

#include <optional>
#include <string>

#include "cadet/dataset.hpp"

namespace cadet {

// COCO-style annotation file:
//   images:      [{id, width, height, file_name}]
//   annotations: [{id, image_id, bbox: [x, y, w, h],
//                  segmentation: {size: [h, w], counts: "<rle>"} or
//                                [[x0, y0, x1, y1, ...], ...],
//                  category_id   (omitted for class-agnostic labels),
//                  score         (omitted for ground truth),
//                  iskind: "thing" | "stuff"}]
//   categories:  [{id, name}]
// Boxes are converted between the file's xywh and the in-memory xyxy at this
// boundary only. Annotation order in the file is preserved per image.
//
// The split role is not stored in the file. When expected_role is not given
// it is inferred: no annotations at all -> unlabeled; every annotation
// scored -> pseudo; otherwise labeled.
DatasetSplit read_coco_json(const std::string& path,
                            std::optional<Role> expected_role = std::nullopt);

// Deterministic writer: two calls on the same split produce byte-identical
// files. Masks are written as compressed RLE.
void write_coco_json(const DatasetSplit& split, const std::string& path);

}  // namespace cadet

#endif  // CADET_COCO_JSON_HPP_
