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
#ifndef CADET_PIXPACK_HPP_
#define CADET_PIXPACK_HPP_

#include <string>

#include "cadet/dataset.hpp"

namespace cadet {

// Raw float32 pixel storage for a whole split in one file ("images.pix").
// Synthetic pixels are exact float grids, so no image codec is involved and
// round trips are bit-exact. Layout: magic, version, image count, then per
// image: id, h, w, c, plane-major row-major float32 data.
void write_pixpack(const DatasetSplit& split, const std::string& path);

// Attaches pixels to matching image ids in place. Ids present in the pack
// but not in the split are ignored; split images without pixels in the pack
// are left as annotation-only.
void read_pixpack(DatasetSplit& split, const std::string& path);

// Directory form of a split: <dir>/annotations.json + <dir>/images.pix.
void save_split(const DatasetSplit& split, const std::string& dir);
DatasetSplit load_split(const std::string& dir,
                        std::optional<Role> expected_role = std::nullopt);

}  // namespace cadet

#endif  // CADET_PIXPACK_HPP_
