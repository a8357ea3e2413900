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
#ifndef CADET_CHECKPOINT_HPP_
#define CADET_CHECKPOINT_HPP_

#include <set>
#include <string>

#include "cadet/detector.hpp"

namespace cadet {

// The four transferable model parts. Partial initialization moves whole
// parts between checkpoints and live models.
inline const std::set<std::string> kAllParts = {"backbone", "neck", "head",
                                                "classifier"};

struct CheckpointMeta {
  std::string stage;  // labeler | warmup | finetuned
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string config_digest;  // hex digest of the experiment config
  std::string mode;           // agnostic | specific
};

struct Checkpoint {
  det::DetectorConfig config;
  CheckpointMeta meta;
  det::DetectorParams<float> params;
};

// Single-file archive: a JSON header carrying metadata, the detector config
// and a self-describing array directory (name, part, shape, byte offset),
// followed by raw little-endian float32 data. Save -> load round-trips
// every parameter bit-exactly.
void checkpoint_save(const det::DetectorConfig& config,
                     const det::DetectorParams<float>& params,
                     const CheckpointMeta& meta, const std::string& path);

Checkpoint checkpoint_read(const std::string& path);

// Copies the parts named in parts_filter from ck into target, which must
// already be shaped for target_config. Parts not requested are untouched.
// Throws when a requested part is missing or any tensor shape differs.
void checkpoint_load_parts(const Checkpoint& ck,
                           const std::set<std::string>& parts_filter,
                           const det::DetectorConfig& target_config,
                           det::DetectorParams<float>& target);

// Exact parameter equality restricted to one part; used by tests and the
// initialization audit.
bool params_part_equal(const det::DetectorParams<float>& a,
                       const det::DetectorParams<float>& b,
                       const det::DetectorConfig& config, const std::string& part);

}  // namespace cadet

#endif  // CADET_CHECKPOINT_HPP_
