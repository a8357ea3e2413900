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
#ifndef CADET_PARALLEL_HPP_
#define CADET_PARALLEL_HPP_

#include <functional>
#include <thread>
#include <vector>

namespace cadet {

// Runs fn(0..n-1) across up to `workers` threads (0 = hardware concurrency).
// Callers own determinism: each index must touch only its own outputs.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers == 0)
    workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace cadet

#endif  // CADET_PARALLEL_HPP_
