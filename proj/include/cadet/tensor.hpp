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
#ifndef CADET_TENSOR_HPP_
#define CADET_TENSOR_HPP_

#include <Eigen/Dense>
#include <vector>

#include "cadet/error.hpp"

namespace cadet {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// A C x H x W feature map stored as a stack of dense planes. Row index is y,
// column index is x. This is the common currency between image pixels,
// network activations, and mask grids.
template <typename S>
struct PlaneStack {
  std::vector<Mat<S>> planes;

  PlaneStack() = default;
  PlaneStack(int channels, int height, int width) { resize(channels, height, width); }

  void resize(int channels, int height, int width) {
    planes.assign(channels, Mat<S>::Zero(height, width));
  }

  int channels() const { return static_cast<int>(planes.size()); }
  int height() const { return planes.empty() ? 0 : static_cast<int>(planes[0].rows()); }
  int width() const { return planes.empty() ? 0 : static_cast<int>(planes[0].cols()); }
  bool empty() const { return planes.empty(); }

  Mat<S>& operator[](int c) { return planes[static_cast<std::size_t>(c)]; }
  const Mat<S>& operator[](int c) const { return planes[static_cast<std::size_t>(c)]; }

  void set_zero() {
    for (auto& p : planes) p.setZero();
  }

  template <typename T>
  PlaneStack<T> cast() const {
    PlaneStack<T> out;
    out.planes.reserve(planes.size());
    for (const auto& p : planes) out.planes.push_back(p.template cast<T>());
    return out;
  }

  bool all_finite() const {
    for (const auto& p : planes)
      if (!p.allFinite()) return false;
    return true;
  }
};

using Image = PlaneStack<float>;  // pixels in [0, 1], RGB order

template <typename S>
bool operator==(const PlaneStack<S>& a, const PlaneStack<S>& b) {
  if (a.channels() != b.channels()) return false;
  for (int c = 0; c < a.channels(); ++c) {
    if (a[c].rows() != b[c].rows() || a[c].cols() != b[c].cols()) return false;
    if (a[c] != b[c]) return false;
  }
  return true;
}

}  // namespace cadet

#endif  // CADET_TENSOR_HPP_
