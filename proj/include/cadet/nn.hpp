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
#ifndef CADET_NN_HPP_
#define CADET_NN_HPP_

#include <cmath>

#include "cadet/tensor.hpp"

// Minimal dense conv-net primitives on PlaneStack, with explicit backward
// passes. Convolutions go through im2col + one Eigen GEMM; the column matrix
// is kept by the caller so the backward pass can reuse it.
namespace cadet::nn {

template <typename S>
struct ConvParam {
  int cout = 0, cin = 0, kh = 0, kw = 0;
  Mat<S> w;  // cout x (cin*kh*kw)
  Vec<S> b;  // cout

  void resize(int out_c, int in_c, int k_h, int k_w) {
    cout = out_c;
    cin = in_c;
    kh = k_h;
    kw = k_w;
    w = Mat<S>::Zero(cout, cin * kh * kw);
    b = Vec<S>::Zero(cout);
  }
  void set_zero() {
    w.setZero();
    b.setZero();
  }
  long size() const { return w.size() + b.size(); }

  template <typename T>
  ConvParam<T> cast() const {
    ConvParam<T> out;
    out.cout = cout;
    out.cin = cin;
    out.kh = kh;
    out.kw = kw;
    out.w = w.template cast<T>();
    out.b = b.template cast<T>();
    return out;
  }
};

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename S>
void im2col(const PlaneStack<S>& x, int kh, int kw, int stride, int pad,
            Mat<S>& col) {
  const int cin = x.channels(), h = x.height(), w = x.width();
  const int oh = conv_out_extent(h, kh, stride, pad);
  const int ow = conv_out_extent(w, kw, stride, pad);
  col.resize(static_cast<long>(cin) * kh * kw, static_cast<long>(oh) * ow);
  for (int c = 0; c < cin; ++c) {
    const Mat<S>& plane = x[c];
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const long row = (static_cast<long>(c) * kh + ky) * kw + kx;
        S* dst = col.data() + row * col.cols();
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = S(0);
            continue;
          }
          const S* src = plane.data() + static_cast<long>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[oy * ow + ox] = (ix >= 0 && ix < w) ? src[ix] : S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const Mat<S>& dcol, int cin, int h, int w, int kh, int kw,
                int stride, int pad, PlaneStack<S>& dx) {
  const int oh = conv_out_extent(h, kh, stride, pad);
  const int ow = conv_out_extent(w, kw, stride, pad);
  for (int c = 0; c < cin; ++c) {
    Mat<S>& plane = dx[c];
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const long row = (static_cast<long>(c) * kh + ky) * kw + kx;
        const S* src = dcol.data() + row * dcol.cols();
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          S* dst = plane.data() + static_cast<long>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

// y = W * im2col(x) + b. col is scratch owned by the caller and must stay
// alive until the matching conv_backward.
template <typename S>
void conv_forward(const ConvParam<S>& p, const PlaneStack<S>& x, int stride,
                  int pad, Mat<S>& col, PlaneStack<S>& y) {
  const int oh = conv_out_extent(x.height(), p.kh, stride, pad);
  const int ow = conv_out_extent(x.width(), p.kw, stride, pad);
  im2col(x, p.kh, p.kw, stride, pad, col);
  Mat<S> out = p.w * col;  // cout x (oh*ow)
  out.colwise() += p.b;
  y.resize(p.cout, oh, ow);
  for (int c = 0; c < p.cout; ++c)
    y[c] = Eigen::Map<const Mat<S>>(out.data() + static_cast<long>(c) * out.cols(), oh, ow);
}

// Accumulates parameter gradients into gw/gb and input gradients into dx.
// dx may be empty (first layer) to skip input-gradient work.
template <typename S>
void conv_backward(const ConvParam<S>& p, const Mat<S>& col,
                   const PlaneStack<S>& dy, int stride, int pad, int in_h,
                   int in_w, ConvParam<S>& grad, PlaneStack<S>* dx,
                   Mat<S>& dcol_scratch) {
  const int oh = dy.height(), ow = dy.width();
  Mat<S> dy_mat(p.cout, static_cast<long>(oh) * ow);
  for (int c = 0; c < p.cout; ++c)
    Eigen::Map<Mat<S>>(dy_mat.data() + static_cast<long>(c) * dy_mat.cols(), oh, ow) = dy[c];
  grad.w.noalias() += dy_mat * col.transpose();
  grad.b.noalias() += dy_mat.rowwise().sum();
  if (dx != nullptr) {
    dcol_scratch.noalias() = p.w.transpose() * dy_mat;
    col2im_add(dcol_scratch, p.cin, in_h, in_w, p.kh, p.kw, stride, pad, *dx);
  }
}

template <typename S>
void relu_inplace(PlaneStack<S>& x) {
  for (auto& pl : x.planes) pl = pl.cwiseMax(S(0));
}

// dx += dy masked by (y > 0), where y is the post-activation value.
template <typename S>
void relu_backward_into(const PlaneStack<S>& y, PlaneStack<S>& dy) {
  for (int c = 0; c < y.channels(); ++c)
    dy[c] = (y[c].array() > S(0)).select(dy[c], Mat<S>::Zero(y[c].rows(), y[c].cols()));
}

// Nearest-neighbour x2 upsample to an exact (2h, 2w) grid.
template <typename S>
void upsample2_nearest(const PlaneStack<S>& x, PlaneStack<S>& y) {
  y.resize(x.channels(), x.height() * 2, x.width() * 2);
  for (int c = 0; c < x.channels(); ++c)
    for (int i = 0; i < y.height(); ++i)
      for (int j = 0; j < y.width(); ++j) y[c](i, j) = x[c](i / 2, j / 2);
}

template <typename S>
void upsample2_nearest_backward_add(const PlaneStack<S>& dy, PlaneStack<S>& dx) {
  for (int c = 0; c < dy.channels(); ++c)
    for (int i = 0; i < dy.height(); ++i)
      for (int j = 0; j < dy.width(); ++j) dx[c](i / 2, j / 2) += dy[c](i, j);
}

// Bilinear resize of one plane by integer factor f with half-pixel centers
// (the src sample for dst pixel i is at (i + 0.5) / f - 0.5).
struct BilinearTap {
  int i0, i1;
  double w0, w1;
};

inline BilinearTap bilinear_tap(int dst, int factor, int src_extent) {
  const double s = (dst + 0.5) / factor - 0.5;
  const int i0 = static_cast<int>(std::floor(s));
  const double frac = s - i0;
  BilinearTap t;
  t.i0 = std::clamp(i0, 0, src_extent - 1);
  t.i1 = std::clamp(i0 + 1, 0, src_extent - 1);
  t.w0 = 1.0 - frac;
  t.w1 = frac;
  return t;
}

template <typename S>
void upsample_bilinear(const Mat<S>& x, int factor, Mat<S>& y) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  y.resize(static_cast<long>(h) * factor, static_cast<long>(w) * factor);
  for (int i = 0; i < h * factor; ++i) {
    const BilinearTap ty = bilinear_tap(i, factor, h);
    for (int j = 0; j < w * factor; ++j) {
      const BilinearTap tx = bilinear_tap(j, factor, w);
      y(i, j) = static_cast<S>(ty.w0 * (tx.w0 * x(ty.i0, tx.i0) + tx.w1 * x(ty.i0, tx.i1)) +
                               ty.w1 * (tx.w0 * x(ty.i1, tx.i0) + tx.w1 * x(ty.i1, tx.i1)));
    }
  }
}

template <typename S>
void upsample_bilinear_backward_add(const Mat<S>& dy, int factor, Mat<S>& dx) {
  const int h = static_cast<int>(dx.rows()), w = static_cast<int>(dx.cols());
  for (int i = 0; i < h * factor; ++i) {
    const BilinearTap ty = bilinear_tap(i, factor, h);
    for (int j = 0; j < w * factor; ++j) {
      const BilinearTap tx = bilinear_tap(j, factor, w);
      const S g = dy(i, j);
      dx(ty.i0, tx.i0) += static_cast<S>(ty.w0 * tx.w0) * g;
      dx(ty.i0, tx.i1) += static_cast<S>(ty.w0 * tx.w1) * g;
      dx(ty.i1, tx.i0) += static_cast<S>(ty.w1 * tx.w0) * g;
      dx(ty.i1, tx.i1) += static_cast<S>(ty.w1 * tx.w1) * g;
    }
  }
}

template <typename S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

// log(1 + exp(x)) without overflow.
template <typename S>
S softplus(S x) {
  return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace cadet::nn

#endif  // CADET_NN_HPP_
