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
#ifndef CADET_DETECTOR_IMPL_HPP_
#define CADET_DETECTOR_IMPL_HPP_

namespace cadet::det {

namespace internal {

inline int pad_to(int extent, int stride) {
  return (extent + stride - 1) / stride * stride;
}

}  // namespace internal

template <typename S>
void forward(const DetectorConfig& cfg, const DetectorParams<S>& params,
             const Image& image, Workspace<S>& ws) {
  require(image.channels() == cfg.in_channels, "forward: image has ",
          image.channels(), " channels, config expects ", cfg.in_channels);
  const int h = image.height(), w = image.width();
  const int hp = internal::pad_to(h, cfg.max_stride());
  const int wp = internal::pad_to(w, cfg.max_stride());

  ws.x0.resize(cfg.in_channels, hp, wp);
  for (int c = 0; c < cfg.in_channels; ++c) {
    ws.x0[c].setZero();
    ws.x0[c].block(0, 0, h, w) =
        image[c].template cast<S>().array() - S(0.5);
  }

  // Backbone: four stride-2 stages.
  const PlaneStack<S>* in = &ws.x0;
  for (int i = 0; i < 4; ++i) {
    nn::conv_forward(params.backbone[static_cast<std::size_t>(i)], *in, 2, 1,
                     ws.bb_col[static_cast<std::size_t>(i)],
                     ws.bb[static_cast<std::size_t>(i)]);
    nn::relu_inplace(ws.bb[static_cast<std::size_t>(i)]);
    in = &ws.bb[static_cast<std::size_t>(i)];
  }

  const int nl = cfg.num_levels();
  ws.lat.resize(static_cast<std::size_t>(nl));
  ws.lat_col.resize(static_cast<std::size_t>(nl));
  ws.fpn.resize(static_cast<std::size_t>(nl));
  ws.fpn_col.resize(static_cast<std::size_t>(nl));
  for (int li = 0; li < nl; ++li) {
    const int tap = cfg.pyramid_levels[static_cast<std::size_t>(li)] - 1;
    nn::conv_forward(params.lateral[static_cast<std::size_t>(li)],
                     ws.bb[static_cast<std::size_t>(tap)], 1, 0,
                     ws.lat_col[static_cast<std::size_t>(li)],
                     ws.lat[static_cast<std::size_t>(li)]);
  }
  if (nl == 2) {
    nn::upsample2_nearest(ws.lat[1], ws.up);
    ws.p3_pre.resize(cfg.head_width, ws.lat[0].height(), ws.lat[0].width());
    for (int c = 0; c < cfg.head_width; ++c) ws.p3_pre[c] = ws.lat[0][c] + ws.up[c];
    nn::conv_forward(params.fpn_out[0], ws.p3_pre, 1, 1, ws.fpn_col[0], ws.fpn[0]);
    nn::conv_forward(params.fpn_out[1], ws.lat[1], 1, 1, ws.fpn_col[1], ws.fpn[1]);
  } else {
    nn::conv_forward(params.fpn_out[0], ws.lat[0], 1, 1, ws.fpn_col[0], ws.fpn[0]);
  }

  ws.preds.levels.resize(static_cast<std::size_t>(nl));
  ws.preds.padded_h = hp;
  ws.preds.padded_w = wp;
  ws.preds.image_h = h;
  ws.preds.image_w = w;
  ws.preds.mask_stride = cfg.finest_stride();
  ws.head.resize(static_cast<std::size_t>(nl));
  for (int li = 0; li < nl; ++li) {
    auto& ha = ws.head[static_cast<std::size_t>(li)];
    auto& lp = ws.preds.levels[static_cast<std::size_t>(li)];
    lp.level = cfg.pyramid_levels[static_cast<std::size_t>(li)];
    lp.stride = cfg.stride(li);

    ha.t.resize(static_cast<std::size_t>(cfg.head_depth));
    ha.t_col.resize(static_cast<std::size_t>(cfg.head_depth));
    const PlaneStack<S>* tin = &ws.fpn[static_cast<std::size_t>(li)];
    for (int d = 0; d < cfg.head_depth; ++d) {
      nn::conv_forward(params.tower[static_cast<std::size_t>(d)], *tin, 1, 1,
                       ha.t_col[static_cast<std::size_t>(d)],
                       ha.t[static_cast<std::size_t>(d)]);
      nn::relu_inplace(ha.t[static_cast<std::size_t>(d)]);
      tin = &ha.t[static_cast<std::size_t>(d)];
    }
    nn::conv_forward(params.classifier, *tin, 1, 1, ha.cls_col, lp.cls);
    nn::conv_forward(params.box, *tin, 1, 1, ha.box_col, ha.box_raw);
    nn::conv_forward(params.ctr, *tin, 1, 1, ha.ctr_col, lp.ctr);
    nn::conv_forward(params.kernel, *tin, 1, 1, ha.ker_col, lp.ker);

    lp.box.resize(4, ha.box_raw.height(), ha.box_raw.width());
    const S cap = static_cast<S>(kBoxRawCap);
    for (int c = 0; c < 4; ++c)
      lp.box[c] = (ha.box_raw[c].array().min(cap).exp() * static_cast<S>(lp.stride)).matrix();
  }

  nn::conv_forward(params.mask1, ws.fpn[0], 1, 1, ws.m1_col, ws.m1);
  nn::relu_inplace(ws.m1);
  nn::conv_forward(params.mask2, ws.m1, 1, 1, ws.m2_col, ws.preds.mask_feats);

  // Mirror shapes into the gradient buffers so losses can write into them.
  ws.dpreds.levels.resize(static_cast<std::size_t>(nl));
  for (int li = 0; li < nl; ++li) {
    auto& g = ws.dpreds.levels[static_cast<std::size_t>(li)];
    const auto& lp = ws.preds.levels[static_cast<std::size_t>(li)];
    g.level = lp.level;
    g.stride = lp.stride;
    g.cls.resize(lp.cls.channels(), lp.cls.height(), lp.cls.width());
    g.box.resize(4, lp.box.height(), lp.box.width());
    g.ctr.resize(1, lp.ctr.height(), lp.ctr.width());
    g.ker.resize(lp.ker.channels(), lp.ker.height(), lp.ker.width());
  }
  ws.dpreds.mask_feats.resize(ws.preds.mask_feats.channels(),
                              ws.preds.mask_feats.height(),
                              ws.preds.mask_feats.width());
  ws.dpreds.padded_h = hp;
  ws.dpreds.padded_w = wp;
  ws.dpreds.image_h = h;
  ws.dpreds.image_w = w;
  ws.zero_dpreds();
}

template <typename S>
void backward(const DetectorConfig& cfg, const DetectorParams<S>& params,
              Workspace<S>& ws, DetectorParams<S>& grads) {
  const int nl = cfg.num_levels();

  std::vector<PlaneStack<S>> dfpn(static_cast<std::size_t>(nl));
  for (int li = 0; li < nl; ++li) {
    dfpn[static_cast<std::size_t>(li)].resize(cfg.head_width,
                                              ws.fpn[static_cast<std::size_t>(li)].height(),
                                              ws.fpn[static_cast<std::size_t>(li)].width());
  }

  for (int li = 0; li < nl; ++li) {
    auto& ha = ws.head[static_cast<std::size_t>(li)];
    const auto& lp = ws.preds.levels[static_cast<std::size_t>(li)];
    auto& gp = ws.dpreds.levels[static_cast<std::size_t>(li)];

    // Branch convs feed the shared tower output.
    const auto& t_last = ha.t[static_cast<std::size_t>(cfg.head_depth - 1)];
    PlaneStack<S> dt(cfg.head_width, t_last.height(), t_last.width());

    nn::conv_backward(params.classifier, ha.cls_col, gp.cls, 1, 1,
                      t_last.height(), t_last.width(), grads.classifier, &dt, ws.dcol);

    // Chain rule through offsets = exp(raw) * stride (capped).
    PlaneStack<S> dbox_raw(4, lp.box.height(), lp.box.width());
    const S cap = static_cast<S>(kBoxRawCap);
    for (int c = 0; c < 4; ++c)
      dbox_raw[c] = (ha.box_raw[c].array() < cap)
                        .select(gp.box[c].cwiseProduct(lp.box[c]),
                                Mat<S>::Zero(lp.box[c].rows(), lp.box[c].cols()));
    nn::conv_backward(params.box, ha.box_col, dbox_raw, 1, 1, t_last.height(),
                      t_last.width(), grads.box, &dt, ws.dcol);

    nn::conv_backward(params.ctr, ha.ctr_col, gp.ctr, 1, 1, t_last.height(),
                      t_last.width(), grads.ctr, &dt, ws.dcol);
    nn::conv_backward(params.kernel, ha.ker_col, gp.ker, 1, 1, t_last.height(),
                      t_last.width(), grads.kernel, &dt, ws.dcol);

    for (int d = cfg.head_depth - 1; d >= 0; --d) {
      nn::relu_backward_into(ha.t[static_cast<std::size_t>(d)], dt);
      if (d > 0) {
        PlaneStack<S> dprev(cfg.head_width, ha.t[static_cast<std::size_t>(d - 1)].height(),
                            ha.t[static_cast<std::size_t>(d - 1)].width());
        nn::conv_backward(params.tower[static_cast<std::size_t>(d)],
                          ha.t_col[static_cast<std::size_t>(d)], dt, 1, 1,
                          dprev.height(), dprev.width(),
                          grads.tower[static_cast<std::size_t>(d)], &dprev, ws.dcol);
        dt = std::move(dprev);
      } else {
        nn::conv_backward(params.tower[0], ha.t_col[0], dt, 1, 1,
                          dfpn[static_cast<std::size_t>(li)].height(),
                          dfpn[static_cast<std::size_t>(li)].width(),
                          grads.tower[0], &dfpn[static_cast<std::size_t>(li)], ws.dcol);
      }
    }
  }

  // Mask branch feeds the finest FPN level.
  {
    PlaneStack<S> dm1(cfg.mask_hidden, ws.m1.height(), ws.m1.width());
    nn::conv_backward(params.mask2, ws.m2_col, ws.dpreds.mask_feats, 1, 1,
                      ws.m1.height(), ws.m1.width(), grads.mask2, &dm1, ws.dcol);
    nn::relu_backward_into(ws.m1, dm1);
    nn::conv_backward(params.mask1, ws.m1_col, dm1, 1, 1, dfpn[0].height(),
                      dfpn[0].width(), grads.mask1, &dfpn[0], ws.dcol);
  }

  // Neck.
  std::array<PlaneStack<S>, 4> dbb;
  for (int i = 0; i < 4; ++i)
    dbb[static_cast<std::size_t>(i)].resize(cfg.backbone_widths[static_cast<std::size_t>(i)],
                                            ws.bb[static_cast<std::size_t>(i)].height(),
                                            ws.bb[static_cast<std::size_t>(i)].width());

  std::vector<PlaneStack<S>> dlat(static_cast<std::size_t>(nl));
  for (int li = 0; li < nl; ++li)
    dlat[static_cast<std::size_t>(li)].resize(cfg.head_width,
                                              ws.lat[static_cast<std::size_t>(li)].height(),
                                              ws.lat[static_cast<std::size_t>(li)].width());
  if (nl == 2) {
    nn::conv_backward(params.fpn_out[1], ws.fpn_col[1], dfpn[1], 1, 1,
                      dlat[1].height(), dlat[1].width(), grads.fpn_out[1], &dlat[1], ws.dcol);
    PlaneStack<S> dp3_pre(cfg.head_width, ws.p3_pre.height(), ws.p3_pre.width());
    nn::conv_backward(params.fpn_out[0], ws.fpn_col[0], dfpn[0], 1, 1,
                      dp3_pre.height(), dp3_pre.width(), grads.fpn_out[0], &dp3_pre, ws.dcol);
    for (int c = 0; c < cfg.head_width; ++c) dlat[0][c] += dp3_pre[c];
    nn::upsample2_nearest_backward_add(dp3_pre, dlat[1]);
  } else {
    nn::conv_backward(params.fpn_out[0], ws.fpn_col[0], dfpn[0], 1, 1,
                      dlat[0].height(), dlat[0].width(), grads.fpn_out[0], &dlat[0], ws.dcol);
  }
  for (int li = 0; li < nl; ++li) {
    const int tap = cfg.pyramid_levels[static_cast<std::size_t>(li)] - 1;
    nn::conv_backward(params.lateral[static_cast<std::size_t>(li)],
                      ws.lat_col[static_cast<std::size_t>(li)],
                      dlat[static_cast<std::size_t>(li)], 1, 0,
                      dbb[static_cast<std::size_t>(tap)].height(),
                      dbb[static_cast<std::size_t>(tap)].width(),
                      grads.lateral[static_cast<std::size_t>(li)],
                      &dbb[static_cast<std::size_t>(tap)], ws.dcol);
  }

  // Backbone, coarsest stage first so skip contributions are complete.
  for (int i = 3; i >= 0; --i) {
    nn::relu_backward_into(ws.bb[static_cast<std::size_t>(i)], dbb[static_cast<std::size_t>(i)]);
    PlaneStack<S>* dx = i > 0 ? &dbb[static_cast<std::size_t>(i - 1)] : nullptr;
    const auto& src = i > 0 ? ws.bb[static_cast<std::size_t>(i - 1)] : ws.x0;
    nn::conv_backward(params.backbone[static_cast<std::size_t>(i)],
                      ws.bb_col[static_cast<std::size_t>(i)],
                      dbb[static_cast<std::size_t>(i)], 2, 1, src.height(),
                      src.width(), grads.backbone[static_cast<std::size_t>(i)], dx, ws.dcol);
  }
}

}  // namespace cadet::det

#endif  // CADET_DETECTOR_IMPL_HPP_
