// Copyright 2026 The OccFlow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OCCFLOW_FUSION_HPP_
#define OCCFLOW_FUSION_HPP_

#include <span>
#include <vector>

#include "occflow/backbone.hpp"
#include "occflow/model_config.hpp"
#include "occflow/nn.hpp"

namespace occflow {

// Fixed 2D sinusoidal encoding for query tokens; off by default.
template <typename T>
Tensor<T> sinusoidal_pos_encoding(int64_t h, int64_t w, int64_t channels) {
  Tensor<T> pe({h * w, channels});
  const int64_t half = channels / 2;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      T* row = pe.data() + (y * w + x) * channels;
      for (int64_t c = 0; c < half; ++c) {
        const double freq = std::pow(10000.0, -2.0 * (c / 2) / static_cast<double>(half));
        row[c] = static_cast<T>(c % 2 ? std::cos(y * freq) : std::sin(y * freq));
      }
      for (int64_t c = half; c < channels; ++c) {
        const int64_t cc = c - half;
        const double freq =
            std::pow(10000.0, -2.0 * (cc / 2) / static_cast<double>(channels - half));
        row[c] = static_cast<T>(cc % 2 ? std::cos(x * freq) : std::sin(x * freq));
      }
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------
// Multi-head cross-attention: queries are flattened image features, keys and
// values are the element tokens. Items with zero tokens produce zero output.

template <typename T>
struct CrossAttention {
  int channels = 0, heads = 0;
  bool pos_encoding = false;
  nn::Linear<T> wq, wk, wv, wo;

  void build(const ModelConfig& cfg, Rng& rng) {
    channels = cfg.pyramid_channels;
    heads = cfg.attn_heads;
    pos_encoding = cfg.query_pos_encoding;
    wq.build(channels, channels, rng);
    wk.build(channels, channels, rng);
    wv.build(channels, channels, rng);
    wo.build(channels, channels, rng);
  }

  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
    wq.visit(prefix + ".wq", fn);
    wk.visit(prefix + ".wk", fn);
    wv.visit(prefix + ".wv", fn);
    wo.visit(prefix + ".wo", fn);
  }

  struct ItemStash {
    Tensor<T> xtok;   // [Tq, C] query input (PE already added)
    Tensor<T> q, k, v;
    std::vector<Tensor<T>> probs;  // per head [Tq, N]
    Tensor<T> concat;  // [Tq, C] input to wo
    int64_t n = 0;
  };
  struct Acts {
    std::vector<ItemStash> items;
    int64_t h = 0, w = 0;
  };

  // x: [B, C, h, w]; tokens[b]: [N_b, C]
  Tensor<T> forward(const Tensor<T>& x,
                    const std::vector<const Tensor<T>*>& tokens, Acts* acts) const {
    if (x.dim(1) != channels) throw Error("cross_attend: channel mismatch");
    const int64_t B = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t Tq = h * w;
    const int64_t dh = channels / heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor<T> out({B, channels, h, w});
    if (acts) {
      acts->items.resize(static_cast<size_t>(B));
      acts->h = h;
      acts->w = w;
    }
    Tensor<T> pe;
    if (pos_encoding) pe = sinusoidal_pos_encoding<T>(h, w, channels);

    for (int64_t b = 0; b < B; ++b) {
      ItemStash local;
      ItemStash& st = acts ? acts->items[static_cast<size_t>(b)] : local;
      if (tokens[static_cast<size_t>(b)]->dim(1) != channels)
        throw Error("cross_attend: token channel mismatch");
      st.n = tokens[static_cast<size_t>(b)]->dim(0);
      if (st.n == 0) continue;  // zero output for this item

      st.xtok = Tensor<T>({Tq, static_cast<int64_t>(channels)});
      const T* xb = x.data() + b * channels * Tq;
      for (int64_t c = 0; c < channels; ++c)
        for (int64_t t = 0; t < Tq; ++t) st.xtok(t, c) = xb[c * Tq + t];
      if (pos_encoding) st.xtok.add_(pe);

      const Tensor<T>& tok = *tokens[static_cast<size_t>(b)];
      st.q = wq.forward(st.xtok);
      st.k = wk.forward(tok);
      st.v = wv.forward(tok);
      st.concat = Tensor<T>({Tq, static_cast<int64_t>(channels)});
      st.probs.resize(static_cast<size_t>(heads));
      for (int hd = 0; hd < heads; ++hd) {
        Tensor<T>& P = st.probs[static_cast<size_t>(hd)];
        P = Tensor<T>({Tq, st.n});
        nn::CMapRM<T> Q(st.q.data(), Tq, channels);
        nn::CMapRM<T> K(st.k.data(), st.n, channels);
        nn::CMapRM<T> V(st.v.data(), st.n, channels);
        nn::MapRM<T> Pm(P.data(), Tq, st.n);
        Pm.noalias() = Q.middleCols(hd * dh, dh) * K.middleCols(hd * dh, dh).transpose() * scale;
        nn::softmax_rows_<T>(Pm);
        nn::MapRM<T> Om(st.concat.data(), Tq, channels);
        Om.middleCols(hd * dh, dh).noalias() = Pm * V.middleCols(hd * dh, dh);
      }
      Tensor<T> o = wo.forward(st.concat);
      T* ob = out.data() + b * channels * Tq;
      for (int64_t c = 0; c < channels; ++c)
        for (int64_t t = 0; t < Tq; ++t) ob[c * Tq + t] = o(t, c);
    }
    return out;
  }

  // grad_x accumulates the query-path gradient; grad_tokens[b] the key/value
  // path. Both must be pre-sized.
  void backward(const std::vector<const Tensor<T>*>& tokens, Acts& acts,
                const Tensor<T>& grad_out, Tensor<T>* grad_x,
                const std::vector<Tensor<T>*>& grad_tokens) {
    const int64_t B = grad_out.dim(0);
    const int64_t Tq = acts.h * acts.w;
    const int64_t dh = channels / heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int64_t b = 0; b < B; ++b) {
      ItemStash& st = acts.items[static_cast<size_t>(b)];
      if (st.n == 0) continue;
      Tensor<T> go({Tq, static_cast<int64_t>(channels)});
      const T* gb = grad_out.data() + b * channels * Tq;
      for (int64_t c = 0; c < channels; ++c)
        for (int64_t t = 0; t < Tq; ++t) go(t, c) = gb[c * Tq + t];

      Tensor<T> gconcat({Tq, static_cast<int64_t>(channels)});
      wo.backward(st.concat, go, &gconcat);

      const Tensor<T>& tok = *tokens[static_cast<size_t>(b)];
      Tensor<T> gq({Tq, static_cast<int64_t>(channels)});
      Tensor<T> gk({st.n, static_cast<int64_t>(channels)});
      Tensor<T> gv({st.n, static_cast<int64_t>(channels)});
      for (int hd = 0; hd < heads; ++hd) {
        const Tensor<T>& P = st.probs[static_cast<size_t>(hd)];
        nn::CMapRM<T> Pm(P.data(), Tq, st.n);
        nn::CMapRM<T> GC(gconcat.data(), Tq, channels);
        nn::CMapRM<T> V(st.v.data(), st.n, channels);
        nn::MapRM<T> GV(gv.data(), st.n, channels);
        GV.middleCols(hd * dh, dh).noalias() +=
            Pm.transpose() * GC.middleCols(hd * dh, dh);
        Tensor<T> gp({Tq, st.n});
        nn::MapRM<T>(gp.data(), Tq, st.n).noalias() =
            GC.middleCols(hd * dh, dh) * V.middleCols(hd * dh, dh).transpose();
        Tensor<T> glog({Tq, st.n});
        nn::softmax_backward_rows<T>(Pm, nn::CMapRM<T>(gp.data(), Tq, st.n),
                                     nn::MapRM<T>(glog.data(), Tq, st.n));
        nn::CMapRM<T> Q(st.q.data(), Tq, channels);
        nn::CMapRM<T> K(st.k.data(), st.n, channels);
        nn::MapRM<T> GQ(gq.data(), Tq, channels);
        nn::MapRM<T> GK(gk.data(), st.n, channels);
        GQ.middleCols(hd * dh, dh).noalias() +=
            nn::CMapRM<T>(glog.data(), Tq, st.n) * K.middleCols(hd * dh, dh) * scale;
        GK.middleCols(hd * dh, dh).noalias() +=
            nn::CMapRM<T>(glog.data(), Tq, st.n).transpose() *
            Q.middleCols(hd * dh, dh) * scale;
      }

      Tensor<T> gxtok({Tq, static_cast<int64_t>(channels)});
      wq.backward(st.xtok, gq, &gxtok);
      wk.backward(tok, gk, grad_tokens[static_cast<size_t>(b)]);
      wv.backward(tok, gv, grad_tokens[static_cast<size_t>(b)]);
      if (grad_x) {
        T* gx = grad_x->data() + b * channels * Tq;
        for (int64_t c = 0; c < channels; ++c)
          for (int64_t t = 0; t < Tq; ++t) gx[c * Tq + t] += gxtok(t, c);
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Fusion block: P = relu(conv2(relu(conv1(concat(F, X))))) with
// F = cross_attend(X, V) (zeros in the vgg_only variant).

template <typename T>
struct FuseBlock {
  CrossAttention<T> attn;
  nn::Conv2d<T> conv1, conv2;

  void build(const ModelConfig& cfg, Rng& rng) {
    attn.build(cfg, rng);
    conv1.build(2 * cfg.pyramid_channels, cfg.pyramid_channels, 3, rng);
    conv2.build(cfg.pyramid_channels, cfg.pyramid_channels, 3, rng);
  }

  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
    attn.visit(prefix + ".attn", fn);
    conv1.visit(prefix + ".conv1", fn);
    conv2.visit(prefix + ".conv2", fn);
  }

  struct Acts {
    typename CrossAttention<T>::Acts attn;
    Tensor<T> fused;  // F (attention output or zeros)
    Tensor<T> y1;     // post-relu conv1 output
    Tensor<T> out;    // post-relu conv2 output
  };

  Tensor<T> forward(const Tensor<T>& x, const std::vector<const Tensor<T>*>& tokens,
                    ModelVariant variant, Acts* acts) const {
    Acts local;
    Acts& a = acts ? *acts : local;
    if (variant == ModelVariant::fused)
      a.fused = attn.forward(x, tokens, acts ? &a.attn : nullptr);
    else
      a.fused = Tensor<T>(x.shape());
    Tensor<T> y1 = conv1.forward({&a.fused, &x});
    nn::relu_(y1);
    Tensor<T> out = conv2.forward(y1);
    nn::relu_(out);
    if (acts) {
      a.y1 = std::move(y1);
      a.out = out;
    }
    return out;
  }

  void backward(const Tensor<T>& x, const std::vector<const Tensor<T>*>& tokens,
                ModelVariant variant, Acts& acts, const Tensor<T>& grad_out,
                Tensor<T>* grad_x, const std::vector<Tensor<T>*>& grad_tokens) {
    Tensor<T> g = grad_out;
    nn::relu_backward_(acts.out, g);
    Tensor<T> gy1(acts.y1.shape());
    conv2.backward(acts.y1, g, &gy1);
    nn::relu_backward_(acts.y1, gy1);
    if (variant == ModelVariant::fused) {
      Tensor<T> gf(acts.fused.shape());
      conv1.backward({&acts.fused, &x}, gy1, {&gf, grad_x});
      attn.backward(tokens, acts.attn, gf, grad_x, grad_tokens);
    } else {
      conv1.backward({&acts.fused, &x}, gy1, {nullptr, grad_x});
    }
  }
};

// ---------------------------------------------------------------------------
// FPN-style 2x upsampling block: U = relu(conv2(relu(conv1(concat(up2x(P), C))))).

template <typename T>
struct FpnBlock {
  nn::Conv2d<T> conv1, conv2;
  nn::UpsampleMode mode = nn::UpsampleMode::nearest;

  void build(const ModelConfig& cfg, Rng& rng) {
    mode = cfg.upsample;
    conv1.build(2 * cfg.pyramid_channels, cfg.pyramid_channels, 3, rng);
    conv2.build(cfg.pyramid_channels, cfg.pyramid_channels, 3, rng);
  }

  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
    conv1.visit(prefix + ".conv1", fn);
    conv2.visit(prefix + ".conv2", fn);
  }

  struct Acts {
    Tensor<T> up;   // upsampled higher-level feature (conv1 input)
    Tensor<T> y1;   // post-relu conv1 output
    Tensor<T> out;  // post-relu conv2 output
  };

  Tensor<T> forward(const Tensor<T>& p_higher, const Tensor<T>& lateral,
                    Acts* acts) const {
    if (2 * p_higher.dim(2) != lateral.dim(2) || 2 * p_higher.dim(3) != lateral.dim(3))
      throw Error("fpn_up: lateral must be exactly 2x the spatial size");
    Acts local;
    Acts& a = acts ? *acts : local;
    a.up = nn::upsample2x(p_higher, mode);
    Tensor<T> y1 = conv1.forward({&a.up, &lateral});
    nn::relu_(y1);
    Tensor<T> out = conv2.forward(y1);
    nn::relu_(out);
    if (acts) {
      a.y1 = std::move(y1);
      a.out = out;
    }
    return out;
  }

  void backward(const Tensor<T>& lateral, Acts& acts, const Tensor<T>& grad_out,
                Tensor<T>* grad_p, Tensor<T>* grad_lateral) {
    Tensor<T> g = grad_out;
    nn::relu_backward_(acts.out, g);
    Tensor<T> gy1(acts.y1.shape());
    conv2.backward(acts.y1, g, &gy1);
    nn::relu_backward_(acts.y1, gy1);
    Tensor<T> gup(acts.up.shape());
    conv1.backward({&acts.up, &lateral}, gy1, {&gup, grad_lateral});
    if (grad_p) nn::upsample2x_backward(gup, mode, *grad_p);
  }
};

// ---------------------------------------------------------------------------
// Prediction container and decoder-output split. Decoder channels group as
// waypoint-major blocks of 4: (observed logit, occluded logit, flow dx, dy).

template <typename T>
struct Prediction {
  Tensor<T> logits_observed;  // [B, K, H, W]
  Tensor<T> logits_occluded;  // [B, K, H, W]
  Tensor<T> flow;             // [B, K, H, W, 2]

  Tensor<T> prob_observed() const { return sigmoid(logits_observed); }
  Tensor<T> prob_occluded() const { return sigmoid(logits_occluded); }

  static Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i)
      y[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
    return y;
  }
};

template <typename T>
Prediction<T> split_decoder_output(const Tensor<T>& dec, int waypoints) {
  const int64_t B = dec.dim(0), H = dec.dim(2), W = dec.dim(3), K = waypoints;
  if (dec.dim(1) != 4 * K) throw Error("decoder output must have 4K channels");
  Prediction<T> p;
  p.logits_observed = Tensor<T>({B, K, H, W});
  p.logits_occluded = Tensor<T>({B, K, H, W});
  p.flow = Tensor<T>({B, K, H, W, 2});
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t k = 0; k < K; ++k) {
      const T* obs = dec.data() + ((b * 4 * K + 4 * k + 0) * H * W);
      const T* occ = dec.data() + ((b * 4 * K + 4 * k + 1) * H * W);
      const T* fdx = dec.data() + ((b * 4 * K + 4 * k + 2) * H * W);
      const T* fdy = dec.data() + ((b * 4 * K + 4 * k + 3) * H * W);
      T* pobs = p.logits_observed.data() + (b * K + k) * H * W;
      T* pocc = p.logits_occluded.data() + (b * K + k) * H * W;
      T* pf = p.flow.data() + (b * K + k) * H * W * 2;
      for (int64_t i = 0; i < H * W; ++i) {
        pobs[i] = obs[i];
        pocc[i] = occ[i];
        pf[2 * i] = fdx[i];
        pf[2 * i + 1] = fdy[i];
      }
    }
  }
  return p;
}

// Inverse of split_decoder_output for gradients.
template <typename T>
Tensor<T> merge_prediction_grads(const Tensor<T>& g_obs, const Tensor<T>& g_occ,
                                 const Tensor<T>& g_flow) {
  const int64_t B = g_obs.dim(0), K = g_obs.dim(1), H = g_obs.dim(2), W = g_obs.dim(3);
  Tensor<T> dec({B, 4 * K, H, W});
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t k = 0; k < K; ++k) {
      T* obs = dec.data() + ((b * 4 * K + 4 * k + 0) * H * W);
      T* occ = dec.data() + ((b * 4 * K + 4 * k + 1) * H * W);
      T* fdx = dec.data() + ((b * 4 * K + 4 * k + 2) * H * W);
      T* fdy = dec.data() + ((b * 4 * K + 4 * k + 3) * H * W);
      const T* gobs = g_obs.data() + (b * K + k) * H * W;
      const T* gocc = g_occ.data() + (b * K + k) * H * W;
      const T* gf = g_flow.data() + (b * K + k) * H * W * 2;
      for (int64_t i = 0; i < H * W; ++i) {
        obs[i] = gobs[i];
        occ[i] = gocc[i];
        fdx[i] = gf[2 * i];
        fdy[i] = gf[2 * i + 1];
      }
    }
  }
  return dec;
}

// ---------------------------------------------------------------------------
// Full model: dual encoders, two fusion levels, FPN chain, head, decoder.

template <typename T>
struct OccFlowModel {
  ModelConfig cfg;
  VggEncoder<T> vgg;
  VectorNetEncoder<T> vecnet;
  FuseBlock<T> fuse5, fuse4;
  FpnBlock<T> fpn4, fpn3, fpn2, fpn1;
  nn::Conv2d<T> head1, head2, decoder;

  void build(const ModelConfig& config, uint64_t seed) {
    cfg = config;
    cfg.validate();
    Rng rng(seed);
    vgg.build(cfg, rng);
    vecnet.build(cfg, rng);
    fuse5.build(cfg, rng);
    fuse4.build(cfg, rng);
    fpn4.build(cfg, rng);
    fpn3.build(cfg, rng);
    fpn2.build(cfg, rng);
    fpn1.build(cfg, rng);
    head1.build(cfg.pyramid_channels, cfg.head_channels, 3, rng);
    head2.build(cfg.head_channels, cfg.head_channels, 3, rng);
    decoder.build(cfg.head_channels, cfg.out_channels(), 1, rng);
  }

  void visit_params(const nn::ParamVisitor<T>& fn) {
    vgg.visit("vgg", fn);
    vecnet.visit("vecnet", fn);
    fuse5.visit("fuse5", fn);
    fuse4.visit("fuse4", fn);
    fpn4.visit("fpn4", fn);
    fpn3.visit("fpn3", fn);
    fpn2.visit("fpn2", fn);
    fpn1.visit("fpn1", fn);
    head1.visit("head1", fn);
    head2.visit("head2", fn);
    decoder.visit("decoder", fn);
  }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> out;
    visit_params([&](const std::string&, nn::Param<T>& p) { out.push_back(&p); });
    return out;
  }

  struct Acts {
    typename VggEncoder<T>::Acts vgg;
    typename VectorNetEncoder<T>::Acts vec;
    std::vector<const Tensor<T>*> tokens;  // views into vec.items[i].vout
    typename FuseBlock<T>::Acts fuse5, fuse4;
    typename FpnBlock<T>::Acts fpn4, fpn3, fpn2, fpn1;
    Tensor<T> p5, u4, p4, u3, u2, p1;
    Tensor<T> head1_out, head2_out, dec_out;
    bool kept = false;
  };

  // Forward is const and touches no mutable state: concurrent evaluation on
  // frozen parameters is safe. keep_acts retains every intermediate needed by
  // backward(); without it only dec_out survives.
  Acts forward(const Tensor<T>& raster, std::span<const VectorSet> vsets,
               bool keep_acts, nn::ShapeLog* log = nullptr) const {
    if (raster.dim(0) != static_cast<int64_t>(vsets.size()))
      throw Error("forward: raster batch and vector batch sizes differ");
    if (raster.dim(2) != cfg.grid || raster.dim(3) != cfg.grid)
      throw Error("forward: raster spatial size must be " + std::to_string(cfg.grid));
    Acts acts;
    acts.kept = keep_acts;

    acts.vgg = vgg.forward(raster, keep_acts);
    if (log)
      for (int s = 0; s < 5; ++s)
        (*log)["C" + std::to_string(s + 1)] = acts.vgg.C[static_cast<size_t>(s)].shape();

    if (cfg.variant == ModelVariant::fused) {
      acts.vec = vecnet.forward(vsets, keep_acts);
      for (const auto& it : acts.vec.items) acts.tokens.push_back(&it.vout);
      if (log) {
        int64_t n_max = 0;
        for (const auto& it : acts.vec.items)
          n_max = std::max<int64_t>(n_max, it.n_elem);
        (*log)["V"] = {raster.dim(0), cfg.pyramid_channels, n_max};
      }
    } else {
      // Ablation path: the vector encoder is not evaluated; attention output
      // is zero and VectorNet parameters receive no gradient.
      static const Tensor<T> kNoTokens({0, 1});
      acts.vec.items.clear();
      for (size_t i = 0; i < vsets.size(); ++i) acts.tokens.push_back(&kNoTokens);
    }

    acts.p5 = fuse5.forward(acts.vgg.C[4], acts.tokens, cfg.variant,
                            keep_acts ? &acts.fuse5 : nullptr);
    if (log) {
      (*log)["F5.queries"] = {raster.dim(0), acts.vgg.C[4].dim(2) * acts.vgg.C[4].dim(3),
                              cfg.pyramid_channels};
      (*log)["F5"] = acts.vgg.C[4].shape();
      (*log)["P5"] = acts.p5.shape();
    }
    acts.u4 = fpn4.forward(acts.p5, acts.vgg.C[3], keep_acts ? &acts.fpn4 : nullptr);
    if (log) (*log)["U4"] = acts.u4.shape();
    acts.p4 = fuse4.forward(acts.u4, acts.tokens, cfg.variant,
                            keep_acts ? &acts.fuse4 : nullptr);
    if (log) {
      (*log)["F4"] = acts.u4.shape();
      (*log)["P4"] = acts.p4.shape();
    }
    acts.u3 = fpn3.forward(acts.p4, acts.vgg.C[2], keep_acts ? &acts.fpn3 : nullptr);
    acts.u2 = fpn2.forward(acts.u3, acts.vgg.C[1], keep_acts ? &acts.fpn2 : nullptr);
    acts.p1 = fpn1.forward(acts.u2, acts.vgg.C[0], keep_acts ? &acts.fpn1 : nullptr);
    if (log) {
      (*log)["U3"] = acts.u3.shape();
      (*log)["U2"] = acts.u2.shape();
      (*log)["P1"] = acts.p1.shape();
    }

    Tensor<T> h1 = head1.forward(acts.p1);
    nn::relu_(h1);
    acts.head1_out = std::move(h1);
    // No activation after the second head conv or the decoder: logits and
    // flow must stay unbounded.
    acts.head2_out = head2.forward(acts.head1_out);
    acts.dec_out = decoder.forward(acts.head2_out);
    if (log) {
      (*log)["head"] = acts.head2_out.shape();
      (*log)["decoder"] = acts.dec_out.shape();
    }

    if (!keep_acts) {
      // Drop everything but the lateral-free essentials.
      acts.vgg.conv_out = {};
      acts.vgg.pooled = {};
      acts.vgg.pool_idx = {};
      acts.p5 = Tensor<T>();
      acts.u4 = Tensor<T>();
      acts.p4 = Tensor<T>();
      acts.u3 = Tensor<T>();
      acts.u2 = Tensor<T>();
      acts.p1 = Tensor<T>();
      acts.head1_out = Tensor<T>();
      acts.head2_out = Tensor<T>();
    }
    return acts;
  }

  Prediction<T> predict(const Tensor<T>& raster, std::span<const VectorSet> vsets,
                        nn::ShapeLog* log = nullptr) const {
    Acts acts = forward(raster, vsets, /*keep_acts=*/false, log);
    return split_decoder_output(acts.dec_out, cfg.waypoints);
  }

  void backward(const Tensor<T>& raster, Acts& acts, const Tensor<T>& grad_dec) {
    if (!acts.kept) throw Error("backward requires forward(keep_acts=true)");
    const int64_t B = raster.dim(0);

    Tensor<T> g_head2(acts.head2_out.shape());
    decoder.backward(acts.head2_out, grad_dec, &g_head2);
    Tensor<T> g_head1(acts.head1_out.shape());
    head2.backward(acts.head1_out, g_head2, &g_head1);
    nn::relu_backward_(acts.head1_out, g_head1);
    Tensor<T> g_p1(acts.p1.shape());
    head1.backward(acts.p1, g_head1, &g_p1);

    std::array<Tensor<T>, 5> grad_C;
    for (int s = 0; s < 5; ++s)
      grad_C[static_cast<size_t>(s)] = Tensor<T>(acts.vgg.C[static_cast<size_t>(s)].shape());

    std::vector<Tensor<T>> grad_tokens;
    std::vector<Tensor<T>*> grad_token_ptrs;
    if (cfg.variant == ModelVariant::fused) {
      grad_tokens.reserve(acts.vec.items.size());
      for (const auto& it : acts.vec.items)
        grad_tokens.emplace_back(Tensor<T>({it.n_elem, cfg.pyramid_channels}));
      for (auto& t : grad_tokens) grad_token_ptrs.push_back(&t);
    } else {
      grad_token_ptrs.assign(static_cast<size_t>(B), nullptr);
    }

    Tensor<T> g_u2(acts.u2.shape());
    fpn1.backward(acts.vgg.C[0], acts.fpn1, g_p1, &g_u2, &grad_C[0]);
    Tensor<T> g_u3(acts.u3.shape());
    fpn2.backward(acts.vgg.C[1], acts.fpn2, g_u2, &g_u3, &grad_C[1]);
    Tensor<T> g_p4(acts.p4.shape());
    fpn3.backward(acts.vgg.C[2], acts.fpn3, g_u3, &g_p4, &grad_C[2]);
    Tensor<T> g_u4(acts.u4.shape());
    fuse4.backward(acts.u4, acts.tokens, cfg.variant, acts.fuse4, g_p4, &g_u4,
                   grad_token_ptrs);
    Tensor<T> g_p5(acts.p5.shape());
    fpn4.backward(acts.vgg.C[3], acts.fpn4, g_u4, &g_p5, &grad_C[3]);
    fuse5.backward(acts.vgg.C[4], acts.tokens, cfg.variant, acts.fuse5, g_p5,
                   &grad_C[4], grad_token_ptrs);

    vgg.backward(raster, acts.vgg, grad_C);
    if (cfg.variant == ModelVariant::fused) vecnet.backward(acts.vec, grad_tokens);
  }
};

}  // namespace occflow

#endif  // OCCFLOW_FUSION_HPP_
