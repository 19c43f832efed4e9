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

#ifndef OCCFLOW_BACKBONE_HPP_
#define OCCFLOW_BACKBONE_HPP_

#include <array>
#include <span>
#include <vector>

#include "occflow/model_config.hpp"
#include "occflow/nn.hpp"
#include "occflow/vectorize.hpp"

namespace occflow {

// ---------------------------------------------------------------------------
// Raster encoder: VGG-16 configuration-D conv stages with 2x2 max pools
// between stages. Each stage's pre-pool output is lateral-projected by a 1x1
// conv to the shared pyramid width, giving C1..C5 at strides {1,2,4,8,16}.

template <typename T>
struct VggEncoder {
  std::vector<std::vector<nn::Conv2d<T>>> stages;
  std::array<nn::Conv2d<T>, 5> laterals;
  int in_channels = 0;

  void build(const ModelConfig& cfg, Rng& rng) {
    in_channels = cfg.in_channels();
    const auto widths = cfg.vgg_widths();
    const auto convs = ModelConfig::vgg_convs_per_stage();
    stages.assign(5, {});
    int in = in_channels;
    for (int s = 0; s < 5; ++s) {
      for (int j = 0; j < convs[static_cast<size_t>(s)]; ++j) {
        nn::Conv2d<T> c;
        c.build(in, widths[static_cast<size_t>(s)], 3, rng);
        stages[static_cast<size_t>(s)].push_back(std::move(c));
        in = widths[static_cast<size_t>(s)];
      }
      laterals[static_cast<size_t>(s)].build(widths[static_cast<size_t>(s)],
                                             cfg.pyramid_channels, 1, rng);
    }
  }

  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
    for (size_t s = 0; s < stages.size(); ++s) {
      for (size_t j = 0; j < stages[s].size(); ++j)
        stages[s][j].visit(prefix + ".stage" + std::to_string(s + 1) + ".conv" +
                               std::to_string(j),
                           fn);
      laterals[s].visit(prefix + ".lateral" + std::to_string(s + 1), fn);
    }
  }

  struct Acts {
    std::array<Tensor<T>, 5> C;  // lateral outputs, always kept
    // Training caches (post-relu conv outputs, pool inputs/indices).
    std::array<std::vector<Tensor<T>>, 5> conv_out;
    std::array<Tensor<T>, 4> pooled;
    std::array<Tensor<int32_t>, 4> pool_idx;
    bool kept = false;
  };

  Acts forward(const Tensor<T>& x, bool keep_acts) const {
    if (x.ndim() != 4 || x.dim(1) != in_channels)
      throw Error("vgg: expected input [B," + std::to_string(in_channels) + ",H,W]");
    if (x.dim(2) % 16 != 0 || x.dim(2) != x.dim(3))
      throw Error("vgg: spatial size must be square and divisible by 16");
    Acts acts;
    acts.kept = keep_acts;
    const Tensor<T>* cur = &x;
    Tensor<T> buf;
    for (size_t s = 0; s < 5; ++s) {
      for (size_t j = 0; j < stages[s].size(); ++j) {
        Tensor<T> y = stages[s][j].forward(*cur);
        nn::relu_(y);
        if (keep_acts) {
          acts.conv_out[s].push_back(std::move(y));
          cur = &acts.conv_out[s].back();
        } else {
          buf = std::move(y);
          cur = &buf;
        }
      }
      acts.C[s] = laterals[s].forward(*cur);
      if (s < 4) {
        auto pooled = nn::maxpool2x2(*cur);
        if (keep_acts) {
          acts.pool_idx[s] = std::move(pooled.argmax);
          acts.pooled[s] = std::move(pooled.out);
          cur = &acts.pooled[s];
        } else {
          buf = std::move(pooled.out);
          cur = &buf;
        }
      }
    }
    return acts;
  }

  // grad_C is consumed. The raster input needs no gradient.
  void backward(const Tensor<T>& x, Acts& acts, std::array<Tensor<T>, 5>& grad_C) {
    Tensor<T> grad_stage;  // grad w.r.t. the current stage's post-relu output
    for (int s = 4; s >= 0; --s) {
      const size_t su = static_cast<size_t>(s);
      // grad into the stage's last conv output: lateral path + pool path
      Tensor<T> g(acts.conv_out[su].back().shape());
      laterals[su].backward(acts.conv_out[su].back(), grad_C[su], &g);
      if (s < 4) nn::maxpool2x2_backward(acts.pool_idx[su], grad_stage, g);

      for (int j = static_cast<int>(stages[su].size()) - 1; j >= 0; --j) {
        const size_t ju = static_cast<size_t>(j);
        nn::relu_backward_(acts.conv_out[su][ju], g);
        const Tensor<T>* input =
            j > 0 ? &acts.conv_out[su][ju - 1]
                  : (s > 0 ? &acts.pooled[su - 1] : &x);
        if (j == 0 && s == 0) {
          stages[su][ju].backward({input}, g, {nullptr});
        } else {
          Tensor<T> gin(input->shape());
          stages[su][ju].backward({input}, g, {&gin});
          g = std::move(gin);
        }
      }
      if (s > 0) grad_stage = std::move(g);
    }
  }
};

// ---------------------------------------------------------------------------
// Vector encoder: per-element local graphs (MLP -> masked max-pool over the
// element's vectors -> concat), a single self-attention layer across element
// tokens, and an expansion MLP up to the pyramid width.

template <typename T>
struct VectorNetEncoder {
  struct LocalLayer {
    nn::Linear<T> lin;
    nn::LayerNorm<T> norm;
  };
  std::array<LocalLayer, 3> local;
  nn::Linear<T> attn_q, attn_k, attn_v;
  nn::Linear<T> expand;
  int hidden = 0, feature = 0, out_channels = 0;

  void build(const ModelConfig& cfg, Rng& rng) {
    hidden = cfg.vector_hidden;
    feature = cfg.vector_feature();
    out_channels = cfg.pyramid_channels;
    for (size_t l = 0; l < 3; ++l) {
      const int in = l == 0 ? kVectorGeomFeatures : feature;
      local[l].lin.build(in, hidden, rng);
      local[l].norm.build(hidden);
    }
    attn_q.build(feature, feature, rng);
    attn_k.build(feature, feature, rng);
    attn_v.build(feature, feature, rng);
    expand.build(feature, out_channels, rng);
  }

  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
    for (size_t l = 0; l < 3; ++l) {
      local[l].lin.visit(prefix + ".local" + std::to_string(l) + ".lin", fn);
      local[l].norm.visit(prefix + ".local" + std::to_string(l) + ".norm", fn);
    }
    attn_q.visit(prefix + ".global.q", fn);
    attn_k.visit(prefix + ".global.k", fn);
    attn_v.visit(prefix + ".global.v", fn);
    expand.visit(prefix + ".expand", fn);
  }

  struct ItemActs {
    // Packed valid rows only; masked rows never enter the computation, which
    // is what keeps them out of every max-pool and softmax.
    Tensor<T> rows;  // [M, 8] geometric features; the id column is the key
    std::vector<int32_t> elem_of_row;
    std::vector<std::vector<int32_t>> rows_of_elem;
    int n_elem = 0;

    struct LayerActs {
      Tensor<T> lin_in;                       // [M, in]
      typename nn::LayerNorm<T>::Stash norm;  // xhat/rstd
      Tensor<T> h;                            // [M, hidden] post-relu
      Tensor<T> pooled;                       // [N, hidden]
      Tensor<int32_t> argmax;                 // [N, hidden] row index
      Tensor<T> cat;                          // [M, 2*hidden]
    };
    std::array<LayerActs, 3> layer;
    Tensor<T> tokens;             // [N, F] element tokens (pre-attention)
    Tensor<int32_t> tokens_argmax;  // [N, F]
    Tensor<T> q, k, v, probs;     // attention stash
    Tensor<T> attn_out;           // [N, F]
    Tensor<T> vout;               // [N, C] post-relu expanded feature
  };

  struct Acts {
    std::vector<ItemActs> items;
    bool kept = false;
  };

  static ItemActs pack(const VectorSet& vs) {
    ItemActs it;
    it.n_elem = vs.element_count;
    it.rows_of_elem.assign(static_cast<size_t>(vs.element_count), {});
    std::vector<std::pair<const float*, int>> rows;
    auto collect = [&](const Tensor<float>& data, const Tensor<float>& valid) {
      const int64_t n = valid.numel();
      for (int64_t i = 0; i < n; ++i) {
        if (valid[i] == 0.0f) continue;
        const float* r = data.data() + i * kVectorFeatures;
        rows.push_back({r, static_cast<int>(r[8])});
      }
    };
    collect(vs.agents, vs.agents_valid);
    collect(vs.road, vs.road_valid);
    const int64_t M = static_cast<int64_t>(rows.size());
    it.rows = Tensor<T>({M, kVectorGeomFeatures});
    it.elem_of_row.resize(static_cast<size_t>(M));
    for (int64_t m = 0; m < M; ++m) {
      for (int f = 0; f < kVectorGeomFeatures; ++f)
        it.rows(m, f) = static_cast<T>(rows[static_cast<size_t>(m)].first[f]);
      const int e = rows[static_cast<size_t>(m)].second;
      it.elem_of_row[static_cast<size_t>(m)] = e;
      it.rows_of_elem[static_cast<size_t>(e)].push_back(static_cast<int32_t>(m));
    }
    return it;
  }

  // Masked max over each element's rows. Ties resolve to the first row.
  static void pool_rows(const Tensor<T>& h, const ItemActs& it, Tensor<T>* pooled,
                        Tensor<int32_t>* argmax) {
    const int64_t D = h.dim(1);
    *pooled = Tensor<T>({it.n_elem, D});
    *argmax = Tensor<int32_t>({it.n_elem, D});
    for (int e = 0; e < it.n_elem; ++e) {
      const auto& rows = it.rows_of_elem[static_cast<size_t>(e)];
      if (rows.empty()) {
        for (int64_t d = 0; d < D; ++d) (*argmax)(e, d) = -1;
        continue;
      }
      for (int64_t d = 0; d < D; ++d) {
        T best = h(rows[0], d);
        int32_t bi = rows[0];
        for (size_t ri = 1; ri < rows.size(); ++ri) {
          const T v = h(rows[ri], d);
          if (v > best) {
            best = v;
            bi = rows[ri];
          }
        }
        (*pooled)(e, d) = best;
        (*argmax)(e, d) = bi;
      }
    }
  }

  // Stashes are always kept; the vector side is tiny next to the image side.
  void forward_item(ItemActs& it) const {
    const int64_t M = it.rows.dim(0);
    const Tensor<T>* cur = &it.rows;
    for (size_t l = 0; l < 3; ++l) {
      auto& la = it.layer[l];
      la.lin_in = *cur;  // small matrices; copies keep backward simple
      Tensor<T> z = local[l].lin.forward(la.lin_in);
      Tensor<T> h = local[l].norm.forward(z, &la.norm);
      nn::relu_(h);
      la.h = std::move(h);
      pool_rows(la.h, it, &la.pooled, &la.argmax);
      la.cat = Tensor<T>({M, 2 * static_cast<int64_t>(hidden)});
      for (int64_t m = 0; m < M; ++m) {
        const int e = it.elem_of_row[static_cast<size_t>(m)];
        for (int d = 0; d < hidden; ++d) {
          la.cat(m, d) = la.h(m, d);
          la.cat(m, hidden + d) = la.pooled(e, d);
        }
      }
      cur = &la.cat;
    }
    pool_rows(*cur, it, &it.tokens, &it.tokens_argmax);

    // Single-layer self-attention over element tokens.
    const int64_t N = it.n_elem;
    it.q = attn_q.forward(it.tokens);
    it.k = attn_k.forward(it.tokens);
    it.v = attn_v.forward(it.tokens);
    it.probs = Tensor<T>({N, N});
    if (N > 0) {
      nn::CMapRM<T> Q(it.q.data(), N, feature);
      nn::CMapRM<T> K(it.k.data(), N, feature);
      nn::MapRM<T> P(it.probs.data(), N, N);
      P.noalias() = Q * K.transpose() / std::sqrt(static_cast<T>(feature));
      nn::softmax_rows_<T>(P);
      it.attn_out = Tensor<T>({N, feature});
      nn::MapRM<T> O(it.attn_out.data(), N, feature);
      O.noalias() = P * nn::CMapRM<T>(it.v.data(), N, feature);
    } else {
      it.attn_out = Tensor<T>({0, feature});
    }

    it.vout = expand.forward(it.attn_out);
    nn::relu_(it.vout);
  }

  Acts forward(std::span<const VectorSet> batch, bool keep_acts) const {
    Acts acts;
    acts.kept = keep_acts;
    acts.items.reserve(batch.size());
    for (const VectorSet& vs : batch) {
      ItemActs it = pack(vs);
      forward_item(it);
      acts.items.push_back(std::move(it));
    }
    return acts;
  }

  // grad_vout: per item [N, C]
  void backward(Acts& acts, const std::vector<Tensor<T>>& grad_vout) {
    for (size_t bi = 0; bi < acts.items.size(); ++bi) {
      ItemActs& it = acts.items[bi];
      const int64_t N = it.n_elem;
      Tensor<T> g = grad_vout[bi];  // [N, C]
      nn::relu_backward_(it.vout, g);
      Tensor<T> g_attn({N, static_cast<int64_t>(feature)});
      expand.backward(it.attn_out, g, &g_attn);

      Tensor<T> g_tokens({N, static_cast<int64_t>(feature)});
      if (N > 0) {
        // O = P V
        nn::CMapRM<T> P(it.probs.data(), N, N);
        nn::CMapRM<T> GO(g_attn.data(), N, feature);
        Tensor<T> gv({N, static_cast<int64_t>(feature)});
        nn::MapRM<T>(gv.data(), N, feature).noalias() = P.transpose() * GO;
        Tensor<T> gp({N, N});
        nn::MapRM<T>(gp.data(), N, N).noalias() =
            GO * nn::CMapRM<T>(it.v.data(), N, feature).transpose();
        Tensor<T> glogits({N, N});
        nn::softmax_backward_rows<T>(nn::CMapRM<T>(it.probs.data(), N, N),
                                     nn::CMapRM<T>(gp.data(), N, N),
                                     nn::MapRM<T>(glogits.data(), N, N));
        const T scale = T(1) / std::sqrt(static_cast<T>(feature));
        Tensor<T> gq({N, static_cast<int64_t>(feature)});
        Tensor<T> gk({N, static_cast<int64_t>(feature)});
        nn::MapRM<T>(gq.data(), N, feature).noalias() =
            nn::CMapRM<T>(glogits.data(), N, N) *
            nn::CMapRM<T>(it.k.data(), N, feature) * scale;
        nn::MapRM<T>(gk.data(), N, feature).noalias() =
            nn::CMapRM<T>(glogits.data(), N, N).transpose() *
            nn::CMapRM<T>(it.q.data(), N, feature) * scale;
        attn_q.backward(it.tokens, gq, &g_tokens);
        attn_k.backward(it.tokens, gk, &g_tokens);
        attn_v.backward(it.tokens, gv, &g_tokens);
      }

      // tokens = pool(cat3)
      const int64_t M = it.rows.dim(0);
      Tensor<T> g_cur({M, 2 * static_cast<int64_t>(hidden)});
      for (int64_t e = 0; e < N; ++e) {
        if (it.tokens_argmax(e, 0) < 0) continue;
        for (int d = 0; d < feature; ++d)
          g_cur(it.tokens_argmax(e, d), d) += g_tokens(e, d);
      }

      for (int l = 2; l >= 0; --l) {
        auto& la = it.layer[static_cast<size_t>(l)];
        // split cat grad into row part and pooled part
        Tensor<T> gh({M, static_cast<int64_t>(hidden)});
        Tensor<T> gpool({N, static_cast<int64_t>(hidden)});
        for (int64_t m = 0; m < M; ++m) {
          const int e = it.elem_of_row[static_cast<size_t>(m)];
          for (int d = 0; d < hidden; ++d) {
            gh(m, d) += g_cur(m, d);
            gpool(e, d) += g_cur(m, static_cast<int64_t>(hidden) + d);
          }
        }
        for (int64_t e = 0; e < N; ++e) {
          if (la.argmax(e, 0) < 0) continue;
          for (int d = 0; d < hidden; ++d) gh(la.argmax(e, d), d) += gpool(e, d);
        }

        nn::relu_backward_(la.h, gh);
        Tensor<T> gz({M, static_cast<int64_t>(hidden)});
        local[static_cast<size_t>(l)].norm.backward(la.norm, gh, &gz);
        if (l > 0) {
          g_cur = Tensor<T>({M, 2 * static_cast<int64_t>(hidden)});
          local[static_cast<size_t>(l)].lin.backward(la.lin_in, gz, &g_cur);
        } else {
          local[static_cast<size_t>(l)].lin.backward(la.lin_in, gz, nullptr);
        }
      }
    }
  }
};

}  // namespace occflow

#endif  // OCCFLOW_BACKBONE_HPP_
