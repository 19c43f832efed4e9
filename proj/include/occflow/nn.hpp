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

#ifndef OCCFLOW_NN_HPP_
#define OCCFLOW_NN_HPP_

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "occflow/rng.hpp"
#include "occflow/tensor.hpp"

// Dense layers with explicit forward/backward. Forward passes are const (safe
// to run concurrently on frozen parameters); backward accumulates into the
// gradient buffers and is single-writer. Kernels are templated on the scalar
// type so the same code runs float32 in production and float64 under the
// finite-difference tests.

namespace occflow::nn {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;
template <typename T>
using StridedMapRM = Eigen::Map<MatRM<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using CVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

using ShapeLog = std::map<std::string, Shape>;

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first zero_grad()

  void ensure_grad() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
  }
};

template <typename T>
using ParamVisitor = std::function<void(const std::string&, Param<T>&)>;

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
template <typename T>
void init_fanin_uniform(Param<T>& p, int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int64_t i = 0; i < p.value.numel(); ++i)
    p.value[i] = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------
// Elementwise ops

template <typename T>
void relu_(Tensor<T>& x) {
  T* d = x.data();
  for (int64_t i = 0; i < x.numel(); ++i)
    if (d[i] < T(0)) d[i] = T(0);
}

// grad through relu given the post-activation output.
template <typename T>
void relu_backward_(const Tensor<T>& y, Tensor<T>& grad) {
  const T* yd = y.data();
  T* g = grad.data();
  for (int64_t i = 0; i < grad.numel(); ++i)
    if (yd[i] <= T(0)) g[i] = T(0);
}

// ---------------------------------------------------------------------------
// Conv2d, stride 1, square kernel. Inputs may be a list of tensors treated as
// channel-concatenated, which avoids materializing concat buffers.

template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, ksize = 1, pad = 0;
  Param<T> weight;  // [out_ch, in_ch, k, k]
  Param<T> bias;    // [out_ch]

  void build(int in, int out, int k, Rng& rng) {
    in_ch = in;
    out_ch = out;
    ksize = k;
    pad = k / 2;
    weight.value = Tensor<T>({out, in, k, k});
    bias.value = Tensor<T>({out});
    const int64_t fan_in = static_cast<int64_t>(in) * k * k;
    init_fanin_uniform(weight, fan_in, rng);
    init_fanin_uniform(bias, fan_in, rng);
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }

  static int64_t total_channels(const std::vector<const Tensor<T>*>& xs) {
    int64_t c = 0;
    for (const auto* x : xs) c += x->dim(1);
    return c;
  }

  Tensor<T> forward(const std::vector<const Tensor<T>*>& xs) const {
    const int64_t B = xs[0]->dim(0), H = xs[0]->dim(2), W = xs[0]->dim(3);
    for (const auto* x : xs) {
      if (x->dim(0) != B || x->dim(2) != H || x->dim(3) != W)
        throw Error("conv2d: input batch/spatial mismatch");
    }
    if (total_channels(xs) != in_ch)
      throw Error("conv2d: expected " + std::to_string(in_ch) + " channels, got " +
                  std::to_string(total_channels(xs)));

    Tensor<T> out({B, out_ch, H, W});
    const int64_t K = static_cast<int64_t>(in_ch) * ksize * ksize;
    const int64_t rows_per_block = block_rows(K, W);
    const int64_t blocks_per_item = (H + rows_per_block - 1) / rows_per_block;
    const int64_t total_blocks = B * blocks_per_item;

#pragma omp parallel
    {
      std::vector<T> cols(static_cast<size_t>(K * rows_per_block * W));
#pragma omp for schedule(static)
      for (int64_t blk = 0; blk < total_blocks; ++blk) {
        const int64_t b = blk / blocks_per_item;
        const int64_t y0 = (blk % blocks_per_item) * rows_per_block;
        const int64_t y1 = std::min<int64_t>(H, y0 + rows_per_block);
        const int64_t M = (y1 - y0) * W;
        fill_cols(xs, b, y0, y1, cols.data());

        CMapRM<T> Wm(weight.value.data(), out_ch, K);
        CMapRM<T> Cm(cols.data(), K, M);
        StridedMapRM<T> Om(out.data() + (b * out_ch) * H * W + y0 * W, out_ch, M,
                           Eigen::OuterStride<>(H * W));
        Om.noalias() = Wm * Cm;
        CVecMap<T> bv(bias.value.data(), out_ch);
        Om.colwise() += bv;
      }
    }
    return out;
  }

  Tensor<T> forward(const Tensor<T>& x) const { return forward({&x}); }

  // Accumulates parameter gradients and (where grad_xs[i] != nullptr) input
  // gradients. grad_xs tensors must be pre-sized and are accumulated into.
  void backward(const std::vector<const Tensor<T>*>& xs, const Tensor<T>& grad_out,
                const std::vector<Tensor<T>*>& grad_xs) {
    const int64_t B = xs[0]->dim(0), H = xs[0]->dim(2), W = xs[0]->dim(3);
    const int64_t K = static_cast<int64_t>(in_ch) * ksize * ksize;
    weight.ensure_grad();
    bias.ensure_grad();

    // bias grad
    {
      double acc;
      for (int64_t oc = 0; oc < out_ch; ++oc) {
        acc = 0.0;
        for (int64_t b = 0; b < B; ++b) {
          const T* g = grad_out.data() + (b * out_ch + oc) * H * W;
          for (int64_t i = 0; i < H * W; ++i) acc += static_cast<double>(g[i]);
        }
        bias.grad[oc] += static_cast<T>(acc);
      }
    }

    const int64_t rows_per_block = block_rows(K, W);

    // Per-item weight-grad buffers keep the reduction order fixed regardless
    // of scheduling.
    std::vector<Tensor<T>> gw_item(static_cast<size_t>(B));
    for (auto& t : gw_item) t = Tensor<T>({out_ch, K});

#pragma omp parallel
    {
      std::vector<T> cols(static_cast<size_t>(K * rows_per_block * W));
      std::vector<T> gcols(static_cast<size_t>(K * rows_per_block * W));
#pragma omp for schedule(static)
      for (int64_t b = 0; b < B; ++b) {
        MapRM<T> GW(gw_item[static_cast<size_t>(b)].data(), out_ch, K);
        for (int64_t y0 = 0; y0 < H; y0 += rows_per_block) {
          const int64_t y1 = std::min<int64_t>(H, y0 + rows_per_block);
          const int64_t M = (y1 - y0) * W;
          fill_cols(xs, b, y0, y1, cols.data());
          Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>> Gm(
              grad_out.data() + (b * out_ch) * H * W + y0 * W, out_ch, M,
              Eigen::OuterStride<>(H * W));
          CMapRM<T> Cm(cols.data(), K, M);
          GW.noalias() += Gm * Cm.transpose();

          bool need_input_grad = false;
          for (auto* g : grad_xs)
            if (g) need_input_grad = true;
          if (need_input_grad) {
            CMapRM<T> Wm(weight.value.data(), out_ch, K);
            MapRM<T> GC(gcols.data(), K, M);
            GC.noalias() = Wm.transpose() * Gm;
            scatter_cols(xs, grad_xs, b, y0, y1, gcols.data());
          }
        }
      }
    }

    MapRM<T> GWtot(weight.grad.data(), out_ch, K);
    for (const auto& t : gw_item)
      GWtot += CMapRM<T>(t.data(), out_ch, K);
  }

  void backward(const Tensor<T>& x, const Tensor<T>& grad_out, Tensor<T>* grad_x) {
    backward({&x}, grad_out, {grad_x});
  }

 private:
  static int64_t block_rows(int64_t K, int64_t W) {
    // Bound the per-thread column buffer to ~4M scalars.
    const int64_t budget = 1 << 22;
    return std::max<int64_t>(1, budget / std::max<int64_t>(1, K * W));
  }

  // cols layout: [K x M] row-major, K = in_ch*k*k, M = (y1-y0)*W. Row index
  // r = g*k*k + ky*k + kx matches the flattened weight layout.
  void fill_cols(const std::vector<const Tensor<T>*>& xs, int64_t b, int64_t y0,
                 int64_t y1, T* cols) const {
    const int64_t H = xs[0]->dim(2), W = xs[0]->dim(3);
    const int64_t M = (y1 - y0) * W;
    int64_t g = 0;
    for (const auto* xp : xs) {
      const int64_t C = xp->dim(1);
      for (int64_t ci = 0; ci < C; ++ci, ++g) {
        const T* plane = xp->data() + (b * C + ci) * H * W;
        for (int ky = 0; ky < ksize; ++ky) {
          for (int kx = 0; kx < ksize; ++kx) {
            T* dst_base = cols + (g * ksize * ksize + ky * ksize + kx) * M;
            const int64_t shift = kx - pad;
            for (int64_t y = y0; y < y1; ++y) {
              T* dst = dst_base + (y - y0) * W;
              const int64_t iy = y + ky - pad;
              if (iy < 0 || iy >= H) {
                std::fill(dst, dst + W, T(0));
                continue;
              }
              const T* src = plane + iy * W;
              // dst[x] = src[x + shift], zero outside [0, W)
              const int64_t x_lo = std::max<int64_t>(0, -shift);
              const int64_t x_hi = std::min<int64_t>(W, W - shift);
              if (x_lo > 0) std::fill(dst, dst + x_lo, T(0));
              if (x_hi > x_lo)
                std::copy(src + x_lo + shift, src + x_hi + shift, dst + x_lo);
              if (x_hi < W) std::fill(dst + x_hi, dst + W, T(0));
            }
          }
        }
      }
    }
  }

  // Transpose of fill_cols: scatter-add column gradients back to the inputs.
  // Inputs with a null grad slot are skipped but still advance the channel
  // cursor.
  void scatter_cols(const std::vector<const Tensor<T>*>& xs,
                    const std::vector<Tensor<T>*>& gxs, int64_t b, int64_t y0,
                    int64_t y1, const T* gcols) const {
    const int64_t H = xs[0]->dim(2), W = xs[0]->dim(3);
    const int64_t M = (y1 - y0) * W;
    int64_t g = 0;
    for (size_t xi = 0; xi < xs.size(); ++xi) {
      const int64_t C = xs[xi]->dim(1);
      Tensor<T>* gxp = gxs[xi];
      if (!gxp) {
        g += C;
        continue;
      }
      for (int64_t ci = 0; ci < C; ++ci, ++g) {
        T* plane = gxp->data() + (b * C + ci) * H * W;
        for (int ky = 0; ky < ksize; ++ky) {
          for (int kx = 0; kx < ksize; ++kx) {
            const T* src_base = gcols + (g * ksize * ksize + ky * ksize + kx) * M;
            const int64_t shift = kx - pad;
            for (int64_t y = y0; y < y1; ++y) {
              const T* src = src_base + (y - y0) * W;
              const int64_t iy = y + ky - pad;
              if (iy < 0 || iy >= H) continue;
              T* dst = plane + iy * W;
              const int64_t x_lo = std::max<int64_t>(0, -shift);
              const int64_t x_hi = std::min<int64_t>(W, W - shift);
              for (int64_t x = x_lo; x < x_hi; ++x) dst[x + shift] += src[x];
            }
          }
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// 2x2/2 max pool

template <typename T>
struct PoolResult {
  Tensor<T> out;
  Tensor<int32_t> argmax;  // 0..3 = dy*2+dx within the window
};

template <typename T>
PoolResult<T> maxpool2x2(const Tensor<T>& x) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 || W % 2) throw Error("maxpool2x2: odd spatial size");
  PoolResult<T> r{Tensor<T>({B, C, H / 2, W / 2}),
                  Tensor<int32_t>({B, C, H / 2, W / 2})};
  const int64_t planes = B * C;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T* in = x.data() + p * H * W;
    T* out = r.out.data() + p * (H / 2) * (W / 2);
    int32_t* am = r.argmax.data() + p * (H / 2) * (W / 2);
    for (int64_t y = 0; y < H / 2; ++y) {
      for (int64_t xx = 0; xx < W / 2; ++xx) {
        T best = in[(2 * y) * W + 2 * xx];
        int32_t bi = 0;
        for (int d = 1; d < 4; ++d) {
          const T v = in[(2 * y + d / 2) * W + 2 * xx + d % 2];
          if (v > best) {
            best = v;
            bi = d;
          }
        }
        out[y * (W / 2) + xx] = best;
        am[y * (W / 2) + xx] = bi;
      }
    }
  }
  return r;
}

template <typename T>
void maxpool2x2_backward(const Tensor<int32_t>& argmax, const Tensor<T>& grad_out,
                         Tensor<T>& grad_in) {
  const int64_t B = grad_in.dim(0), C = grad_in.dim(1), H = grad_in.dim(2),
                W = grad_in.dim(3);
  for (int64_t p = 0; p < B * C; ++p) {
    const T* g = grad_out.data() + p * (H / 2) * (W / 2);
    const int32_t* am = argmax.data() + p * (H / 2) * (W / 2);
    T* gi = grad_in.data() + p * H * W;
    for (int64_t y = 0; y < H / 2; ++y) {
      for (int64_t xx = 0; xx < W / 2; ++xx) {
        const int32_t d = am[y * (W / 2) + xx];
        gi[(2 * y + d / 2) * W + 2 * xx + d % 2] += g[y * (W / 2) + xx];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 2x upsampling

enum class UpsampleMode { nearest, bilinear };

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x, UpsampleMode mode) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<T> out({B, C, 2 * H, 2 * W});
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < B * C; ++p) {
    const T* in = x.data() + p * H * W;
    T* o = out.data() + p * 4 * H * W;
    if (mode == UpsampleMode::nearest) {
      for (int64_t y = 0; y < 2 * H; ++y)
        for (int64_t xx = 0; xx < 2 * W; ++xx)
          o[y * 2 * W + xx] = in[(y / 2) * W + xx / 2];
    } else {
      // align_corners=false, edge-clamped
      for (int64_t y = 0; y < 2 * H; ++y) {
        const double sy = (y + 0.5) / 2.0 - 0.5;
        const int64_t y0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(sy)), 0, H - 1);
        const int64_t y1 = std::min<int64_t>(y0 + 1, H - 1);
        const double fy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
        for (int64_t xx = 0; xx < 2 * W; ++xx) {
          const double sx = (xx + 0.5) / 2.0 - 0.5;
          const int64_t x0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(sx)), 0, W - 1);
          const int64_t x1 = std::min<int64_t>(x0 + 1, W - 1);
          const double fx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
          const double v = (1 - fy) * ((1 - fx) * in[y0 * W + x0] + fx * in[y0 * W + x1]) +
                           fy * ((1 - fx) * in[y1 * W + x0] + fx * in[y1 * W + x1]);
          o[y * 2 * W + xx] = static_cast<T>(v);
        }
      }
    }
  }
  return out;
}

template <typename T>
void upsample2x_backward(const Tensor<T>& grad_out, UpsampleMode mode,
                         Tensor<T>& grad_in) {
  const int64_t B = grad_in.dim(0), C = grad_in.dim(1), H = grad_in.dim(2),
                W = grad_in.dim(3);
  for (int64_t p = 0; p < B * C; ++p) {
    const T* g = grad_out.data() + p * 4 * H * W;
    T* gi = grad_in.data() + p * H * W;
    if (mode == UpsampleMode::nearest) {
      for (int64_t y = 0; y < 2 * H; ++y)
        for (int64_t xx = 0; xx < 2 * W; ++xx)
          gi[(y / 2) * W + xx / 2] += g[y * 2 * W + xx];
    } else {
      for (int64_t y = 0; y < 2 * H; ++y) {
        const double sy = (y + 0.5) / 2.0 - 0.5;
        const int64_t y0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(sy)), 0, H - 1);
        const int64_t y1 = std::min<int64_t>(y0 + 1, H - 1);
        const double fy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
        for (int64_t xx = 0; xx < 2 * W; ++xx) {
          const double sx = (xx + 0.5) / 2.0 - 0.5;
          const int64_t x0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(sx)), 0, W - 1);
          const int64_t x1 = std::min<int64_t>(x0 + 1, W - 1);
          const double fx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
          const T gv = g[y * 2 * W + xx];
          gi[y0 * W + x0] += static_cast<T>((1 - fy) * (1 - fx)) * gv;
          gi[y0 * W + x1] += static_cast<T>((1 - fy) * fx) * gv;
          gi[y1 * W + x0] += static_cast<T>(fy * (1 - fx)) * gv;
          gi[y1 * W + x1] += static_cast<T>(fy * fx) * gv;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Linear: y = x W^T + b, x [N, in]

template <typename T>
struct Linear {
  int in_dim = 0, out_dim = 0;
  bool has_bias = true;
  Param<T> weight;  // [out, in]
  Param<T> bias;    // [out]

  void build(int in, int out, Rng& rng, bool with_bias = true) {
    in_dim = in;
    out_dim = out;
    has_bias = with_bias;
    weight.value = Tensor<T>({out, in});
    init_fanin_uniform(weight, in, rng);
    if (has_bias) {
      bias.value = Tensor<T>({out});
      init_fanin_uniform(bias, in, rng);
    }
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", weight);
    if (has_bias) fn(prefix + ".bias", bias);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    const int64_t N = x.dim(0);
    if (x.dim(1) != in_dim) throw Error("linear: input dim mismatch");
    Tensor<T> y({N, out_dim});
    if (N == 0) return y;
    CMapRM<T> X(x.data(), N, in_dim);
    CMapRM<T> W(weight.value.data(), out_dim, in_dim);
    MapRM<T> Y(y.data(), N, out_dim);
    Y.noalias() = X * W.transpose();
    if (has_bias) {
      CVecMap<T> b(bias.value.data(), out_dim);
      Y.rowwise() += b.transpose();
    }
    return y;
  }

  void backward(const Tensor<T>& x, const Tensor<T>& grad_out, Tensor<T>* grad_x) {
    const int64_t N = x.dim(0);
    weight.ensure_grad();
    if (has_bias) bias.ensure_grad();
    if (N > 0) {
      CMapRM<T> X(x.data(), N, in_dim);
      CMapRM<T> G(grad_out.data(), N, out_dim);
      MapRM<T> GW(weight.grad.data(), out_dim, in_dim);
      GW.noalias() += G.transpose() * X;
      if (has_bias) {
        VecMap<T> gb(bias.grad.data(), out_dim);
        gb.noalias() += G.colwise().sum().transpose();
      }
      if (grad_x) {
        CMapRM<T> W(weight.value.data(), out_dim, in_dim);
        MapRM<T> GX(grad_x->data(), N, in_dim);
        GX.noalias() += G * W;
      }
    }
  }
};

// ---------------------------------------------------------------------------
// LayerNorm over the last dimension of [N, D]

template <typename T>
struct LayerNorm {
  int dim = 0;
  double eps = 1e-5;
  Param<T> gamma, beta;

  void build(int d) {
    dim = d;
    gamma.value = Tensor<T>::full({d}, T(1));
    beta.value = Tensor<T>({d});
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".gamma", gamma);
    fn(prefix + ".beta", beta);
  }

  struct Stash {
    Tensor<T> xhat;  // [N, D]
    Tensor<T> rstd;  // [N]
  };

  Tensor<T> forward(const Tensor<T>& x, Stash* stash) const {
    const int64_t N = x.dim(0), D = x.dim(1);
    Tensor<T> y({N, D});
    Tensor<T> xhat({N, D});
    Tensor<T> rstd({N});
    for (int64_t i = 0; i < N; ++i) {
      const T* xi = x.data() + i * D;
      double mu = 0;
      for (int64_t j = 0; j < D; ++j) mu += xi[j];
      mu /= static_cast<double>(D);
      double var = 0;
      for (int64_t j = 0; j < D; ++j) {
        const double d = xi[j] - mu;
        var += d * d;
      }
      var /= static_cast<double>(D);
      const double rs = 1.0 / std::sqrt(var + eps);
      rstd[i] = static_cast<T>(rs);
      for (int64_t j = 0; j < D; ++j) {
        const T xh = static_cast<T>((xi[j] - mu) * rs);
        xhat(i, j) = xh;
        y(i, j) = gamma.value[j] * xh + beta.value[j];
      }
    }
    if (stash) {
      stash->xhat = std::move(xhat);
      stash->rstd = std::move(rstd);
    }
    return y;
  }

  void backward(const Stash& stash, const Tensor<T>& grad_out, Tensor<T>* grad_x) {
    const int64_t N = grad_out.dim(0), D = grad_out.dim(1);
    gamma.ensure_grad();
    beta.ensure_grad();
    for (int64_t i = 0; i < N; ++i) {
      const T* g = grad_out.data() + i * D;
      const T* xh = stash.xhat.data() + i * D;
      double sum_dxhat = 0, sum_dxhat_xhat = 0;
      for (int64_t j = 0; j < D; ++j) {
        const double dxh = static_cast<double>(g[j]) * gamma.value[j];
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * xh[j];
        gamma.grad[j] += g[j] * xh[j];
        beta.grad[j] += g[j];
      }
      if (grad_x) {
        const double rs = stash.rstd[i];
        T* gx = grad_x->data() + i * D;
        const double inv_d = 1.0 / static_cast<double>(D);
        for (int64_t j = 0; j < D; ++j) {
          const double dxh = static_cast<double>(g[j]) * gamma.value[j];
          gx[j] += static_cast<T>(rs * (dxh - sum_dxhat * inv_d -
                                        xh[j] * sum_dxhat_xhat * inv_d));
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Row-wise softmax with max subtraction, in place. Returns nothing; caller
// keeps the probabilities for backward.

template <typename T>
void softmax_rows_(MapRM<T> m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

// dlogits = P .* (dP - rowsum(dP .* P))
template <typename T>
void softmax_backward_rows(const CMapRM<T>& probs, const CMapRM<T>& dprobs,
                           MapRM<T> dlogits) {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const T dot = probs.row(i).cwiseProduct(dprobs.row(i)).sum();
    dlogits.row(i) =
        probs.row(i).array() * (dprobs.row(i).array() - dot);
  }
}

// ---------------------------------------------------------------------------
// Adam with fixed default moments.

template <typename T>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(std::vector<Param<T>*> params) : params_(std::move(params)) {
    for (Param<T>* p : params_) {
      p->ensure_grad();
      m_.push_back(Tensor<T>(p->value.shape()));
      v_.push_back(Tensor<T>(p->value.shape()));
    }
  }

  void zero_grad() {
    for (Param<T>* p : params_) p->grad.fill(T(0));
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Param<T>* p = params_[i];
      T* w = p->value.data();
      const T* g = p->grad.data();
      T* m = m_[i].data();
      T* v = v_[i].data();
      const int64_t n = p->value.numel();
      for (int64_t j = 0; j < n; ++j) {
        const double gj = g[j];
        const double mj = kBeta1 * m[j] + (1.0 - kBeta1) * gj;
        const double vj = kBeta2 * v[j] + (1.0 - kBeta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        w[j] -= static_cast<T>(lr * (mj / bc1) / (std::sqrt(vj / bc2) + kEps));
      }
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  std::vector<Tensor<T>>& moment1() { return m_; }
  std::vector<Tensor<T>>& moment2() { return v_; }
  const std::vector<Param<T>*>& params() const { return params_; }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace occflow::nn

#endif  // OCCFLOW_NN_HPP_
