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

#include "occflow/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace occflow {

namespace {

void check_domain(float p, float g) {
  if (!(p >= 0.0f && p <= 1.0f))
    throw NumericalError("metric input p outside [0,1]");
  if (g != 0.0f && g != 1.0f)
    throw NumericalError("metric target g must be binary");
}

std::vector<double> auc_thresholds() {
  std::vector<double> t(kAucThresholds);
  for (int i = 0; i < kAucThresholds; ++i)
    t[static_cast<size_t>(i)] = static_cast<double>(i) / (kAucThresholds - 1);
  return t;
}

// Exact per-threshold counting via histogram bins: bin i holds the number of
// samples whose largest passing threshold is t_i ("p >= t_i" and not t_{i+1}).
struct PrAucAccum {
  std::vector<double> thr = auc_thresholds();
  std::vector<int64_t> bin_all = std::vector<int64_t>(kAucThresholds, 0);
  std::vector<int64_t> bin_pos = std::vector<int64_t>(kAucThresholds, 0);
  int64_t n_pos = 0;

  void add(float p, float g) {
    check_domain(p, g);
    // last threshold <= p; thr[0] == 0 so the index is always valid
    const auto it = std::upper_bound(thr.begin(), thr.end(), static_cast<double>(p));
    const size_t idx = static_cast<size_t>(it - thr.begin()) - 1;
    ++bin_all[idx];
    if (g == 1.0f) {
      ++bin_pos[idx];
      ++n_pos;
    }
  }

  double value() const {
    if (n_pos == 0) return 0.0;
    // Suffix counts give predicted-positive and true-positive counts per
    // threshold; walk thresholds downward so recall is non-decreasing.
    int64_t pp = 0, tp = 0;
    double prev_r = 0.0, prev_p = 1.0;
    bool first = true;
    double auc = 0.0;
    for (int i = kAucThresholds - 1; i >= 0; --i) {
      pp += bin_all[static_cast<size_t>(i)];
      tp += bin_pos[static_cast<size_t>(i)];
      const double precision =
          pp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pp);
      const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
      if (!first) auc += (recall - prev_r) * (prev_p + precision) * 0.5;
      prev_r = recall;
      prev_p = precision;
      first = false;
    }
    return auc;
  }
};

struct SoftIouAccum {
  double sum_pg = 0, sum_p = 0, sum_g = 0;

  void add(float p, float g) {
    check_domain(p, g);
    sum_pg += static_cast<double>(p) * g;
    sum_p += p;
    sum_g += g;
  }

  double value() const {
    const double denom = sum_p + sum_g - sum_pg;
    return denom <= 0.0 ? 0.0 : sum_pg / denom;
  }
};

struct EpeAccum {
  double sum = 0;
  int64_t count = 0;

  void add(float dx, float dy, float gx, float gy) {
    const double ex = static_cast<double>(dx) - gx;
    const double ey = static_cast<double>(dy) - gy;
    sum += std::sqrt(ex * ex + ey * ey);
    ++count;
  }

  double value() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

float sigmoidf(float x) {
  return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

float clip01(float x) { return std::min(1.0f, std::max(0.0f, x)); }

}  // namespace

double soft_iou(std::span<const float> p, std::span<const float> g) {
  if (p.size() != g.size()) throw Error("soft_iou: size mismatch");
  SoftIouAccum acc;
  for (size_t i = 0; i < p.size(); ++i) acc.add(p[i], g[i]);
  return acc.value();
}

double pr_auc(std::span<const float> p, std::span<const float> g) {
  if (p.size() != g.size()) throw Error("pr_auc: size mismatch");
  PrAucAccum acc;
  for (size_t i = 0; i < p.size(); ++i) acc.add(p[i], g[i]);
  return acc.value();
}

double flow_epe(std::span<const float> flow, std::span<const float> gt_flow,
                std::span<const float> flow_valid) {
  if (flow.size() != gt_flow.size() || flow.size() != 2 * flow_valid.size())
    throw Error("flow_epe: size mismatch");
  EpeAccum acc;
  for (size_t i = 0; i < flow_valid.size(); ++i) {
    if (flow_valid[i] <= 0.0f) continue;
    acc.add(flow[2 * i], flow[2 * i + 1], gt_flow[2 * i], gt_flow[2 * i + 1]);
  }
  return acc.value();
}

Tensor<float> warp_occupancy(const Tensor<float>& prev, const Tensor<float>& flow) {
  const int64_t H = prev.dim(0), W = prev.dim(1);
  if (flow.ndim() != 3 || flow.dim(0) != H || flow.dim(1) != W || flow.dim(2) != 2)
    throw Error("warp_occupancy: flow must be [H,W,2]");
  Tensor<float> out({H, W});
  auto sample = [&](double r, double c) -> double {
    const double fr = std::floor(r), fc = std::floor(c);
    const int64_t r0 = static_cast<int64_t>(fr), c0 = static_cast<int64_t>(fc);
    const double ar = r - fr, ac = c - fc;
    double v = 0.0;
    for (int dr = 0; dr < 2; ++dr) {
      for (int dc = 0; dc < 2; ++dc) {
        const int64_t rr = r0 + dr, cc = c0 + dc;
        if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
        const double w = (dr ? ar : 1.0 - ar) * (dc ? ac : 1.0 - ac);
        v += w * prev(rr, cc);
      }
    }
    return v;
  };
  for (int64_t r = 0; r < H; ++r) {
    for (int64_t c = 0; c < W; ++c) {
      const double dx = flow(r, c, 0), dy = flow(r, c, 1);
      if (!std::isfinite(dx) || !std::isfinite(dy))
        throw NumericalError("warp_occupancy: non-finite flow");
      out(r, c) = static_cast<float>(sample(r + dy, c + dx));
    }
  }
  return out;
}

std::vector<Tensor<float>> flow_grounded(const Prediction<float>& pred,
                                         const TargetBatch& targets, int k) {
  const int64_t B = pred.logits_observed.dim(0);
  const int64_t K = pred.logits_observed.dim(1);
  const int64_t H = pred.logits_observed.dim(2), W = pred.logits_observed.dim(3);
  if (k < 1 || k > K) throw Error("flow_grounded: waypoint out of range");

  std::vector<Tensor<float>> out;
  out.reserve(static_cast<size_t>(B));
  for (int64_t b = 0; b < B; ++b) {
    // GT joint occupancy at waypoint k-1 (waypoint 0 = current time).
    Tensor<float> prev({H, W});
    for (int64_t i = 0; i < H * W; ++i) {
      if (k == 1) {
        prev[i] = targets.current[b * H * W + i];
      } else {
        const int64_t base = ((b * K) + (k - 2)) * H * W;
        prev[i] = clip01(targets.observed[base + i] + targets.occluded[base + i]);
      }
    }
    Tensor<float> fl({H, W, 2});
    const int64_t fbase = ((b * K) + (k - 1)) * H * W * 2;
    for (int64_t i = 0; i < H * W * 2; ++i) fl[i] = pred.flow[fbase + i];
    Tensor<float> warped = warp_occupancy(prev, fl);

    const int64_t lbase = ((b * K) + (k - 1)) * H * W;
    Tensor<float> grounded({H, W});
    for (int64_t i = 0; i < H * W; ++i) {
      const float occ_prob = clip01(sigmoidf(pred.logits_observed[lbase + i]) +
                                    sigmoidf(pred.logits_occluded[lbase + i]));
      grounded[i] = warped[i] * occ_prob;
    }
    out.push_back(std::move(grounded));
  }
  return out;
}

struct MetricAccumulator::Impl {
  int waypoints;
  std::vector<PrAucAccum> auc_obs, auc_occ, auc_fg;
  std::vector<SoftIouAccum> iou_obs, iou_occ, iou_fg;
  std::vector<EpeAccum> epe;

  explicit Impl(int k)
      : waypoints(k),
        auc_obs(static_cast<size_t>(k)),
        auc_occ(static_cast<size_t>(k)),
        auc_fg(static_cast<size_t>(k)),
        iou_obs(static_cast<size_t>(k)),
        iou_occ(static_cast<size_t>(k)),
        iou_fg(static_cast<size_t>(k)),
        epe(static_cast<size_t>(k)) {}
};

MetricAccumulator::MetricAccumulator(int waypoints)
    : impl_(std::make_unique<Impl>(waypoints)) {}
MetricAccumulator::~MetricAccumulator() = default;
MetricAccumulator::MetricAccumulator(MetricAccumulator&&) noexcept = default;
MetricAccumulator& MetricAccumulator::operator=(MetricAccumulator&&) noexcept = default;

void MetricAccumulator::add_batch(const Prediction<float>& pred,
                                  const TargetBatch& targets) {
  const int64_t B = pred.logits_observed.dim(0);
  const int64_t K = pred.logits_observed.dim(1);
  const int64_t H = pred.logits_observed.dim(2), W = pred.logits_observed.dim(3);
  if (K != impl_->waypoints) throw Error("metric accumulator waypoint mismatch");
  if (targets.observed.shape() != pred.logits_observed.shape())
    throw Error("metrics: prediction/target shape mismatch");

  for (int64_t b = 0; b < B; ++b) {
    for (int64_t k = 1; k <= K; ++k) {
      const size_t kk = static_cast<size_t>(k - 1);
      const int64_t base = ((b * K) + (k - 1)) * H * W;
      for (int64_t i = 0; i < H * W; ++i) {
        impl_->auc_obs[kk].add(sigmoidf(pred.logits_observed[base + i]),
                               targets.observed[base + i]);
        impl_->iou_obs[kk].add(sigmoidf(pred.logits_observed[base + i]),
                               targets.observed[base + i]);
        impl_->auc_occ[kk].add(sigmoidf(pred.logits_occluded[base + i]),
                               targets.occluded[base + i]);
        impl_->iou_occ[kk].add(sigmoidf(pred.logits_occluded[base + i]),
                               targets.occluded[base + i]);
        if (targets.flow_valid[base + i] > 0.0f) {
          impl_->epe[kk].add(pred.flow[2 * (base + i)], pred.flow[2 * (base + i) + 1],
                             targets.flow[2 * (base + i)],
                             targets.flow[2 * (base + i) + 1]);
        }
      }
    }
  }

  // Flow-grounded channel, one waypoint at a time.
  for (int k = 1; k <= static_cast<int>(K); ++k) {
    const auto grounded = flow_grounded(pred, targets, k);
    const size_t kk = static_cast<size_t>(k - 1);
    for (int64_t b = 0; b < B; ++b) {
      const int64_t base = ((b * K) + (k - 1)) * H * W;
      const Tensor<float>& gr = grounded[static_cast<size_t>(b)];
      for (int64_t i = 0; i < H * W; ++i) {
        const float gt_joint = clip01(targets.observed[base + i] +
                                      targets.occluded[base + i]);
        const float p = clip01(gr[i]);
        impl_->auc_fg[kk].add(p, gt_joint);
        impl_->iou_fg[kk].add(p, gt_joint);
      }
    }
  }
}

MetricReport MetricAccumulator::report(const GridSpec& spec) const {
  MetricReport r;
  r.waypoints = impl_->waypoints;
  const int K = impl_->waypoints;
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  for (int k = 0; k < K; ++k) {
    const size_t kk = static_cast<size_t>(k);
    r.pw_observed_auc.push_back(impl_->auc_obs[kk].value());
    r.pw_observed_soft_iou.push_back(impl_->iou_obs[kk].value());
    r.pw_occluded_auc.push_back(impl_->auc_occ[kk].value());
    r.pw_occluded_soft_iou.push_back(impl_->iou_occ[kk].value());
    r.pw_fg_auc.push_back(impl_->auc_fg[kk].value());
    r.pw_fg_soft_iou.push_back(impl_->iou_fg[kk].value());
    r.pw_epe.push_back(impl_->epe[kk].value());
  }
  r.observed_auc = mean(r.pw_observed_auc);
  r.observed_soft_iou = mean(r.pw_observed_soft_iou);
  r.occluded_auc = mean(r.pw_occluded_auc);
  r.occluded_soft_iou = mean(r.pw_occluded_soft_iou);
  r.fg_auc = mean(r.pw_fg_auc);
  r.fg_soft_iou = mean(r.pw_fg_soft_iou);
  r.epe = mean(r.pw_epe);
  r.epe_meters = r.epe / spec.pixels_per_meter;
  return r;
}

MetricReport evaluate(const Prediction<float>& pred, const TargetBatch& targets,
                      const GridSpec& spec) {
  MetricAccumulator acc(static_cast<int>(pred.logits_observed.dim(1)));
  acc.add_batch(pred, targets);
  return acc.report(spec);
}

}  // namespace occflow
