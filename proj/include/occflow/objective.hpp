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

#ifndef OCCFLOW_OBJECTIVE_HPP_
#define OCCFLOW_OBJECTIVE_HPP_

#include <cmath>
#include <span>
#include <string>

#include "occflow/fusion.hpp"
#include "occflow/raster.hpp"
#include "occflow/tensor.hpp"

namespace occflow {

enum class FlowLossMasking { gt_occupied, all_cells };

const char* to_string(FlowLossMasking m);
FlowLossMasking flow_masking_from_string(const std::string& s);

struct LossConfig {
  double alpha = 1000.0;  // observed-occupancy CE weight
  double beta = 1000.0;   // occluded-occupancy CE weight
  double gamma = 1.0;     // flow L2 weight
  FlowLossMasking flow_masking = FlowLossMasking::gt_occupied;

  void validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0)
      throw ConfigError("loss coefficients must be >= 0");
  }

  bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
  double l_obs = 0.0;
  double l_occ = 0.0;
  double l_flow = 0.0;
  double total = 0.0;
};

// Per-scene targets stacked along the batch dimension.
struct TargetBatch {
  Tensor<float> observed;    // [B, K, H, W]
  Tensor<float> occluded;    // [B, K, H, W]
  Tensor<float> flow;        // [B, K, H, W, 2]
  Tensor<float> flow_valid;  // [B, K, H, W]
  Tensor<float> current;     // [B, H, W]
};

TargetBatch stack_targets(std::span<const OccupancyFlowTargets> targets);

// Mean binary cross-entropy between sigmoid(logit) and a {0,1} target over
// all cells, in log-sum-exp form: max(l,0) - l*g + log(1+exp(-|l|)).
template <typename T>
double occupancy_ce(const Tensor<T>& logits, const Tensor<float>& target) {
  if (logits.shape() != target.shape())
    throw Error("occupancy_ce: shape mismatch " + shape_str(logits.shape()) +
                " vs " + shape_str(target.shape()));
  const int64_t n = logits.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double l = static_cast<double>(logits[i]);
    const double g = static_cast<double>(target[i]);
    acc += std::max(l, 0.0) - l * g + std::log1p(std::exp(-std::abs(l)));
  }
  return acc / static_cast<double>(n);
}

// d occupancy_ce / d logit = (sigmoid(l) - g) / numel, scaled by `weight`.
template <typename T>
void occupancy_ce_grad(const Tensor<T>& logits, const Tensor<float>& target,
                       double weight, Tensor<T>& grad) {
  const int64_t n = logits.numel();
  const double scale = weight / static_cast<double>(n);
  for (int64_t i = 0; i < n; ++i) {
    const double l = static_cast<double>(logits[i]);
    const double sig = 1.0 / (1.0 + std::exp(-l));
    grad[i] = static_cast<T>(scale * (sig - static_cast<double>(target[i])));
  }
}

// Mean squared L2 flow error over the masked cells; 0 when no cell is masked
// in. With all_cells masking every cell counts (gt flow is zero off-support).
template <typename T>
double flow_l2(const Tensor<T>& flow, const Tensor<float>& gt_flow,
               const Tensor<float>& flow_valid,
               FlowLossMasking masking = FlowLossMasking::gt_occupied) {
  if (flow.shape() != gt_flow.shape())
    throw Error("flow_l2: shape mismatch");
  const int64_t cells = flow_valid.numel();
  if (flow.numel() != 2 * cells) throw Error("flow_l2: mask shape mismatch");
  double acc = 0.0;
  int64_t count = 0;
  for (int64_t i = 0; i < cells; ++i) {
    const bool in = masking == FlowLossMasking::all_cells || flow_valid[i] > 0.0f;
    if (!in) continue;
    const double dx = static_cast<double>(flow[2 * i]) - gt_flow[2 * i];
    const double dy = static_cast<double>(flow[2 * i + 1]) - gt_flow[2 * i + 1];
    acc += dx * dx + dy * dy;
    ++count;
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

template <typename T>
void flow_l2_grad(const Tensor<T>& flow, const Tensor<float>& gt_flow,
                  const Tensor<float>& flow_valid, FlowLossMasking masking,
                  double weight, Tensor<T>& grad) {
  const int64_t cells = flow_valid.numel();
  int64_t count = 0;
  if (masking == FlowLossMasking::all_cells) {
    count = cells;
  } else {
    for (int64_t i = 0; i < cells; ++i)
      if (flow_valid[i] > 0.0f) ++count;
  }
  grad.fill(T(0));
  if (count == 0) return;
  const double scale = 2.0 * weight / static_cast<double>(count);
  for (int64_t i = 0; i < cells; ++i) {
    const bool in = masking == FlowLossMasking::all_cells || flow_valid[i] > 0.0f;
    if (!in) continue;
    grad[2 * i] = static_cast<T>(scale * (static_cast<double>(flow[2 * i]) - gt_flow[2 * i]));
    grad[2 * i + 1] =
        static_cast<T>(scale * (static_cast<double>(flow[2 * i + 1]) - gt_flow[2 * i + 1]));
  }
}

template <typename T>
LossBreakdown total_loss(const Prediction<T>& pred, const TargetBatch& tb,
                         const LossConfig& cfg) {
  cfg.validate();
  LossBreakdown lb;
  lb.l_obs = occupancy_ce(pred.logits_observed, tb.observed);
  lb.l_occ = occupancy_ce(pred.logits_occluded, tb.occluded);
  lb.l_flow = flow_l2(pred.flow, tb.flow, tb.flow_valid, cfg.flow_masking);
  lb.total = cfg.alpha * lb.l_obs + cfg.beta * lb.l_occ + cfg.gamma * lb.l_flow;
  return lb;
}

template <typename T>
struct PredictionGrads {
  Tensor<T> logits_observed;
  Tensor<T> logits_occluded;
  Tensor<T> flow;
};

template <typename T>
LossBreakdown total_loss_with_grad(const Prediction<T>& pred, const TargetBatch& tb,
                                   const LossConfig& cfg, PredictionGrads<T>* grads) {
  const LossBreakdown lb = total_loss(pred, tb, cfg);
  if (grads) {
    grads->logits_observed = Tensor<T>(pred.logits_observed.shape());
    grads->logits_occluded = Tensor<T>(pred.logits_occluded.shape());
    grads->flow = Tensor<T>(pred.flow.shape());
    occupancy_ce_grad(pred.logits_observed, tb.observed, cfg.alpha,
                      grads->logits_observed);
    occupancy_ce_grad(pred.logits_occluded, tb.occluded, cfg.beta,
                      grads->logits_occluded);
    flow_l2_grad(pred.flow, tb.flow, tb.flow_valid, cfg.flow_masking, cfg.gamma,
                 grads->flow);
  }
  return lb;
}

}  // namespace occflow

#endif  // OCCFLOW_OBJECTIVE_HPP_
