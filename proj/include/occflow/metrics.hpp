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

#ifndef OCCFLOW_METRICS_HPP_
#define OCCFLOW_METRICS_HPP_

#include <array>
#include <span>
#include <vector>

#include "occflow/fusion.hpp"
#include "occflow/grid.hpp"
#include "occflow/objective.hpp"
#include "occflow/raster.hpp"

namespace occflow {

inline constexpr int kAucThresholds = 100;

// Soft IoU: sum(p*g) / (sum(p) + sum(g) - sum(p*g)); 0 when the denominator
// is 0. Inputs must lie in [0,1] (g binary).
double soft_iou(std::span<const float> p, std::span<const float> g);

// Precision-recall AUC over kAucThresholds linearly spaced thresholds in
// [0,1] (predicted positive means p >= t). Precision is 1 when nothing is
// predicted positive; returns 0 when g has no positives. The curve is walked
// in decreasing-threshold order (non-decreasing recall) and integrated with
// the trapezoid rule over recall.
double pr_auc(std::span<const float> p, std::span<const float> g);

// Mean endpoint error over valid cells; flow buffers interleave (dx, dy).
double flow_epe(std::span<const float> flow, std::span<const float> gt_flow,
                std::span<const float> flow_valid);

// output(r,c) = bilinear sample of prev at (r + dy, c + dx); reads outside
// the grid are zero.
Tensor<float> warp_occupancy(const Tensor<float>& prev, const Tensor<float>& flow);

// Flow-grounded occupancy for waypoint k (1-based): the GT joint occupancy at
// waypoint k-1 warped by the predicted flow, gated by the predicted joint
// occupancy probability. One [H,W] grid per batch item.
std::vector<Tensor<float>> flow_grounded(const Prediction<float>& pred,
                                         const TargetBatch& targets, int k);

struct MetricReport {
  double observed_auc = 0, observed_soft_iou = 0;
  double occluded_auc = 0, occluded_soft_iou = 0;
  double fg_auc = 0, fg_soft_iou = 0;
  double epe = 0;         // cells
  double epe_meters = 0;  // epe / pixels_per_meter
  int waypoints = 8;
  // Headline values are the uniform mean of these.
  std::vector<double> pw_observed_auc, pw_observed_soft_iou;
  std::vector<double> pw_occluded_auc, pw_occluded_soft_iou;
  std::vector<double> pw_fg_auc, pw_fg_soft_iou;
  std::vector<double> pw_epe;
};

// Streaming evaluation: per-waypoint metrics are computed over the
// concatenation of every added batch item, then averaged over waypoints.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(int waypoints = 8);
  ~MetricAccumulator();
  MetricAccumulator(MetricAccumulator&&) noexcept;
  MetricAccumulator& operator=(MetricAccumulator&&) noexcept;

  void add_batch(const Prediction<float>& pred, const TargetBatch& targets);
  MetricReport report(const GridSpec& spec) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

MetricReport evaluate(const Prediction<float>& pred, const TargetBatch& targets,
                      const GridSpec& spec);

}  // namespace occflow

#endif  // OCCFLOW_METRICS_HPP_
