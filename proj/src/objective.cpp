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

#include "occflow/objective.hpp"

#include <algorithm>

namespace occflow {

const char* to_string(FlowLossMasking m) {
  return m == FlowLossMasking::gt_occupied ? "gt_occupied" : "all_cells";
}

FlowLossMasking flow_masking_from_string(const std::string& s) {
  if (s == "gt_occupied") return FlowLossMasking::gt_occupied;
  if (s == "all_cells") return FlowLossMasking::all_cells;
  throw ConfigError("unknown loss.flow_masking: " + s);
}

const char* to_string(ModelVariant v) {
  return v == ModelVariant::fused ? "fused" : "vgg_only";
}

ModelVariant variant_from_string(const std::string& s) {
  if (s == "fused") return ModelVariant::fused;
  if (s == "vgg_only") return ModelVariant::vgg_only;
  throw ConfigError("unknown variant: " + s);
}

TargetBatch stack_targets(std::span<const OccupancyFlowTargets> targets) {
  if (targets.empty()) throw DataError("stack_targets: empty batch");
  const int64_t B = static_cast<int64_t>(targets.size());
  const int64_t K = targets[0].observed.dim(0);
  const int64_t H = targets[0].observed.dim(1), W = targets[0].observed.dim(2);
  TargetBatch tb;
  tb.observed = Tensor<float>({B, K, H, W});
  tb.occluded = Tensor<float>({B, K, H, W});
  tb.flow = Tensor<float>({B, K, H, W, 2});
  tb.flow_valid = Tensor<float>({B, K, H, W});
  tb.current = Tensor<float>({B, H, W});
  for (int64_t b = 0; b < B; ++b) {
    const OccupancyFlowTargets& t = targets[static_cast<size_t>(b)];
    if (t.observed.dim(0) != K || t.observed.dim(1) != H || t.observed.dim(2) != W)
      throw DataError("stack_targets: inconsistent grid shapes in batch");
    std::copy_n(t.observed.data(), K * H * W, tb.observed.data() + b * K * H * W);
    std::copy_n(t.occluded.data(), K * H * W, tb.occluded.data() + b * K * H * W);
    std::copy_n(t.flow.data(), K * H * W * 2, tb.flow.data() + b * K * H * W * 2);
    std::copy_n(t.flow_valid.data(), K * H * W,
                tb.flow_valid.data() + b * K * H * W);
    std::copy_n(t.current.data(), H * W, tb.current.data() + b * H * W);
  }
  return tb;
}

}  // namespace occflow
