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

#ifndef OCCFLOW_PIPELINE_HPP_
#define OCCFLOW_PIPELINE_HPP_

#include <span>
#include <vector>

#include "occflow/objective.hpp"
#include "occflow/raster.hpp"
#include "occflow/scene.hpp"
#include "occflow/tensor.hpp"
#include "occflow/vectorize.hpp"

namespace occflow {

// One scene prepared for the model: SDC-frame transform applied once, then
// raster, vectors and supervision rendered from the same transformed scene.
struct Example {
  Tensor<float> raster;  // [t_hist+3, H, W]
  VectorSet vectors;
  OccupancyFlowTargets targets;
};

inline Example prepare_example(const Scene& world_scene, const GridSpec& spec,
                               const VectorizeOptions& vec_opts = {},
                               const RenderOptions& render_opts = {}) {
  const Scene s = transform_to_sdc_frame(world_scene);
  Example ex;
  ex.raster = rasterize_history(s, spec, render_opts).values;
  ex.vectors = vectorize_scene(s, vec_opts);
  ex.targets = render_targets(s, spec, render_opts);
  return ex;
}

// Stacks per-example rasters into the [B, C, H, W] model input.
inline Tensor<float> batch_rasters(std::span<const Example> batch) {
  if (batch.empty()) throw DataError("batch_rasters: empty batch");
  const Shape& s = batch[0].raster.shape();
  Tensor<float> out({static_cast<int64_t>(batch.size()), s[0], s[1], s[2]});
  const int64_t stride = batch[0].raster.numel();
  for (size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].raster.shape() != s)
      throw DataError("batch_rasters: inconsistent raster shapes");
    std::copy_n(batch[b].raster.data(), stride, out.data() + b * stride);
  }
  return out;
}

inline std::vector<VectorSet> batch_vectors(std::span<const Example> batch) {
  std::vector<VectorSet> out;
  out.reserve(batch.size());
  for (const Example& ex : batch) out.push_back(ex.vectors);
  return out;
}

inline TargetBatch batch_targets(std::span<const Example> batch) {
  std::vector<OccupancyFlowTargets> ts;
  ts.reserve(batch.size());
  for (const Example& ex : batch) ts.push_back(ex.targets);
  return stack_targets(ts);
}

}  // namespace occflow

#endif  // OCCFLOW_PIPELINE_HPP_
