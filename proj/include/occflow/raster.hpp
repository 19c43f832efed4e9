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

#ifndef OCCFLOW_RASTER_HPP_
#define OCCFLOW_RASTER_HPP_

#include <functional>

#include "occflow/grid.hpp"
#include "occflow/scene.hpp"
#include "occflow/tensor.hpp"

namespace occflow {

// Image-encoder input: t_hist agent-occupancy channels (oldest first)
// followed by 3 map channels (lane_center, road_edge, crosswalk).
struct RasterStack {
  Tensor<float> values;  // [t_hist + 3, H, W], values in [0,1]
  int t_hist = 11;
};

// Supervision grids for the 8 one-second waypoints. Waypoint k (1-based)
// lives at index k-1. Flow is backward (waypoint k -> k-1), stored as
// (dx cols, dy rows) in cells.
struct OccupancyFlowWaypoints {
  Tensor<float> observed;    // [K, H, W] in {0,1}
  Tensor<float> occluded;    // [K, H, W] in {0,1}
  Tensor<float> flow;        // [K, H, W, 2]
  Tensor<float> flow_valid;  // [K, H, W]
  // Joint occupancy at waypoint 0 (the current timestep); origin grid for
  // flow-grounded warping at k=1.
  Tensor<float> current;     // [H, W]
  int waypoints = 8;
};
using OccupancyFlowTargets = OccupancyFlowWaypoints;

struct RenderOptions {
  bool include_sdc = true;       // render/predict the SDC like any agent
  bool waypoint_union = false;   // occupancy as union over the interval's frames
  int waypoint_stride = 10;      // future steps per waypoint
  int waypoints = 8;
};

// Scene must already be in the SDC frame. Cells are set where their center
// lies inside an oriented agent box; map polylines are 1-cell strokes.
// Content outside the field of view is silently cropped.
RasterStack rasterize_history(const Scene& scene, const GridSpec& spec,
                              const RenderOptions& opts = {});

OccupancyFlowTargets render_targets(const Scene& scene, const GridSpec& spec,
                                    const RenderOptions& opts = {});

// Visits every in-bounds cell whose center lies inside the box.
void for_each_covered_cell(const OrientedBox& box, const GridSpec& spec,
                           const std::function<void(int, int)>& fn);

}  // namespace occflow

#endif  // OCCFLOW_RASTER_HPP_
