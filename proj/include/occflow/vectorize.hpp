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

#ifndef OCCFLOW_VECTORIZE_HPP_
#define OCCFLOW_VECTORIZE_HPP_

#include <string>
#include <vector>

#include "occflow/grid.hpp"
#include "occflow/raster.hpp"
#include "occflow/scene.hpp"
#include "occflow/tensor.hpp"

namespace occflow {

// Per-vector feature layout.
inline constexpr int kVectorFeatures = 9;  // x1 y1 cos1 sin1 x2 y2 cos2 sin2 id
// The trailing id is the element grouping key; the encoder consumes only the
// leading geometric features.
inline constexpr int kVectorGeomFeatures = 8;
inline constexpr int kVectorsPerAgent = 10;

struct VectorizeOptions {
  int max_road_vectors = 10000;  // N_R
  int max_agents = 128;
};

// Padded vector sets in the same SDC frame as the raster. Element ids are
// dense in [0, element_count): agent slots first (sorted by distance to the
// SDC), then road polylines (nearest first). Invalid rows are all zero.
struct VectorSet {
  Tensor<float> road;          // [N_R, 9]
  Tensor<float> road_valid;    // [N_R]
  Tensor<float> agents;        // [max_agents*10, 9]; agent a owns rows [10a,10a+10)
  Tensor<float> agents_valid;  // [max_agents*10]
  int element_count = 0;       // N: agent elements + road elements
  int agent_elements = 0;      // ids [0, agent_elements) are agents
};

VectorSet vectorize_scene(const Scene& scene, const VectorizeOptions& opts = {},
                          std::vector<std::string>* warnings = nullptr);

struct AgentConsistency {
  int element_id = 0;    // agent slot
  bool checked = false;  // false when the endpoint left the FOV entirely
  bool pass = false;
};

struct ConsistencyReport {
  std::vector<AgentConsistency> agents;
  bool all_pass() const {
    for (const auto& a : agents)
      if (a.checked && !a.pass) return false;
    return true;
  }
};

// Checks that each agent's current-timestep vector endpoint lands inside (or
// within 1 cell of) the rasterized occupancy in the last history channel.
// Both inputs must come from the same SDC-frame scene.
ConsistencyReport consistency_check(const VectorSet& vs, const RasterStack& rs,
                                    const GridSpec& spec);

}  // namespace occflow

#endif  // OCCFLOW_VECTORIZE_HPP_
