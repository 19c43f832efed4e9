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

#include "occflow/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace occflow {

namespace {

void write_vector(float* row, const Vec2& p1, double h1, const Vec2& p2,
                  double h2, int id) {
  row[0] = static_cast<float>(p1.x);
  row[1] = static_cast<float>(p1.y);
  row[2] = static_cast<float>(std::cos(h1));
  row[3] = static_cast<float>(std::sin(h1));
  row[4] = static_cast<float>(p2.x);
  row[5] = static_cast<float>(p2.y);
  row[6] = static_cast<float>(std::cos(h2));
  row[7] = static_cast<float>(std::sin(h2));
  row[8] = static_cast<float>(id);
}

}  // namespace

VectorSet vectorize_scene(const Scene& scene, const VectorizeOptions& opts,
                          std::vector<std::string>* warnings) {
  const int cur = scene.current_index();
  VectorSet vs;
  vs.road = Tensor<float>({opts.max_road_vectors, kVectorFeatures});
  vs.road_valid = Tensor<float>({opts.max_road_vectors});
  vs.agents = Tensor<float>({static_cast<int64_t>(opts.max_agents) * kVectorsPerAgent,
                             kVectorFeatures});
  vs.agents_valid = Tensor<float>({static_cast<int64_t>(opts.max_agents) * kVectorsPerAgent});

  // Observed agents with at least one valid history segment, nearest to the
  // SDC first (the scene is in the SDC frame, so the SDC sits at the origin).
  struct Candidate {
    double dist;
    size_t index;
  };
  std::vector<Candidate> candidates;
  for (size_t ai = 0; ai < scene.agents.size(); ++ai) {
    const AgentTrack& a = scene.agents[ai];
    if (!a.observed_now) continue;
    bool any_segment = false;
    for (int t = 0; t + 1 <= cur; ++t) {
      if (a.validity[static_cast<size_t>(t)] && a.validity[static_cast<size_t>(t + 1)]) {
        any_segment = true;
        break;
      }
    }
    if (!any_segment) continue;
    const int ref = a.validity[static_cast<size_t>(cur)] ? cur : cur - 1;
    candidates.push_back({a.positions[static_cast<size_t>(ref)].norm(), ai});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& l, const Candidate& r) { return l.dist < r.dist; });
  if (static_cast<int>(candidates.size()) > opts.max_agents) {
    if (warnings)
      warnings->push_back("dropping " +
                          std::to_string(candidates.size() - opts.max_agents) +
                          " agents beyond the " + std::to_string(opts.max_agents) +
                          " nearest");
    candidates.resize(static_cast<size_t>(opts.max_agents));
  }

  int id = 0;
  for (size_t slot = 0; slot < candidates.size(); ++slot, ++id) {
    const AgentTrack& a = scene.agents[candidates[slot].index];
    for (int t = 0; t + 1 <= cur; ++t) {
      if (!a.validity[static_cast<size_t>(t)] || !a.validity[static_cast<size_t>(t + 1)])
        continue;
      const int64_t row = static_cast<int64_t>(slot) * kVectorsPerAgent + t;
      write_vector(vs.agents.data() + row * kVectorFeatures,
                   a.positions[static_cast<size_t>(t)], a.headings[static_cast<size_t>(t)],
                   a.positions[static_cast<size_t>(t + 1)],
                   a.headings[static_cast<size_t>(t + 1)], id);
      vs.agents_valid[row] = 1.0f;
    }
  }
  vs.agent_elements = id;

  // Road polylines, nearest first, truncated into the vector budget.
  struct RoadCandidate {
    double dist;
    size_t index;
  };
  std::vector<RoadCandidate> roads;
  for (size_t pi = 0; pi < scene.polylines.size(); ++pi) {
    double d = std::numeric_limits<double>::infinity();
    for (const Vec2& p : scene.polylines[pi].points) d = std::min(d, p.norm());
    roads.push_back({d, pi});
  }
  std::stable_sort(roads.begin(), roads.end(),
                   [](const RoadCandidate& l, const RoadCandidate& r) { return l.dist < r.dist; });

  int64_t road_row = 0;
  bool truncated = false;
  for (const RoadCandidate& rc : roads) {
    const MapPolyline& pl = scene.polylines[rc.index];
    if (road_row >= opts.max_road_vectors) {
      truncated = true;
      break;
    }
    bool wrote_any = false;
    for (size_t i = 0; i + 1 < pl.points.size(); ++i) {
      if (road_row >= opts.max_road_vectors) {
        truncated = true;
        break;
      }
      const Vec2 a = pl.points[i], b = pl.points[i + 1];
      const double h = std::atan2(b.y - a.y, b.x - a.x);
      write_vector(vs.road.data() + road_row * kVectorFeatures, a, h, b, h, id);
      vs.road_valid[road_row] = 1.0f;
      ++road_row;
      wrote_any = true;
    }
    if (wrote_any) ++id;
  }
  if (truncated && warnings)
    warnings->push_back("road vectors exceed budget of " +
                        std::to_string(opts.max_road_vectors) +
                        "; kept nearest polylines");

  vs.element_count = id;
  return vs;
}

ConsistencyReport consistency_check(const VectorSet& vs, const RasterStack& rs,
                                    const GridSpec& spec) {
  ConsistencyReport report;
  const int64_t last_channel = rs.t_hist - 1;
  const float* occ = rs.values.data() + last_channel * spec.height * spec.width;

  const int64_t slots = vs.agents_valid.numel() / kVectorsPerAgent;
  for (int64_t slot = 0; slot < slots; ++slot) {
    // Current position = end point of the agent's last valid vector ending at
    // the current step.
    const int64_t row = slot * kVectorsPerAgent + (kVectorsPerAgent - 1);
    if (vs.agents_valid[row] == 0.0f) continue;
    const float* v = vs.agents.data() + row * kVectorFeatures;
    AgentConsistency ac;
    ac.element_id = static_cast<int>(v[8]);
    const GridCoord g = spec.world_to_grid({v[4], v[5]});
    const int r = static_cast<int>(std::llround(g.row));
    const int c = static_cast<int>(std::llround(g.col));
    if (r < -1 || r > spec.height || c < -1 || c > spec.width) {
      ac.checked = false;  // endpoint well outside the grid; footprint cropped
      report.agents.push_back(ac);
      continue;
    }
    ac.checked = true;
    for (int dr = -1; dr <= 1 && !ac.pass; ++dr) {
      for (int dc = -1; dc <= 1 && !ac.pass; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (spec.in_bounds(rr, cc) && occ[rr * spec.width + cc] > 0.0f)
          ac.pass = true;
      }
    }
    report.agents.push_back(ac);
  }
  return report;
}

}  // namespace occflow
