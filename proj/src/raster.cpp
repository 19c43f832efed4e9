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

#include "occflow/raster.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace occflow {

namespace {

// Integer Bresenham stroke between rounded cell centers, clipped to bounds.
void draw_polyline(const MapPolyline& pl, const GridSpec& spec, float* channel) {
  const int W = spec.width;
  auto plot = [&](int r, int c) {
    if (spec.in_bounds(r, c)) channel[r * W + c] = 1.0f;
  };
  for (size_t i = 0; i + 1 < pl.points.size(); ++i) {
    const GridCoord a = spec.world_to_grid(pl.points[i]);
    const GridCoord b = spec.world_to_grid(pl.points[i + 1]);
    int r0 = static_cast<int>(std::llround(a.row));
    int c0 = static_cast<int>(std::llround(a.col));
    const int r1 = static_cast<int>(std::llround(b.row));
    const int c1 = static_cast<int>(std::llround(b.col));
    const int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
    const int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
    int err = dc - dr;
    while (true) {
      plot(r0, c0);
      if (r0 == r1 && c0 == c1) break;
      const int e2 = 2 * err;
      if (e2 > -dr) {
        err -= dr;
        c0 += sc;
      }
      if (e2 < dc) {
        err += dc;
        r0 += sr;
      }
    }
  }
}

OrientedBox agent_box(const AgentTrack& a, int t) {
  return OrientedBox{a.positions[static_cast<size_t>(t)],
                     a.headings[static_cast<size_t>(t)], a.length_m, a.width_m};
}

}  // namespace

void for_each_covered_cell(const OrientedBox& box, const GridSpec& spec,
                           const std::function<void(int, int)>& fn) {
  const GridCoord center = spec.world_to_grid(box.center);
  const double half_diag =
      0.5 * std::hypot(box.length, box.width) * spec.pixels_per_meter;
  const int r0 = std::max(0, static_cast<int>(std::floor(center.row - half_diag)) - 1);
  const int r1 = std::min(spec.height - 1,
                          static_cast<int>(std::ceil(center.row + half_diag)) + 1);
  const int c0 = std::max(0, static_cast<int>(std::floor(center.col - half_diag)) - 1);
  const int c1 = std::min(spec.width - 1,
                          static_cast<int>(std::ceil(center.col + half_diag)) + 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (box.contains(spec.grid_to_world(r, c))) fn(r, c);
    }
  }
}

RasterStack rasterize_history(const Scene& scene, const GridSpec& spec,
                              const RenderOptions& opts) {
  spec.validate();
  const int H = spec.height, W = spec.width;
  const int T = scene.t_hist;
  RasterStack rs;
  rs.t_hist = T;
  rs.values = Tensor<float>({T + 3, H, W});
  float* data = rs.values.data();

  for (size_t ai = 0; ai < scene.agents.size(); ++ai) {
    const AgentTrack& a = scene.agents[ai];
    if (!a.observed_now) continue;
    if (!opts.include_sdc && static_cast<int>(ai) == scene.sdc_index) continue;
    for (int t = 0; t < T; ++t) {
      if (!a.validity[static_cast<size_t>(t)]) continue;
      float* channel = data + static_cast<int64_t>(t) * H * W;
      for_each_covered_cell(agent_box(a, t), spec,
                            [&](int r, int c) { channel[r * W + c] = 1.0f; });
    }
  }

  for (const MapPolyline& pl : scene.polylines) {
    const int ch = T + static_cast<int>(pl.kind);
    draw_polyline(pl, spec, data + static_cast<int64_t>(ch) * H * W);
  }
  return rs;
}

OccupancyFlowTargets render_targets(const Scene& scene, const GridSpec& spec,
                                    const RenderOptions& opts) {
  spec.validate();
  const int H = spec.height, W = spec.width;
  const int K = opts.waypoints;
  const int cur = scene.current_index();
  if (scene.t_future < K * opts.waypoint_stride)
    throw DataError("scene future too short for requested waypoints");

  OccupancyFlowTargets tg;
  tg.waypoints = K;
  tg.observed = Tensor<float>({K, H, W});
  tg.occluded = Tensor<float>({K, H, W});
  tg.flow = Tensor<float>({K, H, W, 2});
  tg.flow_valid = Tensor<float>({K, H, W});
  tg.current = Tensor<float>({H, W});

  auto usable = [&](const AgentTrack& a, size_t ai) {
    (void)a;
    return opts.include_sdc || static_cast<int>(ai) != scene.sdc_index;
  };

  // Current-time joint occupancy. Occluded agents are invalid throughout
  // history, so only observed agents can contribute here.
  for (size_t ai = 0; ai < scene.agents.size(); ++ai) {
    const AgentTrack& a = scene.agents[ai];
    if (!usable(a, ai) || !a.validity[static_cast<size_t>(cur)]) continue;
    for_each_covered_cell(agent_box(a, cur), spec,
                          [&](int r, int c) { tg.current(r, c) = 1.0f; });
  }

  // Cell ownership per waypoint: the lowest agent id wins. The owner decides
  // both the occupancy channel (observed vs occluded) and the flow vector,
  // which keeps observed*occluded == 0 cellwise.
  std::vector<int64_t> owner_id(static_cast<size_t>(H) * W);
  std::vector<int32_t> owner_idx(static_cast<size_t>(H) * W);
  for (int k = 1; k <= K; ++k) {
    const int idx = cur + k * opts.waypoint_stride;
    const int prev_idx = idx - opts.waypoint_stride;
    std::fill(owner_id.begin(), owner_id.end(), INT64_MAX);
    std::fill(owner_idx.begin(), owner_idx.end(), -1);

    for (size_t ai = 0; ai < scene.agents.size(); ++ai) {
      const AgentTrack& a = scene.agents[ai];
      if (!usable(a, ai) || !a.validity[static_cast<size_t>(idx)]) continue;
      for_each_covered_cell(agent_box(a, idx), spec, [&](int r, int c) {
        const size_t cell = static_cast<size_t>(r) * W + c;
        if (a.id < owner_id[cell]) {
          owner_id[cell] = a.id;
          owner_idx[cell] = static_cast<int32_t>(ai);
        }
      });
      if (opts.waypoint_union) {
        // Optional: occupancy as the union over the interval's frames. The
        // extra frames only mark occupancy; ownership/flow stay at the final
        // frame's state.
        for (int f = idx - opts.waypoint_stride + 1; f < idx; ++f) {
          if (f <= cur || !a.validity[static_cast<size_t>(f)]) continue;
          auto& grid = a.observed_now ? tg.observed : tg.occluded;
          for_each_covered_cell(agent_box(a, f), spec, [&](int r, int c) {
            grid(k - 1, r, c) = 1.0f;
          });
        }
      }
    }

    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const size_t cell = static_cast<size_t>(r) * W + c;
        const int32_t ai = owner_idx[cell];
        if (ai < 0) continue;
        const AgentTrack& a = scene.agents[static_cast<size_t>(ai)];
        if (a.observed_now)
          tg.observed(k - 1, r, c) = 1.0f;
        else
          tg.occluded(k - 1, r, c) = 1.0f;
        if (!a.validity[static_cast<size_t>(prev_idx)]) continue;

        // Backward flow: where this cell's body point was one waypoint ago.
        const Vec2 q = spec.grid_to_world(r, c);
        const double psi = a.headings[static_cast<size_t>(idx)];
        const Vec2 d = q - a.positions[static_cast<size_t>(idx)];
        const double cs = std::cos(psi), sn = std::sin(psi);
        const Vec2 body{cs * d.x + sn * d.y, -sn * d.x + cs * d.y};
        const double psi_p = a.headings[static_cast<size_t>(prev_idx)];
        const double cp = std::cos(psi_p), sp = std::sin(psi_p);
        const Vec2 prev = a.positions[static_cast<size_t>(prev_idx)] +
                          Vec2{cp * body.x - sp * body.y, sp * body.x + cp * body.y};
        const GridCoord g = spec.world_to_grid(prev);
        tg.flow(k - 1, r, c, 0) = static_cast<float>(g.col - c);  // dx
        tg.flow(k - 1, r, c, 1) = static_cast<float>(g.row - r);  // dy
        tg.flow_valid(k - 1, r, c) = 1.0f;
      }
    }
    if (opts.waypoint_union) {
      // Union frames bypass ownership; restore channel exclusivity.
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
          if (tg.observed(k - 1, r, c) > 0.0f) tg.occluded(k - 1, r, c) = 0.0f;
    }
  }
  return tg;
}

}  // namespace occflow
