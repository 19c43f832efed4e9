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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "occflow/ofgrid.hpp"
#include "occflow/raster.hpp"
#include "occflow/rng.hpp"
#include "occflow/scene.hpp"

using namespace occflow;

namespace {

// Independent oracle: test every cell center against the rotated rectangle.
Tensor<float> brute_force_box_grid(const OrientedBox& box, const GridSpec& spec) {
  Tensor<float> grid({spec.height, spec.width});
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c)
      if (box.contains(spec.grid_to_world(r, c))) grid(r, c) = 1.0f;
  return grid;
}

// The SDC is given a degenerate box between cell centers so it never lights a
// cell and the remaining agent's footprint can be checked in isolation.
Scene single_agent_scene(const AgentTrack& agent) {
  Scene s;
  AgentTrack sdc = simulate_track(100, MotionModel::stopped, {0.1, 0.1}, M_PI / 2,
                                  0, 0, 0.1, s.t_hist, s.t_future, 4.5, 2.0);
  sdc.length_m = 1e-9;
  sdc.width_m = 1e-9;
  s.agents = {sdc, agent};
  s.sdc_index = 0;
  return s;
}

int64_t mismatch_count(const float* a, const float* b, int64_t n) {
  int64_t bad = 0;
  for (int64_t i = 0; i < n; ++i) bad += (a[i] != b[i]) ? 1 : 0;
  return bad;
}

double channel_sum(const Tensor<float>& t, int ch) {
  const int64_t plane = t.dim(1) * t.dim(2);
  double total = 0;
  for (int64_t i = 0; i < plane; ++i) total += t[ch * plane + i];
  return total;
}

}  // namespace

TEST_CASE("world_to_grid has the documented anchor points") {
  GridSpec spec;
  const GridCoord origin = spec.world_to_grid({0, 0});
  CHECK(origin.row == doctest::Approx(128.0).epsilon(1e-12));
  CHECK(origin.col == doctest::Approx(128.0).epsilon(1e-12));
  const GridCoord ahead = spec.world_to_grid({0, 10});  // 10 m forward
  CHECK(ahead.row == doctest::Approx(96.0).epsilon(1e-12));
  CHECK(ahead.col == doctest::Approx(128.0).epsilon(1e-12));
}

TEST_CASE("world/grid transforms are mutually inverse") {
  GridSpec spec;
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    const Vec2 p{rng.uniform(-40, 40), rng.uniform(-40, 40)};
    const GridCoord g = spec.world_to_grid(p);
    const Vec2 back = spec.grid_to_world(g.row, g.col);
    CHECK(std::abs(back.x - p.x) < 1e-9);
    CHECK(std::abs(back.y - p.y) < 1e-9);
  }
}

TEST_CASE("empty scene rasterizes to all-zero channels") {
  Scene s;  // no agents, no map
  GridSpec spec;
  const RasterStack rs = rasterize_history(s, spec);
  CHECK(rs.values.shape() == Shape{14, 256, 256});
  double total = 0;
  for (int64_t i = 0; i < rs.values.numel(); ++i) total += rs.values[i];
  CHECK(total == 0.0);
}

TEST_CASE("stopped agent: identical footprint in all history channels, oracle-exact") {
  GridSpec spec;
  AgentTrack agent = simulate_track(1, MotionModel::stopped, {0, 0}, 0.3, 0, 0,
                                    0.1, 11, 80, 4.0, 2.0);
  const Scene s = single_agent_scene(agent);
  const RasterStack rs = rasterize_history(s, spec);

  const Tensor<float> oracle =
      brute_force_box_grid(OrientedBox{{0, 0}, 0.3, 4.0, 2.0}, spec);
  int64_t footprint = 0;
  for (int64_t i = 0; i < oracle.numel(); ++i) footprint += oracle[i] > 0 ? 1 : 0;
  CHECK(footprint > 50);  // ~4*2*3.2^2 = 82 cells

  const int64_t plane = 256 * 256;
  for (int t = 0; t < 11; ++t)
    CHECK(mismatch_count(rs.values.data() + t * plane, oracle.data(), plane) == 0);
}

TEST_CASE("rasterization matches the point-in-rotated-rect oracle on random boxes") {
  GridSpec spec;
  Rng rng(4242);
  const int64_t plane = 256 * 256;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 center{rng.uniform(-45, 45), rng.uniform(-45, 45)};
    const double heading = rng.uniform(-M_PI, M_PI);
    const double length = rng.uniform(0.5, 12.0);
    const double width = rng.uniform(0.5, 4.0);
    AgentTrack agent = simulate_track(1, MotionModel::stopped, center, heading, 0,
                                      0, 0.1, 11, 80, length, width);
    const Scene s = single_agent_scene(agent);
    const RasterStack rs = rasterize_history(s, spec);
    const Tensor<float> oracle =
        brute_force_box_grid(OrientedBox{center, heading, length, width}, spec);
    REQUIRE(mismatch_count(rs.values.data() + 10 * plane, oracle.data(), plane) == 0);
  }
}

TEST_CASE("occluded agents contribute nothing to history channels") {
  AgentTrack agent = simulate_track(1, MotionModel::stopped, {0, 5}, 0, 0, 0, 0.1,
                                    11, 80, 4.0, 2.0);
  agent.observed_now = false;
  for (int t = 0; t <= 10; ++t) agent.validity[(size_t)t] = false;
  const Scene s = single_agent_scene(agent);
  const RasterStack rs = rasterize_history(s, GridSpec{});
  for (int t = 0; t < 11; ++t) CHECK(channel_sum(rs.values, t) == 0.0);
}

TEST_CASE("map polylines land in their kind's channel") {
  Scene s;
  AgentTrack sdc = simulate_track(0, MotionModel::stopped, {0, 0}, M_PI / 2, 0, 0,
                                  0.1, s.t_hist, s.t_future, 1e-9, 1e-9);
  s.agents = {sdc};
  s.polylines.push_back({0, {{-5, 0}, {5, 0}}, PolylineKind::road_edge});
  const RasterStack rs = rasterize_history(s, GridSpec{});
  CHECK(channel_sum(rs.values, 11) == 0.0);
  CHECK(channel_sum(rs.values, 12) > 0.0);
  CHECK(channel_sum(rs.values, 13) == 0.0);
}

TEST_CASE("stopped scene: zero flow, constant occupancy across waypoints") {
  AgentTrack agent = simulate_track(1, MotionModel::stopped, {2, 3}, 0.7, 0, 0,
                                    0.1, 11, 80, 4.0, 2.0);
  const Scene s = single_agent_scene(agent);
  const OccupancyFlowTargets tg = render_targets(s, GridSpec{});
  const int64_t plane = 256 * 256;
  int64_t bad = 0;
  double flow_mag = 0;
  for (int k = 0; k < 8; ++k) {
    bad += mismatch_count(tg.observed.data() + k * plane, tg.observed.data(), plane);
    for (int64_t i = 0; i < plane; ++i) {
      if (tg.flow_valid[k * plane + i] > 0)
        flow_mag += std::abs(tg.flow[2 * (k * plane + i)]) +
                    std::abs(tg.flow[2 * (k * plane + i) + 1]);
    }
  }
  CHECK(bad == 0);
  CHECK(flow_mag == 0.0);
}

TEST_CASE("translating agent: backward flow is (0, +16) cells at 5 m/s grid-up") {
  // 5 m/s along +y for 1 s is 16 cells toward row 0, so the backward flow at
  // an occupied cell points 16 row-cells the other way.
  AgentTrack agent = simulate_track(1, MotionModel::constant_velocity, {0, -20},
                                    M_PI / 2, 5.0, 0, 0.1, 11, 80, 4.0, 2.0);
  const Scene s = single_agent_scene(agent);
  const OccupancyFlowTargets tg = render_targets(s, GridSpec{});
  int64_t checked = 0, bad = 0;
  const int64_t plane = 256 * 256;
  for (int k = 0; k < 8; ++k) {
    for (int64_t i = 0; i < plane; ++i) {
      if (tg.flow_valid[k * plane + i] == 0) continue;
      ++checked;
      if (std::abs(tg.flow[2 * (k * plane + i)] - 0.0f) > 1e-4f) ++bad;
      if (std::abs(tg.flow[2 * (k * plane + i) + 1] - 16.0f) > 1e-4f) ++bad;
    }
  }
  CHECK(checked > 100);
  CHECK(bad == 0);
}

TEST_CASE("agents appearing in the future go to the occluded channel only") {
  AgentTrack agent = simulate_track(1, MotionModel::stopped, {0, 5}, 0, 0, 0, 0.1,
                                    11, 80, 4.0, 2.0);
  agent.observed_now = false;
  for (int t = 0; t <= 10; ++t) agent.validity[(size_t)t] = false;
  const Scene s = single_agent_scene(agent);
  const OccupancyFlowTargets tg = render_targets(s, GridSpec{});
  double occluded_mass = 0, observed_mass = 0, first_wp_flow_valid = 0;
  for (int64_t i = 0; i < tg.observed.numel(); ++i) {
    occluded_mass += tg.occluded[i];
    observed_mass += tg.observed[i];
  }
  const int64_t plane = 256 * 256;
  for (int64_t i = 0; i < plane; ++i) first_wp_flow_valid += tg.flow_valid[i];
  CHECK(occluded_mass > 0.0);
  CHECK(observed_mass == 0.0);
  // the agent does not exist at waypoint 0, so k=1 flow is invalid everywhere
  CHECK(first_wp_flow_valid == 0.0);
}

TEST_CASE("observed and occluded occupancy are disjoint on generated scenes") {
  for (uint64_t seed : {41u, 42u, 43u}) {
    SceneRecipe r;
    r.num_agents = 10;
    r.num_occluded = 3;
    r.rng_seed = seed;
    const Scene s = transform_to_sdc_frame(generate_scene(r));
    const OccupancyFlowTargets tg = render_targets(s, GridSpec{});
    double overlap = 0;
    for (int64_t i = 0; i < tg.observed.numel(); ++i)
      overlap += tg.observed[i] * tg.occluded[i];
    CHECK(overlap == 0.0);
  }
}

TEST_CASE("rigidly translating agents: flow equals the negated displacement") {
  Rng rng(515);
  for (int trial = 0; trial < 10; ++trial) {
    const double speed = rng.uniform(0.0, 8.0);
    const double heading = rng.uniform(-M_PI, M_PI);
    AgentTrack agent = simulate_track(1, MotionModel::constant_velocity,
                                      {rng.uniform(-10, 10), rng.uniform(-10, 10)},
                                      heading, speed, 0, 0.1, 11, 80, 4.0, 2.0);
    const Scene s = single_agent_scene(agent);
    GridSpec spec;
    const OccupancyFlowTargets tg = render_targets(s, spec);
    int64_t bad = 0;
    const int64_t plane = 256 * 256;
    for (int k = 0; k < 8; ++k) {
      // displacement over this waypoint's 1 s interval, in cells
      const size_t i1 = 10 + 10 * (size_t)(k + 1), i0 = i1 - 10;
      const double flow_dx =
          -(agent.positions[i1].x - agent.positions[i0].x) * spec.pixels_per_meter;
      const double flow_dy =
          (agent.positions[i1].y - agent.positions[i0].y) * spec.pixels_per_meter;
      for (int64_t i = 0; i < plane; ++i) {
        if (tg.flow_valid[k * plane + i] == 0) continue;
        if (std::abs(tg.flow[2 * (k * plane + i)] - flow_dx) > 1e-4) ++bad;
        if (std::abs(tg.flow[2 * (k * plane + i) + 1] - flow_dy) > 1e-4) ++bad;
      }
    }
    REQUIRE(bad == 0);
  }
}

TEST_CASE("raster is invariant to a global rigid transform of the scene") {
  SceneRecipe r;
  r.num_agents = 5;
  r.num_occluded = 1;
  r.rng_seed = 77;
  const Scene base = generate_scene(r);

  auto apply_rigid = [](const Scene& s, double angle, Vec2 t) {
    Scene out = s;
    const RigidTransform tf = RigidTransform::about({0, 0}, angle, t);
    for (auto& a : out.agents) {
      for (auto& p : a.positions) p = tf.apply(p);
      for (auto& h : a.headings) h = wrap_angle(h + angle);
    }
    for (auto& pl : out.polylines)
      for (auto& p : pl.points) p = tf.apply(p);
    return out;
  };

  GridSpec spec;
  const RasterStack rs0 = rasterize_history(transform_to_sdc_frame(base), spec);

  SUBCASE("integer-cell translation: exact equality") {
    const double cell = 1.0 / spec.pixels_per_meter;
    const Scene moved = apply_rigid(base, 0.0, {16 * cell, -8 * cell});
    const RasterStack rs1 = rasterize_history(transform_to_sdc_frame(moved), spec);
    CHECK(rs0.values == rs1.values);
  }

  SUBCASE("general rigid transform: within one boundary cell") {
    const Scene moved = apply_rigid(base, 1.1, {23.4, -7.9});
    const RasterStack rs1 = rasterize_history(transform_to_sdc_frame(moved), spec);
    // every lit cell of one raster must have a lit neighbor (Chebyshev <= 1)
    // in the other
    auto contained_within_1 = [&](const Tensor<float>& a, const Tensor<float>& b) {
      for (int ch = 0; ch < 14; ++ch)
        for (int rr = 0; rr < 256; ++rr)
          for (int cc = 0; cc < 256; ++cc) {
            if (a(ch, rr, cc) == 0.0f) continue;
            bool ok = false;
            for (int dr = -1; dr <= 1 && !ok; ++dr)
              for (int dc = -1; dc <= 1 && !ok; ++dc) {
                const int r2 = rr + dr, c2 = cc + dc;
                if (r2 >= 0 && r2 < 256 && c2 >= 0 && c2 < 256 && b(ch, r2, c2) > 0)
                  ok = true;
              }
            if (!ok) return false;
          }
      return true;
    };
    CHECK(contained_within_1(rs0.values, rs1.values));
    CHECK(contained_within_1(rs1.values, rs0.values));
  }
}

TEST_CASE("ofgrid container round-trips tensors with extra header fields") {
  const Scene s = transform_to_sdc_frame(generate_scene([] {
    SceneRecipe r;
    r.num_agents = 4;
    r.rng_seed = 9;
    return r;
  }()));
  const RasterStack rs = rasterize_history(s, GridSpec{});
  const auto path = std::filesystem::temp_directory_path() / "occflow_test.ofgrid";
  write_ofgrid(path, rs.values, {{"kind", "raster"}});
  std::map<std::string, std::string> extra;
  const Tensor<float> back = read_ofgrid(path, &extra);
  CHECK(back == rs.values);
  CHECK(extra.at("kind") == "raster");
  std::filesystem::remove(path);
}
