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
#include <set>

#include "doctest.h"
#include "occflow/vectorize.hpp"

using namespace occflow;

namespace {

Scene sdc_only_scene() {
  Scene s;
  AgentTrack sdc = simulate_track(0, MotionModel::stopped, {0, 0}, M_PI / 2, 0, 0,
                                  0.1, s.t_hist, s.t_future, 1e-9, 1e-9);
  s.agents = {sdc};
  s.sdc_index = 0;
  return s;
}

int count_valid(const Tensor<float>& mask) {
  int n = 0;
  for (int64_t i = 0; i < mask.numel(); ++i) n += mask[i] > 0 ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("scene with no usable elements vectorizes to empty masks") {
  Scene s = sdc_only_scene();
  s.agents.clear();  // nothing at all
  AgentTrack ghost = simulate_track(0, MotionModel::stopped, {0, 0}, 0, 0, 0, 0.1,
                                    s.t_hist, s.t_future, 4.0, 2.0);
  ghost.observed_now = false;
  for (int t = 0; t <= 10; ++t) ghost.validity[(size_t)t] = false;
  s.agents = {ghost};
  const VectorSet vs = vectorize_scene(s);
  CHECK(vs.element_count == 0);
  CHECK(count_valid(vs.agents_valid) == 0);
  CHECK(count_valid(vs.road_valid) == 0);
}

TEST_CASE("an agent with 11 valid positions becomes 10 chained vectors") {
  Scene s = sdc_only_scene();
  s.agents.push_back(simulate_track(1, MotionModel::constant_velocity, {2, 1},
                                    0.4, 6.0, 0, 0.1, s.t_hist, s.t_future, 4.5, 2.0));
  const VectorSet vs = vectorize_scene(s);
  // SDC has 10 vectors too (it is an observed agent); the second agent's rows
  // sit in one of the two slots.
  CHECK(vs.element_count == 2);
  CHECK(count_valid(vs.agents_valid) == 20);
  for (int slot = 0; slot < 2; ++slot) {
    for (int t = 0; t < 9; ++t) {
      const int64_t row = slot * kVectorsPerAgent + t;
      REQUIRE(vs.agents_valid[row] == 1.0f);
      // end point of vector t == start point of vector t+1, exactly
      CHECK(vs.agents(row, 4) == vs.agents(row + 1, 0));
      CHECK(vs.agents(row, 5) == vs.agents(row + 1, 1));
    }
  }
}

TEST_CASE("a 5-point polyline becomes 4 chained road vectors sharing one id") {
  Scene s = sdc_only_scene();
  s.polylines.push_back(
      {0, {{0, 0}, {2, 0}, {4, 1}, {6, 3}, {8, 6}}, PolylineKind::lane_center});
  const VectorSet vs = vectorize_scene(s);
  CHECK(count_valid(vs.road_valid) == 4);
  std::set<float> ids;
  for (int i = 0; i < 4; ++i) {
    REQUIRE(vs.road_valid[i] == 1.0f);
    ids.insert(vs.road(i, 8));
    if (i > 0) {
      CHECK(vs.road(i - 1, 4) == vs.road(i, 0));
      CHECK(vs.road(i - 1, 5) == vs.road(i, 1));
    }
  }
  CHECK(ids.size() == 1);
}

TEST_CASE("invalid rows are all-zero and ids are dense in [0, N)") {
  SceneRecipe r;
  r.num_agents = 7;
  r.num_occluded = 2;
  r.rng_seed = 5;
  const Scene s = transform_to_sdc_frame(generate_scene(r));
  const VectorSet vs = vectorize_scene(s);

  std::set<int> ids;
  auto scan = [&](const Tensor<float>& data, const Tensor<float>& valid) {
    for (int64_t i = 0; i < valid.numel(); ++i) {
      const float* row = data.data() + i * kVectorFeatures;
      if (valid[i] == 0.0f) {
        for (int f = 0; f < kVectorFeatures; ++f) CHECK(row[f] == 0.0f);
      } else {
        ids.insert((int)row[8]);
      }
    }
  };
  scan(vs.agents, vs.agents_valid);
  scan(vs.road, vs.road_valid);
  REQUIRE((int)ids.size() == vs.element_count);
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == vs.element_count - 1);
}

TEST_CASE("missing early history leaves leading vectors invalid and zero") {
  Scene s = sdc_only_scene();
  AgentTrack a = simulate_track(1, MotionModel::constant_velocity, {1, 1}, 0.2,
                                4.0, 0, 0.1, s.t_hist, s.t_future, 4.5, 2.0);
  for (int t = 0; t < 4; ++t) a.validity[(size_t)t] = false;  // appears at t=4
  s.agents.push_back(a);
  const VectorSet vs = vectorize_scene(s);
  // find the partial agent's slot: it is the one with 6 valid vectors
  int partial_slot = -1;
  for (int slot = 0; slot < 2; ++slot) {
    int valid = 0;
    for (int t = 0; t < kVectorsPerAgent; ++t)
      valid += vs.agents_valid[slot * kVectorsPerAgent + t] > 0 ? 1 : 0;
    if (valid == 6) partial_slot = slot;
  }
  REQUIRE(partial_slot >= 0);
  for (int t = 0; t < kVectorsPerAgent; ++t) {
    const int64_t row = partial_slot * kVectorsPerAgent + t;
    if (t < 4) {
      CHECK(vs.agents_valid[row] == 0.0f);
      for (int f = 0; f < kVectorFeatures; ++f) CHECK(vs.agents(row, f) == 0.0f);
    } else {
      CHECK(vs.agents_valid[row] == 1.0f);
    }
  }
}

TEST_CASE("agent and road budgets truncate nearest-first with warnings") {
  Scene s = sdc_only_scene();
  for (int i = 1; i <= 5; ++i)
    s.agents.push_back(simulate_track(i, MotionModel::stopped,
                                      {2.0 * i, 0}, 0, 0, 0, 0.1, s.t_hist,
                                      s.t_future, 4.5, 2.0));
  for (int i = 0; i < 4; ++i)
    s.polylines.push_back({i,
                           {{30.0 + i, 0}, {30.0 + i, 5}, {30.0 + i, 10}},
                           PolylineKind::lane_center});

  VectorizeOptions opts;
  opts.max_agents = 3;
  opts.max_road_vectors = 5;
  std::vector<std::string> warnings;
  const VectorSet vs = vectorize_scene(s, opts, &warnings);
  CHECK(warnings.size() == 2);
  // 3 agent slots, all near ones kept: SDC (distance 0), then agents at 2, 4 m
  CHECK(vs.agent_elements == 3);
  CHECK(count_valid(vs.road_valid) == 5);  // 2 polylines x 2 + half of the third
  // nearest polyline fully present, farthest absent
  std::set<float> road_ids;
  for (int64_t i = 0; i < vs.road_valid.numel(); ++i)
    if (vs.road_valid[i] > 0) road_ids.insert(vs.road(i, 8));
  CHECK(road_ids.size() == 3);
}

TEST_CASE("consistency check passes on generated scenes and rejects corruption") {
  SceneRecipe r;
  r.num_agents = 8;
  r.num_occluded = 2;
  r.rng_seed = 12;
  const Scene s = transform_to_sdc_frame(generate_scene(r));
  GridSpec spec;
  const RasterStack rs = rasterize_history(s, spec);
  const VectorSet vs = vectorize_scene(s);
  const ConsistencyReport rep = consistency_check(vs, rs, spec);
  CHECK(rep.all_pass());
  int checked = 0;
  for (const auto& a : rep.agents) checked += a.checked ? 1 : 0;
  CHECK(checked > 0);

  // corrupt: shift all vector coordinates by 5 m (a different transform)
  VectorSet corrupted = vs;
  for (int64_t i = 0; i < corrupted.agents_valid.numel(); ++i) {
    if (corrupted.agents_valid[i] == 0.0f) continue;
    corrupted.agents(i, 0) += 5.0f;
    corrupted.agents(i, 1) += 5.0f;
    corrupted.agents(i, 4) += 5.0f;
    corrupted.agents(i, 5) += 5.0f;
  }
  const ConsistencyReport bad = consistency_check(corrupted, rs, spec);
  CHECK_FALSE(bad.all_pass());
}

TEST_CASE("stopped agent at the origin maps inside its footprint") {
  Scene s = sdc_only_scene();
  s.agents[0] = simulate_track(0, MotionModel::stopped, {0, 0}, M_PI / 2, 0, 0,
                               0.1, s.t_hist, s.t_future, 4.5, 2.0);
  GridSpec spec;
  const RasterStack rs = rasterize_history(s, spec);
  const VectorSet vs = vectorize_scene(s);
  const ConsistencyReport rep = consistency_check(vs, rs, spec);
  REQUIRE(rep.agents.size() == 1);
  CHECK(rep.agents[0].checked);
  CHECK(rep.agents[0].pass);
}

TEST_CASE("agent at the FOV edge still checks within one cell of the crop") {
  Scene s = sdc_only_scene();
  // 40 m is the grid edge at defaults; center the box right on it
  s.agents.push_back(simulate_track(1, MotionModel::stopped, {39.9, 0}, 0, 0, 0,
                                    0.1, s.t_hist, s.t_future, 4.5, 2.0));
  GridSpec spec;
  const RasterStack rs = rasterize_history(s, spec);
  const VectorSet vs = vectorize_scene(s);
  const ConsistencyReport rep = consistency_check(vs, rs, spec);
  CHECK(rep.all_pass());
}
