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
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "occflow/scene.hpp"

using namespace occflow;

namespace {

SceneRecipe basic_recipe(uint64_t seed) {
  SceneRecipe r;
  r.num_agents = 6;
  r.num_occluded = 2;
  r.speed_min = 0.0;
  r.speed_max = 8.0;
  r.map_style = MapStyle::grid_roads;
  r.rng_seed = seed;
  return r;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("generate_scene is deterministic in the seed") {
  const Scene a = generate_scene(basic_recipe(7));
  const Scene b = generate_scene(basic_recipe(7));
  CHECK(a == b);
  const Scene c = generate_scene(basic_recipe(8));
  CHECK(a != c);
}

TEST_CASE("stopped-only recipe yields constant positions") {
  SceneRecipe r = basic_recipe(3);
  r.num_agents = 1;
  r.num_occluded = 0;
  r.motion_mix = {0.0, 0.0, 1.0};
  const Scene s = generate_scene(r);
  REQUIRE(s.agents.size() == 1);
  const AgentTrack& a = s.agents[0];
  for (size_t t = 1; t < a.positions.size(); ++t) {
    CHECK(a.positions[t] == a.positions[0]);
    CHECK(a.headings[t] == a.headings[0]);
  }
}

TEST_CASE("constant-velocity kinematics: 5 m/s along +x covers 5 m per second") {
  // Hand integration: 10 steps of 0.1 s at 5 m/s = 5 m in x, 0 in y.
  const AgentTrack a = simulate_track(0, MotionModel::constant_velocity, {0, 0},
                                      /*heading=*/0.0, /*speed=*/5.0,
                                      /*yaw_rate=*/0.0, 0.1, 11, 80, 4.5, 2.0);
  const Vec2 start = a.positions[10];
  const Vec2 after_1s = a.positions[20];
  CHECK(std::abs(after_1s.x - start.x - 5.0) < 1e-9);
  CHECK(std::abs(after_1s.y - start.y) < 1e-9);
  // history side integrates backwards
  const Vec2 before_1s = a.positions[0];
  CHECK(std::abs(start.x - before_1s.x - 5.0) < 1e-9);
}

TEST_CASE("invalid recipes name the offending field") {
  SceneRecipe r = basic_recipe(1);
  r.num_agents = 0;
  CHECK_THROWS_WITH_AS(generate_scene(r), doctest::Contains("num_agents"),
                       ConfigError);
  r = basic_recipe(1);
  r.num_occluded = r.num_agents;
  CHECK_THROWS_WITH_AS(generate_scene(r), doctest::Contains("num_occluded"),
                       ConfigError);
  r = basic_recipe(1);
  r.motion_mix = {0.0, 0.0, 0.0};
  CHECK_THROWS_WITH_AS(generate_scene(r), doctest::Contains("motion_mix"),
                       ConfigError);
  r = basic_recipe(1);
  r.speed_max = -1.0;
  CHECK_THROWS_WITH_AS(generate_scene(r), doctest::Contains("speed_max"),
                       ConfigError);
}

TEST_CASE("occluded agents are invalid through history and valid in the future") {
  const Scene s = generate_scene(basic_recipe(11));
  int occluded_count = 0;
  for (const AgentTrack& a : s.agents) {
    if (a.observed_now) continue;
    ++occluded_count;
    for (int t = 0; t <= s.current_index(); ++t) CHECK_FALSE(a.validity[(size_t)t]);
    for (int t = s.current_index() + 1; t < s.total_steps(); ++t)
      CHECK(a.validity[(size_t)t]);
  }
  CHECK(occluded_count == 2);
  CHECK(s.agents[(size_t)s.sdc_index].observed_now);
  CHECK(s.agents[(size_t)s.sdc_index].validity[(size_t)s.current_index()]);
}

TEST_CASE("generated trajectories are kinematically smooth") {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const Scene s = generate_scene(basic_recipe(seed));
    for (const AgentTrack& a : s.agents) {
      for (size_t t = 1; t < a.headings.size(); ++t) {
        const double dh = wrap_angle(a.headings[t] - a.headings[t - 1]);
        CHECK(std::abs(dh) <= 0.2);
      }
    }
  }
}

TEST_CASE("scene serialization round-trips exactly") {
  std::vector<Scene> scenes;
  for (uint64_t seed : {21u, 22u, 23u}) scenes.push_back(generate_scene(basic_recipe(seed)));
  const auto path = temp_file("occflow_scenes_rt.jsonl");
  save_scenes(scenes, path);
  const auto loaded = load_scenes(path);
  REQUIRE(loaded.size() == scenes.size());
  CHECK(loaded == scenes);
  std::filesystem::remove(path);
}

TEST_CASE("empty scene list round-trips to an empty list") {
  const auto path = temp_file("occflow_scenes_empty.jsonl");
  save_scenes({}, path);
  CHECK(load_scenes(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("truncated final line reports the line number") {
  const auto path = temp_file("occflow_scenes_trunc.jsonl");
  save_scenes({generate_scene(basic_recipe(5)), generate_scene(basic_recipe(6))}, path);
  // chop the second line in half
  std::ifstream in(path);
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << l1 << "\n" << l2.substr(0, l2.size() / 2);
  out.close();
  CHECK_THROWS_WITH_AS(load_scenes(path), doctest::Contains("line 2"), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("schema version mismatch is a versioned error") {
  const auto path = temp_file("occflow_scenes_ver.jsonl");
  save_scenes({generate_scene(basic_recipe(5))}, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  in.close();
  const auto pos = line.find("\"schema_version\":1");
  REQUIRE(pos != std::string::npos);
  line.replace(pos, 18, "\"schema_version\":2");
  std::ofstream out(path, std::ios::trunc);
  out << line << "\n";
  out.close();
  CHECK_THROWS_WITH_AS(load_scenes(path), doctest::Contains("schema_version"),
                       DataError);
  std::filesystem::remove(path);
}

TEST_CASE("transform_to_sdc_frame: hand-checked rotation") {
  // SDC at (10,0) heading 0; an agent 1 m ahead at (11,0) must land at (0,1).
  Scene s;
  s.t_hist = 11;
  s.t_future = 80;
  const int total = s.total_steps();
  AgentTrack sdc = simulate_track(0, MotionModel::stopped, {10, 0}, 0.0, 0, 0, 0.1,
                                  s.t_hist, s.t_future, 4.5, 2.0);
  AgentTrack other = simulate_track(1, MotionModel::stopped, {11, 0}, 0.0, 0, 0, 0.1,
                                    s.t_hist, s.t_future, 4.5, 2.0);
  s.agents = {sdc, other};
  s.sdc_index = 0;
  REQUIRE(total == (int)s.agents[0].positions.size());

  const Scene out = transform_to_sdc_frame(s);
  const Vec2 sdc_pos = out.agents[0].positions[(size_t)s.current_index()];
  CHECK(std::abs(sdc_pos.x) < 1e-12);
  CHECK(std::abs(sdc_pos.y) < 1e-12);
  CHECK(std::abs(out.agents[0].headings[(size_t)s.current_index()] - M_PI / 2) < 1e-12);
  const Vec2 agent_pos = out.agents[1].positions[(size_t)s.current_index()];
  CHECK(std::abs(agent_pos.x - 0.0) < 1e-9);
  CHECK(std::abs(agent_pos.y - 1.0) < 1e-9);
}

TEST_CASE("transform of a scene already in the SDC frame is the identity") {
  Scene s;
  AgentTrack sdc = simulate_track(0, MotionModel::stopped, {0, 0}, M_PI / 2, 0, 0,
                                  0.1, s.t_hist, s.t_future, 4.5, 2.0);
  AgentTrack other = simulate_track(1, MotionModel::constant_velocity, {3, 4},
                                    1.0, 5.0, 0, 0.1, s.t_hist, s.t_future, 4.5, 2.0);
  s.agents = {sdc, other};
  const Scene out = transform_to_sdc_frame(s);
  for (size_t ai = 0; ai < s.agents.size(); ++ai) {
    for (size_t t = 0; t < s.agents[ai].positions.size(); ++t) {
      CHECK(std::abs(out.agents[ai].positions[t].x - s.agents[ai].positions[t].x) < 1e-9);
      CHECK(std::abs(out.agents[ai].positions[t].y - s.agents[ai].positions[t].y) < 1e-9);
    }
  }
}

TEST_CASE("transform_to_sdc_frame preserves pairwise distances") {
  for (uint64_t seed : {31u, 32u, 33u}) {
    const Scene s = generate_scene(basic_recipe(seed));
    const Scene out = transform_to_sdc_frame(s);
    const int cur = s.current_index();
    for (size_t i = 0; i < s.agents.size(); ++i) {
      for (size_t j = i + 1; j < s.agents.size(); ++j) {
        const double before =
            (s.agents[i].positions[(size_t)cur] - s.agents[j].positions[(size_t)cur]).norm();
        const double after =
            (out.agents[i].positions[(size_t)cur] - out.agents[j].positions[(size_t)cur]).norm();
        CHECK(std::abs(before - after) < 1e-6);
      }
    }
    // polyline points too
    if (!s.polylines.empty() && !s.agents.empty()) {
      const Vec2 p0 = s.polylines[0].points[0];
      const Vec2 q0 = s.agents[0].positions[(size_t)cur];
      const Vec2 p1 = out.polylines[0].points[0];
      const Vec2 q1 = out.agents[0].positions[(size_t)cur];
      CHECK(std::abs((p0 - q0).norm() - (p1 - q1).norm()) < 1e-6);
    }
  }
}
