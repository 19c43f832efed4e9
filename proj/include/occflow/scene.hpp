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

#ifndef OCCFLOW_SCENE_HPP_
#define OCCFLOW_SCENE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "occflow/common.hpp"
#include "occflow/geometry.hpp"

namespace occflow {

// One agent track spanning history and future. positions/headings/validity
// all have length t_hist + t_future; index t_hist-1 is the current step.
struct AgentTrack {
  int64_t id = 0;
  std::vector<Vec2> positions;
  std::vector<double> headings;
  std::vector<bool> validity;
  double length_m = 0.0;
  double width_m = 0.0;
  // Visible at the current timestep. Agents with observed_now == false are
  // occluded throughout history (validity false up to and including the
  // current index) and only appear in the future.
  bool observed_now = true;

  bool operator==(const AgentTrack&) const = default;
};

enum class PolylineKind { lane_center, road_edge, crosswalk };

const char* to_string(PolylineKind k);
PolylineKind polyline_kind_from_string(const std::string& s);

struct MapPolyline {
  int64_t id = 0;
  std::vector<Vec2> points;  // length >= 2, consecutive points distinct
  PolylineKind kind = PolylineKind::lane_center;

  bool operator==(const MapPolyline&) const = default;
};

struct Scene {
  std::string scene_id;
  double dt = 0.1;
  int t_hist = 11;   // past steps including current
  int t_future = 80; // future steps
  int sdc_index = 0; // index into agents
  std::vector<AgentTrack> agents;
  std::vector<MapPolyline> polylines;

  int current_index() const { return t_hist - 1; }
  int total_steps() const { return t_hist + t_future; }

  bool operator==(const Scene&) const = default;
};

enum class MotionModel { constant_velocity, constant_turn, stopped };

enum class MapStyle { grid_roads, single_curve, empty };

const char* to_string(MapStyle s);
MapStyle map_style_from_string(const std::string& s);

struct MotionMix {
  double constant_velocity = 1.0;
  double constant_turn = 1.0;
  double stopped = 1.0;

  bool operator==(const MotionMix&) const = default;
};

struct SceneRecipe {
  int num_agents = 8;
  int num_occluded = 0;
  MotionMix motion_mix;
  double speed_min = 0.0;  // m/s
  double speed_max = 8.0;
  MapStyle map_style = MapStyle::grid_roads;
  uint64_t rng_seed = 0;

  bool operator==(const SceneRecipe&) const = default;
};

// Throws ConfigError naming the offending field.
void validate_recipe(const SceneRecipe& recipe);

// Deterministic in rng_seed. The first agent is the SDC. Occluded agents have
// observed_now=false, validity false over history and true over the future.
Scene generate_scene(const SceneRecipe& recipe);

// Closed-form track integration used by the generator; exposed for tests.
// start pose is placed at index current (= t_hist-1); the track is integrated
// forward over the future and backward over the history.
AgentTrack simulate_track(int64_t id, MotionModel motion, Vec2 start,
                          double heading, double speed, double yaw_rate,
                          double dt, int t_hist, int t_future, double length_m,
                          double width_m);

// Rigidly maps the scene so the SDC's current position is (0,0) and its
// current heading is +pi/2 (grid-up). Pure; distances are preserved.
Scene transform_to_sdc_frame(const Scene& scene);

// JSON-lines serialization, one scene per line, schema_version 1, floats at
// full round-trip precision.
void save_scenes(const std::vector<Scene>& scenes,
                 const std::filesystem::path& path);
std::vector<Scene> load_scenes(const std::filesystem::path& path);

}  // namespace occflow

#endif  // OCCFLOW_SCENE_HPP_
