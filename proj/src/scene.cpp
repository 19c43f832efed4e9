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

#include "occflow/scene.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "occflow/common.hpp"
#include "occflow/rng.hpp"

namespace occflow {

namespace {

using json = nlohmann::ordered_json;

constexpr int kMaxObservedAgents = 128;

// Sampled box extents, typical passenger cars.
constexpr double kMinLength = 4.2, kMaxLength = 5.2;
constexpr double kMinWidth = 1.8, kMaxWidth = 2.1;

MotionModel sample_motion(Rng& rng, const MotionMix& mix) {
  const double total = mix.constant_velocity + mix.constant_turn + mix.stopped;
  const double u = rng.uniform(0.0, total);
  if (u < mix.constant_velocity) return MotionModel::constant_velocity;
  if (u < mix.constant_velocity + mix.constant_turn)
    return MotionModel::constant_turn;
  return MotionModel::stopped;
}

std::vector<Vec2> line_points(Vec2 a, Vec2 b, double spacing) {
  const double len = (b - a).norm();
  const int n = std::max(2, static_cast<int>(len / spacing) + 1);
  std::vector<Vec2> pts;
  pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    pts.push_back({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
  }
  return pts;
}

std::vector<Vec2> arc_points(Vec2 center, double radius, double a0, double a1,
                             double spacing) {
  const int n = std::max(2, static_cast<int>(std::abs(a1 - a0) * radius / spacing) + 1);
  std::vector<Vec2> pts;
  pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double a = a0 + (a1 - a0) * static_cast<double>(i) / (n - 1);
    pts.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return pts;
}

void build_map(MapStyle style, Vec2 sdc, std::vector<MapPolyline>* out) {
  int64_t next_id = 0;
  auto add = [&](PolylineKind kind, std::vector<Vec2> pts) {
    out->push_back(MapPolyline{next_id++, std::move(pts), kind});
  };
  switch (style) {
    case MapStyle::empty:
      break;
    case MapStyle::single_curve: {
      // One curved lane with a parallel edge, passing near the SDC.
      const Vec2 c{sdc.x - 40.0, sdc.y};
      add(PolylineKind::lane_center, arc_points(c, 40.0, -0.9, 0.9, 2.0));
      add(PolylineKind::road_edge, arc_points(c, 43.5, -0.9, 0.9, 2.0));
      break;
    }
    case MapStyle::grid_roads: {
      const double half = 45.0;
      for (double off : {-20.0, 0.0, 20.0}) {
        // vertical lane + edges
        add(PolylineKind::lane_center, line_points({sdc.x + off, sdc.y - half},
                                                   {sdc.x + off, sdc.y + half}, 2.5));
        add(PolylineKind::road_edge, line_points({sdc.x + off + 3.5, sdc.y - half},
                                                 {sdc.x + off + 3.5, sdc.y + half}, 2.5));
        // horizontal lane + edges
        add(PolylineKind::lane_center, line_points({sdc.x - half, sdc.y + off},
                                                   {sdc.x + half, sdc.y + off}, 2.5));
        add(PolylineKind::road_edge, line_points({sdc.x - half, sdc.y + off + 3.5},
                                                 {sdc.x + half, sdc.y + off + 3.5}, 2.5));
      }
      add(PolylineKind::crosswalk, line_points({sdc.x - 5.0, sdc.y + 12.0},
                                               {sdc.x + 5.0, sdc.y + 12.0}, 1.0));
      add(PolylineKind::crosswalk, line_points({sdc.x - 12.0, sdc.y - 5.0},
                                               {sdc.x - 12.0, sdc.y + 5.0}, 1.0));
      break;
    }
  }
}

json vec2_list(const std::vector<Vec2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(json::array({p.x, p.y}));
  return arr;
}

std::vector<Vec2> parse_vec2_list(const json& arr) {
  std::vector<Vec2> pts;
  pts.reserve(arr.size());
  for (const auto& p : arr) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

}  // namespace

const char* to_string(PolylineKind k) {
  switch (k) {
    case PolylineKind::lane_center: return "lane_center";
    case PolylineKind::road_edge: return "road_edge";
    case PolylineKind::crosswalk: return "crosswalk";
  }
  return "lane_center";
}

PolylineKind polyline_kind_from_string(const std::string& s) {
  if (s == "lane_center") return PolylineKind::lane_center;
  if (s == "road_edge") return PolylineKind::road_edge;
  if (s == "crosswalk") return PolylineKind::crosswalk;
  throw DataError("unknown polyline kind: " + s);
}

const char* to_string(MapStyle s) {
  switch (s) {
    case MapStyle::grid_roads: return "grid_roads";
    case MapStyle::single_curve: return "single_curve";
    case MapStyle::empty: return "empty";
  }
  return "empty";
}

MapStyle map_style_from_string(const std::string& s) {
  if (s == "grid_roads") return MapStyle::grid_roads;
  if (s == "single_curve") return MapStyle::single_curve;
  if (s == "empty") return MapStyle::empty;
  throw ConfigError("unknown map_style: " + s);
}

void validate_recipe(const SceneRecipe& r) {
  if (r.num_agents < 1) throw ConfigError("recipe.num_agents must be >= 1");
  if (r.num_occluded < 0) throw ConfigError("recipe.num_occluded must be >= 0");
  if (r.num_occluded > r.num_agents - 1)
    throw ConfigError("recipe.num_occluded must be <= num_agents - 1");
  if (r.num_agents - r.num_occluded > kMaxObservedAgents)
    throw ConfigError("recipe.num_agents: more than 128 observed agents");
  const auto& m = r.motion_mix;
  if (m.constant_velocity < 0 || m.constant_turn < 0 || m.stopped < 0)
    throw ConfigError("recipe.motion_mix weights must be nonnegative");
  if (m.constant_velocity + m.constant_turn + m.stopped <= 0)
    throw ConfigError("recipe.motion_mix weights must sum to > 0");
  if (r.speed_min < 0) throw ConfigError("recipe.speed_min must be >= 0");
  if (r.speed_max < r.speed_min)
    throw ConfigError("recipe.speed_max must be >= speed_min");
}

AgentTrack simulate_track(int64_t id, MotionModel motion, Vec2 start,
                          double heading, double speed, double yaw_rate,
                          double dt, int t_hist, int t_future, double length_m,
                          double width_m) {
  const int total = t_hist + t_future;
  const int cur = t_hist - 1;
  AgentTrack a;
  a.id = id;
  a.length_m = length_m;
  a.width_m = width_m;
  a.positions.assign(static_cast<size_t>(total), Vec2{});
  a.headings.assign(static_cast<size_t>(total), 0.0);
  a.validity.assign(static_cast<size_t>(total), true);
  if (motion == MotionModel::stopped) {
    speed = 0.0;
    yaw_rate = 0.0;
  }
  if (motion == MotionModel::constant_velocity) yaw_rate = 0.0;

  a.positions[static_cast<size_t>(cur)] = start;
  a.headings[static_cast<size_t>(cur)] = wrap_angle(heading);
  // forward
  Vec2 p = start;
  double h = heading;
  for (int t = cur + 1; t < total; ++t) {
    p = p + Vec2{speed * dt * std::cos(h), speed * dt * std::sin(h)};
    h += yaw_rate * dt;
    a.positions[static_cast<size_t>(t)] = p;
    a.headings[static_cast<size_t>(t)] = wrap_angle(h);
  }
  // backward
  p = start;
  h = heading;
  for (int t = cur - 1; t >= 0; --t) {
    h -= yaw_rate * dt;
    p = p - Vec2{speed * dt * std::cos(h), speed * dt * std::sin(h)};
    a.positions[static_cast<size_t>(t)] = p;
    a.headings[static_cast<size_t>(t)] = wrap_angle(h);
  }
  return a;
}

Scene generate_scene(const SceneRecipe& recipe) {
  validate_recipe(recipe);
  Rng rng(recipe.rng_seed);
  Scene scene;
  scene.scene_id = "scene-" + std::to_string(recipe.rng_seed);
  scene.sdc_index = 0;

  // SDC world pose; everything else spawns around it.
  const Vec2 sdc_pos{rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0)};
  const double sdc_heading = rng.uniform(-M_PI, M_PI);

  for (int i = 0; i < recipe.num_agents; ++i) {
    const bool is_sdc = (i == 0);
    Vec2 start = sdc_pos;
    double heading = sdc_heading;
    if (!is_sdc) {
      const double r = rng.uniform(5.0, 35.0);
      const double ang = rng.uniform(-M_PI, M_PI);
      start = sdc_pos + Vec2{r * std::cos(ang), r * std::sin(ang)};
      heading = rng.uniform(-M_PI, M_PI);
    }
    const MotionModel motion = sample_motion(rng, recipe.motion_mix);
    const double speed = rng.uniform(recipe.speed_min, recipe.speed_max);
    // |yaw_rate|*dt stays well under the 0.2 rad/step smoothness bound.
    const double yaw_rate = rng.uniform(-1.2, 1.2);
    const double length = rng.uniform(kMinLength, kMaxLength);
    const double width = rng.uniform(kMinWidth, kMaxWidth);
    scene.agents.push_back(simulate_track(i, motion, start, heading, speed,
                                          yaw_rate, scene.dt, scene.t_hist,
                                          scene.t_future, length, width));
  }

  // The last num_occluded non-SDC agents appear only in the future.
  for (int k = 0; k < recipe.num_occluded; ++k) {
    AgentTrack& a = scene.agents[static_cast<size_t>(recipe.num_agents - 1 - k)];
    a.observed_now = false;
    for (int t = 0; t <= scene.current_index(); ++t)
      a.validity[static_cast<size_t>(t)] = false;
  }

  build_map(recipe.map_style, sdc_pos, &scene.polylines);
  return scene;
}

Scene transform_to_sdc_frame(const Scene& scene) {
  const AgentTrack& sdc = scene.agents.at(static_cast<size_t>(scene.sdc_index));
  const int cur = scene.current_index();
  if (!sdc.validity.at(static_cast<size_t>(cur)))
    throw DataError("SDC pose invalid at the current index");
  const Vec2 p = sdc.positions[static_cast<size_t>(cur)];
  const double psi = sdc.headings[static_cast<size_t>(cur)];
  // Current SDC heading maps to +pi/2 (grid-up).
  const RigidTransform tf = RigidTransform::about(p, M_PI / 2.0 - psi);

  Scene out = scene;
  for (auto& a : out.agents) {
    for (auto& q : a.positions) q = tf.apply(q);
    for (auto& h : a.headings) h = tf.apply_heading(h);
  }
  for (auto& pl : out.polylines)
    for (auto& q : pl.points) q = tf.apply(q);
  return out;
}

void save_scenes(const std::vector<Scene>& scenes,
                 const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  for (const Scene& s : scenes) {
    json j;
    j["schema_version"] = 1;
    j["scene_id"] = s.scene_id;
    j["dt"] = s.dt;
    j["t_hist"] = s.t_hist;
    j["t_future"] = s.t_future;
    j["sdc_index"] = s.sdc_index;
    json agents = json::array();
    for (const AgentTrack& a : s.agents) {
      json ja;
      ja["id"] = a.id;
      ja["length_m"] = a.length_m;
      ja["width_m"] = a.width_m;
      ja["observed_now"] = a.observed_now;
      ja["positions"] = vec2_list(a.positions);
      ja["headings"] = a.headings;
      ja["validity"] = a.validity;
      agents.push_back(std::move(ja));
    }
    j["agents"] = std::move(agents);
    json polys = json::array();
    for (const MapPolyline& pl : s.polylines) {
      json jp;
      jp["id"] = pl.id;
      jp["kind"] = to_string(pl.kind);
      jp["points"] = vec2_list(pl.points);
      polys.push_back(std::move(jp));
    }
    j["polylines"] = std::move(polys);
    os << j.dump() << "\n";
  }
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<Scene> load_scenes(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path.string());
  std::vector<Scene> scenes;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const int version = j.at("schema_version").get<int>();
      if (version != 1)
        throw DataError("line " + std::to_string(lineno) +
                        ": unsupported schema_version " + std::to_string(version));
      Scene s;
      s.scene_id = j.at("scene_id").get<std::string>();
      s.dt = j.at("dt").get<double>();
      s.t_hist = j.at("t_hist").get<int>();
      s.t_future = j.at("t_future").get<int>();
      s.sdc_index = j.at("sdc_index").get<int>();
      for (const auto& ja : j.at("agents")) {
        AgentTrack a;
        a.id = ja.at("id").get<int64_t>();
        a.length_m = ja.at("length_m").get<double>();
        a.width_m = ja.at("width_m").get<double>();
        a.observed_now = ja.at("observed_now").get<bool>();
        a.positions = parse_vec2_list(ja.at("positions"));
        a.headings = ja.at("headings").get<std::vector<double>>();
        a.validity = ja.at("validity").get<std::vector<bool>>();
        s.agents.push_back(std::move(a));
      }
      for (const auto& jp : j.at("polylines")) {
        MapPolyline pl;
        pl.id = jp.at("id").get<int64_t>();
        pl.kind = polyline_kind_from_string(jp.at("kind").get<std::string>());
        pl.points = parse_vec2_list(jp.at("points"));
        s.polylines.push_back(std::move(pl));
      }
      scenes.push_back(std::move(s));
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return scenes;
}

}  // namespace occflow
