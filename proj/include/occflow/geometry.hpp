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

#ifndef OCCFLOW_GEOMETRY_HPP_
#define OCCFLOW_GEOMETRY_HPP_

#include <cmath>

namespace occflow {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

// q -> R(angle) * (q - origin) + offset
struct RigidTransform {
  double cos_a = 1.0;
  double sin_a = 0.0;
  Vec2 origin;
  Vec2 offset;
  double angle = 0.0;

  static RigidTransform about(const Vec2& origin, double angle,
                              const Vec2& offset = {}) {
    return {std::cos(angle), std::sin(angle), origin, offset, angle};
  }

  Vec2 apply(const Vec2& q) const {
    const Vec2 d = q - origin;
    return {cos_a * d.x - sin_a * d.y + offset.x,
            sin_a * d.x + cos_a * d.y + offset.y};
  }

  double apply_heading(double h) const { return wrap_angle(h + angle); }
};

// Axis-aligned-in-body-frame rectangle with a world pose.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;  // radians, +x axis of the body frame
  double length = 0.0;   // extent along heading
  double width = 0.0;    // extent across heading

  // Cell-center membership uses an inclusive boundary.
  bool contains(const Vec2& p) const {
    const Vec2 d = p - center;
    const double c = std::cos(heading), s = std::sin(heading);
    const double lx = c * d.x + s * d.y;
    const double ly = -s * d.x + c * d.y;
    return std::abs(lx) <= 0.5 * length && std::abs(ly) <= 0.5 * width;
  }
};

}  // namespace occflow

#endif  // OCCFLOW_GEOMETRY_HPP_
