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

#ifndef OCCFLOW_GRID_HPP_
#define OCCFLOW_GRID_HPP_

#include "occflow/common.hpp"
#include "occflow/geometry.hpp"

namespace occflow {

// Fractional grid coordinates; integer (row, col) is a cell center.
struct GridCoord {
  double row = 0.0;
  double col = 0.0;
};

// BEV grid in the SDC frame: the SDC's current position sits at the center
// cell and its heading points toward row 0 (+y decreases row).
struct GridSpec {
  int height = 256;
  int width = 256;
  double pixels_per_meter = 3.2;

  void validate() const {
    if (height <= 0 || width <= 0) throw ConfigError("grid.size must be > 0");
    if (height != width) throw ConfigError("grid must be square");
    if (pixels_per_meter <= 0.0)
      throw ConfigError("grid.pixels_per_meter must be > 0");
  }

  double fov_meters() const { return height / pixels_per_meter; }

  GridCoord world_to_grid(const Vec2& p) const {
    return {height / 2.0 - p.y * pixels_per_meter,
            width / 2.0 + p.x * pixels_per_meter};
  }

  Vec2 grid_to_world(double row, double col) const {
    return {(col - width / 2.0) / pixels_per_meter,
            (height / 2.0 - row) / pixels_per_meter};
  }

  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }

  bool operator==(const GridSpec&) const = default;
};

}  // namespace occflow

#endif  // OCCFLOW_GRID_HPP_
