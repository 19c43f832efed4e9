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

#ifndef OCCFLOW_MODEL_CONFIG_HPP_
#define OCCFLOW_MODEL_CONFIG_HPP_

#include <array>
#include <string>

#include "occflow/common.hpp"
#include "occflow/nn.hpp"

namespace occflow {

enum class ModelVariant { fused, vgg_only };

const char* to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& s);

// Architecture hyperparameters. Defaults reproduce the full-size network;
// the micro profile scales everything down for CI-speed runs.
struct ModelConfig {
  int grid = 256;            // input H = W; must be divisible by 16
  int t_hist = 11;           // raster channels = t_hist + 3 map channels
  int waypoints = 8;
  int pyramid_channels = 512;  // hidden dim of C1..C5 / fused features
  int head_channels = 128;     // final output feature width
  int vector_hidden = 64;      // local-graph MLP width
  int attn_heads = 4;
  bool query_pos_encoding = false;
  nn::UpsampleMode upsample = nn::UpsampleMode::nearest;
  ModelVariant variant = ModelVariant::fused;

  int in_channels() const { return t_hist + 3; }
  int out_channels() const { return waypoints * 4; }
  int vector_feature() const { return 2 * vector_hidden; }  // element token width

  // VGG configuration-D widths, scaled with the pyramid width.
  std::array<int, 5> vgg_widths() const {
    const int base = pyramid_channels / 8;
    return {base, 2 * base, 4 * base, 8 * base, 8 * base};
  }
  static constexpr std::array<int, 5> vgg_convs_per_stage() { return {2, 2, 3, 3, 3}; }

  void validate() const {
    if (grid <= 0 || grid % 16 != 0)
      throw ConfigError("model.grid must be a positive multiple of 16");
    if (pyramid_channels < 8 || pyramid_channels % 8 != 0)
      throw ConfigError("model.pyramid_channels must be a multiple of 8");
    if (pyramid_channels % attn_heads != 0)
      throw ConfigError("model.attn_heads must divide pyramid_channels");
    if (head_channels <= 0) throw ConfigError("model.head_channels must be > 0");
    if (vector_hidden <= 0) throw ConfigError("model.vector_hidden must be > 0");
    if (waypoints <= 0) throw ConfigError("model.waypoints must be > 0");
  }

  bool same_architecture(const ModelConfig& o) const {
    return grid == o.grid && t_hist == o.t_hist && waypoints == o.waypoints &&
           pyramid_channels == o.pyramid_channels &&
           head_channels == o.head_channels && vector_hidden == o.vector_hidden &&
           attn_heads == o.attn_heads && query_pos_encoding == o.query_pos_encoding;
  }

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace occflow

#endif  // OCCFLOW_MODEL_CONFIG_HPP_
