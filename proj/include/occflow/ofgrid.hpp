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

#ifndef OCCFLOW_OFGRID_HPP_
#define OCCFLOW_OFGRID_HPP_

#include <filesystem>
#include <map>
#include <string>

#include "occflow/tensor.hpp"

namespace occflow {

// Flat binary grid container (.ofgrid): one JSON header line
// {"dtype":"float32","shape":[...],"layout":"row_major",...} followed by the
// raw little-endian float32 data.
void write_ofgrid(const std::filesystem::path& path, const Tensor<float>& t,
                  const std::map<std::string, std::string>& extra = {});

Tensor<float> read_ofgrid(const std::filesystem::path& path,
                          std::map<std::string, std::string>* extra = nullptr);

}  // namespace occflow

#endif  // OCCFLOW_OFGRID_HPP_
