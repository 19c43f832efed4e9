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

#include "occflow/ofgrid.hpp"

#include <fstream>

#include "json.hpp"
#include "occflow/common.hpp"

namespace occflow {

void write_ofgrid(const std::filesystem::path& path, const Tensor<float>& t,
                  const std::map<std::string, std::string>& extra) {
  nlohmann::ordered_json header;
  header["dtype"] = "float32";
  header["shape"] = t.shape();
  header["layout"] = "row_major";
  for (const auto& [k, v] : extra) header[k] = v;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os << header.dump() << "\n";
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!os) throw DataError("write failed: " + path.string());
}

Tensor<float> read_ofgrid(const std::filesystem::path& path,
                          std::map<std::string, std::string>* extra) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError("missing header: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": bad header: " + e.what());
  }
  if (header.at("dtype").get<std::string>() != "float32")
    throw DataError(path.string() + ": unsupported dtype");
  if (header.at("layout").get<std::string>() != "row_major")
    throw DataError(path.string() + ": unsupported layout");

  Tensor<float> t(header.at("shape").get<Shape>());
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (is.gcount() != static_cast<std::streamsize>(t.numel() * sizeof(float)))
    throw DataError(path.string() + ": truncated data section");

  if (extra) {
    for (const auto& [k, v] : header.items()) {
      if (k == "dtype" || k == "shape" || k == "layout") continue;
      if (v.is_string()) (*extra)[k] = v.get<std::string>();
    }
  }
  return t;
}

}  // namespace occflow
