// Copyright 2026 The sliceprop Authors
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

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sliceprop/geometry.hpp"
#include "sliceprop/label_map.hpp"

namespace sliceprop {

inline constexpr const char* kToolVersion = "sliceprop 1.0.0";

struct ObjectStats {
  int object_id = 0;
  std::string name;
  std::size_t voxel_count = 0;
  double volume_mm3 = 0.0;
  double volume_ml = 0.0;
  /// Inclusive index bounds, (x, y, z).
  std::array<std::array<int, 3>, 2> bbox_index{};
  /// First and last slice holding at least one voxel.
  std::array<int, 2> slice_extent{};

  friend bool operator==(const ObjectStats&, const ObjectStats&) = default;
};

struct VolumetryReport {
  std::string case_id;
  VolumeGeometry geometry;
  std::vector<ObjectStats> objects;  // ascending object_id
  std::string created_at;
  std::string tool_version = kToolVersion;

  friend bool operator==(const VolumetryReport&, const VolumetryReport&) = default;
};

/// Per-object voxel counts and physical volumes. volume_mm3 is
/// voxel_count x the spacing product (direction is orthonormal, so this is
/// the exact voxel volume). Objects without voxels are omitted. `names` maps
/// object ids to display names; missing ids get "object_<id>".
VolumetryReport compute_volumetry(const LabelMap& lm, const VolumeGeometry& geometry, const std::string& case_id,
                                  const std::map<int, std::string>& names = {},
                                  const std::string& created_at = "");

/// {case_id, spacing[3], origin[3], direction[9] row-major,
///  objects: [{id, name, voxels, mm3, ml, bbox: [[x,y,z],[x,y,z]], slices: [2]}],
///  created_at, version}
nlohmann::json to_json(const VolumetryReport& report);
VolumetryReport report_from_json(const nlohmann::json& j);

void write_report(const VolumetryReport& report, const std::filesystem::path& path);
VolumetryReport read_report(const std::filesystem::path& path);

/// `<case_id>_volumetry.json`
std::string report_filename(const std::string& case_id);

}  // namespace sliceprop
