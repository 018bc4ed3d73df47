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

#include "sliceprop/quant.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"

namespace sliceprop {

VolumetryReport compute_volumetry(const LabelMap& lm, const VolumeGeometry& geometry, const std::string& case_id,
                                  const std::map<int, std::string>& names, const std::string& created_at) {
  validate_geometry(geometry);
  const Shape3& shape = lm.shape();
  if (lm.voxels.data().size() != shape.size()) throw ValidationError("label map data does not match its shape");

  struct Acc {
    std::size_t count = 0;
    std::array<int, 3> lo{INT32_MAX, INT32_MAX, INT32_MAX};
    std::array<int, 3> hi{-1, -1, -1};
  };
  std::map<int, Acc> acc;
  for (std::size_t z = 0; z < shape.depth; ++z) {
    for (std::size_t y = 0; y < shape.height; ++y) {
      for (std::size_t x = 0; x < shape.width; ++x) {
        const int v = lm.voxels(z, y, x);
        if (v == 0) continue;
        Acc& a = acc[v];
        ++a.count;
        const std::array<int, 3> idx{static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)};
        for (int i = 0; i < 3; ++i) {
          a.lo[i] = std::min(a.lo[i], idx[i]);
          a.hi[i] = std::max(a.hi[i], idx[i]);
        }
      }
    }
  }

  VolumetryReport report;
  report.case_id = case_id;
  report.geometry = geometry;
  report.created_at = created_at.empty() ? utc_timestamp_now() : created_at;
  const double voxel_mm3 = geometry.voxel_volume();
  for (const auto& [id, a] : acc) {
    ObjectStats s;
    s.object_id = id;
    auto it = names.find(id);
    s.name = it != names.end() ? it->second : "object_" + std::to_string(id);
    s.voxel_count = a.count;
    s.volume_mm3 = static_cast<double>(a.count) * voxel_mm3;
    s.volume_ml = s.volume_mm3 / 1000.0;
    s.bbox_index = {a.lo, a.hi};
    s.slice_extent = {a.lo[2], a.hi[2]};
    report.objects.push_back(std::move(s));
  }
  return report;
}

nlohmann::json to_json(const VolumetryReport& r) {
  nlohmann::json j;
  j["case_id"] = r.case_id;
  j["spacing"] = r.geometry.spacing;
  j["origin"] = r.geometry.origin;
  j["direction"] = r.geometry.direction;
  j["objects"] = nlohmann::json::array();
  for (const auto& s : r.objects) {
    j["objects"].push_back({{"id", s.object_id},
                            {"name", s.name},
                            {"voxels", s.voxel_count},
                            {"mm3", s.volume_mm3},
                            {"ml", s.volume_ml},
                            {"bbox", s.bbox_index},
                            {"slices", s.slice_extent}});
  }
  j["created_at"] = r.created_at;
  j["version"] = r.tool_version;
  return j;
}

VolumetryReport report_from_json(const nlohmann::json& j) {
  try {
    VolumetryReport r;
    r.case_id = j.at("case_id").get<std::string>();
    r.geometry.spacing = j.at("spacing").get<Vec3>();
    r.geometry.origin = j.at("origin").get<Vec3>();
    r.geometry.direction = j.at("direction").get<Mat3>();
    for (const auto& o : j.at("objects")) {
      ObjectStats s;
      s.object_id = o.at("id").get<int>();
      s.name = o.at("name").get<std::string>();
      s.voxel_count = o.at("voxels").get<std::size_t>();
      s.volume_mm3 = o.at("mm3").get<double>();
      s.volume_ml = o.at("ml").get<double>();
      s.bbox_index = o.at("bbox").get<std::array<std::array<int, 3>, 2>>();
      s.slice_extent = o.at("slices").get<std::array<int, 2>>();
      r.objects.push_back(std::move(s));
    }
    r.created_at = j.at("created_at").get<std::string>();
    r.tool_version = j.at("version").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid volumetry report: ") + e.what());
  }
}

void write_report(const VolumetryReport& report, const std::filesystem::path& path) {
  const auto dir = path.parent_path();
  if (!dir.empty() && !std::filesystem::is_directory(dir)) {
    throw IoError("cannot write report, directory does not exist: " + path.string());
  }
  write_file_atomic(path, to_json(report).dump(2) + "\n");
}

VolumetryReport read_report(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw FormatError("report is not valid JSON: " + path.string());
  return report_from_json(j);
}

std::string report_filename(const std::string& case_id) { return case_id + "_volumetry.json"; }

}  // namespace sliceprop
