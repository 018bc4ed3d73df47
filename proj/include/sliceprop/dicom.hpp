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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sliceprop/volume.hpp"

namespace sliceprop {

/// True if the file carries the DICOM Part-10 "DICM" magic at offset 128.
bool is_dicom_file(const std::filesystem::path& path);

/// Files directly inside `dir`, grouped by SeriesInstanceUID. Files that are
/// not DICOM or lack a SeriesInstanceUID are listed in `unreadable`.
struct DicomDirectoryScan {
  std::map<std::string, std::vector<std::filesystem::path>> series;
  std::vector<std::filesystem::path> unreadable;
};
DicomDirectoryScan scan_dicom_directory(const std::filesystem::path& dir);

struct DicomLoadResult {
  VolumeImage image;
  std::vector<std::string> warnings;
};

/// Assembles one series into a volume.
///
/// Slices are ordered by the projection of ImagePositionPatient onto the slice
/// normal (row cosine x column cosine); z spacing is the median adjacent
/// distance. Rescale slope/intercept are applied per slice. Without
/// position/orientation tags the loader orders by InstanceNumber, uses
/// SliceThickness (or 1.0) for z spacing and records a warning.
///
/// Throws ValidationError when the directory holds several series and no
/// `series_uid` is given (message lists the UIDs), on mixed in-plane shapes
/// and on multi-frame objects.
DicomLoadResult load_dicom_series(const std::filesystem::path& dir,
                                  const std::optional<std::string>& series_uid = std::nullopt);

}  // namespace sliceprop
