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
#include <string>

#include "sliceprop/dicom.hpp"
#include "sliceprop/label_map.hpp"
#include "sliceprop/nifti.hpp"

namespace sliceprop {

/// Largest object id representable in an exported label map.
inline constexpr int kMaxExportLabel = 255;

/// Writes a locked label map as unsigned 8-bit NIfTI with the given geometry,
/// atomically (temp file + rename).
///
/// Throws StateError for unlocked maps, ValidationError for shape mismatch or
/// values above 255, IoError when the destination is not writable.
void export_labelmap(const LabelMap& labels, const VolumeGeometry& geometry,
                     const std::filesystem::path& path);

/// `<case_id>_mask.nii.gz`
std::string mask_filename(const std::string& case_id);

}  // namespace sliceprop
