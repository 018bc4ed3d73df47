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

#include <cstdint>
#include <filesystem>

#include "sliceprop/volume.hpp"

namespace sliceprop {

/// On-disk voxel type for NIfTI-1 output.
enum class NiftiDatatype : std::int16_t {
  uint8 = 2,
  int16 = 4,
  int32 = 8,
  float32 = 16,
  float64 = 64,
  int8 = 256,
  uint16 = 512,
  uint32 = 768,
  int64 = 1024,
  uint64 = 1280,
};

/// Reads a NIfTI-1 file (.nii or .nii.gz, chosen by content, not suffix).
///
/// Geometry comes from the sform when sform_code > 0, else the qform, else
/// pixdim alone. Orientation is converted from the NIfTI RAS frame to LPS.
/// When the file carries the exact-geometry extension written by
/// write_nifti() and it agrees with the header, the double-precision values
/// from the extension are used.
///
/// A singleton 4th dimension is squeezed; anything else that is not 3D is
/// rejected, as are non-finite voxel values. scl_slope/scl_inter are applied.
VolumeImage load_nifti(const std::filesystem::path& path);

/// Cheap header check without reading voxels. Returns an empty string when
/// the file looks like a readable NIfTI-1 volume, else the reason.
std::string probe_nifti(const std::filesystem::path& path);

/// Same reader, returning raw integer labels. Values must be integral and in
/// [0, 65535].
struct LoadedLabels {
  Volume<std::uint16_t> voxels;
  VolumeGeometry geometry;
};
LoadedLabels load_nifti_labels(const std::filesystem::path& path);

/// Writes NIfTI-1 (gzip-compressed when the path ends in .gz). Both qform
/// and sform are set (code 1, scanner) and the exact double-precision
/// geometry is stored in a header extension since the header fields are
/// float32. Values are cast to `datatype`; callers are responsible for range.
void write_nifti(const std::filesystem::path& path, std::span<const double> values, const Shape3& shape,
                 const VolumeGeometry& geometry, NiftiDatatype datatype);

void write_nifti(const std::filesystem::path& path, const VolumeImage& image,
                 NiftiDatatype datatype = NiftiDatatype::float32);

}  // namespace sliceprop
