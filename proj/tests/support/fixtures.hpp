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
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sliceprop/geometry.hpp"
#include "sliceprop/label_map.hpp"
#include "sliceprop/prompts.hpp"
#include "sliceprop/volume.hpp"

namespace sliceprop::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random rotation (det +1) from a normalised random quaternion.
Mat3 random_rotation(std::mt19937_64& rng);

VolumeGeometry random_geometry(std::mt19937_64& rng);

VolumeImage make_volume(Shape3 shape, const VolumeGeometry& geometry,
                        const std::function<float(std::size_t z, std::size_t y, std::size_t x)>& f);

/// Pixel centres with (x - cx)^2 + (y - cy)^2 <= r^2.
Mask2D disk_mask(std::size_t height, std::size_t width, double cx, double cy, double r);

double dice(const Mask2D& a, const Mask2D& b);

/// Upright cylinder of radius `radius` px centred in-plane, present on slices
/// [first, last]: 100 inside, 10 outside.
struct CylinderFixture {
  Shape3 shape{12, 64, 64};
  double cx = 31.5, cy = 31.5, radius = 10.0;
  int first = 2, last = 8;
  VolumeGeometry geometry{{0.9, 0.9, 2.0}, {-30.0, 12.5, 7.0}, kIdentity3};

  VolumeImage volume() const;
  Mask2D disk() const;
  /// Rasterised cylinder voxel count.
  std::size_t voxel_count() const;
  /// Box tightly enclosing the disk plus `pad` pixels.
  BoxPrompt box(int object_id, int slice, int pad = 2) const;
  PromptSet prompts(std::vector<int> slices) const;
};

/// Minimal explicit-VR-little-endian DICOM slice writer, independent of the
/// reader under test.
struct DicomSlice {
  std::string series_uid = "1.2.826.0.1.3680043.8.498.1";
  std::string sop_uid;
  int instance_number = 1;
  std::size_t rows = 0, columns = 0;
  double row_spacing = 1.0, column_spacing = 1.0;  // PixelSpacing = row \ column
  Vec3 position{0, 0, 0};
  std::array<double, 6> orientation{1, 0, 0, 0, 1, 0};
  double slope = 1.0, intercept = 0.0;
  bool write_position = true;
  std::vector<std::int16_t> pixels;  // rows * columns, row-major
};

void write_dicom(const std::filesystem::path& path, const DicomSlice& slice);

/// Series of `depth` slices whose value at (z, y, x) is `f`, written in file
/// order `order` (a permutation of 0..depth-1) as <dir>/IM<k>.dcm.
void write_dicom_series(const std::filesystem::path& dir, std::size_t depth, std::size_t rows, std::size_t columns,
                        double row_spacing, double column_spacing, double slice_step, const Vec3& origin,
                        const std::array<double, 6>& orientation, const std::vector<std::size_t>& order,
                        const std::function<std::int16_t(std::size_t, std::size_t, std::size_t)>& f,
                        const std::string& series_uid = "1.2.826.0.1.3680043.8.498.1");

}  // namespace sliceprop::testing
