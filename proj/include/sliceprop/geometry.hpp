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
#include <string>
#include <vector>

namespace sliceprop {

using Vec3 = std::array<double, 3>;

/// 3x3 matrix, row-major.
using Mat3 = std::array<double, 9>;

inline constexpr Mat3 kIdentity3{1, 0, 0, 0, 1, 0, 0, 0, 1};

/// Maps voxel indices (x, y, z) to patient-space millimetres in the LPS frame
/// used by DICOM: p = origin + direction * diag(spacing) * index.
///
/// Column j of `direction` is the patient-space unit vector of index axis j
/// (x = column, y = row, z = slice).
struct VolumeGeometry {
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  Mat3 direction = kIdentity3;

  Vec3 index_to_physical(const Vec3& index) const;
  Vec3 physical_to_index(const Vec3& point) const;

  /// Volume of one voxel in mm^3. Exact for orthonormal directions.
  double voxel_volume() const { return spacing[0] * spacing[1] * spacing[2]; }

  Vec3 direction_column(int axis) const {
    return {direction[axis], direction[3 + axis], direction[6 + axis]};
  }

  friend bool operator==(const VolumeGeometry&, const VolumeGeometry&) = default;
};

double determinant(const Mat3& m);
Mat3 transpose(const Mat3& m);
Mat3 multiply(const Mat3& a, const Mat3& b);
Vec3 multiply(const Mat3& m, const Vec3& v);
Vec3 cross(const Vec3& a, const Vec3& b);
double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);

/// Componentwise |a - b| <= tol over spacing, origin and direction.
bool geometry_equal(const VolumeGeometry& a, const VolumeGeometry& b, double tol);

/// Human-readable list of broken invariants: positive finite spacing,
/// unit-norm direction columns (1e-3) and |det| in [0.999, 1.001].
std::vector<std::string> geometry_violations(const VolumeGeometry& g);

/// Throws ValidationError listing every violation.
void validate_geometry(const VolumeGeometry& g);

std::string to_string(const VolumeGeometry& g);

}  // namespace sliceprop
