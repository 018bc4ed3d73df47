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

#include "sliceprop/geometry.hpp"

#include <cmath>
#include <sstream>

#include "sliceprop/error.hpp"

namespace sliceprop {

double determinant(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 transpose(const Mat3& m) { return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}; }

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[3 * i + j] += a[3 * i + k] * b[3 * k + j];
  return r;
}

Vec3 multiply(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 VolumeGeometry::index_to_physical(const Vec3& index) const {
  const Vec3 scaled{index[0] * spacing[0], index[1] * spacing[1], index[2] * spacing[2]};
  const Vec3 d = multiply(direction, scaled);
  return {origin[0] + d[0], origin[1] + d[1], origin[2] + d[2]};
}

Vec3 VolumeGeometry::physical_to_index(const Vec3& point) const {
  // Inverse via the adjugate so non-orthonormal (but invertible) directions still work.
  const Mat3& m = direction;
  const double det = determinant(m);
  if (det == 0.0) throw ValidationError("singular direction matrix");
  const Mat3 inv{(m[4] * m[8] - m[5] * m[7]) / det, (m[2] * m[7] - m[1] * m[8]) / det,
                 (m[1] * m[5] - m[2] * m[4]) / det, (m[5] * m[6] - m[3] * m[8]) / det,
                 (m[0] * m[8] - m[2] * m[6]) / det, (m[2] * m[3] - m[0] * m[5]) / det,
                 (m[3] * m[7] - m[4] * m[6]) / det, (m[1] * m[6] - m[0] * m[7]) / det,
                 (m[0] * m[4] - m[1] * m[3]) / det};
  const Vec3 rel{point[0] - origin[0], point[1] - origin[1], point[2] - origin[2]};
  const Vec3 scaled = multiply(inv, rel);
  return {scaled[0] / spacing[0], scaled[1] / spacing[1], scaled[2] / spacing[2]};
}

bool geometry_equal(const VolumeGeometry& a, const VolumeGeometry& b, double tol) {
  auto close = [tol](double x, double y) { return std::abs(x - y) <= tol; };
  for (int i = 0; i < 3; ++i) {
    if (!close(a.spacing[i], b.spacing[i]) || !close(a.origin[i], b.origin[i])) return false;
  }
  for (int i = 0; i < 9; ++i) {
    if (!close(a.direction[i], b.direction[i])) return false;
  }
  return true;
}

std::vector<std::string> geometry_violations(const VolumeGeometry& g) {
  std::vector<std::string> out;
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(g.spacing[i]) || g.spacing[i] <= 0.0) {
      out.push_back("spacing[" + std::to_string(i) + "] = " + std::to_string(g.spacing[i]) + " is not positive");
    }
    if (!std::isfinite(g.origin[i])) out.push_back("origin[" + std::to_string(i) + "] is not finite");
  }
  for (int j = 0; j < 3; ++j) {
    const double n = norm(g.direction_column(j));
    if (!(std::abs(n - 1.0) <= 1e-3)) {
      out.push_back("direction column " + std::to_string(j) + " has norm " + std::to_string(n));
    }
  }
  const double det = std::abs(determinant(g.direction));
  if (!(det >= 0.999 && det <= 1.001)) out.push_back("|det(direction)| = " + std::to_string(det));
  return out;
}

void validate_geometry(const VolumeGeometry& g) {
  const auto v = geometry_violations(g);
  if (v.empty()) return;
  std::string msg = "invalid geometry:";
  for (const auto& s : v) msg += " " + s + ";";
  throw ValidationError(msg);
}

std::string to_string(const VolumeGeometry& g) {
  std::ostringstream ss;
  ss.precision(9);
  ss << "spacing=(" << g.spacing[0] << ", " << g.spacing[1] << ", " << g.spacing[2] << ") origin=(" << g.origin[0]
     << ", " << g.origin[1] << ", " << g.origin[2] << ") direction=[";
  for (int i = 0; i < 9; ++i) ss << (i ? ", " : "") << g.direction[i];
  ss << "]";
  return ss.str();
}

}  // namespace sliceprop
