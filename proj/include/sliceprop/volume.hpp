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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sliceprop/geometry.hpp"

namespace sliceprop {

/// Extent of a volume in canonical (z = slice, y = row, x = column) order.
struct Shape3 {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t slice_size() const { return height * width; }
  std::size_t size() const { return depth * height * width; }

  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

/// Dense 2D raster indexed (y, x), x fastest.
template <class T>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), data_(height * width, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
  const T& operator()(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(const Grid2D& o) const { return height_ == o.height_ && width_ == o.width_; }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

/// Binary slice mask; 0 = off, 1 = on.
using Mask2D = Grid2D<std::uint8_t>;

std::size_t count_on(const Mask2D& m);

/// Dense 3D raster indexed (z, y, x), x fastest. This is also the NIfTI
/// on-disk voxel order, so volumes are read and written without reshuffling.
template <class T>
class Volume {
 public:
  Volume() = default;
  explicit Volume(Shape3 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Volume(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {}

  const Shape3& shape() const { return shape_; }

  T& operator()(std::size_t z, std::size_t y, std::size_t x) {
    return data_[(z * shape_.height + y) * shape_.width + x];
  }
  const T& operator()(std::size_t z, std::size_t y, std::size_t x) const {
    return data_[(z * shape_.height + y) * shape_.width + x];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  std::span<T> slice(std::size_t z) {
    return std::span<T>(data_).subspan(z * shape_.slice_size(), shape_.slice_size());
  }
  std::span<const T> slice(std::size_t z) const {
    return std::span<const T>(data_).subspan(z * shape_.slice_size(), shape_.slice_size());
  }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Shape3 shape_;
  std::vector<T> data_;
};

/// Scalar intensity volume plus the geometry that places it in patient space.
struct VolumeImage {
  Volume<float> voxels;
  VolumeGeometry geometry;
  std::optional<std::string> modality_hint;

  const Shape3& shape() const { return voxels.shape(); }
};

}  // namespace sliceprop
