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

#include <span>

#include "sliceprop/backend.hpp"

namespace sliceprop {

inline constexpr int kOtsuBins = 256;

/// Otsu threshold over a 256-bin histogram spanning [min, max]. Cutting after
/// bin k yields threshold min + (k + 1) * width; values strictly above it are
/// foreground. Equal between-class variances resolve to the lower threshold.
/// Throws ValidationError when fewer than two distinct values are given.
double otsu_threshold(std::span<const double> values);

enum class Connectivity { four, eight };

/// Keeps the largest connected component (ties: the one whose first pixel in
/// row-major order comes first), plus every component that contains one of
/// `keep` pixels.
Mask2D largest_component(const Mask2D& mask, Connectivity connectivity = Connectivity::eight,
                         std::span<const Pixel> keep = {});

/// Component labels (0 = background, 1.. in row-major discovery order).
Grid2D<int> label_components(const Mask2D& mask, Connectivity connectivity, int* count = nullptr);

/// Signed Euclidean distance in pixels, negative inside. Boundaries sit
/// half a pixel outside the mask: inside pixels get -(d_bg - 0.5), outside
/// pixels get d_fg - 0.5, where d_* is the distance to the nearest pixel of
/// the other class.
Grid2D<double> signed_distance(const Mask2D& mask);

/// Shape interpolation {(1 - alpha) * sdf_a + alpha * sdf_b <= 0}. Both masks
/// must be non-empty and the same shape.
Mask2D sdf_interpolate(const Mask2D& a, const Mask2D& b, double alpha);

/// Weight-free backend: Otsu inside the box, component selection guided by
/// points, SDF interpolation between prompted slices and copy beyond them.
class FallbackGeometricBackend final : public SegmentationBackend {
 public:
  static constexpr const char* kId = "fallback-geometric";

  std::string id() const override { return kId; }
  BackendCapabilities capabilities() const override { return {true, true, false}; }
  std::unique_ptr<BackendState> create_state(std::shared_ptr<const VolumeImage> volume, int object_id) override;
  Mask2D segment(BackendState& state, const SlicePrompts& prompts) override;
  std::vector<SliceMask> propagate(BackendState& state, Direction direction, SliceSpan span) override;
};

}  // namespace sliceprop
