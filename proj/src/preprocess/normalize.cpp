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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sliceprop/error.hpp"
#include "sliceprop/preprocess.hpp"

namespace sliceprop {

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

double coefficient_of_variation(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n) / mean;
}

VolumeImage normalize_intensity(const VolumeImage& volume, NormalizeMethod method) {
  const auto src = volume.voxels.data();
  for (float v : src) {
    if (!std::isfinite(v)) throw ValidationError("normalize_intensity: non-finite voxel");
  }
  VolumeImage out = volume;
  auto dst = out.voxels.data();
  if (src.empty()) return out;

  if (method == NormalizeMethod::percentile_clip) {
    std::vector<double> values(src.begin(), src.end());
    const double lo = percentile(values, 1.0);
    const double hi = percentile(std::move(values), 99.0);
    const double range = hi - lo;
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = range > 0.0 ? static_cast<float>((std::clamp<double>(src[i], lo, hi) - lo) / range) : 0.0f;
    }
    return out;
  }

  const double n = static_cast<double>(src.size());
  const double mean = std::accumulate(src.begin(), src.end(), 0.0) / n;
  double ss = 0.0;
  for (float v : src) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) throw ValidationError("normalize_intensity: zero standard deviation, z-score undefined");
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>((src[i] - mean) / sd);
  return out;
}

}  // namespace sliceprop
