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

#include <optional>
#include <string>
#include <vector>

#include "sliceprop/volume.hpp"

namespace sliceprop {

/// N4 bias-field correction parameters. Defaults follow the usual N4ITK
/// settings: shrink 4, four fitting levels of 50 iterations, convergence 1e-3.
struct N4Params {
  int shrink_factor = 4;
  int fitting_levels = 4;
  std::vector<int> iterations_per_level{50, 50, 50, 50};
  double convergence_threshold = 1e-3;

  // Histogram sharpening.
  int histogram_bins = 200;
  double bias_field_fwhm = 0.15;
  double wiener_noise = 0.01;

  /// Control-point mesh elements per axis at the first level; doubled per level.
  int initial_mesh_elements = 1;

  /// Throws ValidationError when inconsistent.
  void validate() const;
};

struct N4Result {
  VolumeImage corrected;
  /// Multiplicative field, > 0 everywhere: corrected = input / field.
  VolumeImage field;
  std::vector<std::string> warnings;
  /// Iterations actually run per level.
  std::vector<int> iterations_run;
  /// Last convergence measure per level (coefficient of variation of the
  /// field update ratio).
  std::vector<double> convergence;
};

/// Estimates and removes a smooth multiplicative intensity field.
///
/// Voxels with intensity > 0 (after shifting a negative minimum to zero) are
/// used for fitting unless `mask` is given (nonzero = use). The log field is
/// centred to zero mean over the fitting voxels. Geometry is copied through
/// unchanged. A constant input yields field == 1 and a warning.
N4Result n4_correct(const VolumeImage& volume, const N4Params& params = {},
                    const Volume<std::uint8_t>* mask = nullptr);

enum class NormalizeMethod { percentile_clip, zscore };

/// percentile_clip: clip to [p1, p99] (linear-interpolated percentiles) and
/// rescale to [0, 1]; a collapsed range maps everything to 0.
/// zscore: (v - mean) / std with the population std; throws ValidationError
/// when std == 0.
VolumeImage normalize_intensity(const VolumeImage& volume, NormalizeMethod method);

/// Linear-interpolated percentile (numpy's default) of `values`, p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Coefficient of variation (std / mean, population std) of `values`.
double coefficient_of_variation(const std::vector<double>& values);

}  // namespace sliceprop
