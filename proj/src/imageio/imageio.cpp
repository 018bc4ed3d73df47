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

#include "sliceprop/imageio.hpp"

#include <algorithm>

#include "sliceprop/error.hpp"

namespace sliceprop {

void export_labelmap(const LabelMap& labels, const VolumeGeometry& geometry, const std::filesystem::path& path) {
  if (!labels.locked) throw StateError("label map must be locked before export");
  const auto data = labels.voxels.data();
  if (data.size() != labels.shape().size() || data.empty()) {
    throw ValidationError("label map shape " + to_string(labels.shape()) + " is inconsistent with its data");
  }
  const auto max_it = std::max_element(data.begin(), data.end());
  if (*max_it > kMaxExportLabel) {
    throw ValidationError("label value " + std::to_string(*max_it) + " exceeds the 8-bit export limit of " +
                          std::to_string(kMaxExportLabel));
  }
  std::vector<double> values(data.begin(), data.end());
  write_nifti(path, values, labels.shape(), geometry, NiftiDatatype::uint8);
}

std::string mask_filename(const std::string& case_id) { return case_id + "_mask.nii.gz"; }

}  // namespace sliceprop
