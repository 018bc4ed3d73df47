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
#include <set>

#include "sliceprop/volume.hpp"

namespace sliceprop {

/// Integer volume aligned with a VolumeImage: value k marks object k, 0 is
/// background. Operations in labels.hpp treat it as a value type; a locked
/// map is final and the only kind accepted for export.
struct LabelMap {
  Volume<std::uint16_t> voxels;
  bool locked = false;
  std::set<int> object_ids;

  const Shape3& shape() const { return voxels.shape(); }
};

/// Distinct nonzero values present in `voxels`.
std::set<int> present_labels(const Volume<std::uint16_t>& voxels);

}  // namespace sliceprop
