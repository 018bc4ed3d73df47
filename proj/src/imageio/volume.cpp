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

#include "sliceprop/label_map.hpp"
#include "sliceprop/volume.hpp"

#include <algorithm>

namespace sliceprop {

std::string to_string(const Shape3& s) {
  return std::to_string(s.depth) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

std::size_t count_on(const Mask2D& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(), [](auto v) { return v != 0; }));
}

std::set<int> present_labels(const Volume<std::uint16_t>& voxels) {
  std::vector<bool> seen(65536, false);
  for (auto v : voxels.data()) seen[v] = true;
  std::set<int> out;
  for (int i = 1; i < 65536; ++i)
    if (seen[i]) out.insert(i);
  return out;
}

}  // namespace sliceprop
