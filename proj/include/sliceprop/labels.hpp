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

#include <filesystem>
#include <span>
#include <vector>

#include "sliceprop/engine.hpp"
#include "sliceprop/label_map.hpp"
#include "sliceprop/prompts.hpp"

namespace sliceprop {

/// Combines per-object masks into one label map. Where objects overlap the
/// one later in `precedence` wins. Every provided object id must appear in
/// `precedence`.
LabelMap merge_objects(std::span<const ObjectMaskVolume> masks, std::span<const int> precedence);

/// Precedence = order of `masks` (finalization order).
LabelMap merge_objects(std::span<const ObjectMaskVolume> masks);

enum class EditKind { paint, erase };

/// Brush stroke on one slice. The brush is the rasterized Euclidean disk
/// {(x, y) : (x - cx)^2 + (y - cy)^2 <= r^2}.
struct EditOp {
  EditKind kind = EditKind::paint;
  int object_id = 1;
  int slice_index = 0;
  Pixel brush_center;
  int brush_radius = 1;
};

/// paint: disk voxels become object_id. erase: disk voxels currently equal to
/// object_id become 0; other objects are untouched.
/// Throws StateError("label locked") on locked maps.
LabelMap apply_edit(const LabelMap& lm, const EditOp& edit);

/// Idempotent. Locked maps reject edits and are the only ones export accepts.
LabelMap lock(const LabelMap& lm);

/// Edit scripts for headless replay: [{kind, id, slice, center: [x, y], radius}, ...].
std::vector<EditOp> load_edits(const std::filesystem::path& path);

}  // namespace sliceprop
