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

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "sliceprop/backend.hpp"
#include "sliceprop/prompts.hpp"

namespace sliceprop {

struct EngineConfig {
  /// Backend output is clamped to the prompt box grown by this many pixels.
  int box_margin = 2;
};

/// Binary masks of one object over the whole volume, one per slice.
struct ObjectMaskVolume {
  int object_id = 0;
  Shape3 shape;
  std::vector<SliceMask> masks;  // masks[z].slice_index == z
  SliceSpan span;
  std::vector<std::string> warnings;

  bool on(std::size_t z, std::size_t y, std::size_t x) const { return masks[z].mask(y, x) != 0; }
  std::size_t voxel_count() const;
  std::size_t slice_count(int z) const { return count_on(masks[static_cast<std::size_t>(z)].mask); }
};

std::unique_ptr<BackendState> init_object(SegmentationBackend& backend, std::shared_ptr<const VolumeImage> volume,
                                          int object_id);

/// Segments one boxed slice. The result is clamped to the box dilated by
/// `config.box_margin` and becomes the slice's authoritative mask. An empty
/// result is returned as an all-false mask with a warning on the state.
SliceMask prompt_slice(SegmentationBackend& backend, BackendState& state, const SlicePrompts& prompts,
                       const EngineConfig& config = {});

/// Masks for the unprompted slices of `span`, ascending by slice index.
/// Throws ValidationError if the span leaves the volume or contains no
/// prompted slice.
std::vector<SliceMask> propagate(SegmentationBackend& backend, BackendState& state, Direction direction,
                                 SliceSpan span);

/// Distance-weighted vote over `span`: a slice at fraction a of the span
/// weighs the forward mask by (1 - a) and the backward mask by a; a voxel is
/// on iff the weighted sum >= 0.5. Both lists must cover the same slices.
std::vector<SliceMask> fuse_bidirectional(std::span<const SliceMask> forward, std::span<const SliceMask> backward,
                                          SliceSpan span);

struct PipelineOptions {
  EngineConfig engine;
  /// Only used when the object has a single boxed slice: propagate that
  /// slice's mask over this span instead of stopping at the slice.
  std::optional<SliceSpan> extended_span;
};

/// Full per-object run: prompt every boxed slice, propagate forward from the
/// first and backward from the last, fuse in between. Prompted slices keep
/// their prompted mask; slices outside the span are empty.
ObjectMaskVolume run_object_pipeline(std::shared_ptr<const VolumeImage> volume, const PromptSet& ps, int object_id,
                                     SegmentationBackend& backend, const PipelineOptions& options = {});

}  // namespace sliceprop
