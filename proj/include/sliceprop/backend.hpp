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

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sliceprop/prompts.hpp"
#include "sliceprop/volume.hpp"

namespace sliceprop {

struct BackendCapabilities {
  bool supports_points = false;
  bool supports_negative_points = false;
  bool supports_memory_propagation = false;
};

enum class Provenance { prompted, propagated_forward, propagated_backward, fused, manual };
enum class Direction { forward, backward };

std::string to_string(Provenance p);

struct SliceMask {
  int slice_index = 0;
  Mask2D mask;
  Provenance provenance = Provenance::prompted;
};

/// Per-(volume, object) segmentation state. Backends subclass it to keep
/// model memory; the base records which slices were prompted and their
/// final (clamped) masks, which the engine treats as authoritative.
///
/// One state is used by one thread at a time.
class BackendState {
 public:
  BackendState(std::shared_ptr<const VolumeImage> volume, int object_id)
      : volume_(std::move(volume)), object_id_(object_id) {}
  virtual ~BackendState() = default;

  BackendState(const BackendState&) = delete;
  BackendState& operator=(const BackendState&) = delete;

  const VolumeImage& volume() const { return *volume_; }
  const std::shared_ptr<const VolumeImage>& volume_ptr() const { return volume_; }
  int object_id() const { return object_id_; }

  std::set<int> prompted_slices() const;
  const std::map<int, Mask2D>& prompted_masks() const { return prompted_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  void record_prompted(int slice_index, Mask2D mask) { prompted_[slice_index] = std::move(mask); }
  void warn(std::string message) { warnings_.push_back(std::move(message)); }

 private:
  std::shared_ptr<const VolumeImage> volume_;
  int object_id_;
  std::map<int, Mask2D> prompted_;
  std::vector<std::string> warnings_;
};

/// A slice-sequence segmenter. Implementations must be deterministic for
/// identical inputs and seed. The engine functions in engine.hpp wrap these
/// calls and enforce the contracts (box clamp, prompt precedence,
/// preconditions); call those rather than the virtuals directly.
class SegmentationBackend {
 public:
  virtual ~SegmentationBackend() = default;

  virtual std::string id() const = 0;
  virtual BackendCapabilities capabilities() const = 0;

  /// Fresh state bound to one volume and one object. Throws BackendError on
  /// resource failures.
  virtual std::unique_ptr<BackendState> create_state(std::shared_ptr<const VolumeImage> volume, int object_id) = 0;

  /// Raw mask for one prompted slice, native slice resolution.
  virtual Mask2D segment(BackendState& state, const SlicePrompts& prompts) = 0;

  /// Raw masks for every slice in `span` that is not prompted, in travel
  /// order. Slices without a usable source get an empty mask.
  virtual std::vector<SliceMask> propagate(BackendState& state, Direction direction, SliceSpan span) = 0;
};

/// Backend block of the application config.
struct BackendConfig {
  std::string backend = "fallback-geometric";
  std::string device = "cpu";
  std::optional<std::string> checkpoint_path;
  int seed = 0;
};

}  // namespace sliceprop
