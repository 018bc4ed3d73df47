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

#include "sliceprop/engine.hpp"

#include <algorithm>
#include <map>

#include "sliceprop/error.hpp"

namespace sliceprop {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::prompted: return "prompted";
    case Provenance::propagated_forward: return "propagated_forward";
    case Provenance::propagated_backward: return "propagated_backward";
    case Provenance::fused: return "fused";
    case Provenance::manual: return "manual";
  }
  return "unknown";
}

std::set<int> BackendState::prompted_slices() const {
  std::set<int> out;
  for (const auto& [s, _] : prompted_) out.insert(s);
  return out;
}

std::size_t ObjectMaskVolume::voxel_count() const {
  std::size_t n = 0;
  for (const auto& m : masks) n += count_on(m.mask);
  return n;
}

namespace {

void check_mask_shape(const SegmentationBackend& backend, const Mask2D& mask, const Shape3& shape, int slice) {
  if (mask.height() != shape.height || mask.width() != shape.width) {
    throw BackendError(backend.id(), "mask for slice " + std::to_string(slice) + " has shape " +
                                         std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                                         ", expected " + std::to_string(shape.height) + "x" +
                                         std::to_string(shape.width));
  }
}

void check_span(const SliceSpan& span, const Shape3& shape) {
  if (span.first < 0 || span.last < span.first || static_cast<std::size_t>(span.last) >= shape.depth) {
    throw ValidationError("span [" + std::to_string(span.first) + ", " + std::to_string(span.last) +
                          "] outside volume of depth " + std::to_string(shape.depth));
  }
}

}  // namespace

std::unique_ptr<BackendState> init_object(SegmentationBackend& backend, std::shared_ptr<const VolumeImage> volume,
                                          int object_id) {
  if (!volume) throw ValidationError("init_object: no volume");
  if (object_id < kMinObjectId || object_id > kMaxObjectId) {
    throw ValidationError("object id " + std::to_string(object_id) + " outside [1, 255]");
  }
  try {
    auto state = backend.create_state(std::move(volume), object_id);
    if (!state) throw BackendError(backend.id(), "backend returned no state");
    return state;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(backend.id(), e.what());
  }
}

SliceMask prompt_slice(SegmentationBackend& backend, BackendState& state, const SlicePrompts& prompts,
                       const EngineConfig& config) {
  const Shape3& shape = state.volume().shape();
  const BoxPrompt& box = prompts.box;
  if (box.object_id != state.object_id()) {
    throw ValidationError("box belongs to object " + std::to_string(box.object_id) + ", state to object " +
                          std::to_string(state.object_id()));
  }
  if (box.slice_index < 0 || static_cast<std::size_t>(box.slice_index) >= shape.depth) {
    throw ValidationError("slice " + std::to_string(box.slice_index) + " outside volume");
  }
  if (box.min_corner.x >= box.max_corner.x || box.min_corner.y >= box.max_corner.y) {
    throw ValidationError("degenerate box on slice " + std::to_string(box.slice_index));
  }
  for (const auto& p : prompts.points) {
    if (p.slice_index != box.slice_index) throw ValidationError("point on a different slice than its box");
  }

  Mask2D raw;
  try {
    raw = backend.segment(state, prompts);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(backend.id(), e.what());
  }
  check_mask_shape(backend, raw, shape, box.slice_index);

  const int m = std::max(0, config.box_margin);
  const int x0 = std::max(0, box.min_corner.x - m);
  const int y0 = std::max(0, box.min_corner.y - m);
  const int x1 = std::min(static_cast<int>(shape.width), box.max_corner.x + m);
  const int y1 = std::min(static_cast<int>(shape.height), box.max_corner.y + m);
  Mask2D clamped(shape.height, shape.width, 0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) clamped(y, x) = raw(y, x) ? 1 : 0;

  if (count_on(clamped) == 0) {
    state.warn("object " + std::to_string(state.object_id()) + " slice " + std::to_string(box.slice_index) +
               ": segmentation is empty");
  }
  state.record_prompted(box.slice_index, clamped);
  return {box.slice_index, std::move(clamped), Provenance::prompted};
}

std::vector<SliceMask> propagate(SegmentationBackend& backend, BackendState& state, Direction direction,
                                 SliceSpan span) {
  const Shape3& shape = state.volume().shape();
  check_span(span, shape);
  const auto prompted = state.prompted_slices();
  const bool anchored = std::any_of(prompted.begin(), prompted.end(), [&](int s) { return span.contains(s); });
  if (!anchored) {
    throw ValidationError("no prompted slice in span [" + std::to_string(span.first) + ", " +
                          std::to_string(span.last) + "]");
  }

  std::vector<SliceMask> raw;
  try {
    raw = backend.propagate(state, direction, span);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(backend.id(), e.what());
  }

  const Provenance provenance =
      direction == Direction::forward ? Provenance::propagated_forward : Provenance::propagated_backward;
  std::map<int, Mask2D> by_slice;
  for (auto& sm : raw) {
    if (!span.contains(sm.slice_index) || prompted.contains(sm.slice_index)) continue;
    check_mask_shape(backend, sm.mask, shape, sm.slice_index);
    by_slice[sm.slice_index] = std::move(sm.mask);
  }
  std::vector<SliceMask> out;
  for (int s = span.first; s <= span.last; ++s) {
    if (prompted.contains(s)) continue;
    auto it = by_slice.find(s);
    Mask2D mask = it != by_slice.end() ? std::move(it->second) : Mask2D(shape.height, shape.width, 0);
    out.push_back({s, std::move(mask), provenance});
  }
  return out;
}

std::vector<SliceMask> fuse_bidirectional(std::span<const SliceMask> forward, std::span<const SliceMask> backward,
                                          SliceSpan span) {
  if (forward.size() != backward.size()) throw ValidationError("fuse_bidirectional: coverage mismatch");
  std::map<int, const SliceMask*> bwd;
  for (const auto& b : backward) bwd[b.slice_index] = &b;
  if (bwd.size() != backward.size()) throw ValidationError("fuse_bidirectional: duplicate slice in backward list");

  std::vector<SliceMask> out;
  out.reserve(forward.size());
  for (const auto& f : forward) {
    auto it = bwd.find(f.slice_index);
    if (it == bwd.end()) {
      throw ValidationError("fuse_bidirectional: slice " + std::to_string(f.slice_index) + " missing from backward");
    }
    const SliceMask& b = *it->second;
    if (!f.mask.same_shape(b.mask)) throw ValidationError("fuse_bidirectional: mask shapes differ");
    if (!span.contains(f.slice_index)) {
      throw ValidationError("fuse_bidirectional: slice " + std::to_string(f.slice_index) + " outside span");
    }
    const double alpha =
        span.last > span.first ? static_cast<double>(f.slice_index - span.first) / (span.last - span.first) : 0.0;
    Mask2D fused(f.mask.height(), f.mask.width(), 0);
    for (std::size_t i = 0; i < fused.size(); ++i) {
      const double vote = (1.0 - alpha) * (f.mask.data()[i] ? 1.0 : 0.0) + alpha * (b.mask.data()[i] ? 1.0 : 0.0);
      fused.data()[i] = vote >= 0.5 ? 1 : 0;
    }
    out.push_back({f.slice_index, std::move(fused), Provenance::fused});
  }
  std::sort(out.begin(), out.end(), [](const SliceMask& a, const SliceMask& b) { return a.slice_index < b.slice_index; });
  return out;
}

ObjectMaskVolume run_object_pipeline(std::shared_ptr<const VolumeImage> volume, const PromptSet& ps, int object_id,
                                     SegmentationBackend& backend, const PipelineOptions& options) {
  if (!volume) throw ValidationError("run_object_pipeline: no volume");
  const Shape3 shape = volume->shape();
  const auto violations = violations_for(validate_promptset(ps, shape), object_id);
  if (!violations.empty()) {
    std::string msg = "prompts for object " + std::to_string(object_id) + " are invalid:";
    for (const auto& v : violations) msg += " [" + to_string(v.kind) + "] " + v.message + ";";
    throw ValidationError(msg);
  }
  if (!ps.find_object(object_id)) throw ValidationError("unknown object " + std::to_string(object_id));
  const std::vector<BoxPrompt> boxes = ps.boxes_for(object_id);
  if (boxes.empty()) throw ValidationError("object " + std::to_string(object_id) + " has no box prompts");

  ObjectMaskVolume result;
  result.object_id = object_id;
  result.shape = shape;
  result.masks.reserve(shape.depth);
  for (std::size_t z = 0; z < shape.depth; ++z) {
    result.masks.push_back({static_cast<int>(z), Mask2D(shape.height, shape.width, 0), Provenance::fused});
  }
  auto place = [&](SliceMask sm) { result.masks[static_cast<std::size_t>(sm.slice_index)] = std::move(sm); };

  auto state = init_object(backend, volume, object_id);
  for (const auto& box : boxes) place(prompt_slice(backend, *state, slice_prompts(ps, object_id, box.slice_index), options.engine));

  const SliceSpan span = propagation_span(ps, object_id);
  result.span = span;
  if (boxes.size() >= 2) {
    const auto fwd = propagate(backend, *state, Direction::forward, span);
    const auto bwd = propagate(backend, *state, Direction::backward, span);
    for (auto& sm : fuse_bidirectional(fwd, bwd, span)) place(std::move(sm));
  } else if (options.extended_span) {
    const SliceSpan ext = *options.extended_span;
    check_span(ext, shape);
    if (!ext.contains(span.first)) throw ValidationError("extended span does not contain the boxed slice");
    if (ext.last > span.first) {
      for (auto& sm : propagate(backend, *state, Direction::forward, {span.first, ext.last})) place(std::move(sm));
    }
    if (ext.first < span.first) {
      for (auto& sm : propagate(backend, *state, Direction::backward, {ext.first, span.first})) place(std::move(sm));
    }
    result.span = ext;
  }
  // Prompted masks are authoritative regardless of what propagation produced.
  for (const auto& [s, mask] : state->prompted_masks()) place({s, mask, Provenance::prompted});
  result.warnings = state->warnings();
  return result;
}

}  // namespace sliceprop
