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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sliceprop/volume.hpp"

namespace sliceprop {

/// Pixel position in the slice plane: x = column, y = row.
struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Rgb {
  std::uint8_t r = 255;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr int kMinObjectId = 1;
inline constexpr int kMaxObjectId = 255;

struct ObjectSpec {
  int id = 1;
  std::string name;
  Rgb color;
  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

/// Axis-aligned box on one slice; `min_corner` inclusive, `max_corner` exclusive.
struct BoxPrompt {
  int object_id = 0;
  int slice_index = 0;
  Pixel min_corner;
  Pixel max_corner;

  bool contains(Pixel p) const {
    return p.x >= min_corner.x && p.x < max_corner.x && p.y >= min_corner.y && p.y < max_corner.y;
  }
  friend bool operator==(const BoxPrompt&, const BoxPrompt&) = default;
};

enum class Polarity { positive, negative };

struct PointPrompt {
  int object_id = 0;
  int slice_index = 0;
  Pixel position;
  Polarity polarity = Polarity::positive;
  friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

/// Inclusive slice interval.
struct SliceSpan {
  int first = 0;
  int last = 0;
  bool contains(int s) const { return s >= first && s <= last; }
  friend bool operator==(const SliceSpan&, const SliceSpan&) = default;
};

/// All prompts for one case. A value type: the free functions below return
/// modified copies and never touch their argument, which is what the viewer's
/// undo stack relies on.
struct PromptSet {
  std::vector<ObjectSpec> objects;
  std::vector<BoxPrompt> boxes;
  std::vector<PointPrompt> points;

  const ObjectSpec* find_object(int id) const;
  const BoxPrompt* find_box(int object_id, int slice_index) const;
  /// Boxes of one object, ascending by slice.
  std::vector<BoxPrompt> boxes_for(int object_id) const;
  std::vector<PointPrompt> points_for(int object_id, int slice_index) const;
  /// Registered object ids, ascending.
  std::vector<int> object_ids() const;

  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

/// Box plus the points on the same slice; the unit a backend segments.
struct SlicePrompts {
  BoxPrompt box;
  std::vector<PointPrompt> points;
};

PromptSet register_object(const PromptSet& ps, const ObjectSpec& object);

/// Inserts or replaces the box for (object_id, slice_index). Throws
/// ValidationError for degenerate or out-of-bounds boxes and unknown objects.
PromptSet add_box(const PromptSet& ps, int object_id, int slice_index, Pixel min_corner, Pixel max_corner,
                  const Shape3& volume_shape);

/// Requires a box on the same (object_id, slice_index): "box required before
/// points". Identical points collapse to one.
PromptSet add_point(const PromptSet& ps, int object_id, int slice_index, Pixel position, Polarity polarity,
                    const Shape3& volume_shape);

/// First and last boxed slice of the object.
SliceSpan propagation_span(const PromptSet& ps, int object_id);

SlicePrompts slice_prompts(const PromptSet& ps, int object_id, int slice_index);

enum class ViolationKind {
  out_of_bounds,
  degenerate_box,
  unknown_object,
  duplicate_box,
  point_without_box,
  invalid_object,
};

struct Violation {
  ViolationKind kind;
  int object_id;
  int slice_index;  // -1 when not slice-specific
  std::string message;
};

std::string to_string(ViolationKind kind);

/// Every invariant breach against `volume_shape`, as data. Empty iff valid.
std::vector<Violation> validate_promptset(const PromptSet& ps, const Shape3& volume_shape);

/// Violations that concern one object (plus set-wide ones with that id).
std::vector<Violation> violations_for(const std::vector<Violation>& all, int object_id);

// `<case_id>_prompts.json`:
// {objects: [{id, name, color}], boxes: [{id, slice, min: [x, y], max: [x, y]}],
//  points: [{id, slice, pos: [x, y], polarity}]}
nlohmann::json to_json(const PromptSet& ps);
/// Structural parse only; semantic checks belong to validate_promptset.
PromptSet prompts_from_json(const nlohmann::json& j);

PromptSet load_prompts(const std::filesystem::path& path);
void save_prompts(const PromptSet& ps, const std::filesystem::path& path);
std::string prompts_filename(const std::string& case_id);

}  // namespace sliceprop
