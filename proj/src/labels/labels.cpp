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

#include "sliceprop/labels.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"

namespace sliceprop {

LabelMap merge_objects(std::span<const ObjectMaskVolume> masks, std::span<const int> precedence) {
  LabelMap out;
  if (masks.empty()) return out;
  const Shape3 shape = masks.front().shape;
  for (const auto& m : masks) {
    if (m.shape != shape || m.masks.size() != shape.depth) {
      throw ValidationError("merge_objects: object " + std::to_string(m.object_id) + " has shape " +
                            to_string(m.shape) + ", expected " + to_string(shape));
    }
    if (m.object_id < kMinObjectId || m.object_id > kMaxObjectId) {
      throw ValidationError("merge_objects: object id " + std::to_string(m.object_id) + " outside [1, 255]");
    }
  }
  std::vector<const ObjectMaskVolume*> ordered;
  for (int id : precedence) {
    for (const auto& m : masks)
      if (m.object_id == id) ordered.push_back(&m);
  }
  for (const auto& m : masks) {
    if (std::find(precedence.begin(), precedence.end(), m.object_id) == precedence.end()) {
      throw ValidationError("merge_objects: precedence is missing object " + std::to_string(m.object_id));
    }
  }

  out.voxels = Volume<std::uint16_t>(shape, 0);
  for (const ObjectMaskVolume* m : ordered) {
    for (std::size_t z = 0; z < shape.depth; ++z) {
      const Mask2D& mask = m->masks[z].mask;
      auto slice = out.voxels.slice(z);
      for (std::size_t i = 0; i < slice.size(); ++i)
        if (mask.data()[i]) slice[i] = static_cast<std::uint16_t>(m->object_id);
    }
  }
  out.object_ids = present_labels(out.voxels);
  return out;
}

LabelMap merge_objects(std::span<const ObjectMaskVolume> masks) {
  std::vector<int> order;
  for (const auto& m : masks) order.push_back(m.object_id);
  return merge_objects(masks, order);
}

LabelMap apply_edit(const LabelMap& lm, const EditOp& edit) {
  if (lm.locked) throw StateError("label locked");
  const Shape3& shape = lm.shape();
  if (edit.brush_radius < 1) throw ValidationError("brush radius must be >= 1");
  if (edit.object_id < kMinObjectId || edit.object_id > kMaxObjectId) {
    throw ValidationError("object id " + std::to_string(edit.object_id) + " outside [1, 255]");
  }
  if (edit.slice_index < 0 || static_cast<std::size_t>(edit.slice_index) >= shape.depth ||
      edit.brush_center.x < 0 || edit.brush_center.y < 0 ||
      static_cast<std::size_t>(edit.brush_center.x) >= shape.width ||
      static_cast<std::size_t>(edit.brush_center.y) >= shape.height) {
    throw ValidationError("brush centre outside volume " + to_string(shape));
  }

  LabelMap out = lm;
  const int r = edit.brush_radius;
  const auto value = static_cast<std::uint16_t>(edit.object_id);
  const auto z = static_cast<std::size_t>(edit.slice_index);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy > r * r) continue;
      const int x = edit.brush_center.x + dx;
      const int y = edit.brush_center.y + dy;
      if (x < 0 || y < 0 || x >= static_cast<int>(shape.width) || y >= static_cast<int>(shape.height)) continue;
      auto& v = out.voxels(z, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      if (edit.kind == EditKind::paint) {
        v = value;
      } else if (v == value) {
        v = 0;
      }
    }
  }
  out.object_ids = present_labels(out.voxels);
  return out;
}

LabelMap lock(const LabelMap& lm) {
  LabelMap out = lm;
  out.locked = true;
  return out;
}

std::vector<EditOp> load_edits(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, /*allow_exceptions=*/false);
  if (j.is_object() && j.contains("edits")) j = j["edits"];
  if (!j.is_array()) throw FormatError("edit script must be a JSON array: " + path.string());
  std::vector<EditOp> out;
  try {
    for (const auto& e : j) {
      EditOp op;
      const std::string kind = e.at("kind").get<std::string>();
      if (kind == "paint") {
        op.kind = EditKind::paint;
      } else if (kind == "erase") {
        op.kind = EditKind::erase;
      } else {
        throw FormatError("edit kind must be paint or erase, got " + kind);
      }
      op.object_id = e.at("id").get<int>();
      op.slice_index = e.at("slice").get<int>();
      const auto& c = e.at("center");
      op.brush_center = {c.at(0).get<int>(), c.at(1).get<int>()};
      op.brush_radius = e.value("radius", 1);
      out.push_back(op);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("invalid edit script " + path.string() + ": " + ex.what());
  }
  return out;
}

}  // namespace sliceprop
