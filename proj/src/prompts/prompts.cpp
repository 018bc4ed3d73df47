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

#include "sliceprop/prompts.hpp"

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"

namespace sliceprop {

namespace {

bool slice_in_bounds(int slice, const Shape3& shape) {
  return slice >= 0 && static_cast<std::size_t>(slice) < shape.depth;
}

bool pixel_in_bounds(Pixel p, const Shape3& shape) {
  return p.x >= 0 && p.y >= 0 && static_cast<std::size_t>(p.x) < shape.width &&
         static_cast<std::size_t>(p.y) < shape.height;
}

bool box_in_bounds(const BoxPrompt& b, const Shape3& shape) {
  return slice_in_bounds(b.slice_index, shape) && b.min_corner.x >= 0 && b.min_corner.y >= 0 &&
         b.max_corner.x <= static_cast<long>(shape.width) && b.max_corner.y <= static_cast<long>(shape.height);
}

bool box_degenerate(const BoxPrompt& b) {
  return b.min_corner.x >= b.max_corner.x || b.min_corner.y >= b.max_corner.y;
}

std::string box_text(const BoxPrompt& b) {
  return "(" + std::to_string(b.min_corner.x) + "," + std::to_string(b.min_corner.y) + ")-(" +
         std::to_string(b.max_corner.x) + "," + std::to_string(b.max_corner.y) + ") on slice " +
         std::to_string(b.slice_index);
}

}  // namespace

const ObjectSpec* PromptSet::find_object(int id) const {
  auto it = std::find_if(objects.begin(), objects.end(), [id](const ObjectSpec& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

const BoxPrompt* PromptSet::find_box(int object_id, int slice_index) const {
  auto it = std::find_if(boxes.begin(), boxes.end(), [&](const BoxPrompt& b) {
    return b.object_id == object_id && b.slice_index == slice_index;
  });
  return it == boxes.end() ? nullptr : &*it;
}

std::vector<BoxPrompt> PromptSet::boxes_for(int object_id) const {
  std::vector<BoxPrompt> out;
  std::copy_if(boxes.begin(), boxes.end(), std::back_inserter(out),
               [object_id](const BoxPrompt& b) { return b.object_id == object_id; });
  std::stable_sort(out.begin(), out.end(),
                   [](const BoxPrompt& a, const BoxPrompt& b) { return a.slice_index < b.slice_index; });
  return out;
}

std::vector<PointPrompt> PromptSet::points_for(int object_id, int slice_index) const {
  std::vector<PointPrompt> out;
  std::copy_if(points.begin(), points.end(), std::back_inserter(out), [&](const PointPrompt& p) {
    return p.object_id == object_id && p.slice_index == slice_index;
  });
  return out;
}

std::vector<int> PromptSet::object_ids() const {
  std::vector<int> ids;
  for (const auto& o : objects) ids.push_back(o.id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

PromptSet register_object(const PromptSet& ps, const ObjectSpec& object) {
  if (object.id < kMinObjectId || object.id > kMaxObjectId) {
    throw ValidationError("object id " + std::to_string(object.id) + " outside [1, 255]");
  }
  if (ps.find_object(object.id)) throw ValidationError("object " + std::to_string(object.id) + " already registered");
  PromptSet out = ps;
  out.objects.push_back(object);
  return out;
}

PromptSet add_box(const PromptSet& ps, int object_id, int slice_index, Pixel min_corner, Pixel max_corner,
                  const Shape3& volume_shape) {
  if (!ps.find_object(object_id)) throw ValidationError("unknown object " + std::to_string(object_id));
  const BoxPrompt box{object_id, slice_index, min_corner, max_corner};
  if (box_degenerate(box)) throw ValidationError("degenerate box " + box_text(box));
  if (!box_in_bounds(box, volume_shape)) {
    throw ValidationError("box " + box_text(box) + " outside volume " + to_string(volume_shape));
  }
  PromptSet out = ps;
  auto it = std::find_if(out.boxes.begin(), out.boxes.end(), [&](const BoxPrompt& b) {
    return b.object_id == object_id && b.slice_index == slice_index;
  });
  if (it != out.boxes.end()) {
    *it = box;
  } else {
    out.boxes.push_back(box);
  }
  return out;
}

PromptSet add_point(const PromptSet& ps, int object_id, int slice_index, Pixel position, Polarity polarity,
                    const Shape3& volume_shape) {
  if (!ps.find_object(object_id)) throw ValidationError("unknown object " + std::to_string(object_id));
  if (!slice_in_bounds(slice_index, volume_shape) || !pixel_in_bounds(position, volume_shape)) {
    throw ValidationError("point outside volume " + to_string(volume_shape));
  }
  if (!ps.find_box(object_id, slice_index)) throw ValidationError("box required before points");
  const PointPrompt point{object_id, slice_index, position, polarity};
  if (std::find(ps.points.begin(), ps.points.end(), point) != ps.points.end()) return ps;
  PromptSet out = ps;
  out.points.push_back(point);
  return out;
}

SliceSpan propagation_span(const PromptSet& ps, int object_id) {
  std::optional<SliceSpan> span;
  for (const auto& b : ps.boxes) {
    if (b.object_id != object_id) continue;
    if (!span) {
      span = SliceSpan{b.slice_index, b.slice_index};
    } else {
      span->first = std::min(span->first, b.slice_index);
      span->last = std::max(span->last, b.slice_index);
    }
  }
  if (!span) throw ValidationError("object " + std::to_string(object_id) + " has no box prompts");
  return *span;
}

SlicePrompts slice_prompts(const PromptSet& ps, int object_id, int slice_index) {
  const BoxPrompt* box = ps.find_box(object_id, slice_index);
  if (!box) {
    throw ValidationError("no box for object " + std::to_string(object_id) + " on slice " +
                          std::to_string(slice_index));
  }
  return {*box, ps.points_for(object_id, slice_index)};
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::out_of_bounds: return "out_of_bounds";
    case ViolationKind::degenerate_box: return "degenerate_box";
    case ViolationKind::unknown_object: return "unknown_object";
    case ViolationKind::duplicate_box: return "duplicate_box";
    case ViolationKind::point_without_box: return "point_without_box";
    case ViolationKind::invalid_object: return "invalid_object";
  }
  return "unknown";
}

std::vector<Violation> validate_promptset(const PromptSet& ps, const Shape3& volume_shape) {
  std::vector<Violation> out;
  std::set<int> ids;
  for (const auto& o : ps.objects) {
    if (o.id < kMinObjectId || o.id > kMaxObjectId) {
      out.push_back({ViolationKind::invalid_object, o.id, -1, "object id outside [1, 255]"});
    } else if (!ids.insert(o.id).second) {
      out.push_back({ViolationKind::invalid_object, o.id, -1, "object id registered twice"});
    }
  }

  std::set<std::pair<int, int>> boxed;
  for (const auto& b : ps.boxes) {
    if (!ids.contains(b.object_id)) {
      out.push_back({ViolationKind::unknown_object, b.object_id, b.slice_index,
                     "box references unregistered object " + std::to_string(b.object_id)});
      continue;
    }
    if (box_degenerate(b)) {
      out.push_back({ViolationKind::degenerate_box, b.object_id, b.slice_index, "degenerate box " + box_text(b)});
    } else if (!box_in_bounds(b, volume_shape)) {
      out.push_back({ViolationKind::out_of_bounds, b.object_id, b.slice_index,
                     "box " + box_text(b) + " outside volume " + to_string(volume_shape)});
    }
    if (!boxed.insert({b.object_id, b.slice_index}).second) {
      out.push_back({ViolationKind::duplicate_box, b.object_id, b.slice_index, "more than one box on this slice"});
    }
  }

  for (const auto& p : ps.points) {
    if (!ids.contains(p.object_id)) {
      out.push_back({ViolationKind::unknown_object, p.object_id, p.slice_index,
                     "point references unregistered object " + std::to_string(p.object_id)});
      continue;
    }
    if (!slice_in_bounds(p.slice_index, volume_shape) || !pixel_in_bounds(p.position, volume_shape)) {
      out.push_back({ViolationKind::out_of_bounds, p.object_id, p.slice_index,
                     "point (" + std::to_string(p.position.x) + "," + std::to_string(p.position.y) +
                         ") outside volume " + to_string(volume_shape)});
    }
    if (!boxed.contains({p.object_id, p.slice_index})) {
      out.push_back({ViolationKind::point_without_box, p.object_id, p.slice_index, "box required before points"});
    }
  }
  return out;
}

std::vector<Violation> violations_for(const std::vector<Violation>& all, int object_id) {
  std::vector<Violation> out;
  std::copy_if(all.begin(), all.end(), std::back_inserter(out),
               [object_id](const Violation& v) { return v.object_id == object_id; });
  return out;
}

nlohmann::json to_json(const PromptSet& ps) {
  nlohmann::json j;
  j["objects"] = nlohmann::json::array();
  for (const auto& o : ps.objects) {
    j["objects"].push_back({{"id", o.id}, {"name", o.name}, {"color", {o.color.r, o.color.g, o.color.b}}});
  }
  j["boxes"] = nlohmann::json::array();
  for (const auto& b : ps.boxes) {
    j["boxes"].push_back({{"id", b.object_id},
                          {"slice", b.slice_index},
                          {"min", {b.min_corner.x, b.min_corner.y}},
                          {"max", {b.max_corner.x, b.max_corner.y}}});
  }
  j["points"] = nlohmann::json::array();
  for (const auto& p : ps.points) {
    j["points"].push_back({{"id", p.object_id},
                           {"slice", p.slice_index},
                           {"pos", {p.position.x, p.position.y}},
                           {"polarity", p.polarity == Polarity::positive ? "positive" : "negative"}});
  }
  return j;
}

PromptSet prompts_from_json(const nlohmann::json& j) {
  try {
    PromptSet ps;
    auto pixel = [](const nlohmann::json& a) {
      if (!a.is_array() || a.size() != 2) throw FormatError("pixel must be [x, y]");
      return Pixel{a[0].get<int>(), a[1].get<int>()};
    };
    for (const auto& o : j.value("objects", nlohmann::json::array())) {
      ObjectSpec spec;
      spec.id = o.at("id").get<int>();
      spec.name = o.value("name", "object_" + std::to_string(spec.id));
      if (o.contains("color")) {
        const auto& c = o["color"];
        if (!c.is_array() || c.size() != 3) throw FormatError("color must be [r, g, b]");
        spec.color = {c[0].get<std::uint8_t>(), c[1].get<std::uint8_t>(), c[2].get<std::uint8_t>()};
      }
      ps.objects.push_back(spec);
    }
    for (const auto& b : j.value("boxes", nlohmann::json::array())) {
      ps.boxes.push_back({b.at("id").get<int>(), b.at("slice").get<int>(), pixel(b.at("min")), pixel(b.at("max"))});
    }
    for (const auto& p : j.value("points", nlohmann::json::array())) {
      const std::string pol = p.value("polarity", "positive");
      if (pol != "positive" && pol != "negative") throw FormatError("polarity must be positive or negative");
      ps.points.push_back({p.at("id").get<int>(), p.at("slice").get<int>(), pixel(p.at("pos")),
                           pol == "positive" ? Polarity::positive : Polarity::negative});
    }
    return ps;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid prompts document: ") + e.what());
  }
}

PromptSet load_prompts(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  auto j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("prompts file is not a JSON object: " + path.string());
  return prompts_from_json(j);
}

void save_prompts(const PromptSet& ps, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(ps).dump(2) + "\n");
}

std::string prompts_filename(const std::string& case_id) { return case_id + "_prompts.json"; }

}  // namespace sliceprop
