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

#include "sliceprop/fallback.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "sliceprop/error.hpp"

namespace sliceprop {

double otsu_threshold(std::span<const double> values) {
  if (values.empty()) throw ValidationError("otsu_threshold: no values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw ValidationError("otsu_threshold: fewer than two distinct values");

  const double width = (hi - lo) / kOtsuBins;
  std::array<double, kOtsuBins> hist{};
  for (double v : values) {
    int bin = static_cast<int>((v - lo) / width);
    hist[std::clamp(bin, 0, kOtsuBins - 1)] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double total_moment = 0.0;
  for (int i = 0; i < kOtsuBins; ++i) total_moment += i * hist[i];

  int best_cut = 0;
  double best = -1.0;
  double count0 = 0.0;
  double moment0 = 0.0;
  for (int k = 0; k < kOtsuBins - 1; ++k) {
    count0 += hist[k];
    moment0 += k * hist[k];
    const double count1 = total - count0;
    if (count0 == 0.0 || count1 == 0.0) continue;
    const double mean0 = moment0 / count0;
    const double mean1 = (total_moment - moment0) / count1;
    const double between = (count0 / total) * (count1 / total) * (mean0 - mean1) * (mean0 - mean1);
    if (between > best * (1.0 + 1e-12)) {
      best = between;
      best_cut = k;
    }
  }
  return lo + (best_cut + 1) * width;
}

Grid2D<int> label_components(const Mask2D& mask, Connectivity connectivity, int* count) {
  const std::size_t h = mask.height();
  const std::size_t w = mask.width();
  Grid2D<int> labels(h, w, 0);
  int next = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask(y, x) || labels(y, x)) continue;
      labels(y, x) = ++next;
      stack.assign(1, {y, x});
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (connectivity == Connectivity::four && dx != 0 && dy != 0) continue;
            const long ny = static_cast<long>(cy) + dy;
            const long nx = static_cast<long>(cx) + dx;
            if (ny < 0 || nx < 0 || ny >= static_cast<long>(h) || nx >= static_cast<long>(w)) continue;
            if (!mask(ny, nx) || labels(ny, nx)) continue;
            labels(ny, nx) = next;
            stack.push_back({static_cast<std::size_t>(ny), static_cast<std::size_t>(nx)});
          }
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

Mask2D largest_component(const Mask2D& mask, Connectivity connectivity, std::span<const Pixel> keep) {
  int count = 0;
  const Grid2D<int> labels = label_components(mask, connectivity, &count);
  Mask2D out(mask.height(), mask.width(), 0);
  if (count == 0) return out;

  std::vector<std::size_t> sizes(count + 1, 0);
  for (int l : labels.data()) ++sizes[l];
  std::vector<bool> retain(count + 1, false);
  int largest = 1;
  // Labels follow row-major order of first pixels, so '>' keeps the earliest on ties.
  for (int l = 2; l <= count; ++l)
    if (sizes[l] > sizes[largest]) largest = l;
  retain[largest] = true;
  for (const Pixel& p : keep) {
    if (p.x < 0 || p.y < 0 || p.y >= static_cast<int>(mask.height()) || p.x >= static_cast<int>(mask.width())) continue;
    retain[labels(p.y, p.x)] = labels(p.y, p.x) != 0;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = retain[labels.data()[i]] ? 1 : 0;
  return out;
}

namespace {

// 1D squared distance transform of a sampled function (Felzenszwalb & Huttenlocher).
// "Infinite" samples are represented by kFar so the lower envelope stays finite.
constexpr double kFar = 1e20;

void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto intersect = [&](int q, int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p); };
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

// Squared Euclidean distance from each pixel to the nearest pixel with feature[p] != 0.
Grid2D<double> squared_edt(const Mask2D& feature) {
  const std::size_t h = feature.height();
  const std::size_t w = feature.width();
  Grid2D<double> out(h, w, kFar);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = feature.data()[i] ? 0.0 : kFar;

  const std::size_t n = std::max(h, w);
  std::vector<double> f, d(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  f.resize(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) f[y] = out(y, x);
    d.resize(h);
    distance_1d(f, d, v, z);
    for (std::size_t y = 0; y < h; ++y) out(y, x) = d[y];
  }
  f.resize(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) f[x] = out(y, x);
    d.resize(w);
    distance_1d(f, d, v, z);
    for (std::size_t x = 0; x < w; ++x) out(y, x) = d[x] >= kFar / 2 ? std::numeric_limits<double>::infinity() : d[x];
  }
  return out;
}

}  // namespace

Grid2D<double> signed_distance(const Mask2D& mask) {
  const double cap = static_cast<double>(mask.height() + mask.width());
  Mask2D background(mask.height(), mask.width(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) background.data()[i] = mask.data()[i] ? 0 : 1;
  const Grid2D<double> to_fg = squared_edt(mask);
  const Grid2D<double> to_bg = squared_edt(background);
  Grid2D<double> out(mask.height(), mask.width(), 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data()[i]) {
      out.data()[i] = -(std::min(std::sqrt(to_bg.data()[i]), cap) - 0.5);
    } else {
      out.data()[i] = std::min(std::sqrt(to_fg.data()[i]), cap) - 0.5;
    }
  }
  return out;
}

Mask2D sdf_interpolate(const Mask2D& a, const Mask2D& b, double alpha) {
  if (!a.same_shape(b)) throw ValidationError("sdf_interpolate: mask shapes differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("sdf_interpolate: alpha outside [0, 1]");
  if (count_on(a) == 0 || count_on(b) == 0) throw ValidationError("sdf_interpolate: empty input mask");
  const Grid2D<double> da = signed_distance(a);
  const Grid2D<double> db = signed_distance(b);
  Mask2D out(a.height(), a.width(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = ((1.0 - alpha) * da.data()[i] + alpha * db.data()[i]) <= 0.0 ? 1 : 0;
  }
  return out;
}

std::unique_ptr<BackendState> FallbackGeometricBackend::create_state(std::shared_ptr<const VolumeImage> volume,
                                                                     int object_id) {
  return std::make_unique<BackendState>(std::move(volume), object_id);
}

Mask2D FallbackGeometricBackend::segment(BackendState& state, const SlicePrompts& prompts) {
  const VolumeImage& vol = state.volume();
  const std::size_t h = vol.shape().height;
  const std::size_t w = vol.shape().width;
  const auto slice = vol.voxels.slice(static_cast<std::size_t>(prompts.box.slice_index));
  const BoxPrompt& box = prompts.box;
  const int x0 = std::max(0, box.min_corner.x), y0 = std::max(0, box.min_corner.y);
  const int x1 = std::min(static_cast<int>(w), box.max_corner.x);
  const int y1 = std::min(static_cast<int>(h), box.max_corner.y);

  Mask2D out(h, w, 0);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(std::max(0, (x1 - x0) * (y1 - y0))));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) values.push_back(slice[static_cast<std::size_t>(y) * w + x]);

  double threshold = 0.0;
  try {
    threshold = otsu_threshold(values);
  } catch (const ValidationError&) {
    state.warn("slice " + std::to_string(box.slice_index) + ": box covers a uniform region, no threshold split");
    return out;
  }
  auto bright = [&](int y, int x) { return slice[static_cast<std::size_t>(y) * w + x] > threshold; };

  // Foreground class: the one holding the positive points, otherwise the one
  // touching the box border less (brighter wins ties).
  int votes_bright = 0, votes_dark = 0;
  std::vector<Pixel> positives, negatives;
  for (const auto& p : prompts.points) {
    if (!box.contains(p.position)) {
      if (p.polarity == Polarity::negative) negatives.push_back(p.position);
      continue;
    }
    if (p.polarity == Polarity::positive) {
      positives.push_back(p.position);
      (bright(p.position.y, p.position.x) ? votes_bright : votes_dark) += 1;
    } else {
      negatives.push_back(p.position);
    }
  }
  bool foreground_bright = true;
  if (votes_bright != votes_dark) {
    foreground_bright = votes_bright > votes_dark;
  } else {
    std::size_t border = 0, border_bright = 0;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        if (y != y0 && y != y1 - 1 && x != x0 && x != x1 - 1) continue;
        ++border;
        border_bright += bright(y, x) ? 1 : 0;
      }
    }
    foreground_bright = 2 * border_bright <= border;
  }

  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) out(y, x) = bright(y, x) == foreground_bright ? 1 : 0;

  out = largest_component(out, Connectivity::eight, positives);
  if (!negatives.empty()) {
    const Grid2D<int> labels = label_components(out, Connectivity::eight);
    std::vector<int> drop;
    for (const Pixel& p : negatives) {
      if (p.x >= 0 && p.y >= 0 && p.x < static_cast<int>(w) && p.y < static_cast<int>(h) && labels(p.y, p.x)) {
        drop.push_back(labels(p.y, p.x));
      }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (std::find(drop.begin(), drop.end(), labels.data()[i]) != drop.end()) out.data()[i] = 0;
    }
  }
  return out;
}

std::vector<SliceMask> FallbackGeometricBackend::propagate(BackendState& state, Direction direction, SliceSpan span) {
  const auto& prompted = state.prompted_masks();
  const std::size_t h = state.volume().shape().height;
  const std::size_t w = state.volume().shape().width;
  const Provenance provenance =
      direction == Direction::forward ? Provenance::propagated_forward : Provenance::propagated_backward;

  std::vector<int> order;
  for (int s = span.first; s <= span.last; ++s)
    if (!prompted.contains(s)) order.push_back(s);
  if (direction == Direction::backward) std::reverse(order.begin(), order.end());

  std::vector<SliceMask> out;
  for (int s : order) {
    auto next = prompted.upper_bound(s);
    const Mask2D* after = next == prompted.end() ? nullptr : &next->second;
    const Mask2D* before = next == prompted.begin() ? nullptr : &std::prev(next)->second;
    const Mask2D* source = direction == Direction::forward ? before : after;
    const Mask2D* target = direction == Direction::forward ? after : before;

    Mask2D mask(h, w, 0);
    if (source && count_on(*source) > 0) {
      if (target && count_on(*target) > 0) {
        const int s_before = std::prev(next)->first;
        const int s_after = next->first;
        const double alpha = static_cast<double>(s - s_before) / (s_after - s_before);
        mask = sdf_interpolate(*before, *after, alpha);
      } else {
        mask = *source;
      }
    }
    out.push_back({s, std::move(mask), provenance});
  }
  return out;
}

}  // namespace sliceprop
