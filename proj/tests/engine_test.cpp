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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "fixtures.hpp"
#include "sliceprop/engine.hpp"
#include "sliceprop/error.hpp"
#include "sliceprop/fallback.hpp"

using namespace sliceprop;
using namespace sliceprop::testing;

namespace {

// Brute-force Otsu: every cut after bin k, class statistics from bin centres.
double otsu_oracle(const std::vector<double>& v) {
  const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  const double w = (hi - lo) / 256;
  auto bin = [&](double x) { return std::clamp(static_cast<int>((x - lo) / w), 0, 255); };
  double best = -1;
  int best_k = 0;
  for (int k = 0; k < 255; ++k) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (double x : v) {
      const double c = lo + (bin(x) + 0.5) * w;
      if (bin(x) <= k) n0 += 1, s0 += c;
      else n1 += 1, s1 += c;
    }
    if (n0 == 0 || n1 == 0) continue;
    const double n = n0 + n1;
    const double between = (n0 / n) * (n1 / n) * std::pow(s0 / n0 - s1 / n1, 2);
    if (between > best * (1 + 1e-9)) best = between, best_k = k;
  }
  return lo + (best_k + 1) * w;
}

// Signed distance by exhaustive search over all pixels of the other class.
double sdf_oracle(const Mask2D& m, std::size_t y, std::size_t x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t yy = 0; yy < m.height(); ++yy)
    for (std::size_t xx = 0; xx < m.width(); ++xx)
      if ((m(yy, xx) != 0) != (m(y, x) != 0)) best = std::min(best, std::hypot(double(yy) - y, double(xx) - x));
  return m(y, x) ? -(best - 0.5) : best - 0.5;
}

std::shared_ptr<const VolumeImage> slice_volume(std::size_t depth, std::size_t h, std::size_t w,
                                                const std::function<float(std::size_t, std::size_t, std::size_t)>& f) {
  return std::make_shared<const VolumeImage>(make_volume({depth, h, w}, {}, f));
}

std::size_t area(const Mask2D& m) { return count_on(m); }

bool subset(const Mask2D& a, const Mask2D& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] && !b.data()[i]) return false;
  return true;
}

// Backend stub: segment fills the whole slice; propagate fills every slice of the span.
class FloodBackend : public SegmentationBackend {
 public:
  std::string id() const override { return "flood"; }
  BackendCapabilities capabilities() const override { return {}; }
  std::unique_ptr<BackendState> create_state(std::shared_ptr<const VolumeImage> v, int id) override {
    if (fail_init) throw std::runtime_error("weights missing");
    return std::make_unique<BackendState>(std::move(v), id);
  }
  Mask2D segment(BackendState& s, const SlicePrompts&) override {
    return Mask2D(s.volume().shape().height, s.volume().shape().width, 1);
  }
  std::vector<SliceMask> propagate(BackendState& s, Direction, SliceSpan span) override {
    std::vector<SliceMask> out;
    for (int z = span.first; z <= span.last; ++z)
      out.push_back({z, Mask2D(s.volume().shape().height, s.volume().shape().width, 1), Provenance::manual});
    return out;
  }
  bool fail_init = false;
};

SlicePrompts box_only(int object, int slice, Pixel a, Pixel b) { return {{object, slice, a, b}, {}}; }

}  // namespace

TEST_SUITE("otsu") {
  TEST_CASE("two-level input splits between the levels") {
    std::vector<double> v(100, 0.0);
    v.insert(v.end(), 100, 10.0);
    const double t = otsu_threshold(v);
    CHECK(t > 0.0);
    CHECK(t < 10.0);
    CHECK(t == doctest::Approx(otsu_oracle(v)));
  }

  TEST_CASE("matches the brute-force search on random data") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      std::normal_distribution<double> a(20 + trial, 4), b(60, 9);
      std::vector<double> v;
      for (int i = 0; i < 300; ++i) v.push_back(i % 3 ? a(rng) : b(rng));
      CHECK(otsu_threshold(v) == doctest::Approx(otsu_oracle(v)).epsilon(1e-12));
    }
  }

  TEST_CASE("bimodal mixture misclassification below 2%") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> dark(50, 6), bright(120, 10);
    std::vector<double> v;
    std::vector<int> label;
    for (int i = 0; i < 10000; ++i) {
      const bool b = i % 2;
      v.push_back(b ? bright(rng) : dark(rng));
      label.push_back(b);
    }
    const double t = otsu_threshold(v);
    int wrong = 0;
    for (std::size_t i = 0; i < v.size(); ++i) wrong += (v[i] > t) != (label[i] == 1);
    CHECK(wrong < 200);
  }

  TEST_CASE("constant input is an error") {
    const std::vector<double> v(10, 3.0);
    CHECK_THROWS_AS(otsu_threshold(v), ValidationError);
  }
}

TEST_SUITE("components") {
  TEST_CASE("largest component wins") {
    Mask2D m(20, 20, 0);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 10; ++x) m(y, x) = 1;
    for (int y = 10; y < 12; ++y)
      for (int x = 10; x < 15; ++x) m(y, x) = 1;
    const Mask2D out = largest_component(m);
    CHECK(area(out) == 50);
    CHECK(out(0, 0) == 1);
    CHECK(out(10, 10) == 0);
  }

  TEST_CASE("empty in, empty out") {
    const Mask2D m(4, 4, 0);
    CHECK(largest_component(m) == m);
  }

  TEST_CASE("equal sizes keep the earliest row-major component") {
    Mask2D m(10, 10, 0);
    m(5, 1) = m(5, 2) = 1;
    m(2, 7) = m(2, 8) = 1;
    const Mask2D out = largest_component(m);
    CHECK(out(2, 7) == 1);
    CHECK(out(5, 1) == 0);
  }

  TEST_CASE("diagonal neighbours join only under 8-connectivity") {
    Mask2D m(5, 5, 0);
    m(0, 0) = m(1, 1) = m(2, 2) = 1;
    m(4, 0) = m(4, 1) = 1;
    CHECK(area(largest_component(m, Connectivity::eight)) == 3);
    CHECK(area(largest_component(m, Connectivity::four)) == 2);
    int n = 0;
    label_components(m, Connectivity::four, &n);
    CHECK(n == 4);
  }

  TEST_CASE("components under keep points survive") {
    Mask2D m(10, 10, 0);
    for (int x = 0; x < 6; ++x) m(0, x) = 1;
    m(8, 8) = 1;
    const Pixel keep[] = {{8, 8}};
    const Mask2D out = largest_component(m, Connectivity::eight, keep);
    CHECK(area(out) == 7);
  }
}

TEST_SUITE("sdf") {
  TEST_CASE("signed distance equals the exhaustive oracle") {
    std::mt19937_64 rng(8);
    std::bernoulli_distribution on(0.3);
    for (int trial = 0; trial < 5; ++trial) {
      Mask2D m(13, 17, 0);
      for (auto& v : m.data()) v = on(rng);
      m(0, 0) = 1;
      m(12, 16) = 0;
      const Grid2D<double> d = signed_distance(m);
      for (std::size_t y = 0; y < 13; ++y)
        for (std::size_t x = 0; x < 17; ++x) CHECK(d(y, x) == doctest::Approx(sdf_oracle(m, y, x)).epsilon(1e-12));
    }
  }

  TEST_CASE("endpoints and agreement are identities") {
    const Mask2D a = disk_mask(40, 40, 20, 20, 5), b = disk_mask(40, 40, 18, 22, 9);
    CHECK(sdf_interpolate(a, b, 0.0) == a);
    CHECK(sdf_interpolate(a, b, 1.0) == b);
    for (double alpha : {0.1, 0.5, 0.77}) CHECK(sdf_interpolate(a, a, alpha) == a);
  }

  TEST_CASE("disks of radius 4 and 8 meet at radius 6 within one pixel") {
    const Mask2D a = disk_mask(41, 41, 20, 20, 4), b = disk_mask(41, 41, 20, 20, 8);
    const Mask2D mid = sdf_interpolate(a, b, 0.5);
    for (std::size_t y = 0; y < 41; ++y)
      for (std::size_t x = 0; x < 41; ++x) {
        const double r = std::hypot(double(x) - 20, double(y) - 20);
        if (r <= 5.0) CHECK(mid(y, x) == 1);
        if (r > 7.0) CHECK(mid(y, x) == 0);
      }
  }

  TEST_CASE("nested inputs give areas between the two") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> c(14, 26), r(2, 6), grow(1, 8), a(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
      const double cx = c(rng), cy = c(rng), r0 = r(rng);
      const Mask2D small = disk_mask(40, 40, cx, cy, r0);
      const Mask2D big = disk_mask(40, 40, cx + 0.5, cy - 0.5, r0 + 1.0 + grow(rng));
      REQUIRE(subset(small, big));
      const double alpha = a(rng);
      const std::size_t n = area(sdf_interpolate(small, big, alpha));
      CHECK(n >= area(small));
      CHECK(n <= area(big));
    }
  }

  TEST_CASE("empty or mismatched inputs are errors") {
    const Mask2D a = disk_mask(10, 10, 5, 5, 2), e(10, 10, 0), other(9, 10, 1);
    CHECK_THROWS_AS(sdf_interpolate(a, e, 0.5), ValidationError);
    CHECK_THROWS_AS(sdf_interpolate(a, other, 0.5), ValidationError);
  }
}

TEST_SUITE("fallback segment") {
  TEST_CASE("bright square inside a box is recovered exactly") {
    auto vol = slice_volume(3, 32, 32, [](auto, auto y, auto x) {
      return (y >= 10 && y < 18 && x >= 12 && x < 20) ? 90.0f : 15.0f;
    });
    FallbackGeometricBackend fb;
    auto st = init_object(fb, vol, 1);
    const SliceMask sm = prompt_slice(fb, *st, box_only(1, 1, {8, 6}, {24, 22}));
    Mask2D expected(32, 32, 0);
    for (int y = 10; y < 18; ++y)
      for (int x = 12; x < 20; ++x) expected(y, x) = 1;
    CHECK(sm.mask == expected);
    CHECK(sm.provenance == Provenance::prompted);
    CHECK(st->prompted_slices() == std::set<int>{1});
    CHECK(st->warnings().empty());
  }

  TEST_CASE("uniform box gives an empty mask and a warning") {
    auto vol = slice_volume(2, 16, 16, [](auto, auto, auto) { return 5.0f; });
    FallbackGeometricBackend fb;
    auto st = init_object(fb, vol, 1);
    const SliceMask sm = prompt_slice(fb, *st, box_only(1, 0, {2, 2}, {10, 10}));
    CHECK(area(sm.mask) == 0);
    CHECK_FALSE(st->warnings().empty());
    CHECK(st->prompted_slices().contains(0));
  }

  TEST_CASE("positive point keeps a second component, negative point drops one") {
    auto vol = slice_volume(1, 40, 40, [](auto, auto y, auto x) {
      const bool big = y >= 5 && y < 15 && x >= 5 && x < 15;
      const bool small = y >= 25 && y < 29 && x >= 25 && x < 29;
      return big || small ? 100.0f : 0.0f;
    });
    FallbackGeometricBackend fb;
    auto st = init_object(fb, vol, 1);
    SlicePrompts sp = box_only(1, 0, {2, 2}, {35, 35});
    CHECK(area(prompt_slice(fb, *st, sp).mask) == 100);
    sp.points.push_back({1, 0, {26, 26}, Polarity::positive});
    const Mask2D both = prompt_slice(fb, *st, sp).mask;
    CHECK(area(both) == 116);
    CHECK(both(27, 27) == 1);
    sp.points.push_back({1, 0, {7, 7}, Polarity::negative});
    const Mask2D small_only = prompt_slice(fb, *st, sp).mask;
    CHECK(area(small_only) == 16);
  }

  TEST_CASE("dark object on a bright surround is chosen by the border rule") {
    auto vol = slice_volume(1, 30, 30, [](auto, auto y, auto x) {
      return (y >= 10 && y < 20 && x >= 10 && x < 20) ? 10.0f : 200.0f;
    });
    FallbackGeometricBackend fb;
    auto st = init_object(fb, vol, 1);
    const Mask2D m = prompt_slice(fb, *st, box_only(1, 0, {5, 5}, {25, 25})).mask;
    CHECK(area(m) == 100);
    CHECK(m(15, 15) == 1);
  }
}

TEST_SUITE("engine") {
  TEST_CASE("init gives fresh, independent states") {
    auto vol = slice_volume(10, 8, 8, [](auto, auto y, auto) { return float(y); });
    FallbackGeometricBackend fb;
    auto a = init_object(fb, vol, 1);
    auto b = init_object(fb, vol, 1);
    CHECK(a->prompted_slices().empty());
    prompt_slice(fb, *a, box_only(1, 3, {1, 1}, {7, 7}));
    CHECK(a->prompted_slices().size() == 1);
    CHECK(b->prompted_slices().empty());
  }

  TEST_CASE("backend failures name the backend") {
    auto vol = slice_volume(2, 4, 4, [](auto, auto, auto) { return 0.f; });
    FloodBackend flood;
    flood.fail_init = true;
    try {
      init_object(flood, vol, 1);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.backend_id() == "flood");
      CHECK(std::string(e.what()).find("flood") != std::string::npos);
    }
  }

  TEST_CASE("prompted masks stay inside the box grown by the margin") {
    std::mt19937_64 rng(12);
    auto vol = slice_volume(4, 50, 60, [](auto, auto, auto) { return 0.f; });
    FloodBackend flood;
    std::uniform_int_distribution<int> xs(0, 59), ys(0, 49), margin(0, 4);
    for (int trial = 0; trial < 40; ++trial) {
      int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      ++x1, ++y1;
      const EngineConfig cfg{margin(rng)};
      auto st = init_object(flood, vol, 1);
      const Mask2D m = prompt_slice(flood, *st, box_only(1, 2, {x0, y0}, {x1, y1}), cfg).mask;
      for (int y = 0; y < 50; ++y)
        for (int x = 0; x < 60; ++x) {
          const bool inside = x >= x0 - cfg.box_margin && x < x1 + cfg.box_margin && y >= y0 - cfg.box_margin &&
                              y < y1 + cfg.box_margin;
          CHECK(m(y, x) == (inside ? 1 : 0));
        }
    }
  }

  TEST_CASE("propagate preconditions and degenerate span") {
    auto vol = slice_volume(12, 20, 20, [](auto, auto y, auto x) { return std::hypot(y - 10.0, x - 10.0) < 4 ? 50.f : 0.f; });
    FallbackGeometricBackend fb;
    auto st = init_object(fb, vol, 1);
    CHECK_THROWS_AS(propagate(fb, *st, Direction::forward, {0, 5}), ValidationError);
    prompt_slice(fb, *st, box_only(1, 5, {3, 3}, {17, 17}));
    CHECK(propagate(fb, *st, Direction::forward, {5, 5}).empty());
    CHECK_THROWS_AS(propagate(fb, *st, Direction::forward, {5, 12}), ValidationError);
    CHECK_THROWS_AS(propagate(fb, *st, Direction::forward, {6, 9}), ValidationError);
  }

  TEST_CASE("identical prompted disks propagate unchanged") {
    auto vol = slice_volume(11, 32, 32, [](auto, auto y, auto x) { return std::hypot(y - 15.0, x - 16.0) <= 6 ? 80.f : 5.f; });
    FallbackGeometricBackend fb;
    auto st = init_object(fb, vol, 1);
    const Mask2D d0 = prompt_slice(fb, *st, box_only(1, 0, {6, 5}, {27, 26})).mask;
    const Mask2D d10 = prompt_slice(fb, *st, box_only(1, 10, {6, 5}, {27, 26})).mask;
    REQUIRE(d0 == d10);
    for (Direction dir : {Direction::forward, Direction::backward}) {
      const auto out = propagate(fb, *st, dir, {0, 10});
      REQUIRE(out.size() == 9);
      for (const auto& sm : out) CHECK(sm.mask == d0);
    }
  }

  TEST_CASE("a single source is copied along the span") {
    auto vol = slice_volume(11, 32, 32, [](auto z, auto y, auto x) {
      return z == 0 && std::hypot(y - 12.0, x - 18.0) <= 5 ? 80.f : 5.f;
    });
    FallbackGeometricBackend fb;
    auto st = init_object(fb, vol, 1);
    const Mask2D src = prompt_slice(fb, *st, box_only(1, 0, {10, 4}, {27, 21})).mask;
    const auto out = propagate(fb, *st, Direction::forward, {0, 10});
    REQUIRE(out.size() == 10);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].slice_index == int(i) + 1);
      CHECK(out[i].mask == src);
      CHECK(out[i].provenance == Provenance::propagated_forward);
    }
    for (const auto& sm : propagate(fb, *st, Direction::backward, {0, 10})) CHECK(area(sm.mask) == 0);
  }
}

TEST_SUITE("fusion") {
  std::vector<SliceMask> masks_over(SliceSpan span, const std::function<Mask2D(int)>& f, Provenance p) {
    std::vector<SliceMask> out;
    for (int s = span.first; s <= span.last; ++s) out.push_back({s, f(s), p});
    return out;
  }

  TEST_CASE("agreement is preserved") {
    std::mt19937_64 rng(2);
    std::bernoulli_distribution on(0.4);
    const SliceSpan span{3, 9};
    const auto m = masks_over(span, [&](int) {
      Mask2D x(6, 7, 0);
      for (auto& v : x.data()) v = on(rng);
      return x;
    }, Provenance::propagated_forward);
    const auto fused = fuse_bidirectional(m, m, span);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(fused[i].mask == m[i].mask);
      CHECK(fused[i].provenance == Provenance::fused);
    }
  }

  TEST_CASE("weighted vote equals the per-voxel brute force") {
    const SliceSpan span{0, 10};
    const Mask2D r4 = disk_mask(30, 30, 15, 15, 4), r8 = disk_mask(30, 30, 15, 15, 8);
    const auto fwd = masks_over(span, [&](int) { return r4; }, Provenance::propagated_forward);
    const auto bwd = masks_over(span, [&](int) { return r8; }, Provenance::propagated_backward);
    const auto fused = fuse_bidirectional(fwd, bwd, span);
    for (const auto& sm : fused) {
      const double alpha = sm.slice_index / 10.0;
      for (std::size_t i = 0; i < sm.mask.size(); ++i) {
        const double vote = (1 - alpha) * r4.data()[i] + alpha * r8.data()[i];
        CHECK(sm.mask.data()[i] == (vote >= 0.5 ? 1 : 0));
      }
    }
    CHECK(fused.front().mask == r4);
    CHECK(fused[5].mask == r8);
  }

  TEST_CASE("mismatched coverage is an error") {
    const SliceSpan span{0, 4};
    const auto a = masks_over(span, [](int) { return Mask2D(3, 3, 1); }, Provenance::propagated_forward);
    const auto b = masks_over({0, 3}, [](int) { return Mask2D(3, 3, 1); }, Provenance::propagated_backward);
    CHECK_THROWS_AS(fuse_bidirectional(a, b, span), ValidationError);
    auto shifted = masks_over({1, 5}, [](int) { return Mask2D(3, 3, 1); }, Provenance::propagated_backward);
    CHECK_THROWS_AS(fuse_bidirectional(a, shifted, span), ValidationError);
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("two boxes give masks exactly on the span") {
    const CylinderFixture cyl;
    auto vol = std::make_shared<const VolumeImage>(cyl.volume());
    FallbackGeometricBackend fb;
    const ObjectMaskVolume omv = run_object_pipeline(vol, cyl.prompts({2, 8}), 1, fb);
    CHECK(omv.span == SliceSpan{2, 8});
    for (int z = 0; z < 12; ++z) CHECK((omv.slice_count(z) > 0) == (z >= 2 && z <= 8));
    for (int z = 2; z <= 8; ++z) CHECK(dice(omv.masks[z].mask, cyl.disk()) >= 0.95);
    CHECK(omv.masks[2].provenance == Provenance::prompted);
    CHECK(omv.masks[5].provenance == Provenance::fused);
  }

  TEST_CASE("a single box masks only its slice unless the span is extended") {
    const CylinderFixture cyl;
    auto vol = std::make_shared<const VolumeImage>(cyl.volume());
    FallbackGeometricBackend fb;
    const ObjectMaskVolume one = run_object_pipeline(vol, cyl.prompts({4}), 1, fb);
    for (int z = 0; z < 12; ++z) CHECK((one.slice_count(z) > 0) == (z == 4));
    PipelineOptions opt;
    opt.extended_span = SliceSpan{2, 8};
    const ObjectMaskVolume ext = run_object_pipeline(vol, cyl.prompts({4}), 1, fb, opt);
    for (int z = 0; z < 12; ++z) CHECK((ext.slice_count(z) > 0) == (z >= 2 && z <= 8));
  }

  TEST_CASE("an interior prompt keeps its own mask") {
    CylinderFixture cyl;
    VolumeImage img = cyl.volume();
    const Mask2D small = disk_mask(64, 64, 31.5, 31.5, 5);
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t x = 0; x < 64; ++x) img.voxels(5, y, x) = small(y, x) ? 100.f : 10.f;
    auto vol = std::make_shared<const VolumeImage>(img);
    FallbackGeometricBackend fb;
    const ObjectMaskVolume omv = run_object_pipeline(vol, cyl.prompts({2, 5, 8}), 1, fb);
    CHECK(omv.masks[5].mask == small);
    CHECK(omv.masks[5].provenance == Provenance::prompted);
  }

  TEST_CASE("prompted slices survive a backend that overwrites everything") {
    const CylinderFixture cyl;
    auto vol = std::make_shared<const VolumeImage>(cyl.volume());
    FloodBackend flood;
    const ObjectMaskVolume omv = run_object_pipeline(vol, cyl.prompts({2, 8}), 1, flood);
    const BoxPrompt b = cyl.box(1, 2);
    const std::size_t expected = std::size_t(b.max_corner.x - b.min_corner.x + 4) * (b.max_corner.y - b.min_corner.y + 4);
    CHECK(omv.slice_count(2) == expected);
    CHECK(omv.slice_count(5) == 64 * 64);
    CHECK(omv.slice_count(9) == 0);
  }

  TEST_CASE("runs are deterministic") {
    const CylinderFixture cyl;
    auto vol = std::make_shared<const VolumeImage>(cyl.volume());
    FallbackGeometricBackend fb;
    const auto a = run_object_pipeline(vol, cyl.prompts({2, 8}), 1, fb);
    const auto b = run_object_pipeline(vol, cyl.prompts({2, 8}), 1, fb);
    for (int z = 0; z < 12; ++z) CHECK(a.masks[z].mask == b.masks[z].mask);
  }

  TEST_CASE("invalid prompts are rejected before the backend runs") {
    const CylinderFixture cyl;
    auto vol = std::make_shared<const VolumeImage>(cyl.volume());
    FallbackGeometricBackend fb;
    PromptSet ps = cyl.prompts({2});
    ps.boxes.push_back({1, 40, {0, 0}, {4, 4}});
    CHECK_THROWS_AS(run_object_pipeline(vol, ps, 1, fb), ValidationError);
  }
}
