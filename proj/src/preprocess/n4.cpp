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
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "sliceprop/error.hpp"
#include "sliceprop/preprocess.hpp"

namespace sliceprop {

void N4Params::validate() const {
  if (shrink_factor < 1) throw ValidationError("N4 shrink factor must be >= 1");
  if (fitting_levels < 1) throw ValidationError("N4 fitting levels must be >= 1");
  if (iterations_per_level.size() != static_cast<std::size_t>(fitting_levels)) {
    throw ValidationError("N4 needs one iteration count per fitting level (" + std::to_string(fitting_levels) +
                          "), got " + std::to_string(iterations_per_level.size()));
  }
  for (int n : iterations_per_level)
    if (n < 1) throw ValidationError("N4 iterations per level must be >= 1");
  if (!(convergence_threshold > 0.0)) throw ValidationError("N4 convergence threshold must be > 0");
  if (histogram_bins < 2) throw ValidationError("N4 histogram needs at least 2 bins");
  if (!(bias_field_fwhm > 0.0)) throw ValidationError("N4 bias field FWHM must be > 0");
  if (!(wiener_noise > 0.0)) throw ValidationError("N4 Wiener noise must be > 0");
  if (initial_mesh_elements < 1) throw ValidationError("N4 initial mesh must have >= 1 element");
}

namespace {

using Complex = std::complex<double>;

void fft(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const Complex wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      Complex w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

// Uniform cubic B-spline basis at fractional position t in [0, 1].
std::array<double, 4> cubic_basis(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {(1 - t) * (1 - t) * (1 - t) / 6.0, (3 * t3 - 6 * t2 + 4) / 6.0, (-3 * t3 + 3 * t2 + 3 * t + 1) / 6.0,
          t3 / 6.0};
}

// Maps a full-resolution index coordinate to (knot span, basis weights).
struct AxisMap {
  double extent;  // last index (N - 1)
  int mesh;

  std::pair<int, std::array<double, 4>> operator()(double coord) const {
    double u = extent > 0.0 ? coord / extent * mesh : 0.0;
    u = std::clamp(u, 0.0, static_cast<double>(mesh));
    const int span = std::min(static_cast<int>(std::floor(u)), mesh - 1);
    return {span, cubic_basis(u - span)};
  }
};

struct Lattice {
  int mesh = 1;
  std::array<int, 3> size{};  // control points per axis (x, y, z) = mesh + 3
  std::vector<double> phi;

  explicit Lattice(int m) : mesh(m), size{m + 3, m + 3, m + 3}, phi(static_cast<std::size_t>((m + 3) * (m + 3) * (m + 3)), 0.0) {}
  double& at(int x, int y, int z) { return phi[(static_cast<std::size_t>(z) * size[1] + y) * size[0] + x]; }
  double at(int x, int y, int z) const { return phi[(static_cast<std::size_t>(z) * size[1] + y) * size[0] + x]; }
};

struct SamplePoint {
  std::array<double, 3> coord;  // full-resolution (x, y, z) index coordinates
  double log_intensity;
};

struct Domain {
  std::array<double, 3> extent;  // (x, y, z)
  std::array<AxisMap, 3> axes(int mesh) const {
    return {AxisMap{extent[0], mesh}, AxisMap{extent[1], mesh}, AxisMap{extent[2], mesh}};
  }
};

// Single-level B-spline approximation of scattered residuals (Lee, Wolberg & Shin).
Lattice fit_lattice(const std::vector<SamplePoint>& pts, const std::vector<double>& residual, const Domain& dom,
                    int mesh) {
  Lattice lat(mesh);
  std::vector<double> delta(lat.phi.size(), 0.0), omega(lat.phi.size(), 0.0);
  const auto ax = dom.axes(mesh);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const auto [jx, bx] = ax[0](pts[p].coord[0]);
    const auto [jy, by] = ax[1](pts[p].coord[1]);
    const auto [jz, bz] = ax[2](pts[p].coord[2]);
    double sum_w2 = 0.0;
    for (int c = 0; c < 4; ++c)
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a) {
          const double w = bx[a] * by[b] * bz[c];
          sum_w2 += w * w;
        }
    if (sum_w2 <= 0.0) continue;
    for (int c = 0; c < 4; ++c)
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a) {
          const double w = bx[a] * by[b] * bz[c];
          const std::size_t idx = (static_cast<std::size_t>(jz + c) * lat.size[1] + (jy + b)) * lat.size[0] + (jx + a);
          const double w2 = w * w;
          delta[idx] += w2 * (w * residual[p] / sum_w2);
          omega[idx] += w2;
        }
  }
  for (std::size_t i = 0; i < lat.phi.size(); ++i) lat.phi[i] = omega[i] > 0.0 ? delta[i] / omega[i] : 0.0;
  return lat;
}

double evaluate(const Lattice& lat, const Domain& dom, const std::array<double, 3>& coord) {
  const auto ax = dom.axes(lat.mesh);
  const auto [jx, bx] = ax[0](coord[0]);
  const auto [jy, by] = ax[1](coord[1]);
  const auto [jz, bz] = ax[2](coord[2]);
  double v = 0.0;
  for (int c = 0; c < 4; ++c)
    for (int b = 0; b < 4; ++b)
      for (int a = 0; a < 4; ++a) v += bx[a] * by[b] * bz[c] * lat.at(jx + a, jy + b, jz + c);
  return v;
}

// Adds the lattice's value at every voxel of `shape`, contracting one axis at a time.
void accumulate_dense(const Lattice& lat, const Domain& dom, const Shape3& shape, std::vector<double>& out) {
  const auto ax = dom.axes(lat.mesh);
  const int nx = lat.size[0], ny = lat.size[1];
  std::vector<double> plane(static_cast<std::size_t>(nx * ny));
  std::vector<double> row(static_cast<std::size_t>(nx));
  std::vector<std::pair<int, std::array<double, 4>>> xmaps(shape.width);
  for (std::size_t x = 0; x < shape.width; ++x) xmaps[x] = ax[0](static_cast<double>(x));
  for (std::size_t z = 0; z < shape.depth; ++z) {
    const auto [jz, bz] = ax[2](static_cast<double>(z));
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        double s = 0.0;
        for (int c = 0; c < 4; ++c) s += bz[c] * lat.at(x, y, jz + c);
        plane[static_cast<std::size_t>(y * nx + x)] = s;
      }
    for (std::size_t y = 0; y < shape.height; ++y) {
      const auto [jy, by] = ax[1](static_cast<double>(y));
      for (int x = 0; x < nx; ++x) {
        double s = 0.0;
        for (int b = 0; b < 4; ++b) s += by[b] * plane[static_cast<std::size_t>((jy + b) * nx + x)];
        row[static_cast<std::size_t>(x)] = s;
      }
      double* dst = out.data() + (z * shape.height + y) * shape.width;
      for (std::size_t x = 0; x < shape.width; ++x) {
        const auto& [jx, bx] = xmaps[x];
        double s = 0.0;
        for (int a = 0; a < 4; ++a) s += bx[a] * row[static_cast<std::size_t>(jx + a)];
        dst[x] += s;
      }
    }
  }
}

// Histogram sharpening: deconvolve the log-intensity histogram by a Gaussian
// (Wiener filter) and map each value to its expected sharpened value.
std::vector<double> sharpen(const std::vector<double>& log_values, const N4Params& params) {
  const auto [lo_it, hi_it] = std::minmax_element(log_values.begin(), log_values.end());
  const double bin_min = *lo_it, bin_max = *hi_it;
  if (!(bin_max - bin_min > 1e-12)) return log_values;

  const int nbins = params.histogram_bins;
  const double slope = (bin_max - bin_min) / (nbins - 1);
  std::vector<double> hist(static_cast<std::size_t>(nbins), 0.0);
  for (double v : log_values) {
    const double cidx = (v - bin_min) / slope;
    const int idx = std::min(static_cast<int>(std::floor(cidx)), nbins - 1);
    const double off = cidx - idx;
    hist[static_cast<std::size_t>(idx)] += 1.0 - off;
    if (idx + 1 < nbins) hist[static_cast<std::size_t>(idx + 1)] += off;
  }

  const std::size_t padded = std::size_t{1} << (static_cast<int>(std::ceil(std::log2(nbins))) + 1);
  const std::size_t offset = static_cast<std::size_t>(std::floor(0.5 * static_cast<double>(padded - nbins)));
  std::vector<Complex> V(padded, 0.0);
  for (int n = 0; n < nbins; ++n) V[offset + static_cast<std::size_t>(n)] = hist[static_cast<std::size_t>(n)];
  fft(V, false);

  const double scaled_fwhm = params.bias_field_fwhm / slope;
  const double exp_factor = 4.0 * std::log(2.0) / (scaled_fwhm * scaled_fwhm);
  const double scale_factor = 2.0 * std::sqrt(std::log(2.0) / std::numbers::pi) / scaled_fwhm;
  std::vector<Complex> F(padded, 0.0);
  F[0] = scale_factor;
  for (std::size_t n = 1; n <= padded / 2; ++n) {
    const double nn = static_cast<double>(n);
    F[n] = F[padded - n] = scale_factor * std::exp(-nn * nn * exp_factor);
  }
  fft(F, false);

  std::vector<Complex> U(padded);
  for (std::size_t n = 0; n < padded; ++n) {
    const Complex G = std::conj(F[n]) / (std::norm(F[n]) + params.wiener_noise);
    U[n] = V[n] * G;
  }
  fft(U, true);
  for (auto& u : U) u = std::max(u.real(), 0.0);

  std::vector<Complex> numer(padded), denom(U);
  for (std::size_t n = 0; n < padded; ++n) {
    numer[n] = U[n].real() * (bin_min + (static_cast<double>(n) - static_cast<double>(offset)) * slope);
  }
  fft(numer, false);
  fft(denom, false);
  for (std::size_t n = 0; n < padded; ++n) {
    numer[n] *= F[n];
    denom[n] *= F[n];
  }
  fft(numer, true);
  fft(denom, true);
  std::vector<double> expected(padded, 0.0);
  for (std::size_t n = 0; n < padded; ++n) {
    expected[n] = denom[n].real() != 0.0 ? numer[n].real() / denom[n].real() : 0.0;
  }

  std::vector<double> out(log_values.size());
  for (std::size_t i = 0; i < log_values.size(); ++i) {
    const double cidx = (log_values[i] - bin_min) / slope;
    const int idx = static_cast<int>(std::floor(cidx));
    if (idx < nbins - 1) {
      const double a = expected[offset + static_cast<std::size_t>(idx)];
      const double b = expected[offset + static_cast<std::size_t>(idx) + 1];
      out[i] = a + (b - a) * (cidx - idx);
    } else {
      out[i] = expected[offset + static_cast<std::size_t>(nbins - 1)];
    }
  }
  return out;
}

double update_variation(const std::vector<double>& before, const std::vector<double>& after) {
  std::vector<double> ratio(before.size());
  for (std::size_t i = 0; i < before.size(); ++i) ratio[i] = std::exp(before[i] - after[i]);
  return coefficient_of_variation(ratio);
}

}  // namespace

N4Result n4_correct(const VolumeImage& volume, const N4Params& params, const Volume<std::uint8_t>* mask) {
  params.validate();
  const Shape3 shape = volume.shape();
  if (mask && mask->shape() != shape) throw ValidationError("N4 mask shape does not match the volume");
  const auto src = volume.voxels.data();

  N4Result result;
  result.corrected = volume;
  result.field = volume;
  std::fill(result.field.voxels.data().begin(), result.field.voxels.data().end(), 1.0f);
  if (src.empty()) return result;

  const float min_value = *std::min_element(src.begin(), src.end());
  const double shift = min_value < 0.0f ? -static_cast<double>(min_value) : 0.0;
  if (shift > 0.0) result.warnings.push_back("negative intensities shifted by " + std::to_string(shift) + " for N4");

  auto in_mask = [&](std::size_t i) {
    const double v = src[i] + shift;
    return v > 0.0 && (!mask || mask->data()[i] != 0);
  };

  // Constant (or empty) foreground: nothing to estimate.
  {
    bool any = false;
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (!in_mask(i)) continue;
      const double v = src[i];
      if (!any) lo = hi = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      any = true;
    }
    if (!any || hi == lo) {
      result.warnings.push_back("constant-intensity volume; N4 returns the identity field");
      return result;
    }
  }

  // Shrink by block averaging of masked voxels.
  const std::size_t s = static_cast<std::size_t>(params.shrink_factor);
  const std::size_t sz = (shape.depth + s - 1) / s, sy = (shape.height + s - 1) / s, sx = (shape.width + s - 1) / s;
  std::vector<SamplePoint> pts;
  pts.reserve(sz * sy * sx);
  for (std::size_t bz = 0; bz < sz; ++bz)
    for (std::size_t by = 0; by < sy; ++by)
      for (std::size_t bx = 0; bx < sx; ++bx) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t z = bz * s; z < std::min(shape.depth, (bz + 1) * s); ++z)
          for (std::size_t y = by * s; y < std::min(shape.height, (by + 1) * s); ++y)
            for (std::size_t x = bx * s; x < std::min(shape.width, (bx + 1) * s); ++x) {
              const std::size_t i = (z * shape.height + y) * shape.width + x;
              if (!in_mask(i)) continue;
              sum += src[i] + shift;
              ++n;
            }
        if (n == 0) continue;
        auto centre = [s](std::size_t b, std::size_t dim) {
          const std::size_t first = b * s, last = std::min(dim, (b + 1) * s) - 1;
          return 0.5 * static_cast<double>(first + last);
        };
        pts.push_back({{centre(bx, shape.width), centre(by, shape.height), centre(bz, shape.depth)},
                       std::log(sum / static_cast<double>(n))});
      }

  const Domain dom{{static_cast<double>(shape.width - 1), static_cast<double>(shape.height - 1),
                    static_cast<double>(shape.depth - 1)}};
  std::vector<double> log_bias(pts.size(), 0.0), log_uncorrected(pts.size()), residual(pts.size());
  std::vector<Lattice> lattices;

  for (int level = 0; level < params.fitting_levels; ++level) {
    const int mesh = params.initial_mesh_elements << level;
    lattices.emplace_back(mesh);
    int iters = 0;
    double conv = 0.0;
    for (; iters < params.iterations_per_level[static_cast<std::size_t>(level)];) {
      for (std::size_t i = 0; i < pts.size(); ++i) log_uncorrected[i] = pts[i].log_intensity - log_bias[i];
      const std::vector<double> sharpened = sharpen(log_uncorrected, params);
      for (std::size_t i = 0; i < pts.size(); ++i) residual[i] = log_uncorrected[i] - sharpened[i];
      const Lattice increment = fit_lattice(pts, residual, dom, mesh);
      for (std::size_t k = 0; k < increment.phi.size(); ++k) lattices.back().phi[k] += increment.phi[k];
      std::vector<double> updated(log_bias);
      for (std::size_t i = 0; i < pts.size(); ++i) updated[i] += evaluate(increment, dom, pts[i].coord);
      conv = update_variation(log_bias, updated);
      log_bias = std::move(updated);
      ++iters;
      if (conv < params.convergence_threshold) break;
    }
    result.iterations_run.push_back(iters);
    result.convergence.push_back(conv);
  }

  std::vector<double> log_field(shape.size(), 0.0);
  for (const auto& lat : lattices) accumulate_dense(lat, dom, shape, log_field);
  double mean = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!in_mask(i)) continue;
    mean += log_field[i];
    ++n;
  }
  mean /= static_cast<double>(n);

  auto corrected = result.corrected.voxels.data();
  auto field = result.field.voxels.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double f = std::exp(log_field[i] - mean);
    field[i] = static_cast<float>(f);
    corrected[i] = static_cast<float>((src[i] + shift) / static_cast<double>(field[i]) - shift);
  }
  return result;
}

}  // namespace sliceprop
