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

#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace sliceprop::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("sliceprop-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
  const double len = std::sqrt(w * w + x * x + y * y + z * z);
  w /= len, x /= len, y /= len, z /= len;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

VolumeGeometry random_geometry(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> sp(0.3, 5.0), org(-500.0, 500.0);
  VolumeGeometry g;
  g.spacing = {sp(rng), sp(rng), sp(rng)};
  g.origin = {org(rng), org(rng), org(rng)};
  g.direction = random_rotation(rng);
  return g;
}

VolumeImage make_volume(Shape3 shape, const VolumeGeometry& geometry,
                        const std::function<float(std::size_t, std::size_t, std::size_t)>& f) {
  VolumeImage img{Volume<float>(shape), geometry, std::nullopt};
  for (std::size_t z = 0; z < shape.depth; ++z)
    for (std::size_t y = 0; y < shape.height; ++y)
      for (std::size_t x = 0; x < shape.width; ++x) img.voxels(z, y, x) = f(z, y, x);
  return img;
}

Mask2D disk_mask(std::size_t height, std::size_t width, double cx, double cy, double r) {
  Mask2D m(height, width, 0);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      m(y, x) = dx * dx + dy * dy <= r * r ? 1 : 0;
    }
  return m;
}

double dice(const Mask2D& a, const Mask2D& b) {
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a.data()[i] != 0;
    nb += b.data()[i] != 0;
    inter += a.data()[i] && b.data()[i];
  }
  return na + nb == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

VolumeImage CylinderFixture::volume() const {
  const Mask2D d = disk();
  return make_volume(shape, geometry, [&](std::size_t z, std::size_t y, std::size_t x) {
    const bool inside = static_cast<int>(z) >= first && static_cast<int>(z) <= last && d(y, x);
    return inside ? 100.0f : 10.0f;
  });
}

Mask2D CylinderFixture::disk() const { return disk_mask(shape.height, shape.width, cx, cy, radius); }

std::size_t CylinderFixture::voxel_count() const {
  return count_on(disk()) * static_cast<std::size_t>(last - first + 1);
}

BoxPrompt CylinderFixture::box(int object_id, int slice, int pad) const {
  const int x0 = static_cast<int>(std::floor(cx - radius)) - pad, y0 = static_cast<int>(std::floor(cy - radius)) - pad;
  const int x1 = static_cast<int>(std::ceil(cx + radius)) + 1 + pad, y1 = static_cast<int>(std::ceil(cy + radius)) + 1 + pad;
  return {object_id, slice, {x0, y0}, {x1, y1}};
}

PromptSet CylinderFixture::prompts(std::vector<int> slices) const {
  PromptSet ps;
  ps.objects.push_back({1, "cylinder", {255, 0, 0}});
  for (int s : slices) ps.boxes.push_back(box(1, s));
  return ps;
}

namespace {

class ElementWriter {
 public:
  void str(std::uint16_t group, std::uint16_t elem, const char vr[3], std::string value) {
    const char pad = std::strcmp(vr, "UI") == 0 ? '\0' : ' ';
    if (value.size() % 2) value.push_back(pad);
    header(group, elem, vr, value.size());
    buf_ += value;
  }
  void us(std::uint16_t group, std::uint16_t elem, std::uint16_t v) {
    header(group, elem, "US", 2);
    put16(v);
  }
  void ul(std::uint16_t group, std::uint16_t elem, std::uint32_t v) {
    header(group, elem, "UL", 4);
    put32(v);
  }
  void bytes(std::uint16_t group, std::uint16_t elem, const char vr[3], const void* data, std::size_t n) {
    header(group, elem, vr, n);
    buf_.append(static_cast<const char*>(data), n);
    if (n % 2) buf_.push_back('\0');
  }
  const std::string& data() const { return buf_; }

 private:
  void put16(std::uint16_t v) {
    buf_.push_back(static_cast<char>(v & 0xff));
    buf_.push_back(static_cast<char>(v >> 8));
  }
  void put32(std::uint32_t v) {
    put16(static_cast<std::uint16_t>(v & 0xffff));
    put16(static_cast<std::uint16_t>(v >> 16));
  }
  void header(std::uint16_t group, std::uint16_t elem, const char vr[3], std::size_t len) {
    put16(group);
    put16(elem);
    buf_.append(vr, 2);
    const std::string v(vr);
    if (v == "OB" || v == "OW" || v == "SQ" || v == "UN" || v == "UT") {
      put16(0);
      put32(static_cast<std::uint32_t>(len + len % 2));
    } else {
      put16(static_cast<std::uint16_t>(len));
    }
  }
  std::string buf_;
};

std::string ds(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string ds_list(std::initializer_list<double> vs) {
  std::string out;
  for (double v : vs) out += (out.empty() ? "" : "\\") + ds(v);
  return out;
}

}  // namespace

void write_dicom(const fs::path& path, const DicomSlice& s) {
  const std::string mr_storage = "1.2.840.10008.5.1.4.1.1.4";
  const std::string sop = s.sop_uid.empty() ? s.series_uid + ".9." + std::to_string(s.instance_number) : s.sop_uid;

  ElementWriter meta_body;
  const std::uint8_t version[2] = {0, 1};
  meta_body.bytes(0x0002, 0x0001, "OB", version, 2);
  meta_body.str(0x0002, 0x0002, "UI", mr_storage);
  meta_body.str(0x0002, 0x0003, "UI", sop);
  meta_body.str(0x0002, 0x0010, "UI", "1.2.840.10008.1.2.1");
  meta_body.str(0x0002, 0x0012, "UI", "1.2.826.0.1.3680043.8.498.2");
  ElementWriter meta;
  meta.ul(0x0002, 0x0000, static_cast<std::uint32_t>(meta_body.data().size()));

  ElementWriter ds_w;
  ds_w.str(0x0008, 0x0016, "UI", mr_storage);
  ds_w.str(0x0008, 0x0018, "UI", sop);
  ds_w.str(0x0008, 0x0060, "CS", "MR");
  ds_w.str(0x0010, 0x0010, "PN", "Synthetic^Phantom");
  ds_w.str(0x0020, 0x000D, "UI", "1.2.826.0.1.3680043.8.498.3");
  ds_w.str(0x0020, 0x000E, "UI", s.series_uid);
  ds_w.str(0x0020, 0x0013, "IS", std::to_string(s.instance_number));
  if (s.write_position) {
    ds_w.str(0x0020, 0x0032, "DS", ds_list({s.position[0], s.position[1], s.position[2]}));
    const auto& o = s.orientation;
    ds_w.str(0x0020, 0x0037, "DS", ds_list({o[0], o[1], o[2], o[3], o[4], o[5]}));
  }
  ds_w.us(0x0028, 0x0002, 1);
  ds_w.str(0x0028, 0x0004, "CS", "MONOCHROME2");
  ds_w.us(0x0028, 0x0010, static_cast<std::uint16_t>(s.rows));
  ds_w.us(0x0028, 0x0011, static_cast<std::uint16_t>(s.columns));
  ds_w.str(0x0028, 0x0030, "DS", ds_list({s.row_spacing, s.column_spacing}));
  ds_w.us(0x0028, 0x0100, 16);
  ds_w.us(0x0028, 0x0101, 16);
  ds_w.us(0x0028, 0x0102, 15);
  ds_w.us(0x0028, 0x0103, 1);
  ds_w.str(0x0028, 0x1052, "DS", ds(s.intercept));
  ds_w.str(0x0028, 0x1053, "DS", ds(s.slope));
  std::vector<char> px(s.pixels.size() * 2);
  for (std::size_t i = 0; i < s.pixels.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(s.pixels[i]);
    px[2 * i] = static_cast<char>(v & 0xff);
    px[2 * i + 1] = static_cast<char>(v >> 8);
  }
  ds_w.bytes(0x7FE0, 0x0010, "OW", px.data(), px.size());

  std::ofstream out(path, std::ios::binary);
  const std::string preamble(128, '\0');
  out << preamble << "DICM" << meta.data() << meta_body.data() << ds_w.data();
}

void write_dicom_series(const fs::path& dir, std::size_t /*depth*/, std::size_t rows, std::size_t columns,
                        double row_spacing, double column_spacing, double slice_step, const Vec3& origin,
                        const std::array<double, 6>& orientation, const std::vector<std::size_t>& order,
                        const std::function<std::int16_t(std::size_t, std::size_t, std::size_t)>& f,
                        const std::string& series_uid) {
  fs::create_directories(dir);
  const Vec3 r{orientation[0], orientation[1], orientation[2]}, c{orientation[3], orientation[4], orientation[5]};
  const Vec3 n = cross(r, c);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t z = order[k];
    DicomSlice s;
    s.series_uid = series_uid;
    s.instance_number = static_cast<int>(z) + 1;
    s.rows = rows;
    s.columns = columns;
    s.row_spacing = row_spacing;
    s.column_spacing = column_spacing;
    s.orientation = orientation;
    for (int a = 0; a < 3; ++a) s.position[a] = origin[a] + n[a] * slice_step * static_cast<double>(z);
    s.pixels.resize(rows * columns);
    for (std::size_t y = 0; y < rows; ++y)
      for (std::size_t x = 0; x < columns; ++x) s.pixels[y * columns + x] = f(z, y, x);
    write_dicom(dir / ("IM" + std::to_string(k) + ".dcm"), s);
  }
}

}  // namespace sliceprop::testing
