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

#include "sliceprop/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>

#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"

namespace sliceprop {
namespace fs = std::filesystem;

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348);

constexpr std::int32_t kEcodeComment = 6;
constexpr const char* kGeometryKey = "sliceprop_geometry";

// NIfTI world space is RAS; ours is LPS. Flipping x and y maps one to the other.
constexpr Mat3 kLpsRas{-1, 0, 0, 0, -1, 0, 0, 0, 1};

template <class T>
T byteswap_value(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void swap_header(Nifti1Header& h) {
  h.sizeof_hdr = byteswap_value(h.sizeof_hdr);
  h.extents = byteswap_value(h.extents);
  h.session_error = byteswap_value(h.session_error);
  for (auto& d : h.dim) d = byteswap_value(d);
  h.intent_p1 = byteswap_value(h.intent_p1);
  h.intent_p2 = byteswap_value(h.intent_p2);
  h.intent_p3 = byteswap_value(h.intent_p3);
  h.intent_code = byteswap_value(h.intent_code);
  h.datatype = byteswap_value(h.datatype);
  h.bitpix = byteswap_value(h.bitpix);
  h.slice_start = byteswap_value(h.slice_start);
  for (auto& p : h.pixdim) p = byteswap_value(p);
  h.vox_offset = byteswap_value(h.vox_offset);
  h.scl_slope = byteswap_value(h.scl_slope);
  h.scl_inter = byteswap_value(h.scl_inter);
  h.slice_end = byteswap_value(h.slice_end);
  h.cal_max = byteswap_value(h.cal_max);
  h.cal_min = byteswap_value(h.cal_min);
  h.slice_duration = byteswap_value(h.slice_duration);
  h.toffset = byteswap_value(h.toffset);
  h.glmax = byteswap_value(h.glmax);
  h.glmin = byteswap_value(h.glmin);
  h.qform_code = byteswap_value(h.qform_code);
  h.sform_code = byteswap_value(h.sform_code);
  h.quatern_b = byteswap_value(h.quatern_b);
  h.quatern_c = byteswap_value(h.quatern_c);
  h.quatern_d = byteswap_value(h.quatern_d);
  h.qoffset_x = byteswap_value(h.qoffset_x);
  h.qoffset_y = byteswap_value(h.qoffset_y);
  h.qoffset_z = byteswap_value(h.qoffset_z);
  for (int i = 0; i < 4; ++i) {
    h.srow_x[i] = byteswap_value(h.srow_x[i]);
    h.srow_y[i] = byteswap_value(h.srow_y[i]);
    h.srow_z[i] = byteswap_value(h.srow_z[i]);
  }
}

std::size_t bytes_per_voxel(std::int16_t datatype) {
  switch (static_cast<NiftiDatatype>(datatype)) {
    case NiftiDatatype::uint8:
    case NiftiDatatype::int8:
      return 1;
    case NiftiDatatype::int16:
    case NiftiDatatype::uint16:
      return 2;
    case NiftiDatatype::int32:
    case NiftiDatatype::uint32:
    case NiftiDatatype::float32:
      return 4;
    case NiftiDatatype::float64:
    case NiftiDatatype::int64:
    case NiftiDatatype::uint64:
      return 8;
  }
  throw FormatError("unsupported NIfTI datatype code " + std::to_string(datatype));
}

template <class T>
double read_as(const unsigned char* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) v = byteswap_value(v);
  return static_cast<double>(v);
}

double decode_voxel(const unsigned char* p, std::int16_t datatype, bool swap) {
  switch (static_cast<NiftiDatatype>(datatype)) {
    case NiftiDatatype::uint8: return read_as<std::uint8_t>(p, swap);
    case NiftiDatatype::int8: return read_as<std::int8_t>(p, swap);
    case NiftiDatatype::int16: return read_as<std::int16_t>(p, swap);
    case NiftiDatatype::uint16: return read_as<std::uint16_t>(p, swap);
    case NiftiDatatype::int32: return read_as<std::int32_t>(p, swap);
    case NiftiDatatype::uint32: return read_as<std::uint32_t>(p, swap);
    case NiftiDatatype::float32: return read_as<float>(p, swap);
    case NiftiDatatype::float64: return read_as<double>(p, swap);
    case NiftiDatatype::int64: return read_as<std::int64_t>(p, swap);
    case NiftiDatatype::uint64: return read_as<std::uint64_t>(p, swap);
  }
  return 0.0;
}

std::string read_maybe_gzipped(const fs::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open NIfTI file: " + path.string());
  std::string out;
  char buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof(buf));
    if (n < 0) {
      int errnum = 0;
      const std::string msg = gzerror(f, &errnum);
      gzclose(f);
      throw FormatError("corrupt NIfTI stream " + path.string() + ": " + msg);
    }
    if (n == 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  gzclose(f);
  return out;
}

// Rotation (possibly improper) to NIfTI quaternion + qfac, following nifti1_io.
struct Quatern {
  double b, c, d, qfac;
};

Quatern to_quatern(Mat3 r) {
  double qfac = 1.0;
  if (determinant(r) < 0.0) {
    qfac = -1.0;
    r[2] = -r[2];
    r[5] = -r[5];
    r[8] = -r[8];
  }
  const double r11 = r[0], r12 = r[1], r13 = r[2];
  const double r21 = r[3], r22 = r[4], r23 = r[5];
  const double r31 = r[6], r32 = r[7], r33 = r[8];
  double a = r11 + r22 + r33 + 1.0, b, c, d;
  if (a > 0.5) {
    a = 0.5 * std::sqrt(a);
    b = 0.25 * (r32 - r23) / a;
    c = 0.25 * (r13 - r31) / a;
    d = 0.25 * (r21 - r12) / a;
  } else {
    const double xd = 1.0 + r11 - (r22 + r33);
    const double yd = 1.0 + r22 - (r11 + r33);
    const double zd = 1.0 + r33 - (r11 + r22);
    if (xd > 1.0) {
      b = 0.5 * std::sqrt(xd);
      c = 0.25 * (r12 + r21) / b;
      d = 0.25 * (r13 + r31) / b;
      a = 0.25 * (r32 - r23) / b;
    } else if (yd > 1.0) {
      c = 0.5 * std::sqrt(yd);
      b = 0.25 * (r12 + r21) / c;
      d = 0.25 * (r23 + r32) / c;
      a = 0.25 * (r13 - r31) / c;
    } else {
      d = 0.5 * std::sqrt(zd);
      b = 0.25 * (r13 + r31) / d;
      c = 0.25 * (r23 + r32) / d;
      a = 0.25 * (r21 - r12) / d;
    }
    if (a < 0.0) {
      b = -b;
      c = -c;
      d = -d;
    }
  }
  return {b, c, d, qfac};
}

Mat3 from_quatern(double b, double c, double d, double qfac) {
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    a = 1.0 / std::sqrt(b * b + c * c + d * d);
    b *= a;
    c *= a;
    d *= a;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  Mat3 r{a * a + b * b - c * c - d * d, 2 * (b * c - a * d),         2 * (b * d + a * c),
         2 * (b * c + a * d),         a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
         2 * (b * d - a * c),         2 * (c * d + a * b),         a * a + d * d - c * c - b * b};
  if (qfac < 0.0) {
    r[2] = -r[2];
    r[5] = -r[5];
    r[8] = -r[8];
  }
  return r;
}

VolumeGeometry header_geometry(const Nifti1Header& h) {
  VolumeGeometry g;
  for (int i = 0; i < 3; ++i) g.spacing[i] = std::abs(static_cast<double>(h.pixdim[i + 1]));
  Mat3 ras = kIdentity3;
  Vec3 ras_origin{0, 0, 0};
  if (h.sform_code > 0) {
    const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    for (int j = 0; j < 3; ++j) {
      Vec3 col{rows[0][j], rows[1][j], rows[2][j]};
      const double len = norm(col);
      if (len > 0.0) {
        g.spacing[j] = len;
        for (int i = 0; i < 3; ++i) ras[3 * i + j] = col[i] / len;
      }
    }
    ras_origin = {rows[0][3], rows[1][3], rows[2][3]};
  } else if (h.qform_code > 0) {
    const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
    ras = from_quatern(h.quatern_b, h.quatern_c, h.quatern_d, qfac);
    ras_origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
  } else {
    // Analyze-style fallback: pixdim only, RAS-aligned axes.
  }
  g.direction = multiply(kLpsRas, ras);
  g.origin = multiply(kLpsRas, ras_origin);
  return g;
}

std::optional<VolumeGeometry> extension_geometry(const std::string& bytes, std::size_t vox_offset, bool swap) {
  if (bytes.size() < 352 || bytes[348] == 0) return std::nullopt;
  std::size_t pos = 352;
  while (pos + 8 <= vox_offset && pos + 8 <= bytes.size()) {
    std::int32_t esize, ecode;
    std::memcpy(&esize, bytes.data() + pos, 4);
    std::memcpy(&ecode, bytes.data() + pos + 4, 4);
    if (swap) {
      esize = byteswap_value(esize);
      ecode = byteswap_value(ecode);
    }
    if (esize < 8 || pos + static_cast<std::size_t>(esize) > bytes.size()) break;
    if (ecode == kEcodeComment) {
      std::string text(bytes.data() + pos + 8, static_cast<std::size_t>(esize - 8));
      text.erase(std::find(text.begin(), text.end(), '\0'), text.end());
      auto j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
      if (j.is_object() && j.contains(kGeometryKey)) {
        try {
          const auto& gj = j[kGeometryKey];
          VolumeGeometry g;
          g.spacing = gj.at("spacing").get<Vec3>();
          g.origin = gj.at("origin").get<Vec3>();
          g.direction = gj.at("direction").get<Mat3>();
          return g;
        } catch (const nlohmann::json::exception&) {
          return std::nullopt;
        }
      }
    }
    pos += static_cast<std::size_t>(esize);
  }
  return std::nullopt;
}

// Header fields are float32, so agreement is checked at single precision.
bool agrees_at_float_precision(const VolumeGeometry& exact, const VolumeGeometry& header) {
  auto close = [](double a, double b, double abs_tol) {
    return std::abs(a - b) <= abs_tol + 1e-5 * std::max(std::abs(a), std::abs(b));
  };
  for (int i = 0; i < 3; ++i) {
    if (!close(exact.spacing[i], header.spacing[i], 1e-6)) return false;
    if (!close(exact.origin[i], header.origin[i], 1e-4)) return false;
  }
  for (int i = 0; i < 9; ++i)
    if (!close(exact.direction[i], header.direction[i], 1e-4)) return false;
  return true;
}

struct RawNifti {
  Shape3 shape;
  VolumeGeometry geometry;
  std::vector<double> values;
};

RawNifti read_raw(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("file not found: " + path.string());
  const std::string bytes = read_maybe_gzipped(path);
  if (bytes.size() < sizeof(Nifti1Header)) throw FormatError("truncated NIfTI header: " + path.string());
  Nifti1Header h;
  std::memcpy(&h, bytes.data(), sizeof(h));
  bool swap = false;
  if (h.sizeof_hdr != 348) {
    if (byteswap_value(h.sizeof_hdr) != 348) throw FormatError("not a NIfTI-1 file: " + path.string());
    swap = true;
    swap_header(h);
  }
  if (std::memcmp(h.magic, "n+1", 4) != 0 && std::memcmp(h.magic, "ni1", 4) != 0) {
    throw FormatError("bad NIfTI-1 magic in " + path.string());
  }
  if (std::memcmp(h.magic, "ni1", 4) == 0) {
    throw FormatError("two-file NIfTI (.hdr/.img) is not supported: " + path.string());
  }

  const int ndim = h.dim[0];
  if (ndim < 1 || ndim > 7) throw FormatError("invalid dim[0] = " + std::to_string(ndim) + " in " + path.string());
  for (int i = 4; i <= ndim; ++i) {
    if (h.dim[i] != 1) {
      throw ValidationError("expected 3D volume, got " + std::to_string(ndim) + "D with dim[" + std::to_string(i) +
                            "] = " + std::to_string(h.dim[i]) + ": " + path.string());
    }
  }
  if (ndim < 3) {
    throw ValidationError("expected 3D volume, got " + std::to_string(ndim) + "D: " + path.string());
  }
  for (int i = 1; i <= 3; ++i) {
    if (h.dim[i] < 1) throw FormatError("non-positive dimension in " + path.string());
  }

  RawNifti raw;
  raw.shape = {static_cast<std::size_t>(h.dim[3]), static_cast<std::size_t>(h.dim[2]),
               static_cast<std::size_t>(h.dim[1])};
  const std::size_t bpv = bytes_per_voxel(h.datatype);
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  if (offset < 348 || bytes.size() < offset + raw.shape.size() * bpv) {
    throw FormatError("truncated NIfTI voxel data: " + path.string());
  }

  double slope = h.scl_slope;
  double inter = h.scl_inter;
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }
  if (!std::isfinite(inter)) inter = 0.0;

  raw.values.resize(raw.shape.size());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  std::size_t non_finite = 0;
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    const double v = decode_voxel(p + i * bpv, h.datatype, swap) * slope + inter;
    if (!std::isfinite(v)) ++non_finite;
    raw.values[i] = v;
  }
  if (non_finite > 0) {
    throw ValidationError(std::to_string(non_finite) + " non-finite voxel values in " + path.string());
  }

  raw.geometry = header_geometry(h);
  if (auto exact = extension_geometry(bytes, offset, swap); exact && agrees_at_float_precision(*exact, raw.geometry)) {
    raw.geometry = *exact;
  }
  const auto problems = geometry_violations(raw.geometry);
  if (!problems.empty()) {
    std::string msg = "invalid geometry in " + path.string() + ":";
    for (const auto& s : problems) msg += " " + s + ";";
    throw FormatError(msg);
  }
  return raw;
}

bool has_gz_suffix(const fs::path& p) { return p.extension() == ".gz"; }

template <class T>
void append_cast(std::string& out, std::span<const double> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(T));
  char* dst = out.data() + start;
  for (std::size_t i = 0; i < values.size(); ++i) {
    T v;
    if constexpr (std::is_integral_v<T>) {
      v = static_cast<T>(std::llround(values[i]));
    } else {
      v = static_cast<T>(values[i]);
    }
    std::memcpy(dst + i * sizeof(T), &v, sizeof(T));
  }
}

}  // namespace

std::string probe_nifti(const fs::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) return "cannot open " + path.string();
  Nifti1Header h;
  const int n = gzread(f, &h, sizeof(h));
  gzclose(f);
  if (n != static_cast<int>(sizeof(h))) return "truncated NIfTI header in " + path.string();
  if (h.sizeof_hdr != 348) {
    if (byteswap_value(h.sizeof_hdr) != 348) return "not a NIfTI-1 file: " + path.string();
    swap_header(h);
  }
  if (std::memcmp(h.magic, "n+1", 4) != 0) return "bad NIfTI-1 magic in " + path.string();
  const int ndim = h.dim[0];
  if (ndim < 3 || ndim > 7) return "expected 3D volume, got " + std::to_string(ndim) + "D: " + path.string();
  for (int i = 4; i <= ndim; ++i) {
    if (h.dim[i] != 1) return "expected 3D volume, got " + std::to_string(ndim) + "D: " + path.string();
  }
  return {};
}

VolumeImage load_nifti(const fs::path& path) {
  RawNifti raw = read_raw(path);
  VolumeImage img;
  std::vector<float> data(raw.values.begin(), raw.values.end());
  img.voxels = Volume<float>(raw.shape, std::move(data));
  img.geometry = raw.geometry;
  return img;
}

LoadedLabels load_nifti_labels(const fs::path& path) {
  RawNifti raw = read_raw(path);
  std::vector<std::uint16_t> data(raw.values.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = raw.values[i];
    if (v < 0.0 || v > 65535.0 || v != std::floor(v)) {
      throw ValidationError("label map " + path.string() + " has non-integral or out-of-range value " +
                            std::to_string(v));
    }
    data[i] = static_cast<std::uint16_t>(v);
  }
  return {Volume<std::uint16_t>(raw.shape, std::move(data)), raw.geometry};
}

void write_nifti(const fs::path& path, std::span<const double> values, const Shape3& shape,
                 const VolumeGeometry& geometry, NiftiDatatype datatype) {
  if (values.size() != shape.size()) throw ValidationError("voxel count does not match shape " + to_string(shape));
  for (std::size_t d : {shape.width, shape.height, shape.depth}) {
    if (d == 0 || d > 32767) throw ValidationError("dimension out of NIfTI-1 range: " + to_string(shape));
  }
  validate_geometry(geometry);

  nlohmann::json ext;
  ext[kGeometryKey] = {{"spacing", geometry.spacing}, {"origin", geometry.origin}, {"direction", geometry.direction}};
  std::string ext_text = ext.dump();
  ext_text.push_back('\0');
  const std::size_t esize = (8 + ext_text.size() + 15) / 16 * 16;
  ext_text.resize(esize - 8, '\0');

  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(shape.width);
  h.dim[2] = static_cast<std::int16_t>(shape.height);
  h.dim[3] = static_cast<std::int16_t>(shape.depth);
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.datatype = static_cast<std::int16_t>(datatype);
  h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(h.datatype));
  h.vox_offset = static_cast<float>(352 + esize);
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // millimetres
  std::strncpy(h.descrip, "sliceprop", sizeof(h.descrip));

  const Mat3 ras = multiply(kLpsRas, geometry.direction);
  const Vec3 ras_origin = multiply(kLpsRas, geometry.origin);
  const Quatern q = to_quatern(ras);
  h.pixdim[0] = static_cast<float>(q.qfac);
  for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = static_cast<float>(geometry.spacing[i]);
  for (int i = 4; i < 8; ++i) h.pixdim[i] = 1.0f;
  h.qform_code = 1;
  h.sform_code = 1;
  h.quatern_b = static_cast<float>(q.b);
  h.quatern_c = static_cast<float>(q.c);
  h.quatern_d = static_cast<float>(q.d);
  h.qoffset_x = static_cast<float>(ras_origin[0]);
  h.qoffset_y = static_cast<float>(ras_origin[1]);
  h.qoffset_z = static_cast<float>(ras_origin[2]);
  float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) rows[i][j] = static_cast<float>(ras[3 * i + j] * geometry.spacing[j]);
    rows[i][3] = static_cast<float>(ras_origin[i]);
  }
  std::memcpy(h.magic, "n+1\0", 4);

  std::string out(reinterpret_cast<const char*>(&h), sizeof(h));
  const char extender[4] = {1, 0, 0, 0};
  out.append(extender, 4);
  const std::int32_t esize32 = static_cast<std::int32_t>(esize);
  const std::int32_t ecode = kEcodeComment;
  out.append(reinterpret_cast<const char*>(&esize32), 4);
  out.append(reinterpret_cast<const char*>(&ecode), 4);
  out.append(ext_text);

  switch (datatype) {
    case NiftiDatatype::uint8: append_cast<std::uint8_t>(out, values); break;
    case NiftiDatatype::int8: append_cast<std::int8_t>(out, values); break;
    case NiftiDatatype::int16: append_cast<std::int16_t>(out, values); break;
    case NiftiDatatype::uint16: append_cast<std::uint16_t>(out, values); break;
    case NiftiDatatype::int32: append_cast<std::int32_t>(out, values); break;
    case NiftiDatatype::uint32: append_cast<std::uint32_t>(out, values); break;
    case NiftiDatatype::float32: append_cast<float>(out, values); break;
    case NiftiDatatype::float64: append_cast<double>(out, values); break;
    case NiftiDatatype::int64: append_cast<std::int64_t>(out, values); break;
    case NiftiDatatype::uint64: append_cast<std::uint64_t>(out, values); break;
  }

  if (!path.parent_path().empty() && !fs::is_directory(path.parent_path())) {
    throw IoError("output directory does not exist: " + path.parent_path().string());
  }
  if (!has_gz_suffix(path)) {
    write_file_atomic(path, out);
    return;
  }
  write_atomic_with(path, [&](const fs::path& tmp) {
    gzFile f = gzopen(tmp.c_str(), "wb6");
    if (!f) throw IoError("cannot open for writing: " + path.string());
    const int written = gzwrite(f, out.data(), static_cast<unsigned>(out.size()));
    const int rc = gzclose(f);
    if (written != static_cast<int>(out.size()) || rc != Z_OK) throw IoError("write failed: " + path.string());
  });
}

void write_nifti(const fs::path& path, const VolumeImage& image, NiftiDatatype datatype) {
  const auto src = image.voxels.data();
  std::vector<double> values(src.begin(), src.end());
  write_nifti(path, values, image.shape(), image.geometry, datatype);
}

}  // namespace sliceprop
