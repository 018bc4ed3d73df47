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

#include "sliceprop/dicom.hpp"

#include <gdcmImageReader.h>
#include <gdcmReader.h>
#include <gdcmTrace.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "sliceprop/error.hpp"

namespace sliceprop {
namespace fs = std::filesystem;

namespace {

const gdcm::Tag kModality(0x0008, 0x0060);
const gdcm::Tag kSliceThickness(0x0018, 0x0050);
const gdcm::Tag kSeriesInstanceUid(0x0020, 0x000e);
const gdcm::Tag kInstanceNumber(0x0020, 0x0013);
const gdcm::Tag kImagePositionPatient(0x0020, 0x0032);
const gdcm::Tag kImageOrientationPatient(0x0020, 0x0037);
const gdcm::Tag kNumberOfFrames(0x0028, 0x0008);
const gdcm::Tag kPixelSpacing(0x0028, 0x0030);
const gdcm::Tag kRescaleIntercept(0x0028, 0x1052);
const gdcm::Tag kRescaleSlope(0x0028, 0x1053);

void silence_gdcm() {
  static const bool once = [] {
    gdcm::Trace::SetWarning(false);
    gdcm::Trace::SetDebug(false);
    return true;
  }();
  (void)once;
}

std::optional<std::string> string_value(const gdcm::DataSet& ds, const gdcm::Tag& tag) {
  if (!ds.FindDataElement(tag)) return std::nullopt;
  const gdcm::DataElement& de = ds.GetDataElement(tag);
  const gdcm::ByteValue* bv = de.GetByteValue();
  if (!bv || bv->GetLength() == 0) return std::nullopt;
  std::string s(bv->GetPointer(), bv->GetLength());
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
  const auto first = s.find_first_not_of(' ');
  if (first == std::string::npos) return std::nullopt;
  return s.substr(first);
}

// Parses a backslash-separated DS/IS multi-value.
std::vector<double> numeric_values(const gdcm::DataSet& ds, const gdcm::Tag& tag) {
  std::vector<double> out;
  auto s = string_value(ds, tag);
  if (!s) return out;
  std::stringstream ss(*s);
  std::string item;
  while (std::getline(ss, item, '\\')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || !std::isfinite(v)) return {};
    out.push_back(v);
  }
  return out;
}

std::optional<double> numeric_value(const gdcm::DataSet& ds, const gdcm::Tag& tag) {
  auto v = numeric_values(ds, tag);
  if (v.empty()) return std::nullopt;
  return v.front();
}

struct SliceRecord {
  fs::path file;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> pixels;
  std::optional<Vec3> position;
  std::optional<std::array<double, 6>> orientation;
  std::optional<std::array<double, 2>> pixel_spacing;  // row spacing, column spacing
  std::optional<double> slice_thickness;
  int instance_number = 0;
  std::optional<std::string> modality;
  double sort_key = 0.0;
};

template <class T>
void convert_pixels(const std::vector<char>& buf, std::vector<float>& out, double slope, double intercept) {
  const std::size_t n = buf.size() / sizeof(T);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, buf.data() + i * sizeof(T), sizeof(T));
    out[i] = static_cast<float>(static_cast<double>(v) * slope + intercept);
  }
}

SliceRecord read_slice(const fs::path& file) {
  gdcm::ImageReader reader;
  reader.SetFileName(file.c_str());
  if (!reader.Read()) throw FormatError("cannot decode DICOM image: " + file.string());
  const gdcm::DataSet& ds = reader.GetFile().GetDataSet();
  const gdcm::Image& image = reader.GetImage();

  if (auto frames = numeric_value(ds, kNumberOfFrames); frames && *frames > 1) {
    throw ValidationError("multi-frame (enhanced) DICOM is not supported: " + file.string());
  }
  if (image.GetNumberOfDimensions() == 3 && image.GetDimension(2) > 1) {
    throw ValidationError("multi-frame (enhanced) DICOM is not supported: " + file.string());
  }
  const gdcm::PixelFormat& pf = image.GetPixelFormat();
  if (pf.GetSamplesPerPixel() != 1) {
    throw ValidationError("only single-channel DICOM images are supported: " + file.string());
  }

  SliceRecord rec;
  rec.file = file;
  rec.cols = image.GetDimension(0);
  rec.rows = image.GetDimension(1);

  std::vector<char> buf(image.GetBufferLength());
  if (!image.GetBuffer(buf.data())) throw FormatError("cannot read pixel data: " + file.string());
  const double slope = numeric_value(ds, kRescaleSlope).value_or(1.0);
  const double intercept = numeric_value(ds, kRescaleIntercept).value_or(0.0);
  switch (pf.GetScalarType()) {
    case gdcm::PixelFormat::UINT8: convert_pixels<std::uint8_t>(buf, rec.pixels, slope, intercept); break;
    case gdcm::PixelFormat::INT8: convert_pixels<std::int8_t>(buf, rec.pixels, slope, intercept); break;
    case gdcm::PixelFormat::UINT16: convert_pixels<std::uint16_t>(buf, rec.pixels, slope, intercept); break;
    case gdcm::PixelFormat::INT16: convert_pixels<std::int16_t>(buf, rec.pixels, slope, intercept); break;
    case gdcm::PixelFormat::UINT32: convert_pixels<std::uint32_t>(buf, rec.pixels, slope, intercept); break;
    case gdcm::PixelFormat::INT32: convert_pixels<std::int32_t>(buf, rec.pixels, slope, intercept); break;
    case gdcm::PixelFormat::FLOAT32: convert_pixels<float>(buf, rec.pixels, slope, intercept); break;
    case gdcm::PixelFormat::FLOAT64: convert_pixels<double>(buf, rec.pixels, slope, intercept); break;
    default: throw FormatError("unsupported DICOM pixel format in " + file.string());
  }
  if (rec.pixels.size() != rec.rows * rec.cols) throw FormatError("pixel data size mismatch in " + file.string());

  if (auto p = numeric_values(ds, kImagePositionPatient); p.size() == 3) rec.position = Vec3{p[0], p[1], p[2]};
  if (auto o = numeric_values(ds, kImageOrientationPatient); o.size() == 6) {
    rec.orientation = std::array<double, 6>{o[0], o[1], o[2], o[3], o[4], o[5]};
  }
  if (auto s = numeric_values(ds, kPixelSpacing); s.size() == 2 && s[0] > 0 && s[1] > 0) {
    rec.pixel_spacing = std::array<double, 2>{s[0], s[1]};
  }
  rec.slice_thickness = numeric_value(ds, kSliceThickness);
  rec.instance_number = static_cast<int>(numeric_value(ds, kInstanceNumber).value_or(0.0));
  rec.modality = string_value(ds, kModality);
  return rec;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

bool is_dicom_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[4];
  in.seekg(128);
  if (!in.read(magic, 4)) return false;
  return std::string_view(magic, 4) == "DICM";
}

DicomDirectoryScan scan_dicom_directory(const fs::path& dir) {
  silence_gdcm();
  DicomDirectoryScan scan;
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list directory " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    if (!is_dicom_file(f)) continue;
    gdcm::Reader reader;
    reader.SetFileName(f.c_str());
    std::set<gdcm::Tag> wanted{kSeriesInstanceUid};
    if (!reader.ReadSelectedTags(wanted)) {
      scan.unreadable.push_back(f);
      continue;
    }
    auto uid = string_value(reader.GetFile().GetDataSet(), kSeriesInstanceUid);
    if (!uid) {
      scan.unreadable.push_back(f);
      continue;
    }
    scan.series[*uid].push_back(f);
  }
  return scan;
}

DicomLoadResult load_dicom_series(const fs::path& dir, const std::optional<std::string>& series_uid) {
  silence_gdcm();
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  DicomDirectoryScan scan = scan_dicom_directory(dir);
  if (scan.series.empty()) throw ValidationError("no DICOM series found in " + dir.string());

  const std::vector<fs::path>* files = nullptr;
  std::string uid;
  if (series_uid) {
    auto it = scan.series.find(*series_uid);
    if (it == scan.series.end()) throw ValidationError("series " + *series_uid + " not found in " + dir.string());
    files = &it->second;
    uid = it->first;
  } else if (scan.series.size() > 1) {
    std::string msg = "directory " + dir.string() + " holds " + std::to_string(scan.series.size()) +
                      " series; choose one of:";
    for (const auto& [u, _] : scan.series) msg += " " + u;
    throw ValidationError(msg);
  } else {
    files = &scan.series.begin()->second;
    uid = scan.series.begin()->first;
  }

  DicomLoadResult result;
  std::vector<SliceRecord> slices;
  slices.reserve(files->size());
  for (const auto& f : *files) slices.push_back(read_slice(f));

  for (const auto& s : slices) {
    if (s.rows != slices.front().rows || s.cols != slices.front().cols) {
      throw ValidationError("mixed in-plane shapes in series " + uid + ": " + std::to_string(slices.front().rows) +
                            "x" + std::to_string(slices.front().cols) + " vs " + std::to_string(s.rows) + "x" +
                            std::to_string(s.cols) + " (" + s.file.filename().string() + ")");
    }
  }

  const bool spatial = std::all_of(slices.begin(), slices.end(),
                                   [](const SliceRecord& s) { return s.position && s.orientation; });
  Vec3 row_dir{1, 0, 0}, col_dir{0, 1, 0};
  if (slices.front().orientation) {
    const auto& o = *slices.front().orientation;
    row_dir = normalized({o[0], o[1], o[2]});
    col_dir = normalized({o[3], o[4], o[5]});
  }
  const Vec3 normal = normalized(cross(row_dir, col_dir));

  if (spatial) {
    for (auto& s : slices) s.sort_key = dot(*s.position, normal);
  } else {
    result.warnings.push_back("series " + uid +
                              ": ImagePositionPatient/ImageOrientationPatient missing; ordering by InstanceNumber");
    for (auto& s : slices) s.sort_key = s.instance_number;
  }
  std::sort(slices.begin(), slices.end(), [](const SliceRecord& a, const SliceRecord& b) {
    if (a.sort_key != b.sort_key) return a.sort_key < b.sort_key;
    if (a.instance_number != b.instance_number) return a.instance_number < b.instance_number;
    return a.file.filename() < b.file.filename();
  });

  double z_spacing = slices.front().slice_thickness.value_or(1.0);
  if (spatial && slices.size() > 1) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < slices.size(); ++i) gaps.push_back(slices[i].sort_key - slices[i - 1].sort_key);
    const double med = median(gaps);
    if (med <= 0.0) throw ValidationError("duplicate slice positions in series " + uid);
    const auto irregular = std::count_if(gaps.begin(), gaps.end(),
                                         [med](double g) { return std::abs(g - med) > 0.01 * med; });
    if (irregular > 0) {
      result.warnings.push_back("series " + uid + ": " + std::to_string(irregular) +
                                " slice gaps deviate more than 1% from the median spacing " + std::to_string(med) +
                                " mm; using the median");
    }
    z_spacing = med;
  }
  if (!(z_spacing > 0.0)) z_spacing = 1.0;

  const SliceRecord& first = slices.front();
  VolumeGeometry& g = result.image.geometry;
  const auto ps = first.pixel_spacing.value_or(std::array<double, 2>{1.0, 1.0});
  if (!first.pixel_spacing) result.warnings.push_back("series " + uid + ": PixelSpacing missing; assuming 1 mm");
  g.spacing = {ps[1], ps[0], z_spacing};
  g.origin = first.position.value_or(Vec3{0, 0, 0});
  for (int i = 0; i < 3; ++i) {
    g.direction[3 * i + 0] = row_dir[i];
    g.direction[3 * i + 1] = col_dir[i];
    g.direction[3 * i + 2] = normal[i];
  }
  validate_geometry(g);

  const Shape3 shape{slices.size(), first.rows, first.cols};
  Volume<float> voxels(shape);
  for (std::size_t z = 0; z < slices.size(); ++z) {
    std::copy(slices[z].pixels.begin(), slices[z].pixels.end(), voxels.slice(z).begin());
  }
  result.image.voxels = std::move(voxels);
  result.image.modality_hint = first.modality;
  return result;
}

}  // namespace sliceprop
