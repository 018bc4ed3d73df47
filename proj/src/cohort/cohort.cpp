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

#include "sliceprop/cohort.hpp"

#include <algorithm>
#include <map>

#include "sliceprop/dicom.hpp"
#include "sliceprop/error.hpp"
#include "sliceprop/nifti.hpp"

namespace sliceprop {
namespace fs = std::filesystem;

std::string to_string(SourceKind k) { return k == SourceKind::dicom_series ? "dicom_series" : "nifti_file"; }

std::string to_string(CaseStatus s) {
  switch (s) {
    case CaseStatus::pending: return "pending";
    case CaseStatus::annotated: return "annotated";
    case CaseStatus::skipped: return "skipped";
  }
  return "pending";
}

std::string to_string(Decision d) {
  switch (d) {
    case Decision::proceed_annotated: return "proceed_annotated";
    case Decision::skip: return "skip";
    case Decision::unskip: return "unskip";
  }
  return "skip";
}

SourceKind source_kind_from_string(const std::string& s) {
  if (s == "dicom_series") return SourceKind::dicom_series;
  if (s == "nifti_file") return SourceKind::nifti_file;
  throw FormatError("unknown source kind '" + s + "'");
}

CaseStatus case_status_from_string(const std::string& s) {
  if (s == "pending") return CaseStatus::pending;
  if (s == "annotated") return CaseStatus::annotated;
  if (s == "skipped") return CaseStatus::skipped;
  throw FormatError("unknown case status '" + s + "'");
}

Decision decision_from_string(const std::string& s) {
  if (s == "proceed_annotated") return Decision::proceed_annotated;
  if (s == "skip") return Decision::skip;
  if (s == "unskip") return Decision::unskip;
  throw FormatError("unknown decision '" + s + "'");
}

const CaseRecord* Cohort::find(const std::string& case_id) const {
  auto it = std::find_if(cases.begin(), cases.end(), [&](const CaseRecord& c) { return c.case_id == case_id; });
  return it == cases.end() ? nullptr : &*it;
}

namespace {

bool hidden(const fs::path& p) {
  const std::string name = p.filename().string();
  return !name.empty() && name[0] == '.';
}

std::optional<std::string> nifti_stem(const fs::path& p) {
  const std::string name = p.filename().string();
  for (const std::string ext : {".nii.gz", ".nii"}) {
    if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0) {
      return name.substr(0, name.size() - ext.size());
    }
  }
  return std::nullopt;
}

std::string dir_case_id(const fs::path& root, const fs::path& dir) {
  fs::path rel = fs::relative(dir, root);
  if (rel.empty() || rel == ".") return root.filename().string();
  std::string id = rel.generic_string();
  std::replace(id.begin(), id.end(), '/', '_');
  return id;
}

}  // namespace

Cohort discover_cohort(const fs::path& root, const DiscoveryConfig& config) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("cohort root is not a readable directory: " + root.string());
  Cohort cohort;
  cohort.root = fs::absolute(root).lexically_normal();
  if (cohort.root.filename().empty()) cohort.root = cohort.root.parent_path();

  std::vector<fs::path> dicom_dirs{cohort.root};
  std::vector<fs::path> top_files;
  fs::directory_iterator top(cohort.root, ec);
  if (ec) throw IoError("cannot read cohort root " + root.string() + ": " + ec.message());
  for (const auto& entry : top) {
    if (hidden(entry.path())) continue;
    if (entry.is_regular_file()) top_files.push_back(entry.path());
  }

  for (auto it = fs::recursive_directory_iterator(cohort.root, fs::directory_options::skip_permission_denied, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    const fs::path& p = it->path();
    if (!it->is_directory()) continue;
    const bool excluded_top = it.depth() == 0 && std::find(config.excluded_dirs.begin(), config.excluded_dirs.end(),
                                                           p.filename().string()) != config.excluded_dirs.end();
    if (hidden(p) || excluded_top) {
      it.disable_recursion_pending();
      continue;
    }
    dicom_dirs.push_back(p);
  }
  if (ec) cohort.warnings.push_back("directory walk stopped early: " + ec.message());

  std::sort(top_files.begin(), top_files.end());
  for (const auto& f : top_files) {
    auto stem = nifti_stem(f);
    if (!stem) continue;
    if (auto why = probe_nifti(f); !why.empty()) {
      cohort.warnings.push_back("excluded " + f.filename().string() + ": " + why);
      continue;
    }
    cohort.cases.push_back({*stem, SourceKind::nifti_file, f, CaseStatus::pending, std::nullopt, false});
  }

  for (const auto& dir : dicom_dirs) {
    DicomDirectoryScan scan;
    try {
      scan = scan_dicom_directory(dir);
    } catch (const Error& e) {
      cohort.warnings.push_back("excluded " + dir.string() + ": " + e.what());
      continue;
    }
    for (const auto& f : scan.unreadable) {
      cohort.warnings.push_back("unreadable DICOM file " + f.string());
    }
    std::vector<std::string> usable;
    for (const auto& [uid, files] : scan.series) {
      if (files.size() >= config.min_dicom_files) {
        usable.push_back(uid);
      } else {
        cohort.warnings.push_back("excluded series " + uid + " in " + dir.string() + ": only " +
                                  std::to_string(files.size()) + " file(s)");
      }
    }
    const std::string base = dir_case_id(cohort.root, dir);
    for (std::size_t i = 0; i < usable.size(); ++i) {
      CaseRecord rec;
      rec.case_id = usable.size() == 1 ? base : base + "_s" + std::to_string(i + 1);
      rec.source_kind = SourceKind::dicom_series;
      rec.source_path = dir;
      if (usable.size() > 1) rec.series_uid = usable[i];
      cohort.cases.push_back(std::move(rec));
    }
  }

  std::stable_sort(cohort.cases.begin(), cohort.cases.end(),
                   [](const CaseRecord& a, const CaseRecord& b) { return a.case_id < b.case_id; });
  std::map<std::string, int> seen;
  for (auto& c : cohort.cases) {
    const int n = ++seen[c.case_id];
    if (n > 1) {
      const std::string renamed = c.case_id + "_" + std::to_string(n);
      cohort.warnings.push_back("case id " + c.case_id + " is ambiguous; " + c.source_path.string() + " renamed to " +
                                renamed);
      c.case_id = renamed;
    }
  }
  std::stable_sort(cohort.cases.begin(), cohort.cases.end(),
                   [](const CaseRecord& a, const CaseRecord& b) { return a.case_id < b.case_id; });
  return cohort;
}

VolumeImage load_case_volume(const CaseRecord& record, std::vector<std::string>* warnings) {
  if (record.source_kind == SourceKind::nifti_file) return load_nifti(record.source_path);
  DicomLoadResult r = load_dicom_series(record.source_path, record.series_uid);
  if (warnings) warnings->insert(warnings->end(), r.warnings.begin(), r.warnings.end());
  return std::move(r.image);
}

}  // namespace sliceprop
