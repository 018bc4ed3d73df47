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

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sliceprop/volume.hpp"

namespace sliceprop {

enum class SourceKind { dicom_series, nifti_file };
enum class CaseStatus { pending, annotated, skipped };
enum class Decision { proceed_annotated, skip, unskip };

std::string to_string(SourceKind k);
std::string to_string(CaseStatus s);
std::string to_string(Decision d);
SourceKind source_kind_from_string(const std::string& s);
CaseStatus case_status_from_string(const std::string& s);
Decision decision_from_string(const std::string& s);

struct CaseRecord {
  std::string case_id;
  SourceKind source_kind = SourceKind::nifti_file;
  std::filesystem::path source_path;
  CaseStatus status = CaseStatus::pending;
  /// Set for DICOM directories holding several series.
  std::optional<std::string> series_uid;
  /// Source no longer found under the root during reconciliation. The record
  /// and its history are kept.
  bool missing = false;

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

struct Cohort {
  std::filesystem::path root;
  std::vector<CaseRecord> cases;  // ascending by case_id
  /// Sources that were skipped during discovery, with the reason.
  std::vector<std::string> warnings;

  const CaseRecord* find(const std::string& case_id) const;
};

struct DiscoveryConfig {
  /// Directory names under the root that never contain cases.
  std::vector<std::string> excluded_dirs{"derived"};
  std::size_t min_dicom_files = 2;
};

/// One case per NIfTI file directly under `root` (id = file name without
/// .nii/.nii.gz) and per DICOM series of at least `min_dicom_files` files in
/// any directory below it (id = directory path relative to root, separators
/// replaced by '_'; directories with several series get `_s1`, `_s2`, ... in
/// UID order). Hidden entries are ignored. Throws IoError if the root cannot
/// be read.
Cohort discover_cohort(const std::filesystem::path& root, const DiscoveryConfig& config = {});

/// Loads the case's source volume (NIfTI or DICOM series).
VolumeImage load_case_volume(const CaseRecord& record, std::vector<std::string>* warnings = nullptr);

}  // namespace sliceprop
