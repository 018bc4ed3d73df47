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

#include "sliceprop/cohort.hpp"

namespace sliceprop {

inline constexpr int kSessionVersion = 1;
inline constexpr const char* kSessionFilename = "session.json";

struct DecisionEntry {
  std::string case_id;
  Decision decision;
  std::string timestamp;  // ISO-8601 UTC

  friend bool operator==(const DecisionEntry&, const DecisionEntry&) = default;
};

/// Cohort cursor plus the decision history, persisted as session.json:
/// {version: 1, root, cases: [{id, kind, path, status, series?, missing?}],
///  log: [{id, decision, ts_iso8601}]}
///
/// The cursor is always the first pending case in cohort order, so it is
/// derived rather than stored.
struct SessionState {
  Cohort cohort;
  std::vector<DecisionEntry> decision_log;
  std::filesystem::path session_file;

  /// Index of the first pending case, or cohort.cases.size() when none remain.
  std::size_t cursor() const;
};

using Clock = std::function<std::string()>;

/// Fresh session over `cohort`, file `<root>/session.json`. Not persisted.
SessionState new_session(const Cohort& cohort);

std::optional<CaseRecord> next_pending_case(const SessionState& session);

/// proceed_annotated / skip on a pending case, or unskip on a skipped one.
/// Appends to the log and, when session_file is set, rewrites it atomically.
/// Throws StateError for unknown ids or a status the decision cannot apply to.
SessionState record_decision(const SessionState& session, const std::string& case_id, Decision decision,
                             const Clock& clock = {});

SessionState unskip(const SessionState& session, const std::string& case_id, const Clock& clock = {});

void persist(const SessionState& session);

/// Reads a session file. Throws IoError when the file is missing and
/// FormatError (with a recovery hint) when it is corrupt or of another
/// schema version.
SessionState resume_session(const std::filesystem::path& session_file);

/// Merges a fresh discovery into the session: new cases are added as pending,
/// cases whose source disappeared are flagged missing (never dropped), and
/// the case list is re-sorted by id.
SessionState reconcile(const SessionState& session, const Cohort& discovered);

/// resume_session + reconcile against a new discovery of the session root.
SessionState resume_and_reconcile(const std::filesystem::path& session_file, const DiscoveryConfig& config = {});

/// Counts of (pending, annotated, skipped).
struct StatusCounts {
  std::size_t pending = 0, annotated = 0, skipped = 0;
};
StatusCounts status_counts(const SessionState& session);

/// Advisory exclusive lock on `<root>/.sliceprop.lock` for the lifetime of
/// the object. Throws StateError if another process holds it.
class SessionLock {
 public:
  explicit SessionLock(const std::filesystem::path& root);
  ~SessionLock();
  SessionLock(const SessionLock&) = delete;
  SessionLock& operator=(const SessionLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace sliceprop
