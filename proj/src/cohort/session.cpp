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

#include "sliceprop/session.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>

#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"

namespace sliceprop {
namespace fs = std::filesystem;

namespace {

nlohmann::json to_json(const SessionState& s) {
  nlohmann::json j;
  j["version"] = kSessionVersion;
  j["root"] = s.cohort.root.string();
  j["cases"] = nlohmann::json::array();
  for (const auto& c : s.cohort.cases) {
    nlohmann::json cj{{"id", c.case_id},
                      {"kind", to_string(c.source_kind)},
                      {"path", c.source_path.lexically_relative(s.cohort.root).generic_string()},
                      {"status", to_string(c.status)}};
    if (c.series_uid) cj["series"] = *c.series_uid;
    if (c.missing) cj["missing"] = true;
    j["cases"].push_back(std::move(cj));
  }
  j["log"] = nlohmann::json::array();
  for (const auto& e : s.decision_log) {
    j["log"].push_back({{"id", e.case_id}, {"decision", to_string(e.decision)}, {"ts_iso8601", e.timestamp}});
  }
  return j;
}

std::string recovery_hint(const fs::path& file) {
  return " (restore " + file.string() + " from a backup, or move it aside and run `discover` to start a new "
         "session; previous decisions would be lost)";
}

// Replays the log from all-pending and checks it reproduces the stored statuses.
void check_log_consistency(const SessionState& s) {
  std::map<std::string, CaseStatus> replay;
  for (const auto& e : s.decision_log) {
    CaseStatus& st = replay.try_emplace(e.case_id, CaseStatus::pending).first->second;
    switch (e.decision) {
      case Decision::proceed_annotated:
      case Decision::skip:
        if (st != CaseStatus::pending) throw FormatError("decision log applies " + to_string(e.decision) +
                                                         " to non-pending case " + e.case_id);
        st = e.decision == Decision::skip ? CaseStatus::skipped : CaseStatus::annotated;
        break;
      case Decision::unskip:
        if (st != CaseStatus::skipped) throw FormatError("decision log un-skips case " + e.case_id + " that was not skipped");
        st = CaseStatus::pending;
        break;
    }
  }
  for (const auto& c : s.cohort.cases) {
    auto it = replay.find(c.case_id);
    const CaseStatus expected = it == replay.end() ? CaseStatus::pending : it->second;
    if (expected != c.status) {
      throw FormatError("case " + c.case_id + " has status " + to_string(c.status) + " but its decision log implies " +
                        to_string(expected));
    }
  }
}

}  // namespace

std::size_t SessionState::cursor() const {
  for (std::size_t i = 0; i < cohort.cases.size(); ++i) {
    if (cohort.cases[i].status == CaseStatus::pending && !cohort.cases[i].missing) return i;
  }
  return cohort.cases.size();
}

SessionState new_session(const Cohort& cohort) {
  SessionState s;
  s.cohort = cohort;
  s.session_file = cohort.root / kSessionFilename;
  return s;
}

std::optional<CaseRecord> next_pending_case(const SessionState& session) {
  const std::size_t i = session.cursor();
  if (i >= session.cohort.cases.size()) return std::nullopt;
  return session.cohort.cases[i];
}

SessionState record_decision(const SessionState& session, const std::string& case_id, Decision decision,
                             const Clock& clock) {
  SessionState out = session;
  auto it = std::find_if(out.cohort.cases.begin(), out.cohort.cases.end(),
                         [&](const CaseRecord& c) { return c.case_id == case_id; });
  if (it == out.cohort.cases.end()) throw StateError("unknown case '" + case_id + "'");

  switch (decision) {
    case Decision::proceed_annotated:
    case Decision::skip:
      if (it->status != CaseStatus::pending) {
        throw StateError("case '" + case_id + "' is " + to_string(it->status) +
                         (it->status == CaseStatus::skipped ? "; unskip it first" : "; only pending cases can be decided"));
      }
      it->status = decision == Decision::skip ? CaseStatus::skipped : CaseStatus::annotated;
      break;
    case Decision::unskip:
      if (it->status != CaseStatus::skipped) {
        throw StateError("case '" + case_id + "' is " + to_string(it->status) + ", not skipped");
      }
      it->status = CaseStatus::pending;
      break;
  }
  out.decision_log.push_back({case_id, decision, clock ? clock() : utc_timestamp_now()});
  if (!out.session_file.empty()) persist(out);
  return out;
}

SessionState unskip(const SessionState& session, const std::string& case_id, const Clock& clock) {
  return record_decision(session, case_id, Decision::unskip, clock);
}

void persist(const SessionState& session) {
  if (session.session_file.empty()) throw StateError("session has no file to persist to");
  write_file_atomic(session.session_file, to_json(session).dump(2) + "\n");
}

SessionState resume_session(const fs::path& session_file) {
  if (!fs::exists(session_file)) {
    throw IoError("session file not found: " + session_file.string() + " (run `discover` to create one)");
  }
  const std::string text = read_file(session_file);
  auto j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw FormatError("corrupt session file: not valid JSON" + recovery_hint(session_file));
  }
  if (!j.contains("version") || !j["version"].is_number_integer()) {
    throw FormatError("session file has no schema version" + recovery_hint(session_file));
  }
  if (const int v = j["version"].get<int>(); v != kSessionVersion) {
    throw FormatError("session file schema version mismatch: found " + std::to_string(v) + ", expected " +
                      std::to_string(kSessionVersion) + recovery_hint(session_file));
  }

  SessionState s;
  s.session_file = session_file;
  try {
    s.cohort.root = fs::path(j.at("root").get<std::string>());
    for (const auto& cj : j.at("cases")) {
      CaseRecord c;
      c.case_id = cj.at("id").get<std::string>();
      c.source_kind = source_kind_from_string(cj.at("kind").get<std::string>());
      c.source_path = (s.cohort.root / cj.at("path").get<std::string>()).lexically_normal();
      if (c.source_path.filename().empty()) c.source_path = c.source_path.parent_path();
      c.status = case_status_from_string(cj.at("status").get<std::string>());
      if (cj.contains("series")) c.series_uid = cj["series"].get<std::string>();
      c.missing = cj.value("missing", false);
      s.cohort.cases.push_back(std::move(c));
    }
    for (const auto& ej : j.at("log")) {
      s.decision_log.push_back({ej.at("id").get<std::string>(), decision_from_string(ej.at("decision").get<std::string>()),
                                ej.at("ts_iso8601").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt session file: ") + e.what() + recovery_hint(session_file));
  } catch (const FormatError& e) {
    throw FormatError(std::string("corrupt session file: ") + e.what() + recovery_hint(session_file));
  }
  try {
    check_log_consistency(s);
  } catch (const FormatError& e) {
    throw FormatError(std::string("inconsistent session file: ") + e.what() + recovery_hint(session_file));
  }
  return s;
}

SessionState reconcile(const SessionState& session, const Cohort& discovered) {
  SessionState out = session;
  std::map<std::string, const CaseRecord*> fresh;
  for (const auto& c : discovered.cases) fresh[c.case_id] = &c;
  for (auto& c : out.cohort.cases) {
    auto it = fresh.find(c.case_id);
    c.missing = it == fresh.end();
    if (!c.missing) {
      c.source_kind = it->second->source_kind;
      c.source_path = it->second->source_path;
      c.series_uid = it->second->series_uid;
      fresh.erase(it);
    }
  }
  for (const auto& [id, rec] : fresh) {
    CaseRecord c = *rec;
    c.status = CaseStatus::pending;
    c.missing = false;
    out.cohort.cases.push_back(std::move(c));
  }
  std::stable_sort(out.cohort.cases.begin(), out.cohort.cases.end(),
                   [](const CaseRecord& a, const CaseRecord& b) { return a.case_id < b.case_id; });
  out.cohort.warnings = discovered.warnings;
  return out;
}

SessionState resume_and_reconcile(const fs::path& session_file, const DiscoveryConfig& config) {
  SessionState s = resume_session(session_file);
  return reconcile(s, discover_cohort(s.cohort.root, config));
}

StatusCounts status_counts(const SessionState& session) {
  StatusCounts c;
  for (const auto& r : session.cohort.cases) {
    switch (r.status) {
      case CaseStatus::pending: ++c.pending; break;
      case CaseStatus::annotated: ++c.annotated; break;
      case CaseStatus::skipped: ++c.skipped; break;
    }
  }
  return c;
}

SessionLock::SessionLock(const fs::path& root) {
  const fs::path lock_path = root / ".sliceprop.lock";
  fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open lock file " + lock_path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw StateError("session at " + root.string() + " is in use by another process");
  }
}

SessionLock::~SessionLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace sliceprop
