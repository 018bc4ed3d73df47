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

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"
#include "sliceprop/nifti.hpp"
#include "sliceprop/session.hpp"

using namespace sliceprop;
using namespace sliceprop::testing;
namespace fs = std::filesystem;

namespace {

const std::array<double, 6> kAxial{1, 0, 0, 0, 1, 0};

void add_nifti(const fs::path& p) {
  write_nifti(p, make_volume({2, 3, 3}, {}, [](auto z, auto y, auto x) { return float(z + y + x); }));
}

void add_dicom(const fs::path& dir, std::size_t n, const std::string& uid = "1.2.3.4") {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  write_dicom_series(dir, n, 4, 4, 1, 1, 1, {0, 0, 0}, kAxial, order, [](auto z, auto, auto) { return std::int16_t(z); },
                     uid);
}

std::vector<std::string> ids(const Cohort& c) {
  std::vector<std::string> out;
  for (const auto& r : c.cases) out.push_back(r.case_id);
  return out;
}

Clock fixed_clock() {
  auto n = std::make_shared<int>(0);
  return [n] { return "2026-01-01T00:00:" + std::to_string(10 + (*n)++ % 50) + ".000Z"; };
}

}  // namespace

TEST_SUITE("discovery") {
  TEST_CASE("DICOM directory and NIfTI file give two cases in order") {
    TempDir tmp;
    add_dicom(tmp / "A", 30);
    add_nifti(tmp / "B.nii.gz");
    const Cohort c = discover_cohort(tmp.path());
    CHECK(ids(c) == std::vector<std::string>{"A", "B"});
    CHECK(c.cases[0].source_kind == SourceKind::dicom_series);
    CHECK(c.cases[1].source_kind == SourceKind::nifti_file);
    CHECK(c.cases[1].source_path == tmp / "B.nii.gz");
    CHECK(c.warnings.empty());
  }

  TEST_CASE("empty root is an empty cohort") {
    TempDir tmp;
    CHECK(discover_cohort(tmp.path()).cases.empty());
  }

  TEST_CASE("missing root is an IO error") {
    TempDir tmp;
    CHECK_THROWS_AS(discover_cohort(tmp / "nope"), IoError);
  }

  TEST_CASE("two series in one directory become two cases") {
    TempDir tmp;
    add_dicom(tmp / "C", 3, "1.2.3.10");
    for (int k = 0; k < 3; ++k) fs::rename(tmp / "C" / ("IM" + std::to_string(k) + ".dcm"), tmp / "C" / ("X" + std::to_string(k) + ".dcm"));
    add_dicom(tmp / "C", 2, "1.2.3.20");
    const Cohort c = discover_cohort(tmp.path());
    CHECK(ids(c) == std::vector<std::string>{"C_s1", "C_s2"});
    CHECK(c.cases[0].series_uid == "1.2.3.10");
    CHECK(load_case_volume(c.cases[1]).shape().depth == 2);
  }

  TEST_CASE("plain .nii, nested DICOM, excluded and hidden folders") {
    TempDir tmp;
    add_nifti(tmp / "z.nii");
    add_dicom(tmp / "pat1" / "mr", 2);
    add_dicom(tmp / "derived" / "x", 2);
    add_dicom(tmp / ".cache", 2);
    add_dicom(tmp / "single", 1);
    std::ofstream(tmp / "notes.txt") << "x";
    const Cohort c = discover_cohort(tmp.path());
    CHECK(ids(c) == std::vector<std::string>{"pat1_mr", "z"});
  }

  TEST_CASE("unreadable NIfTI is excluded with a warning") {
    TempDir tmp;
    add_nifti(tmp / "good.nii.gz");
    std::ofstream(tmp / "broken.nii") << "not a nifti";
    const Cohort c = discover_cohort(tmp.path());
    CHECK(ids(c) == std::vector<std::string>{"good"});
    REQUIRE(c.warnings.size() == 1);
    CHECK(c.warnings[0].find("broken.nii") != std::string::npos);
  }

  TEST_CASE("discovery is deterministic") {
    TempDir tmp;
    for (const char* n : {"d", "a", "c"}) add_nifti(tmp / (std::string(n) + ".nii.gz"));
    add_dicom(tmp / "b", 2);
    const Cohort x = discover_cohort(tmp.path()), y = discover_cohort(tmp.path());
    CHECK(x.cases == y.cases);
    CHECK(ids(x) == std::vector<std::string>{"a", "b", "c", "d"});
  }
}

TEST_SUITE("session") {
  struct Fixture {
    TempDir tmp;
    Fixture() {
      for (const char* n : {"case0", "case1", "case2", "case3"}) add_nifti(tmp / (std::string(n) + ".nii.gz"));
    }
    SessionState fresh() const { return new_session(discover_cohort(tmp.path())); }
  };

  TEST_CASE_FIXTURE(Fixture, "cursor follows the first pending case") {
    SessionState s = fresh();
    CHECK(next_pending_case(s)->case_id == "case0");
    s = record_decision(s, "case0", Decision::proceed_annotated, fixed_clock());
    CHECK(s.cohort.cases[0].status == CaseStatus::annotated);
    CHECK(next_pending_case(s)->case_id == "case1");
    s = record_decision(s, "case3", Decision::skip, fixed_clock());
    CHECK(s.cohort.cases[3].status == CaseStatus::skipped);
    CHECK(s.cursor() == 1);
    s = record_decision(s, "case1", Decision::skip);
    s = record_decision(s, "case2", Decision::proceed_annotated);
    CHECK_FALSE(next_pending_case(s).has_value());
    CHECK(s.cursor() == 4);
  }

  TEST_CASE_FIXTURE(Fixture, "invalid decisions") {
    SessionState s = record_decision(fresh(), "case0", Decision::proceed_annotated);
    CHECK_THROWS_AS(record_decision(s, "case0", Decision::skip), StateError);
    CHECK_THROWS_AS(record_decision(s, "nope", Decision::skip), StateError);
    CHECK_THROWS_AS(unskip(s, "case0"), StateError);
    s = record_decision(s, "case1", Decision::skip);
    CHECK_THROWS_AS(record_decision(s, "case1", Decision::skip), StateError);
    s = unskip(s, "case1");
    CHECK(s.cohort.cases[1].status == CaseStatus::pending);
    CHECK(s.decision_log.back().decision == Decision::unskip);
  }

  TEST_CASE_FIXTURE(Fixture, "persist and resume round trip") {
    SessionState s = fresh();
    persist(s);
    s = record_decision(s, "case2", Decision::skip, fixed_clock());
    s = record_decision(s, "case0", Decision::proceed_annotated, fixed_clock());
    const std::string before = read_file(s.session_file);
    const SessionState r = resume_session(s.session_file);
    CHECK(r.decision_log == s.decision_log);
    CHECK(r.cohort.cases == s.cohort.cases);
    CHECK(r.cursor() == s.cursor());
    persist(r);
    CHECK(read_file(s.session_file) == before);
  }

  TEST_CASE_FIXTURE(Fixture, "session file schema") {
    SessionState s = fresh();
    persist(s);
    s = record_decision(s, "case1", Decision::skip, fixed_clock());
    const auto j = nlohmann::json::parse(read_file(tmp / kSessionFilename));
    CHECK(j["version"] == 1);
    CHECK(j["root"].is_string());
    CHECK(j["cases"].size() == 4);
    CHECK(j["cases"][1]["id"] == "case1");
    CHECK(j["cases"][1]["kind"] == "nifti_file");
    CHECK(j["cases"][1]["status"] == "skipped");
    CHECK(j["cases"][1]["path"] == "case1.nii.gz");
    CHECK(j["log"][0]["id"] == "case1");
    CHECK(j["log"][0]["decision"] == "skip");
    CHECK(j["log"][0]["ts_iso8601"].get<std::string>().size() == 24);
  }

  TEST_CASE_FIXTURE(Fixture, "reconciliation is additive") {
    SessionState s = fresh();
    persist(s);
    s = record_decision(s, "case1", Decision::proceed_annotated);
    add_nifti(tmp / "case10.nii.gz");
    fs::remove(tmp / "case1.nii.gz");
    const SessionState r = resume_and_reconcile(s.session_file);
    CHECK(ids(r.cohort) == std::vector<std::string>{"case0", "case1", "case10", "case2", "case3"});
    CHECK(r.cohort.find("case10")->status == CaseStatus::pending);
    CHECK(r.cohort.find("case1")->missing);
    CHECK(r.cohort.find("case1")->status == CaseStatus::annotated);
    CHECK(r.decision_log == s.decision_log);
    add_nifti(tmp / "case1.nii.gz");
    CHECK_FALSE(resume_and_reconcile(s.session_file).cohort.find("case1")->missing);
  }

  TEST_CASE_FIXTURE(Fixture, "resume failures are explicit") {
    CHECK_THROWS_AS(resume_session(tmp / kSessionFilename), IoError);
    std::ofstream(tmp / kSessionFilename) << "{\"version\": 1, \"cases\": [";
    CHECK_THROWS_WITH_AS(resume_session(tmp / kSessionFilename), doctest::Contains("discover"), FormatError);
    std::ofstream(tmp / kSessionFilename) << R"({"version": 2, "root": "/", "cases": [], "log": []})";
    CHECK_THROWS_WITH_AS(resume_session(tmp / kSessionFilename), doctest::Contains("version mismatch"), FormatError);
    SessionState s = fresh();
    persist(s);
    auto j = nlohmann::json::parse(read_file(tmp / kSessionFilename));
    j["cases"][0]["status"] = "annotated";
    write_file_atomic(tmp / kSessionFilename, j.dump());
    CHECK_THROWS_AS(resume_session(tmp / kSessionFilename), FormatError);
  }

  TEST_CASE_FIXTURE(Fixture, "counts are invariant under random decisions") {
    std::mt19937_64 rng(77);
    SessionState s = fresh();
    persist(s);
    std::uniform_int_distribution<int> pick(0, 3), kind(0, 2);
    for (int step = 0; step < 100; ++step) {
      const std::string id = "case" + std::to_string(pick(rng));
      const Decision d = static_cast<Decision>(kind(rng));
      try {
        s = record_decision(s, id, d);
        CHECK(next_pending_case(s).value_or(CaseRecord{}).case_id != (d == Decision::unskip ? "" : id));
      } catch (const StateError&) {
      }
      const StatusCounts c = status_counts(s);
      CHECK(c.pending + c.annotated + c.skipped == s.cohort.cases.size());
      CHECK(s.cursor() <= s.cohort.cases.size());
    }
    const SessionState r = resume_session(s.session_file);
    CHECK(r.cohort.cases == s.cohort.cases);
    CHECK(r.decision_log == s.decision_log);
  }

  TEST_CASE_FIXTURE(Fixture, "one lock holder per root") {
    SessionLock first(tmp.path());
    CHECK_THROWS_AS(SessionLock(tmp.path()), StateError);
  }

  TEST_CASE_FIXTURE(Fixture, "lock is released on destruction") {
    { SessionLock first(tmp.path()); }
    CHECK_NOTHROW(SessionLock(tmp.path()));
  }
}
