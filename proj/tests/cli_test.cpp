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
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "sliceprop/app.hpp"
#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"
#include "sliceprop/imageio.hpp"
#include "sliceprop/nifti.hpp"
#include "sliceprop/prompts.hpp"
#include "sliceprop/quant.hpp"
#include "sliceprop/session.hpp"

using namespace sliceprop;
using namespace sliceprop::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sliceprop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = app::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Root with the cylinder volume as case "cyl" and two plain extra cases.
struct CohortRoot {
  TempDir tmp;
  CylinderFixture cyl;
  std::string root = tmp.path().string();
  fs::path prompts = tmp / "cyl_prompts.json";

  CohortRoot() {
    write_nifti(tmp / "cyl.nii.gz", cyl.volume());
    for (const char* n : {"other1.nii.gz", "other2.nii.gz"})
      write_nifti(tmp / n, make_volume({3, 8, 8}, {}, [](auto z, auto y, auto x) { return float(z * y + x); }));
    save_prompts(cyl.prompts({cyl.first, cyl.last}), prompts);
  }

  Run annotate(std::vector<std::string> extra = {}) const {
    std::vector<std::string> args{"--root", root, "annotate", "--case", "cyl", "--prompts", prompts.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  }
};

std::string drop_created_at(const fs::path& report) {
  auto j = nlohmann::json::parse(read_file(report));
  j.erase("created_at");
  return j.dump();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE_FIXTURE(CohortRoot, "discover prints one row per case and is idempotent") {
    const Run a = cli({"--root", root, "discover"});
    CHECK(a.rc == 0);
    CHECK(lines(a.out) == 4);
    CHECK(a.out.find("cyl") != std::string::npos);
    CHECK(a.out.find("pending") != std::string::npos);
    const std::string session = read_file(tmp / kSessionFilename);
    const Run b = cli({"--root", root, "discover"});
    CHECK(b.out == a.out);
    CHECK(read_file(tmp / kSessionFilename) == session);
  }

  TEST_CASE("discover on a missing root fails with exit 2") {
    TempDir tmp;
    const Run r = cli({"--root", (tmp / "absent").string(), "discover"});
    CHECK(r.rc == 2);
    CHECK(r.out.empty());
    CHECK(r.err.find("error:") != std::string::npos);
  }

  TEST_CASE("usage errors exit 2 and help exits 0") {
    CHECK(cli({"discover"}).rc == 2);
    CHECK(cli({"--root", "/tmp"}).rc == 2);
    CHECK(cli({"--root", "/tmp", "frobnicate"}).rc == 2);
    CHECK(cli({"--help"}).rc == 0);
  }

  TEST_CASE_FIXTURE(CohortRoot, "annotate exports mask and report near the analytic volume") {
    const Run r = annotate();
    REQUIRE_MESSAGE(r.rc == 0, r.err);
    const fs::path dir = tmp / "derived" / "cyl";
    CHECK(fs::exists(dir / "cyl_mask.nii.gz"));
    CHECK(fs::exists(dir / "cyl_prompts.json"));
    const VolumetryReport rep = read_report(dir / "cyl_volumetry.json");
    REQUIRE(rep.objects.size() == 1);
    const double voxel = 0.9 * 0.9 * 2.0;
    const double analytic = 3.14159265358979 * cyl.radius * cyl.radius * voxel * (cyl.last - cyl.first + 1);
    CHECK(rep.objects[0].volume_mm3 == doctest::Approx(double(cyl.voxel_count()) * voxel).epsilon(0.10));
    CHECK(rep.objects[0].volume_mm3 == doctest::Approx(analytic).epsilon(0.10));
    CHECK(rep.objects[0].slice_extent == std::array<int, 2>{cyl.first, cyl.last});
    CHECK(rep.objects[0].name == "cylinder");

    const LoadedLabels mask = load_nifti_labels(dir / "cyl_mask.nii.gz");
    CHECK(geometry_equal(mask.geometry, cyl.geometry, 1e-9));
    CHECK(resume_session(tmp / kSessionFilename).cohort.find("cyl")->status == CaseStatus::annotated);
    CHECK(r.out.find("cyl_volumetry.json") != std::string::npos);
  }

  TEST_CASE_FIXTURE(CohortRoot, "annotate is reproducible apart from the timestamp") {
    REQUIRE(annotate({"--out-dir", (tmp / "a").string()}).rc == 0);
    REQUIRE(annotate({"--out-dir", (tmp / "b").string(), "--force"}).rc == 0);
    CHECK(read_file(tmp / "a" / "cyl_mask.nii.gz") == read_file(tmp / "b" / "cyl_mask.nii.gz"));
    CHECK(drop_created_at(tmp / "a" / "cyl_volumetry.json") == drop_created_at(tmp / "b" / "cyl_volumetry.json"));
  }

  TEST_CASE_FIXTURE(CohortRoot, "annotated case needs --force") {
    REQUIRE(annotate().rc == 0);
    const Run again = annotate();
    CHECK(again.rc == 3);
    CHECK(again.err.find("--force") != std::string::npos);
    CHECK(annotate({"--force"}).rc == 0);
  }

  TEST_CASE_FIXTURE(CohortRoot, "out-of-bounds box is a validation failure") {
    auto j = nlohmann::json::parse(read_file(prompts));
    auto box = j["boxes"][0];
    box["slice"] = 5;
    box["max"] = {90, 60};
    j["boxes"].push_back(box);
    write_file_atomic(prompts, j.dump());
    const Run r = annotate();
    CHECK(r.rc == 3);
    CHECK(r.err.find("violation") != std::string::npos);
    CHECK_FALSE(fs::exists(tmp / "derived" / "cyl" / "cyl_mask.nii.gz"));
  }

  TEST_CASE_FIXTURE(CohortRoot, "malformed or missing prompt files") {
    std::ofstream(prompts) << "{\"version\": 1, \"objects\": [";
    CHECK(annotate().rc == 3);
    fs::remove(prompts);
    CHECK(annotate().rc == 2);
  }

  TEST_CASE_FIXTURE(CohortRoot, "medsam2 without a checkpoint is a backend failure") {
    ::unsetenv("MEDSAM2_CHECKPOINT");
    const Run r = cli({"--root", root, "--backend", "medsam2", "annotate", "--case", "cyl", "--prompts", prompts.string()});
    CHECK(r.rc == 4);
    CHECK(r.err.find("checkpoint not found") != std::string::npos);
    CHECK(cli({"--root", root, "--backend", "nope", "annotate", "--case", "cyl", "--prompts", prompts.string()}).rc == 4);
    CHECK(resume_session(tmp / kSessionFilename).cohort.find("cyl")->status == CaseStatus::pending);
  }

  TEST_CASE_FIXTURE(CohortRoot, "annotate with N4 and edits") {
    const fs::path edits = tmp / "edits.json";
    std::ofstream(edits) << R"([{"kind": "paint", "id": 1, "slice": 0, "center": [5, 5], "radius": 1}])";
    const Run r = annotate({"--n4", "--n4-shrink", "2", "--n4-levels", "2", "--n4-iters", "20", "--edits", edits.string()});
    REQUIRE_MESSAGE(r.rc == 0, r.err);
    const VolumetryReport rep = read_report(tmp / "derived" / "cyl" / "cyl_volumetry.json");
    CHECK(rep.objects.at(0).slice_extent[0] == 0);
    CHECK(annotate({"--force", "--n4", "--n4-shrink", "0"}).rc == 2);
  }

  TEST_CASE_FIXTURE(CohortRoot, "skip and unskip rules") {
    CHECK(cli({"--root", root, "skip", "--case", "other1"}).rc == 0);
    CHECK(resume_session(tmp / kSessionFilename).cohort.find("other1")->status == CaseStatus::skipped);
    CHECK(cli({"--root", root, "skip", "--case", "other1"}).rc == 3);
    CHECK(cli({"--root", root, "skip", "--case", "ghost"}).rc == 3);
    CHECK(annotate().rc == 0);
    CHECK(cli({"--root", root, "skip", "--case", "cyl"}).rc == 3);
    CHECK(cli({"--root", root, "unskip", "--case", "cyl"}).rc == 3);
    CHECK(cli({"--root", root, "unskip", "--case", "other1"}).rc == 0);
    CHECK(resume_session(tmp / kSessionFilename).cohort.find("other1")->status == CaseStatus::pending);
    const Run table = cli({"--root", root, "discover"});
    CHECK(table.out.find("annotated") != std::string::npos);
  }

  TEST_CASE_FIXTURE(CohortRoot, "skipped case cannot be annotated") {
    REQUIRE(cli({"--root", root, "skip", "--case", "cyl"}).rc == 0);
    CHECK(annotate().rc == 3);
  }

  TEST_CASE_FIXTURE(CohortRoot, "report prints stored volumetry") {
    CHECK(cli({"--root", root, "report"}).out.find("no annotated cases") != std::string::npos);
    REQUIRE(annotate().rc == 0);
    const Run all = cli({"--root", root, "report"});
    CHECK(all.rc == 0);
    CHECK(all.out.find("cylinder") != std::string::npos);
    CHECK(cli({"--root", root, "report", "--case", "cyl"}).out == all.out);
    CHECK(cli({"--root", root, "report", "--case", "other2"}).rc == 2);
    CHECK(cli({"--root", root, "report", "--case", "ghost"}).rc == 3);
  }

  TEST_CASE_FIXTURE(CohortRoot, "a held session lock blocks writers") {
    SessionLock held(tmp.path());
    CHECK(cli({"--root", root, "skip", "--case", "other1"}).rc == 3);
  }

  TEST_CASE_FIXTURE(CohortRoot, "config file sets the backend and flags override it") {
    const fs::path toml = tmp / "cfg.toml";
    std::ofstream(toml) << "backend = \"medsam2\"\n";
    CHECK(cli({"--root", root, "--config", toml.string(), "annotate", "--case", "cyl", "--prompts", prompts.string()}).rc == 4);
    CHECK(cli({"--root", root, "--config", toml.string(), "--backend", "fallback-geometric", "annotate", "--case", "cyl",
               "--prompts", prompts.string()})
              .rc == 0);
    CHECK(cli({"--root", root, "--config", (tmp / "none.toml").string(), "discover"}).rc == 2);
  }
}

TEST_SUITE("config") {
  TEST_CASE("TOML subset") {
    const app::AppConfig c = app::parse_config_toml(R"(# comment
[backend]
backend = "medsam2"   # trailing
device = "cuda:0"
checkpoint_path = "/w/m.pt"
seed = 7

[n4]
shrink_factor = 2
fitting_levels = 3
iterations = [10, 20, 30]
convergence_threshold = 1e-4
)");
    CHECK(c.backend.backend == "medsam2");
    CHECK(c.backend.device == "cuda:0");
    CHECK(c.backend.checkpoint_path == "/w/m.pt");
    CHECK(c.backend.seed == 7);
    CHECK(c.n4.shrink_factor == 2);
    CHECK(c.n4.iterations_per_level == std::vector<int>{10, 20, 30});
    CHECK(c.n4.convergence_threshold == 1e-4);
    CHECK_THROWS(app::parse_config_toml("[n4\nshrink_factor = 2"));
    CHECK_THROWS(app::parse_config_toml("seed = \"x"));
  }

  TEST_CASE("JSON config") {
    const app::AppConfig c = app::parse_config_json(R"({"backend": "fallback-geometric", "seed": 3, "n4": {"fitting_levels": 2, "iterations": 5}})");
    CHECK(c.backend.backend == "fallback-geometric");
    CHECK(c.backend.seed == 3);
    CHECK(c.n4.iterations_per_level == std::vector<int>{5, 5});
    const app::AppConfig d = app::parse_config_json(R"({"backend": {"id": "medsam2", "device": "cpu"}, "n4": {"fitting_levels": 3}})");
    CHECK(d.backend.backend == "medsam2");
    CHECK(d.n4.iterations_per_level == std::vector<int>{50, 50, 50});
    CHECK_THROWS(app::parse_config_json("{"));
  }

  TEST_CASE("defaults") {
    const app::AppConfig c = app::parse_config_json("{}");
    CHECK(c.backend.backend == "fallback-geometric");
    CHECK(c.n4.shrink_factor == 4);
    CHECK(c.n4.fitting_levels == 4);
    CHECK(c.n4.iterations_per_level == std::vector<int>{50, 50, 50, 50});
    CHECK(c.n4.convergence_threshold == 1e-3);
  }
}
