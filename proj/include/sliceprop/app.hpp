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
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "sliceprop/backend.hpp"
#include "sliceprop/preprocess.hpp"
#include "sliceprop/session.hpp"

namespace sliceprop::app {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitValidation = 3,
  kExitBackend = 4,
};

struct AppConfig {
  BackendConfig backend;
  N4Params n4;
};

/// Reads a JSON or TOML config. Both accept the keys backend, device,
/// checkpoint_path and seed either at top level or under a `backend`
/// table, and N4 settings under `n4` (shrink_factor, fitting_levels,
/// iterations, convergence_threshold). The TOML reader understands tables,
/// strings, numbers, booleans and flat arrays.
AppConfig load_config(const std::filesystem::path& path);
AppConfig parse_config_json(const std::string& text);
AppConfig parse_config_toml(const std::string& text);

/// Backend by id: "fallback-geometric" or "medsam2". Throws BackendError for
/// unknown ids and backend construction failures.
std::unique_ptr<SegmentationBackend> make_backend(const BackendConfig& cfg);

struct AnnotateOptions {
  std::string case_id;
  std::filesystem::path prompts_file;
  bool n4 = false;
  N4Params n4_params;
  /// Defaults to <root>/derived/<case_id>/.
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::filesystem::path> edits_file;
  /// Re-run a case that is already annotated; the decision log is not touched.
  bool force = false;
};

std::filesystem::path default_out_dir(const std::filesystem::path& root, const std::string& case_id);

/// Resumes <root>/session.json and reconciles it with the tree, or discovers
/// the root and starts a session. The result is persisted.
SessionState open_session(const std::filesystem::path& root);

int cmd_discover(const std::filesystem::path& root, std::ostream& out, std::ostream& err);
int cmd_annotate(const std::filesystem::path& root, const AnnotateOptions& options, const BackendConfig& backend,
                 std::ostream& out, std::ostream& err, const Clock& clock = {});
int cmd_skip(const std::filesystem::path& root, const std::string& case_id, std::ostream& out, std::ostream& err,
             const Clock& clock = {});
int cmd_unskip(const std::filesystem::path& root, const std::string& case_id, std::ostream& out, std::ostream& err,
               const Clock& clock = {});
/// Prints the stored volumetry of one case, or of every annotated case.
int cmd_report(const std::filesystem::path& root, const std::optional<std::string>& case_id,
               const std::optional<std::filesystem::path>& out_dir, std::ostream& out, std::ostream& err);

/// Command-line entry point.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sliceprop::app
