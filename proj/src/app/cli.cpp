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

#include <ostream>

#include "CLI11.hpp"
#include "sliceprop/app.hpp"
#include "sliceprop/error.hpp"

namespace sliceprop::app {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"sliceprop: prompt-driven annotation of 3D medical volumes"};
  cli.require_subcommand(1);

  std::string root;
  std::optional<std::string> backend, device, checkpoint, config_path;
  std::optional<int> seed;
  cli.add_option("--root", root, "Cohort root folder")->required();
  cli.add_option("--backend", backend, "Segmentation backend: fallback-geometric | medsam2");
  cli.add_option("--seed", seed, "Backend seed");
  cli.add_option("--config", config_path, "Config file (TOML or JSON)");
  cli.add_option("--device", device, "Model device (cpu, cuda, cuda:N)");
  cli.add_option("--checkpoint", checkpoint, "Model checkpoint path");

  auto* discover = cli.add_subcommand("discover", "Scan the root and print the case table");

  AnnotateOptions ann;
  std::string prompts, out_dir, edits;
  std::optional<int> n4_shrink, n4_levels, n4_iters;
  std::optional<double> n4_conv;
  auto* annotate = cli.add_subcommand("annotate", "Propagate saved prompts, export mask and volumetry");
  annotate->add_option("--case", ann.case_id, "Case id")->required();
  annotate->add_option("--prompts", prompts, "Prompt file (<case>_prompts.json)")->required();
  annotate->add_flag("--n4", ann.n4, "Apply N4 bias-field correction before segmentation");
  annotate->add_option("--n4-shrink", n4_shrink, "N4 shrink factor");
  annotate->add_option("--n4-levels", n4_levels, "N4 fitting levels");
  annotate->add_option("--n4-iters", n4_iters, "N4 iterations per level");
  annotate->add_option("--n4-conv", n4_conv, "N4 convergence threshold");
  annotate->add_option("--out-dir", out_dir, "Output folder (default <root>/derived/<case>)");
  annotate->add_option("--edits", edits, "Brush edit script applied before locking");
  annotate->add_flag("--force", ann.force, "Redo an annotated case");

  std::string skip_case, unskip_case;
  auto* skip = cli.add_subcommand("skip", "Mark a pending case skipped");
  skip->add_option("--case", skip_case, "Case id")->required();
  auto* unskip_cmd = cli.add_subcommand("unskip", "Return a skipped case to pending");
  unskip_cmd->add_option("--case", unskip_case, "Case id")->required();

  std::optional<std::string> report_case;
  std::string report_dir;
  auto* report = cli.add_subcommand("report", "Print stored volumetry reports");
  report->add_option("--case", report_case, "Case id (default: all annotated)");
  report->add_option("--out-dir", report_dir, "Folder holding the report");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitInput;
  }

  AppConfig cfg;
  try {
    if (config_path) cfg = load_config(*config_path);
  } catch (const Error& e) {
    err << "error: config " << *config_path << ": " << e.what() << "\n";
    return kExitInput;
  }
  if (backend) cfg.backend.backend = *backend;
  if (seed) cfg.backend.seed = *seed;
  if (device) cfg.backend.device = *device;
  if (checkpoint) cfg.backend.checkpoint_path = *checkpoint;

  if (*discover) return cmd_discover(root, out, err);
  if (*skip) return cmd_skip(root, skip_case, out, err);
  if (*unskip_cmd) return cmd_unskip(root, unskip_case, out, err);
  if (*report) {
    return cmd_report(root, report_case, report_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(report_dir),
                      out, err);
  }

  ann.prompts_file = prompts;
  if (!out_dir.empty()) ann.out_dir = out_dir;
  if (!edits.empty()) ann.edits_file = edits;
  ann.n4_params = cfg.n4;
  if (n4_shrink) ann.n4_params.shrink_factor = *n4_shrink;
  if (n4_levels) {
    ann.n4_params.fitting_levels = *n4_levels;
    ann.n4_params.iterations_per_level.resize(static_cast<std::size_t>(std::max(*n4_levels, 0)), 50);
  }
  if (n4_iters) std::fill(ann.n4_params.iterations_per_level.begin(), ann.n4_params.iterations_per_level.end(), *n4_iters);
  if (n4_conv) ann.n4_params.convergence_threshold = *n4_conv;
  if (ann.n4) {
    try {
      ann.n4_params.validate();
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kExitInput;
    }
  }
  return cmd_annotate(root, ann, cfg.backend, out, err);
}

}  // namespace sliceprop::app
