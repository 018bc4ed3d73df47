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

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>

#include "sliceprop/app.hpp"
#include "sliceprop/error.hpp"
#include "sliceprop/fallback.hpp"
#include "sliceprop/fs.hpp"
#include "sliceprop/imageio.hpp"
#include "sliceprop/labels.hpp"
#include "sliceprop/quant.hpp"
#ifdef SLICEPROP_HAVE_MEDSAM2
#include "sliceprop/medsam2_adapter.hpp"
#endif

namespace sliceprop::app {

namespace fs = std::filesystem;

std::unique_ptr<SegmentationBackend> make_backend(const BackendConfig& cfg) {
  if (cfg.backend == FallbackGeometricBackend::kId) return std::make_unique<FallbackGeometricBackend>();
  if (cfg.backend == "medsam2") {
#ifdef SLICEPROP_HAVE_MEDSAM2
    return medsam2::build_backend(medsam2::model_config_from(cfg));
#else
    throw BackendError(cfg.backend, "this build does not include the medsam2 adapter");
#endif
  }
  throw BackendError(cfg.backend, "unknown backend; expected fallback-geometric or medsam2");
}

fs::path default_out_dir(const fs::path& root, const std::string& case_id) { return root / "derived" / case_id; }

SessionState open_session(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("root is not a readable directory: " + root.string());
  const fs::path file = root / kSessionFilename;
  SessionState session = fs::exists(file) ? resume_and_reconcile(file) : new_session(discover_cohort(root));
  persist(session);
  return session;
}

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const BackendError*>(&e)) return kExitBackend;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const StateError*>(&e)) return kExitValidation;
  return kExitInput;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

std::string status_text(const CaseRecord& c) {
  return to_string(c.status) + (c.missing ? " (missing)" : "");
}

void print_table(const SessionState& session, std::ostream& out) {
  std::size_t w = 7;
  for (const auto& c : session.cohort.cases) w = std::max(w, c.case_id.size());
  out << std::left << std::setw(static_cast<int>(w + 2)) << "case_id" << std::setw(14) << "kind" << "status\n";
  for (const auto& c : session.cohort.cases) {
    out << std::left << std::setw(static_cast<int>(w + 2)) << c.case_id << std::setw(14) << to_string(c.source_kind)
        << status_text(c) << "\n";
  }
}

const CaseRecord& require_case(const SessionState& session, const std::string& case_id) {
  const CaseRecord* rec = session.cohort.find(case_id);
  if (!rec) throw StateError("unknown case '" + case_id + "'");
  return *rec;
}

void print_report(const VolumetryReport& r, std::ostream& out) {
  out << "case " << r.case_id << " (" << r.created_at << ", " << r.tool_version << ")\n";
  out << std::left << std::setw(6) << "id" << std::setw(16) << "name" << std::right << std::setw(10) << "voxels"
      << std::setw(16) << "mm3" << std::setw(12) << "ml" << "  slices\n";
  for (const auto& o : r.objects) {
    out << std::left << std::setw(6) << o.object_id << std::setw(16) << o.name << std::right << std::setw(10)
        << o.voxel_count << std::setw(16) << std::fixed << std::setprecision(3) << o.volume_mm3 << std::setw(12)
        << std::setprecision(4) << o.volume_ml << "  " << o.slice_extent[0] << "-" << o.slice_extent[1] << "\n";
    out.unsetf(std::ios::floatfield);
  }
}

}  // namespace

int cmd_discover(const fs::path& root, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SessionLock root_lock(root);
    const SessionState session = open_session(root);
    for (const auto& w : session.cohort.warnings) err << "warning: " << w << "\n";
    print_table(session, out);
    return kExitOk;
  });
}

int cmd_skip(const fs::path& root, const std::string& case_id, std::ostream& out, std::ostream& err,
             const Clock& clock) {
  return guarded(err, [&] {
    SessionLock root_lock(root);
    const SessionState session = open_session(root);
    require_case(session, case_id);
    record_decision(session, case_id, Decision::skip, clock);
    out << case_id << ": skipped\n";
    return kExitOk;
  });
}

int cmd_unskip(const fs::path& root, const std::string& case_id, std::ostream& out, std::ostream& err,
               const Clock& clock) {
  return guarded(err, [&] {
    SessionLock root_lock(root);
    const SessionState session = open_session(root);
    require_case(session, case_id);
    unskip(session, case_id, clock);
    out << case_id << ": pending\n";
    return kExitOk;
  });
}

int cmd_report(const fs::path& root, const std::optional<std::string>& case_id,
               const std::optional<fs::path>& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SessionState session = open_session(root);
    std::vector<std::string> ids;
    if (case_id) {
      require_case(session, *case_id);
      ids.push_back(*case_id);
    } else {
      for (const auto& c : session.cohort.cases)
        if (c.status == CaseStatus::annotated) ids.push_back(c.case_id);
    }
    for (const auto& id : ids) {
      const fs::path dir = out_dir ? *out_dir : default_out_dir(root, id);
      const fs::path file = dir / report_filename(id);
      if (!fs::exists(file)) throw IoError("no volumetry report for '" + id + "' at " + file.string());
      print_report(read_report(file), out);
    }
    if (ids.empty()) out << "no annotated cases\n";
    return kExitOk;
  });
}

int cmd_annotate(const fs::path& root, const AnnotateOptions& options, const BackendConfig& backend_cfg,
                 std::ostream& out, std::ostream& err, const Clock& clock) {
  const Clock now = clock ? clock : Clock(utc_timestamp_now);
  return guarded(err, [&]() -> int {
    SessionLock root_lock(root);
    SessionState session = open_session(root);
    const CaseRecord record = require_case(session, options.case_id);
    if (record.missing) throw IoError("source of case '" + record.case_id + "' is missing: " + record.source_path.string());
    if (record.status == CaseStatus::skipped) throw StateError("case '" + record.case_id + "' is skipped; unskip it first");
    if (record.status == CaseStatus::annotated && !options.force) {
      throw StateError("case '" + record.case_id + "' is already annotated (use --force to redo)");
    }

    std::vector<std::string> warnings;
    VolumeImage original;
    PromptSet ps;
    try {
      original = load_case_volume(record, &warnings);
    } catch (const Error& e) {
      err << "error: cannot load case '" << record.case_id << "': " << e.what() << "\n";
      return kExitInput;
    }
    try {
      ps = load_prompts(options.prompts_file);
    } catch (const FormatError& e) {
      err << "error: " << e.what() << "\n";
      return kExitValidation;
    }
    const auto violations = validate_promptset(ps, original.shape());
    if (!violations.empty()) {
      err << "error: prompt file has " << violations.size() << " violation(s)\n";
      for (const auto& v : violations) err << "  " << to_string(v.kind) << ": " << v.message << "\n";
      return kExitValidation;
    }
    std::vector<EditOp> edits;
    if (options.edits_file) edits = load_edits(*options.edits_file);

    auto backend = make_backend(backend_cfg);

    VolumeImage work = original;
    if (options.n4) {
      N4Result n4 = n4_correct(original, options.n4_params);
      for (auto& w : n4.warnings) warnings.push_back("n4: " + w);
      work = std::move(n4.corrected);
    }
    auto conditioned = std::make_shared<const VolumeImage>(normalize_intensity(work, NormalizeMethod::percentile_clip));

    std::vector<ObjectMaskVolume> objects;
    std::vector<int> precedence;
    std::map<int, std::string> names;
    for (int id : ps.object_ids()) {
      names[id] = ps.find_object(id)->name;
      if (ps.boxes_for(id).empty()) {
        warnings.push_back("object " + std::to_string(id) + " has no boxes; skipped");
        continue;
      }
      ObjectMaskVolume omv = run_object_pipeline(conditioned, ps, id, *backend);
      for (const auto& w : omv.warnings) warnings.push_back("object " + std::to_string(id) + ": " + w);
      precedence.push_back(id);
      objects.push_back(std::move(omv));
    }

    LabelMap labels = objects.empty() ? LabelMap{Volume<std::uint16_t>(original.shape()), false, {}}
                                      : merge_objects(objects, precedence);
    for (const auto& e : edits) labels = apply_edit(labels, e);
    labels = lock(labels);

    const fs::path dir = options.out_dir ? *options.out_dir : default_out_dir(root, record.case_id);
    fs::create_directories(dir);
    const fs::path mask_path = dir / mask_filename(record.case_id);
    const fs::path report_path = dir / report_filename(record.case_id);
    export_labelmap(labels, original.geometry, mask_path);
    const VolumetryReport report = compute_volumetry(labels, original.geometry, record.case_id, names, now());
    write_report(report, report_path);
    save_prompts(ps, dir / prompts_filename(record.case_id));

    if (record.status == CaseStatus::pending) record_decision(session, record.case_id, Decision::proceed_annotated, now);

    for (const auto& w : warnings) err << "warning: " << w << "\n";
    out << "mask: " << mask_path.string() << "\n";
    out << "report: " << report_path.string() << "\n";
    print_report(report, out);
    return kExitOk;
  });
}

}  // namespace sliceprop::app
