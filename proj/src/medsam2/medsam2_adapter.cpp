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

#include "sliceprop/medsam2_adapter.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"
#include "sliceprop/preprocess.hpp"

#ifndef SLICEPROP_MEDSAM2_RUNNER
#define SLICEPROP_MEDSAM2_RUNNER "medsam2_runner.py"
#endif

namespace sliceprop::medsam2 {

namespace fs = std::filesystem;
using nlohmann::json;

ModelConfig model_config_from(const BackendConfig& cfg) {
  ModelConfig out;
  if (cfg.checkpoint_path) {
    out.checkpoint_path = *cfg.checkpoint_path;
  } else if (const char* env = std::getenv("MEDSAM2_CHECKPOINT"); env && *env) {
    out.checkpoint_path = env;
  }
  if (const char* env = std::getenv("MEDSAM2_RUNNER"); env && *env) out.runner_command = env;
  out.device = cfg.device;
  out.seed = cfg.seed;
  return out;
}

std::vector<std::uint8_t> prepare_frame(std::span<const float> slice, std::size_t height, std::size_t width,
                                        int size) {
  if (slice.size() != height * width || slice.empty()) throw ValidationError("prepare_frame: slice shape mismatch");
  std::vector<double> values(slice.begin(), slice.end());
  const double lo = percentile(values, 1.0);
  const double hi = percentile(values, 99.0);
  std::vector<double> grey(values.size(), 0.0);
  if (hi > lo) {
    for (std::size_t i = 0; i < values.size(); ++i) grey[i] = std::clamp((values[i] - lo) / (hi - lo), 0.0, 1.0);
  }

  const auto n = static_cast<std::size_t>(size);
  std::vector<std::uint8_t> rgb(n * n * 3);
  const double sy = static_cast<double>(height) / size, sx = static_cast<double>(width) / size;
  for (std::size_t y = 0; y < n; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, height - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < n; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, width - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * grey[y0 * width + x0] + wx * grey[y0 * width + x1]) +
                       wy * ((1 - wx) * grey[y1 * width + x0] + wx * grey[y1 * width + x1]);
      const auto byte = static_cast<std::uint8_t>(std::lround(v * 255.0));
      std::fill_n(rgb.begin() + static_cast<std::ptrdiff_t>((y * n + x) * 3), 3, byte);
    }
  }
  return rgb;
}

Mask2D resize_nearest(const Mask2D& mask, std::size_t height, std::size_t width) {
  Mask2D out(height, width, 0);
  if (mask.size() == 0) return out;
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(static_cast<std::size_t>((y + 0.5) * mask.height() / height), mask.height() - 1);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(static_cast<std::size_t>((x + 0.5) * mask.width() / width), mask.width() - 1);
      out(y, x) = mask(sy, sx) ? 1 : 0;
    }
  }
  return out;
}

SubprocessRunner::SubprocessRunner(ModelConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.runner_command.empty()) cfg_.runner_command = std::string("python3 ") + SLICEPROP_MEDSAM2_RUNNER;
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

void write_bytes(const fs::path& p, const void* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw BackendError(kBackendId, "cannot write " + p.string());
}

struct ScratchDir {
  fs::path path;
  ScratchDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("sliceprop-medsam2-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

ModelResponse SubprocessRunner::run(const ModelRequest& request) {
  const ScratchDir dir;
  json req = {{"mode", request.mode == ModelRequest::Mode::segment ? "segment" : "propagate"},
              {"image_size", request.image_size},
              {"frame_count", request.frame_count},
              {"checkpoint", cfg_.checkpoint_path.string()},
              {"device", cfg_.device},
              {"seed", request.seed},
              {"reverse", request.reverse}};
  json prompts = json::array();
  for (const auto& p : request.prompts) {
    json pts = json::array();
    for (const auto& pt : p.points) pts.push_back({pt.x, pt.y, pt.positive ? 1 : 0});
    prompts.push_back({{"frame", p.frame}, {"box", {p.x0, p.y0, p.x1, p.y1}}, {"points", pts}});
  }
  req["prompts"] = prompts;
  json cond = json::array();
  std::vector<std::uint8_t> cond_bytes;
  for (const auto& [frame, m] : request.conditioning) {
    cond.push_back(frame);
    cond_bytes.insert(cond_bytes.end(), m.data().begin(), m.data().end());
  }
  req["conditioning"] = cond;
  write_file_atomic(dir.path / "request.json", req.dump(2));
  write_bytes(dir.path / "frames.raw", request.frames.data(), request.frames.size());
  write_bytes(dir.path / "cond.raw", cond_bytes.data(), cond_bytes.size());

  const std::string cmd = cfg_.runner_command + " " + shell_quote(dir.path.string());
  const int rc = std::system(cmd.c_str());
  std::string detail;
  if (fs::exists(dir.path / "response.json")) {
    try {
      const json resp = json::parse(read_file(dir.path / "response.json"));
      if (resp.contains("error")) detail = resp["error"].get<std::string>();
    } catch (const std::exception& e) {
      detail = std::string("malformed response: ") + e.what();
    }
  }
  if (rc != 0 || !detail.empty()) {
    throw BackendError(kBackendId, "model runner failed (status " + std::to_string(rc) + ")" +
                                       (detail.empty() ? "" : ": " + detail));
  }

  const std::string raw = read_file(dir.path / "masks.raw");
  const auto plane = static_cast<std::size_t>(request.image_size) * static_cast<std::size_t>(request.image_size);
  if (raw.size() != plane * static_cast<std::size_t>(request.frame_count)) {
    throw BackendError(kBackendId, "model runner returned " + std::to_string(raw.size()) + " mask bytes, expected " +
                                       std::to_string(plane * request.frame_count));
  }
  ModelResponse resp;
  for (int f = 0; f < request.frame_count; ++f) {
    Mask2D m(static_cast<std::size_t>(request.image_size), static_cast<std::size_t>(request.image_size));
    for (std::size_t i = 0; i < plane; ++i) m.data()[i] = raw[f * plane + i] ? 1 : 0;
    resp.masks.push_back(std::move(m));
  }
  return resp;
}

namespace {

void check_checkpoint(const fs::path& p) {
  std::error_code ec;
  if (p.empty() || !fs::exists(p, ec)) throw BackendError(kBackendId, "checkpoint not found: " + p.string());
  if (!fs::is_regular_file(p, ec)) throw BackendError(kBackendId, "checkpoint is not a file: " + p.string());
  std::ifstream in(p, std::ios::binary);
  std::array<unsigned char, 16> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto got = in.gcount();
  if (!in && got == 0) throw BackendError(kBackendId, "checkpoint is empty or unreadable: " + p.string());
  const bool zip = got >= 4 && head[0] == 'P' && head[1] == 'K' && head[2] == 3 && head[3] == 4;
  const bool pickle = got >= 2 && head[0] == 0x80 && head[1] >= 2 && head[1] <= 5;
  const bool safetensors = got >= 9 && head[8] == '{';
  if (!zip && !pickle && !safetensors) {
    throw BackendError(kBackendId, "checkpoint is corrupt or not a model file: " + p.string());
  }
}

void check_device(const std::string& device) {
  const std::string hint = "; set device = \"cpu\" or use --backend fallback-geometric";
  if (device == "cpu") return;
  if (device == "cuda" || device.rfind("cuda:", 0) == 0) {
    if (fs::exists("/dev/nvidia0") || fs::exists("/dev/nvidiactl")) return;
    throw BackendError(kBackendId, "device '" + device + "' unavailable: no CUDA device found" + hint);
  }
  throw BackendError(kBackendId, "device '" + device + "' unavailable" + hint);
}

class Medsam2Backend final : public SegmentationBackend {
 public:
  Medsam2Backend(ModelConfig cfg, std::shared_ptr<ModelRunner> runner)
      : cfg_(std::move(cfg)), runner_(std::move(runner)) {}

  std::string id() const override { return kBackendId; }
  BackendCapabilities capabilities() const override { return {true, runner_->supports_negative_points(), true}; }

  std::unique_ptr<BackendState> create_state(std::shared_ptr<const VolumeImage> volume, int object_id) override {
    return std::make_unique<BackendState>(std::move(volume), object_id);
  }

  Mask2D segment(BackendState& state, const SlicePrompts& prompts) override {
    const auto& vol = state.volume();
    const Shape3 shape = vol.shape();
    const int z = prompts.box.slice_index;
    const double sx = static_cast<double>(cfg_.image_size) / shape.width;
    const double sy = static_cast<double>(cfg_.image_size) / shape.height;

    ModelRequest req;
    req.mode = ModelRequest::Mode::segment;
    req.image_size = cfg_.image_size;
    req.frame_count = 1;
    req.seed = cfg_.seed;
    req.frames = prepare_frame(vol.voxels.slice(static_cast<std::size_t>(z)), shape.height, shape.width,
                               cfg_.image_size);
    FramePrompt fp{0, prompts.box.min_corner.x * sx, prompts.box.min_corner.y * sy, prompts.box.max_corner.x * sx,
                   prompts.box.max_corner.y * sy, {}};
    const bool negatives = runner_->supports_negative_points();
    for (const auto& p : prompts.points) {
      if (p.polarity == Polarity::negative && !negatives) {
        state.warn("negative point ignored by model on slice " + std::to_string(z));
        continue;
      }
      fp.points.push_back({(p.position.x + 0.5) * sx, (p.position.y + 0.5) * sy, p.polarity == Polarity::positive});
    }
    req.prompts.push_back(std::move(fp));
    const ModelResponse resp = runner_->run(req);
    if (resp.masks.size() != 1) throw BackendError(kBackendId, "expected one mask from segment request");
    return resize_nearest(resp.masks.front(), shape.height, shape.width);
  }

  std::vector<SliceMask> propagate(BackendState& state, Direction direction, SliceSpan span) override {
    const auto& vol = state.volume();
    const Shape3 shape = vol.shape();
    const auto& prompted = state.prompted_masks();
    const Provenance prov =
        direction == Direction::forward ? Provenance::propagated_forward : Provenance::propagated_backward;

    std::vector<int> order;
    for (int s = span.first; s <= span.last; ++s) order.push_back(s);
    if (direction == Direction::backward) std::reverse(order.begin(), order.end());

    ModelRequest req;
    req.mode = ModelRequest::Mode::propagate;
    req.image_size = cfg_.image_size;
    req.frame_count = span.last - span.first + 1;
    req.reverse = direction == Direction::backward;
    req.seed = cfg_.seed;
    for (int s = span.first; s <= span.last; ++s) {
      const auto frame = prepare_frame(vol.voxels.slice(static_cast<std::size_t>(s)), shape.height, shape.width,
                                       cfg_.image_size);
      req.frames.insert(req.frames.end(), frame.begin(), frame.end());
      if (auto it = prompted.find(s); it != prompted.end()) {
        req.conditioning.emplace_back(s - span.first, resize_nearest(it->second, static_cast<std::size_t>(cfg_.image_size),
                                                                     static_cast<std::size_t>(cfg_.image_size)));
      }
    }

    std::vector<SliceMask> out;
    if (req.conditioning.empty()) {
      for (int s : order) out.push_back({s, Mask2D(shape.height, shape.width, 0), prov});
      return out;
    }
    const ModelResponse resp = runner_->run(req);
    if (resp.masks.size() != static_cast<std::size_t>(req.frame_count)) {
      throw BackendError(kBackendId, "expected " + std::to_string(req.frame_count) + " masks from propagate request");
    }
    for (int s : order) {
      if (prompted.count(s)) continue;
      out.push_back({s, resize_nearest(resp.masks[static_cast<std::size_t>(s - span.first)], shape.height, shape.width),
                     prov});
    }
    return out;
  }

 private:
  ModelConfig cfg_;
  std::shared_ptr<ModelRunner> runner_;
};

}  // namespace

std::unique_ptr<SegmentationBackend> build_backend(const ModelConfig& cfg, std::shared_ptr<ModelRunner> runner) {
  check_checkpoint(cfg.checkpoint_path);
  check_device(cfg.device);
  if (cfg.image_size < 16) throw BackendError(kBackendId, "image_size must be >= 16");
  if (!runner) runner = std::make_shared<SubprocessRunner>(cfg);
  return std::make_unique<Medsam2Backend>(cfg, std::move(runner));
}

}  // namespace sliceprop::medsam2
