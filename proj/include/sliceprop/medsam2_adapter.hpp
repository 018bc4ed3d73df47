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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sliceprop/backend.hpp"

namespace sliceprop::medsam2 {

inline constexpr const char* kBackendId = "medsam2";

struct ModelConfig {
  std::filesystem::path checkpoint_path;
  std::string device = "cpu";
  int image_size = 1024;
  /// Shell command that serves one request directory; empty picks the
  /// bundled Python runner.
  std::string runner_command;
  int seed = 0;
};

/// Fills a ModelConfig from the application backend block. The checkpoint
/// falls back to $MEDSAM2_CHECKPOINT and the runner to $MEDSAM2_RUNNER.
ModelConfig model_config_from(const BackendConfig& cfg);

/// One box (plus points) in model pixel coordinates on one frame.
struct FramePrompt {
  int frame = 0;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  struct Point {
    double x = 0, y = 0;
    bool positive = true;
  };
  std::vector<Point> points;
};

/// Frames are image_size x image_size RGB, row-major, interleaved.
struct ModelRequest {
  enum class Mode { segment, propagate };
  Mode mode = Mode::segment;
  int image_size = 0;
  int frame_count = 0;
  std::vector<std::uint8_t> frames;
  /// Box prompts (segment mode).
  std::vector<FramePrompt> prompts;
  /// Conditioning masks at model resolution (propagate mode).
  std::vector<std::pair<int, Mask2D>> conditioning;
  bool reverse = false;
  int seed = 0;
};

/// Model-resolution masks, one per request frame.
struct ModelResponse {
  std::vector<Mask2D> masks;
};

/// Executes requests against the model. Implementations may keep the model
/// resident between calls.
class ModelRunner {
 public:
  virtual ~ModelRunner() = default;
  virtual ModelResponse run(const ModelRequest& request) = 0;
  virtual bool supports_negative_points() const { return true; }
};

/// Runs `command <request_dir>` per request, exchanging request.json,
/// frames.raw, cond.raw and masks.raw, response.json through a scratch
/// directory.
class SubprocessRunner final : public ModelRunner {
 public:
  explicit SubprocessRunner(ModelConfig cfg);
  ModelResponse run(const ModelRequest& request) override;

 private:
  ModelConfig cfg_;
};

/// Checks the checkpoint and the device, then returns the adapter. A null
/// `runner` selects SubprocessRunner. Throws BackendError on a missing or
/// corrupt checkpoint or an unavailable device.
std::unique_ptr<SegmentationBackend> build_backend(const ModelConfig& cfg,
                                                   std::shared_ptr<ModelRunner> runner = nullptr);

/// Slice conditioning: [p1, p99] window to 0..255, bilinear resize to
/// size x size, grey replicated into three channels.
std::vector<std::uint8_t> prepare_frame(std::span<const float> slice, std::size_t height, std::size_t width,
                                        int size);

/// Nearest-neighbour resampling of a binary mask.
Mask2D resize_nearest(const Mask2D& mask, std::size_t height, std::size_t width);

}  // namespace sliceprop::medsam2
