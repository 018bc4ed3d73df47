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
#include <string>
#include <string_view>

namespace sliceprop {

/// Writes `bytes` to `target` through a sibling temp file and rename(2), so
/// readers only ever observe the old or the new content.
void write_file_atomic(const std::filesystem::path& target, std::string_view bytes);

/// Generalized form: `writer` fills the temp path, then it is renamed onto
/// `target`. The temp file is removed if `writer` throws.
void write_atomic_with(const std::filesystem::path& target,
                       const std::function<void(const std::filesystem::path&)>& writer);

std::string read_file(const std::filesystem::path& path);

/// UTC wall clock as ISO-8601 with millisecond precision, e.g. 2026-01-02T03:04:05.678Z.
std::string utc_timestamp_now();

}  // namespace sliceprop
