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

#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sliceprop/app.hpp"
#include "sliceprop/error.hpp"
#include "sliceprop/fs.hpp"

namespace sliceprop::app {

using nlohmann::json;

namespace {

void apply_backend_keys(const json& j, BackendConfig& cfg) {
  if (j.contains("backend") && j["backend"].is_string()) cfg.backend = j["backend"].get<std::string>();
  if (j.contains("id")) cfg.backend = j["id"].get<std::string>();
  if (j.contains("device")) cfg.device = j["device"].get<std::string>();
  if (j.contains("checkpoint_path")) cfg.checkpoint_path = j["checkpoint_path"].get<std::string>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<int>();
}

AppConfig from_json(const json& j) {
  if (!j.is_object()) throw FormatError("config must be an object");
  AppConfig cfg;
  try {
    apply_backend_keys(j, cfg.backend);
    if (j.contains("backend") && j["backend"].is_object()) apply_backend_keys(j["backend"], cfg.backend);
    if (j.contains("n4")) {
      const json& n = j["n4"];
      if (n.contains("shrink_factor")) cfg.n4.shrink_factor = n["shrink_factor"].get<int>();
      if (n.contains("fitting_levels")) cfg.n4.fitting_levels = n["fitting_levels"].get<int>();
      if (n.contains("iterations")) {
        const json& it = n["iterations"];
        cfg.n4.iterations_per_level =
            it.is_array() ? it.get<std::vector<int>>() : std::vector<int>(static_cast<std::size_t>(cfg.n4.fitting_levels), it.get<int>());
      } else {
        cfg.n4.iterations_per_level.resize(static_cast<std::size_t>(cfg.n4.fitting_levels), 50);
      }
      if (n.contains("convergence_threshold")) cfg.n4.convergence_threshold = n["convergence_threshold"].get<double>();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid config: ") + e.what());
  }
  cfg.n4.validate();
  return cfg;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

json toml_value(const std::string& raw, int lineno) {
  const std::string v = trim(raw);
  auto bad = [&] { return FormatError("config line " + std::to_string(lineno) + ": cannot parse value '" + v + "'"); };
  if (v.empty()) throw bad();
  if (v.front() == '"' || v.front() == '\'') {
    if (v.size() < 2 || v.back() != v.front()) throw bad();
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[') {
    if (v.back() != ']') throw bad();
    json arr = json::array();
    std::stringstream ss(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!trim(item).empty()) arr.push_back(toml_value(item, lineno));
    return arr;
  }
  std::string num;
  for (char c : v)
    if (c != '_') num += c;
  try {
    std::size_t used = 0;
    if (num.find_first_of(".eE") == std::string::npos) {
      const long long n = std::stoll(num, &used);
      if (used == num.size()) return n;
    } else {
      const double d = std::stod(num, &used);
      if (used == num.size()) return d;
    }
  } catch (const std::exception&) {
  }
  throw bad();
}

}  // namespace

AppConfig parse_config_json(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw FormatError("config is not valid JSON");
  return from_json(j);
}

AppConfig parse_config_toml(const std::string& text) {
  json root = json::object();
  json* table = &root;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError("config line " + std::to_string(lineno) + ": bad table header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty() || name.find('.') != std::string::npos) {
        throw FormatError("config line " + std::to_string(lineno) + ": unsupported table '" + name + "'");
      }
      table = &root[name];
      if (table->is_null()) *table = json::object();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    (*table)[key] = toml_value(line.substr(eq + 1), lineno);
  }
  return from_json(root);
}

AppConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".json") return parse_config_json(text);
  if (path.extension() == ".toml") return parse_config_toml(text);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_config_json(text);
  return parse_config_toml(text);
}

}  // namespace sliceprop::app
