/**
 * Copyright 2026 The comix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <comix/trainer.hpp>
#include <comix/video.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace comix {

struct RunConfig {
  GenConfig gen;
  TrainConfig train;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line) : std::runtime_error(what), line(line) {}
  int line = 0;  // 0 when the error is not tied to a line
};

/// Flat `key = value` text; `#` starts a comment. Missing keys keep their
/// defaults. `seed` sets both the generator and the trainer seed.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

/// Every key with its current value, in the same format parse_config reads.
std::string to_config_text(const RunConfig& cfg);

}  // namespace comix
