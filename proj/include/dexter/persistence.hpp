/*
 * Copyright 2026 The DEXTER-OOD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace dexter {

inline constexpr std::string_view kToolVersion = "0.3.0";
inline constexpr int kSchemaVersion = 1;

// Writes to a sibling temp file, then renames over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Fills schema_version, tool_version and config_hash.
nlohmann::json stamped(nlohmann::json body, std::string_view config_hash);

// Refuses documents written by another schema.
void check_schema(const nlohmann::json& doc, std::string_view what);

// Stable text form for byte-level reproducibility.
std::string dump(const nlohmann::json& doc);

}  // namespace dexter
