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

#include "dexter/persistence.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "dexter/errors.hpp"

namespace dexter {

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json stamped(nlohmann::json body, std::string_view config_hash) {
  body["schema_version"] = kSchemaVersion;
  body["tool_version"] = kToolVersion;
  body["config_hash"] = config_hash;
  return body;
}

void check_schema(const nlohmann::json& doc, std::string_view what) {
  if (!doc.is_object() || !doc.contains("schema_version")) {
    throw DataError(std::string(what) + ": missing schema_version");
  }
  const int v = doc.at("schema_version").get<int>();
  if (v != kSchemaVersion) {
    throw IncompatibilityError(std::string(what) + ": schema_version " +
                               std::to_string(v) + ", expected " +
                               std::to_string(kSchemaVersion));
  }
}

std::string dump(const nlohmann::json& doc) { return doc.dump(); }

}  // namespace dexter
