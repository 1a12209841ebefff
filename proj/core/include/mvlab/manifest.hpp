// Copyright 2026 mvlab contributors
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

#ifndef MVLAB_MANIFEST_HPP
#define MVLAB_MANIFEST_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mvlab {

inline constexpr const char* kArtifactVersion = "0.1.0";

// FNV-1a over the raw bytes, reported as 16 hex digits.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hash_hex(std::uint64_t h);

struct RunManifest {
  std::string config_hash;  // hash of the loaded config bytes
  std::uint64_t seed = 0;
  std::string artifact_version = kArtifactVersion;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;
};

std::string now_iso8601();

// Writes <dir>/manifest.json atomically (temp file + rename).
void write_manifest(const std::string& dir, const RunManifest& manifest);

}  // namespace mvlab

#endif  // MVLAB_MANIFEST_HPP
