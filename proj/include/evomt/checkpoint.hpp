// Copyright 2026 The evomt Authors.
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
#include <string>
#include <vector>

#include "evomt/evolution.hpp"

namespace evomt {

inline constexpr int kCheckpointVersion = 1;

/// A checkpoint directory holds `manifest.json` (UTF-8, version field first
/// checked on load) and `blocks/<id>.bin` per layer block: a little-endian
/// u64 element count n, n float32 parameters, n float32 momentum values.
void save_checkpoint(const RunState& run, const std::filesystem::path& dir);
RunState load_checkpoint(const std::filesystem::path& dir);

std::string manifest_text(const RunState& run);
std::vector<std::uint8_t> encode_block(const LayerBlock& block);

/// FNV-1a over the manifest text and every encoded block in id order; equal
/// digests mean byte-identical checkpoint directories.
std::uint64_t run_digest(const RunState& run);
std::string digest_hex(std::uint64_t digest);

/// Digest of a file's bytes (used for segment-file identity).
std::string file_digest(const std::filesystem::path& path);

}  // namespace evomt
