// Copyright 2026 The ttfuse Authors. All Rights Reserved.
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
#include <span>
#include <string>
#include <vector>

#include "ttfuse/network.hpp"

namespace ttfuse {

inline constexpr char kCheckpointMagic[5] = {'T', 'T', 'F', 'Z', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Layout (little-endian): magic "TTFZ1", u32 version, u32 tensor count, then
// per tensor u32 name length, name bytes, 4 x u32 shape, f64 payload; a
// trailing CRC-32 covers every preceding byte.
struct Checkpoint {
  std::vector<NamedTensor> tensors;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
// Errors: kTruncated, kBadMagic, kBadVersion, kBadChecksum, kCorrupt.
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const FusionNetwork& net);
// The network configuration is inferred from the tensor names. Either every
// parameter is restored or an Error(kCorrupt) is thrown.
FusionNetwork network_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace ttfuse
