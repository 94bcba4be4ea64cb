// Copyright 2026 The slotgrpo Authors.
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

// Binary policy checkpoint:
//   8 bytes   "SGCKPT01" (version header)
//   int32 x5  mode, think slots, think vocab, structures, answers
//   int64     feature dimension F
//   uint8     role
//   float64[] every slot matrix, row-major, slot order
// All integers and doubles little-endian. Round-trips bit-exactly.

#include <filesystem>
#include <string>

#include "slotgrpo/policy.hpp"

namespace slotgrpo {

inline constexpr char kCheckpointMagic[9] = "SGCKPT01";

std::string serialize_checkpoint(const Policy& policy);
Policy deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Policy& policy);
Policy load_checkpoint(const std::filesystem::path& path);

}  // namespace slotgrpo
