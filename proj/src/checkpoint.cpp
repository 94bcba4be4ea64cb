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

#include "slotgrpo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace slotgrpo {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size())
      throw ValidationError("checkpoint truncated at byte " + std::to_string(pos_));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Policy& policy) {
  std::string out(kCheckpointMagic, 8);
  const auto& s = policy.schema();
  put<std::int32_t>(out, s.mode == Mode::Think ? 0 : 1);
  put<std::int32_t>(out, s.num_think_slots);
  put<std::int32_t>(out, s.think_vocab);
  put<std::int32_t>(out, s.num_structures);
  put<std::int32_t>(out, s.num_answers);
  put<std::int64_t>(out, policy.features());
  put<std::uint8_t>(out, static_cast<std::uint8_t>(policy.role()));
  for (const auto& m : policy.weights().slots)
    for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
  return out;
}

Policy deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 8, kCheckpointMagic) != 0)
    throw ValidationError("not a policy checkpoint (bad version header)");
  Reader in(bytes);
  in.get<std::uint64_t>();
  ResponseSchema s;
  const auto mode = in.get<std::int32_t>();
  if (mode != 0 && mode != 1) throw ValidationError("checkpoint: bad mode");
  s.mode = mode == 0 ? Mode::Think : Mode::NoThink;
  s.num_think_slots = in.get<std::int32_t>();
  s.think_vocab = in.get<std::int32_t>();
  s.num_structures = in.get<std::int32_t>();
  s.num_answers = in.get<std::int32_t>();
  s.validate();
  const auto features = in.get<std::int64_t>();
  if (features < 1) throw ValidationError("checkpoint: bad feature dimension");
  const auto role = in.get<std::uint8_t>();
  if (role > 2) throw ValidationError("checkpoint: bad role");
  auto weights = SlotTensors<double>::zeros(s, features);
  for (auto& m : weights.slots)
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in.get<double>();
  if (!in.at_end()) throw ValidationError("checkpoint: trailing bytes");
  return Policy(s, features, static_cast<Role>(role), std::move(weights));
}

void save_checkpoint(const std::filesystem::path& path, const Policy& policy) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  const std::string bytes = serialize_checkpoint(policy);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Policy load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace slotgrpo
