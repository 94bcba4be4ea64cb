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

// Flat `key = value` run configuration shared by every CLI subcommand.

#include <filesystem>
#include <string>
#include <vector>

#include "slotgrpo/grpo.hpp"
#include "slotgrpo/task_forge.hpp"
#include "slotgrpo/trainer.hpp"

namespace slotgrpo {

struct RunConfig {
  std::string command;
  SuiteSpec suite;
  GrpoConfig grpo;
  std::string trainer = "grpo";
  std::string compare;          // e.g. "grpo,sft" for matrix
  std::string group_by = "domain";
  std::string data;
  std::string test_data;
  std::string checkpoint;
  std::string log;
  std::string out = ".";
  int jobs = 1;
  bool per_domain = false;

  /// Throws ValidationError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  static const std::vector<std::string>& keys();

  /// All keys, sorted, one `key = value` per line.
  std::string to_text() const;

  /// Applies every assignment in `text` on top of the current values.
  void merge_text(const std::string& text);
  void merge_file(const std::filesystem::path& path);
};

}  // namespace slotgrpo
