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

// Synthetic multi-domain multiple-choice suites, JSONL ingestion, 80/20 split.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace slotgrpo {

inline constexpr int kMaxOptions = 4;

/// Letter for option index 0..3.
inline char option_letter(int index) { return static_cast<char>('A' + index); }

struct VqaItem {
  std::string id;
  std::string domain;
  std::string task_type;
  Eigen::VectorXd features;
  std::string question;
  std::map<char, std::string> options;  // letter -> text, A.. contiguous
  char answer = 'A';

  int num_options() const { return static_cast<int>(options.size()); }
  int answer_index() const { return answer - 'A'; }
};

/// Throws ValidationError naming the item id on any invariant violation.
void validate_item(const VqaItem& item);

enum class SuiteAxis { Modality, Task };

struct SuiteSpec {
  std::uint64_t seed = 0;
  int num_domains = 8;
  int items_per_domain = 500;
  int features = 16;
  int options = 4;
  double alpha = 0.8;  // 0: one shared rule, 1: independent per-domain rules
  SuiteAxis axis = SuiteAxis::Modality;
};

/// Throws ValidationError naming the offending field.
void validate(const SuiteSpec& spec);

using DomainItems = std::pair<std::string, std::vector<VqaItem>>;
/// Domains in generation order.
using DomainSuite = std::vector<DomainItems>;

/// Default label of domain index d along the given axis.
std::string domain_label(SuiteAxis axis, int d);

/// The K x F answer rule of domain d: (1 - alpha) S + alpha D_d.
Eigen::MatrixXd domain_rule(const SuiteSpec& spec, int d);

/// Index of the largest score; ties go to the lower index.
int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& scores);

DomainSuite generate_suite(const SuiteSpec& spec);

struct SplitDataset {
  std::vector<VqaItem> train;
  std::vector<VqaItem> test;
  double ratio = 0.8;
};

/// Seeded shuffle, first round(0.8 N) to train. Requires N >= 5.
SplitDataset split_80_20(std::span<const VqaItem> items, std::uint64_t seed);

// JSONL: one record per line with keys id, domain, task_type, features,
// question, options, answer.
std::vector<VqaItem> load_dataset(const std::filesystem::path& path);
std::vector<VqaItem> parse_dataset(const std::string& text);
std::string to_jsonl_line(const VqaItem& item);
void write_dataset(const std::filesystem::path& path,
                   std::span<const VqaItem> items);

}  // namespace slotgrpo
