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

// GRPO and SFT training loops.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slotgrpo/grpo.hpp"
#include "slotgrpo/task_forge.hpp"

namespace slotgrpo {

struct TrainRecord {
  int iteration = 0;
  double mean_reward = 0.0;
  double format_rate = 0.0;
  double mean_abs_advantage = 0.0;
  double objective = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  int clamp_events = 0;
  std::optional<double> train_accuracy;  // greedy, every eval_every steps and at the end
};

using TrainLog = std::vector<TrainRecord>;

struct TrainResult {
  Policy policy;
  Policy reference;  // the frozen copy of the initialization
  TrainLog log;
};

enum class TrainerKind { Grpo, Sft };
const char* to_string(TrainerKind kind);
TrainerKind parse_trainer(const std::string& text);

/// Number of updates a run performs on n_train items.
int planned_steps(std::size_t n_train, const GrpoConfig& cfg);

TrainResult train_grpo(const SplitDataset& dataset, const GrpoConfig& cfg);
TrainResult train_sft(const SplitDataset& dataset, const GrpoConfig& cfg);
TrainResult train(TrainerKind kind, const SplitDataset& dataset,
                  const GrpoConfig& cfg);

/// Well-formed structure, think tokens all 0, ground-truth answer.
Response gold_response(const VqaItem& item, const ResponseSchema& schema);

/// Summed gold log-likelihood over items and its gradient.
double sft_objective(const Policy& policy, std::span<const VqaItem> items,
                     double temperature);
PolicyGradient sft_gradient(const Policy& policy, std::span<const VqaItem> items,
                            double temperature);

/// Fraction of items whose greedy answer letter is correct / whose greedy
/// response passes the format rule.
double greedy_accuracy(const Policy& policy, std::span<const VqaItem> items);
double greedy_format_rate(const Policy& policy, std::span<const VqaItem> items);

std::string to_json_line(const TrainRecord& record);
void write_train_log(const std::filesystem::path& path, const TrainLog& log);

}  // namespace slotgrpo
