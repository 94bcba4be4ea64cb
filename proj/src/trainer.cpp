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

#include "slotgrpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace slotgrpo {
namespace {

struct BatchCursor {
  BatchCursor(std::size_t n, std::uint64_t seed) : order(n), seed(seed) {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }

  // Indices of the next batch; reshuffles at every epoch boundary.
  std::vector<std::size_t> next(int batch) {
    if (pos == 0) {
      Rng rng = make_stream(seed, "epoch", {}, static_cast<std::uint64_t>(epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(batch));
    std::vector<std::size_t> out(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    pos = end;
    if (pos == order.size()) {
      pos = 0;
      ++epoch;
    }
    return out;
  }

  std::vector<std::size_t> order;
  std::uint64_t seed;
  std::size_t pos = 0;
  int epoch = 0;
};

void check_dataset(const SplitDataset& dataset, const GrpoConfig& cfg) {
  cfg.validate();
  if (dataset.train.empty()) throw ValidationError("training split is empty");
  const auto f = dataset.train.front().features.size();
  const int k = dataset.train.front().num_options();
  for (const auto& item : dataset.train) {
    if (item.features.size() != f)
      throw ValidationError("feature dimension mismatch in training split: " +
                            std::to_string(f) + " vs " +
                            std::to_string(item.features.size()) + " (item '" +
                            item.id + "')");
    if (item.num_options() != k)
      throw ValidationError("option count mismatch in training split: " +
                            std::to_string(k) + " vs " +
                            std::to_string(item.num_options()) + " (item '" +
                            item.id + "')");
  }
}

Policy initial_policy(const SplitDataset& dataset, const GrpoConfig& cfg) {
  const auto& first = dataset.train.front();
  return init_policy(cfg.schema(first.num_options()), first.features.size(),
                     cfg.seed, cfg.init_scale);
}

bool eval_due(int step, int total, const GrpoConfig& cfg) {
  return step + 1 == total || (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0);
}

}  // namespace

const char* to_string(TrainerKind kind) {
  return kind == TrainerKind::Grpo ? "grpo" : "sft";
}

TrainerKind parse_trainer(const std::string& text) {
  if (text == "grpo") return TrainerKind::Grpo;
  if (text == "sft") return TrainerKind::Sft;
  throw ValidationError("trainer: expected 'grpo' or 'sft', got '" + text + "'");
}

int planned_steps(std::size_t n_train, const GrpoConfig& cfg) {
  if (cfg.steps > 0) return cfg.steps;
  const auto per_epoch =
      (n_train + static_cast<std::size_t>(cfg.batch) - 1) / static_cast<std::size_t>(cfg.batch);
  return static_cast<int>(per_epoch) * cfg.epochs;
}

Response gold_response(const VqaItem& item, const ResponseSchema& schema) {
  Response r;
  r.structure_choice = 0;
  r.think_tokens.assign(static_cast<std::size_t>(schema.num_think_slots), 0);
  r.answer_choice = item.answer_index();
  r.text = render(r, schema);
  return r;
}

double sft_objective(const Policy& policy, std::span<const VqaItem> items,
                     double temperature) {
  double total = 0.0;
  for (const auto& item : items)
    total += response_log_prob(policy, gold_response(item, policy.schema()), item,
                               temperature);
  return total;
}

PolicyGradient sft_gradient(const Policy& policy, std::span<const VqaItem> items,
                            double temperature) {
  auto grad = policy.weights().zeros_like();
  for (const auto& item : items)
    accumulate_log_prob_gradient(policy, gold_response(item, policy.schema()), item,
                                 temperature, 1.0, grad);
  return grad;
}

double greedy_accuracy(const Policy& policy, std::span<const VqaItem> items) {
  if (items.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& item : items)
    if (greedy_decode(policy, item).answer_letter() == item.answer) ++correct;
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

double greedy_format_rate(const Policy& policy, std::span<const VqaItem> items) {
  if (items.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& item : items)
    ok += static_cast<std::size_t>(
        format_reward(greedy_decode(policy, item).text, policy.schema().mode));
  return static_cast<double>(ok) / static_cast<double>(items.size());
}

TrainResult train_grpo(const SplitDataset& dataset, const GrpoConfig& cfg) {
  check_dataset(dataset, cfg);
  Policy policy = initial_policy(dataset, cfg);
  const Policy reference = policy.with_role(Role::Reference);
  const int total = planned_steps(dataset.train.size(), cfg);
  BatchCursor cursor(dataset.train.size(), cfg.seed);
  TrainLog log;
  log.reserve(static_cast<std::size_t>(total));

  for (int step = 0; step < total; ++step) {
    const Policy old = policy.with_role(Role::OldSnapshot);
    std::vector<Group> groups;
    for (std::size_t idx : cursor.next(cfg.batch)) {
      const VqaItem& item = dataset.train[idx];
      Rng rng = make_stream(cfg.seed, "rollout", item.id,
                            static_cast<std::uint64_t>(step));
      groups.push_back(sample_group(old, item, cfg, rng));
    }

    TrainRecord rec;
    rec.iteration = step;
    std::size_t samples = 0;
    for (const auto& g : groups) {
      for (std::size_t i = 0; i < g.responses.size(); ++i) {
        rec.mean_reward += g.rewards[i];
        rec.format_rate += g.breakdowns[i].format;
        rec.mean_abs_advantage += std::abs(g.advantages[i]);
        ++samples;
      }
    }
    rec.mean_reward /= static_cast<double>(samples);
    rec.format_rate /= static_cast<double>(samples);
    rec.mean_abs_advantage /= static_cast<double>(samples);

    const auto stats = grpo_objective_stats(policy, old, reference,
                                            std::span<const Group>(groups), cfg);
    rec.objective = stats.objective;
    rec.mean_kl = stats.mean_kl;
    rec.clip_fraction = stats.clip_fraction;
    rec.clamp_events = stats.clamp_events;

    const auto grad = grpo_gradient(policy, old, reference,
                                    std::span<const Group>(groups), cfg);
    policy.mutable_weights().axpy(cfg.lr, grad);

    if (eval_due(step, total, cfg))
      rec.train_accuracy = greedy_accuracy(policy, dataset.train);
    log.push_back(rec);
  }
  return {std::move(policy), reference, std::move(log)};
}

TrainResult train_sft(const SplitDataset& dataset, const GrpoConfig& cfg) {
  check_dataset(dataset, cfg);
  Policy policy = initial_policy(dataset, cfg);
  const Policy reference = policy.with_role(Role::Reference);
  const int total = planned_steps(dataset.train.size(), cfg);
  BatchCursor cursor(dataset.train.size(), cfg.seed);
  TrainLog log;
  log.reserve(static_cast<std::size_t>(total));
  const Mode mode = policy.schema().mode;

  for (int step = 0; step < total; ++step) {
    std::vector<VqaItem> batch;
    for (std::size_t idx : cursor.next(cfg.batch)) batch.push_back(dataset.train[idx]);

    // No rollouts in SFT: reward and format columns describe the greedy
    // response before the update, the objective is the mean gold log-likelihood.
    TrainRecord rec;
    rec.iteration = step;
    for (const auto& item : batch) {
      const auto greedy = greedy_decode(policy, item);
      const auto b = total_reward(greedy.text, item.answer, mode, cfg.reward_weights);
      rec.mean_reward += b.total;
      rec.format_rate += b.format;
      const auto gold = gold_response(item, policy.schema());
      rec.mean_kl += kl_estimate(response_log_prob(policy, gold, item, cfg.temperature),
                                 response_log_prob(reference, gold, item, cfg.temperature),
                                 &rec.clamp_events);
    }
    const auto n = static_cast<double>(batch.size());
    rec.mean_reward /= n;
    rec.format_rate /= n;
    rec.mean_kl /= n;
    rec.objective = sft_objective(policy, batch, cfg.temperature) / n;

    policy.mutable_weights().axpy(cfg.lr / n, sft_gradient(policy, batch, cfg.temperature));

    if (eval_due(step, total, cfg))
      rec.train_accuracy = greedy_accuracy(policy, dataset.train);
    log.push_back(rec);
  }
  return {std::move(policy), reference, std::move(log)};
}

TrainResult train(TrainerKind kind, const SplitDataset& dataset,
                  const GrpoConfig& cfg) {
  return kind == TrainerKind::Grpo ? train_grpo(dataset, cfg) : train_sft(dataset, cfg);
}

std::string to_json_line(const TrainRecord& record) {
  nlohmann::ordered_json j;
  j["iteration"] = record.iteration;
  j["mean_reward"] = record.mean_reward;
  j["format_rate"] = record.format_rate;
  j["mean_abs_advantage"] = record.mean_abs_advantage;
  j["objective"] = record.objective;
  j["mean_kl"] = record.mean_kl;
  j["clip_fraction"] = record.clip_fraction;
  j["clamp_events"] = record.clamp_events;
  if (record.train_accuracy)
    j["train_accuracy"] = *record.train_accuracy;
  else
    j["train_accuracy"] = nullptr;
  return j.dump();
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write train log '" + path.string() + "'");
  for (const auto& rec : log) out << to_json_line(rec) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace slotgrpo
