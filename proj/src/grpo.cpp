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

#include "slotgrpo/grpo.hpp"

namespace slotgrpo {

void GrpoConfig::validate() const {
  if (group_size < 2) throw ValidationError("group_size: must be at least 2");
  if (!(temperature > 0.0)) throw ValidationError("temp: must be positive");
  if (!(clip_eps > 0.0 && clip_eps < 1.0))
    throw ValidationError("clip_eps: must be in (0, 1)");
  if (!(kl_beta >= 0.0)) throw ValidationError("kl_beta: must be non-negative");
  if (!(std_eps >= 0.0)) throw ValidationError("std_eps: must be non-negative");
  // lr = 0 is accepted so that a run can reproduce its initialization.
  if (!(lr >= 0.0)) throw ValidationError("lr: must be non-negative");
  if (epochs < 1) throw ValidationError("epochs: must be positive");
  if (steps < 0) throw ValidationError("steps: must be non-negative");
  if (batch < 1) throw ValidationError("batch: must be positive");
  if (!(init_scale >= 0.0)) throw ValidationError("init_scale: must be non-negative");
  if (eval_every < 0) throw ValidationError("eval_every: must be non-negative");
  schema(2).validate();
}

ResponseSchema GrpoConfig::schema(int num_answers) const {
  ResponseSchema s;
  s.mode = mode;
  s.num_think_slots = mode == Mode::NoThink ? 0 : think_slots;
  s.think_vocab = think_vocab;
  s.num_structures = structures;
  s.num_answers = num_answers;
  return s;
}

Group make_group(const VqaItem& item, std::vector<Response> responses,
                 const ResponseSchema& schema, const GrpoConfig& cfg) {
  Group g{std::cref(item), std::move(responses), {}, {}, {}};
  for (auto& o : g.responses) {
    if (o.text.empty()) o.text = render(o, schema);
    const auto b = total_reward(o.text, item.answer, schema.mode, cfg.reward_weights);
    g.breakdowns.push_back(b);
    g.rewards.push_back(b.total);
  }
  g.advantages = group_advantages<double>(g.rewards, cfg.std_eps);
  return g;
}

Group sample_group(const Policy& policy_old, const VqaItem& item,
                   const GrpoConfig& cfg, Rng& rng) {
  std::vector<Response> responses;
  responses.reserve(static_cast<std::size_t>(cfg.group_size));
  for (int i = 0; i < cfg.group_size; ++i)
    responses.push_back(sample_response(policy_old, item, cfg.temperature, rng));
  return make_group(item, std::move(responses), policy_old.schema(), cfg);
}

}  // namespace slotgrpo
