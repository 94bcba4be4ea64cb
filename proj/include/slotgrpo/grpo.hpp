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

// Group-relative policy optimization: group sampling, normalized advantages,
// the clipped ratio surrogate with a KL penalty against a frozen reference,
// and its exact gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "slotgrpo/policy.hpp"
#include "slotgrpo/reward.hpp"

namespace slotgrpo {

/// Log-ratios are clamped to this before exponentiation.
inline constexpr double kMaxExponent = 60.0;

struct GrpoConfig {
  int group_size = 4;
  double temperature = 0.7;
  double clip_eps = 0.2;
  double kl_beta = 0.04;
  double std_eps = 1e-4;
  double lr = 0.05;
  int epochs = 1;
  int steps = 0;  // > 0: stop after exactly this many updates, cycling epochs
  int batch = 4;
  Mode mode = Mode::Think;
  std::uint64_t seed = 0;

  // policy shape and initialization
  int think_slots = 2;
  int think_vocab = 8;
  int structures = 4;
  double init_scale = 0.1;

  RewardWeights reward_weights;
  int eval_every = 25;  // greedy train accuracy cadence in the log; 0 = final only

  void validate() const;
  ResponseSchema schema(int num_answers) const;
};

struct Group {
  std::reference_wrapper<const VqaItem> item;
  std::vector<Response> responses;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

/// A_i = (r_i - mean) / (population std + std_eps).
template <typename Scalar = double>
std::vector<Scalar> group_advantages(std::span<const Scalar> rewards,
                                     Scalar std_eps) {
  if (rewards.size() < 2)
    throw ValidationError("group_advantages: need at least 2 rewards");
  // A constant group has zero advantages; its float mean may be an ulp off.
  if (std::all_of(rewards.begin(), rewards.end(),
                  [&](Scalar r) { return r == rewards.front(); }))
    return std::vector<Scalar>(rewards.size(), Scalar(0));
  const auto n = static_cast<Scalar>(rewards.size());
  Scalar mean(0);
  for (Scalar r : rewards) mean += r;
  mean /= n;
  Scalar var(0);
  for (Scalar r : rewards) var += (r - mean) * (r - mean);
  const Scalar denom = std::sqrt(var / n) + std_eps;
  std::vector<Scalar> out;
  out.reserve(rewards.size());
  for (Scalar r : rewards) {
    out.push_back(r == mean ? Scalar(0) : (r - mean) / denom);
  }
  return out;
}

/// exp(min(x, kMaxExponent)); bumps *clamped when the cap is hit.
template <typename Scalar>
Scalar clamped_exp(Scalar x, int* clamped = nullptr) {
  if (x > Scalar(kMaxExponent)) {
    if (clamped) ++*clamped;
    x = Scalar(kMaxExponent);
  }
  return std::exp(x);
}

/// Per-sample sequence-level KL estimator r - ln r - 1, r = pi_ref / pi_new.
template <typename Scalar>
Scalar kl_estimate(Scalar logp_new, Scalar logp_ref, int* clamped = nullptr) {
  Scalar log_r = logp_ref - logp_new;
  if (log_r > Scalar(kMaxExponent)) {
    if (clamped) ++*clamped;
    log_r = Scalar(kMaxExponent);
  }
  return std::exp(log_r) - log_r - Scalar(1);
}

/// min(ratio A, clip(ratio, 1 - eps, 1 + eps) A).
template <typename Scalar>
Scalar clipped_term(Scalar ratio, Scalar advantage, Scalar clip_eps) {
  const Scalar clipped = std::clamp(ratio, Scalar(1) - clip_eps, Scalar(1) + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

/// G responses from the OldSnapshot policy with rewards and advantages.
Group sample_group(const Policy& policy_old, const VqaItem& item,
                   const GrpoConfig& cfg, Rng& rng);

/// Builds a group around given responses (rewards/advantages recomputed).
Group make_group(const VqaItem& item, std::vector<Response> responses,
                 const ResponseSchema& schema, const GrpoConfig& cfg);

struct ObjectiveStats {
  double objective = 0.0;
  double unclipped_surrogate = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  int clamp_events = 0;
};

namespace detail {

template <typename Scalar>
void check_roles(const PolicyParams<Scalar>& current,
                 const PolicyParams<Scalar>& old,
                 const PolicyParams<Scalar>& ref) {
  if (current.role() != Role::New || old.role() != Role::OldSnapshot ||
      ref.role() != Role::Reference)
    throw std::logic_error("grpo: expected roles (New, OldSnapshot, Reference)");
  if (!(current.schema() == old.schema()) || !(current.schema() == ref.schema()) ||
      current.features() != old.features() || current.features() != ref.features())
    throw ValidationError("grpo: policies disagree on schema or feature dimension");
}

// Visits every sample with its terms; `visit(group, i, logp_new, ratio, kl, r,
// unclipped_active)`.
template <typename Scalar, typename Visit>
void for_each_sample(const PolicyParams<Scalar>& current,
                     const PolicyParams<Scalar>& old,
                     const PolicyParams<Scalar>& ref,
                     std::span<const Group> groups, double temperature,
                     double clip_eps, int* clamped, Visit&& visit) {
  for (const Group& g : groups) {
    const VqaItem& item = g.item.get();
    for (std::size_t i = 0; i < g.responses.size(); ++i) {
      const Response& o = g.responses[i];
      const Scalar lp_new = response_log_prob(current, o, item, temperature);
      const Scalar lp_old = response_log_prob(old, o, item, temperature);
      const Scalar lp_ref = response_log_prob(ref, o, item, temperature);
      const Scalar ratio = clamped_exp(lp_new - lp_old, clamped);
      const Scalar kl = kl_estimate(lp_new, lp_ref, clamped);
      const Scalar r = clamped_exp(lp_ref - lp_new);
      const auto adv = static_cast<Scalar>(g.advantages[i]);
      const Scalar eps = static_cast<Scalar>(clip_eps);
      const Scalar clipped =
          std::clamp(ratio, Scalar(1) - eps, Scalar(1) + eps) * adv;
      // ties resolve to the unclipped branch
      const bool unclipped_active = ratio * adv <= clipped;
      visit(g, i, ratio, adv, kl, r, unclipped_active);
    }
  }
}

}  // namespace detail

/// Mean over groups of (1/G) sum_i [clipped_term - beta * kl_estimate].
template <typename Scalar>
ObjectiveStats grpo_objective_stats(const PolicyParams<Scalar>& current,
                                    const PolicyParams<Scalar>& old,
                                    const PolicyParams<Scalar>& ref,
                                    std::span<const Group> groups,
                                    const GrpoConfig& cfg) {
  detail::check_roles(current, old, ref);
  if (groups.empty()) throw ValidationError("grpo_objective: no groups");
  ObjectiveStats stats;
  Scalar objective(0), surrogate(0), kl_sum(0);
  std::size_t samples = 0, clipped_samples = 0;
  const auto eps = static_cast<Scalar>(cfg.clip_eps);
  const auto beta = static_cast<Scalar>(cfg.kl_beta);
  detail::for_each_sample(
      current, old, ref, groups, cfg.temperature, cfg.clip_eps,
      &stats.clamp_events,
      [&](const Group& g, std::size_t, Scalar ratio, Scalar adv, Scalar kl,
          Scalar, bool unclipped_active) {
        const auto weight = Scalar(1) / static_cast<Scalar>(g.responses.size());
        objective += weight * (clipped_term(ratio, adv, eps) - beta * kl);
        surrogate += weight * (ratio * adv - beta * kl);
        kl_sum += kl;
        ++samples;
        if (!unclipped_active) ++clipped_samples;
      });
  const auto n_groups = static_cast<Scalar>(groups.size());
  stats.objective = static_cast<double>(objective / n_groups);
  stats.unclipped_surrogate = static_cast<double>(surrogate / n_groups);
  stats.mean_kl = static_cast<double>(kl_sum / static_cast<Scalar>(samples));
  stats.clip_fraction = static_cast<double>(clipped_samples) / static_cast<double>(samples);
  return stats;
}

template <typename Scalar>
Scalar grpo_objective(const PolicyParams<Scalar>& current,
                      const PolicyParams<Scalar>& old,
                      const PolicyParams<Scalar>& ref,
                      std::span<const Group> groups, const GrpoConfig& cfg) {
  return static_cast<Scalar>(grpo_objective_stats(current, old, ref, groups, cfg).objective);
}

/// Exact gradient of grpo_objective w.r.t. the New parameters. Per sample the
/// coefficient on grad log pi_new is ratio * A where the unclipped branch is
/// active (0 otherwise) minus beta * (1 - pi_ref / pi_new).
template <typename Scalar>
SlotTensors<Scalar> grpo_gradient(const PolicyParams<Scalar>& current,
                                  const PolicyParams<Scalar>& old,
                                  const PolicyParams<Scalar>& ref,
                                  std::span<const Group> groups,
                                  const GrpoConfig& cfg) {
  detail::check_roles(current, old, ref);
  if (groups.empty()) throw ValidationError("grpo_gradient: no groups");
  auto grad = current.weights().zeros_like();
  const auto beta = static_cast<Scalar>(cfg.kl_beta);
  const auto n_groups = static_cast<Scalar>(groups.size());
  detail::for_each_sample(
      current, old, ref, groups, cfg.temperature, cfg.clip_eps, nullptr,
      [&](const Group& g, std::size_t i, Scalar ratio, Scalar adv, Scalar,
          Scalar r, bool unclipped_active) {
        const Scalar policy_part = unclipped_active ? ratio * adv : Scalar(0);
        const Scalar coeff = (policy_part - beta * (Scalar(1) - r)) /
                             (static_cast<Scalar>(g.responses.size()) * n_groups);
        if (coeff != Scalar(0))
          accumulate_log_prob_gradient(current, g.responses[i], g.item.get(),
                                       cfg.temperature, coeff, grad);
      });
  return grad;
}

}  // namespace slotgrpo
