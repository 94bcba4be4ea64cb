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

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "slotgrpo/grpo.hpp"

using namespace slotgrpo;
using slotgrpo::testing::central_difference;
using slotgrpo::testing::random_item;
using slotgrpo::testing::random_policy;
using slotgrpo::testing::relative_error;

namespace {

struct Instance {
  std::vector<VqaItem> items;
  Policy current, old, ref;
  std::vector<Group> groups;
  GrpoConfig cfg;
};

// new = old + perturbation so some ratios leave the clip band.
Instance random_instance(Rng& rng, int trial) {
  GrpoConfig cfg;
  cfg.mode = trial % 4 == 3 ? Mode::NoThink : Mode::Think;
  cfg.group_size = 2 + trial % 4;
  cfg.temperature = 0.4 + 0.15 * (trial % 5);
  cfg.kl_beta = trial % 3 == 0 ? 0.0 : 0.04 * (trial % 7);
  cfg.clip_eps = 0.1 + 0.05 * (trial % 3);
  const auto schema = cfg.schema(2 + trial % 3);
  const Eigen::Index f = 3 + trial % 3;
  auto old = random_policy(schema, f, Role::OldSnapshot, rng, 0.7);
  auto cur = old.with_role(Role::New);
  std::normal_distribution<double> noise(0.0, 0.02 + 0.1 * (trial % 4));
  for (auto& m : cur.mutable_weights().slots)
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += noise(rng);
  auto ref = random_policy(schema, f, Role::Reference, rng, 0.7);
  Instance inst{{}, std::move(cur), std::move(old), std::move(ref), {}, cfg};
  const int n_groups = 1 + trial % 3;
  for (int g = 0; g < n_groups; ++g)
    inst.items.push_back(random_item(f, schema.num_answers, rng, "q" + std::to_string(g)));
  for (const auto& item : inst.items) inst.groups.push_back(sample_group(inst.old, item, cfg, rng));
  return inst;
}

}  // namespace

TEST_CASE("group_advantages") {
  SUBCASE("[1,1,0,0]") {
    const std::vector<double> r = {1, 1, 0, 0};
    const auto a = group_advantages<double>(r, 1e-4);
    // mean 0.5, population std 0.5
    const double oracle = 0.5 / (0.5 + 1e-4);
    CHECK(a[0] == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(a[2] == doctest::Approx(-oracle).epsilon(1e-12));
    CHECK(std::abs(a[0] - 0.99980) < 1e-5);
  }
  SUBCASE("zero variance") {
    const std::vector<double> r = {2, 2, 2, 2};
    for (double eps : {1e-4, 0.0})
      for (double a : group_advantages<double>(r, eps)) CHECK(a == 0.0);
    // constants whose summed mean rounds away from the constant
    for (double c : {0.1, -1.2345678901, 3.3333333333333})
      for (std::size_t n : {3u, 7u, 11u})
        for (double a : group_advantages<double>(std::vector<double>(n, c), 1e-4))
          CHECK(a == 0.0);
  }
  SUBCASE("[2,0] without the floor") {
    const std::vector<double> r = {2, 0};
    const auto a = group_advantages<double>(r, 0.0);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == -1.0);
  }
  SUBCASE("too short") {
    const std::vector<double> r = {1};
    CHECK_THROWS_AS(group_advantages<double>(r, 1e-4), ValidationError);
  }
  SUBCASE("zero mean, unit std when the spread dominates the floor") {
    Rng rng(8);
    std::uniform_int_distribution<int> reward(0, 2);
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<double> r(2 + trial % 7);
      for (auto& x : r) x = reward(rng);
      const auto a = group_advantages<double>(r, 1e-4);
      double mean = 0, var = 0, rmean = 0, rvar = 0;
      for (double x : a) mean += x;
      mean /= a.size();
      CHECK(std::abs(mean) < 1e-9);
      for (double x : r) rmean += x;
      rmean /= r.size();
      for (double x : r) rvar += (x - rmean) * (x - rmean);
      if (std::sqrt(rvar / r.size()) > 10 * 1e-4) {
        for (double x : a) var += (x - mean) * (x - mean);
        CHECK(std::abs(std::sqrt(var / a.size()) - 1.0) < 0.02);
      }
    }
  }
}

TEST_CASE("kl_estimate") {
  CHECK(kl_estimate(-3.2, -3.2) == 0.0);
  // r = 2 and r = 0.5, evaluated as r - ln r - 1
  CHECK(kl_estimate(0.0, std::log(2.0)) == doctest::Approx(2.0 - std::log(2.0) - 1.0).epsilon(1e-12));
  CHECK(std::abs(kl_estimate(0.0, std::log(2.0)) - 0.306853) < 1e-6);
  CHECK(std::abs(kl_estimate(0.0, std::log(0.5)) - 0.193147) < 1e-6);

  Rng rng(13);
  std::normal_distribution<double> lp(-5.0, 4.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = lp(rng), b = lp(rng);
    CHECK(kl_estimate(a, b) >= -1e-12);
    CHECK(kl_estimate(a, b) > 0.0);
  }

  int clamped = 0;
  const double big = kl_estimate(-500.0, 0.0, &clamped);
  CHECK(clamped == 1);
  CHECK(std::isfinite(big));
  CHECK(big == doctest::Approx(std::exp(60.0) - 61.0));
}

TEST_CASE("clipped_term") {
  CHECK(clipped_term(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_term(1.5, -1.0, 0.2) == doctest::Approx(-1.5));
  CHECK(clipped_term(0.5, 1.0, 0.2) == doctest::Approx(0.5));
  CHECK(clipped_term(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  for (double a : {-2.0, -0.3, 0.0, 0.7, 3.0}) CHECK(clipped_term(1.0, a, 0.2) == a);
  Rng rng(2);
  std::uniform_real_distribution<double> ratio(0.01, 5.0), adv(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double r = ratio(rng), a = adv(rng);
    CHECK(clipped_term(r, a, 0.2) <= r * a);
  }
}

TEST_CASE("sample_group") {
  Rng rng(21);
  GrpoConfig cfg;
  const auto schema = cfg.schema(4);
  const auto item = random_item(5, 4, rng);
  const auto old = random_policy(schema, 5, Role::OldSnapshot, rng, 0.5);

  CHECK(cfg.group_size == 4);
  CHECK(cfg.temperature == 0.7);
  Rng a(5), b(5);
  const auto ga = sample_group(old, item, cfg, a);
  const auto gb = sample_group(old, item, cfg, b);
  REQUIRE(ga.responses.size() == 4);
  CHECK(ga.rewards == gb.rewards);
  CHECK(ga.advantages == gb.advantages);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ga.responses[i].text == gb.responses[i].text);
    CHECK(ga.rewards[i] == total_reward(ga.responses[i].text, item.answer, cfg.mode).total);
  }

  std::vector<Response> same(4, ga.responses[0]);
  const auto flat = make_group(item, same, schema, cfg);
  for (double adv : flat.advantages) CHECK(adv == 0.0);
}

TEST_CASE("grpo_objective identities") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng, trial);
    const auto same_new = inst.old.with_role(Role::New);
    const auto same_ref = inst.old.with_role(Role::Reference);
    CHECK(std::abs(grpo_objective(same_new, inst.old, same_ref,
                                  std::span<const Group>(inst.groups), inst.cfg)) < 1e-10);

    const auto stats = grpo_objective_stats(inst.current, inst.old, inst.ref,
                                            std::span<const Group>(inst.groups), inst.cfg);
    CHECK(stats.objective <= stats.unclipped_surrogate + 1e-15);

    auto cfg0 = inst.cfg;
    cfg0.kl_beta = 0.0;
    auto zeroed = inst.groups;
    for (auto& g : zeroed) std::fill(g.advantages.begin(), g.advantages.end(), 0.0);
    CHECK(grpo_objective(inst.current, inst.old, inst.ref, std::span<const Group>(zeroed), cfg0) == 0.0);
    const auto zero_grad =
        grpo_gradient(inst.current, inst.old, inst.ref, std::span<const Group>(zeroed), cfg0);
    CHECK(zero_grad.squared_norm() == 0.0);
  }
}

TEST_CASE("grpo_gradient matches central differences") {
  Rng rng(99);
  int clipped_instances = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng, trial);
    const std::span<const Group> groups(inst.groups);
    const auto analytic = grpo_gradient(inst.current, inst.old, inst.ref, groups, inst.cfg);
    const auto numeric = central_difference(inst.current, [&](const Policy& p) {
      return grpo_objective(p, inst.old, inst.ref, groups, inst.cfg);
    });
    INFO("trial " << trial);
    CHECK(relative_error(analytic, numeric) < 1e-5);
    if (grpo_objective_stats(inst.current, inst.old, inst.ref, groups, inst.cfg).clip_fraction > 0)
      ++clipped_instances;
  }
  // the instance mix must exercise the clipped branch
  CHECK(clipped_instances > 10);
}

TEST_CASE("KL gradient vanishes at the reference") {
  Rng rng(5);
  auto inst = random_instance(rng, 1);
  const auto ref = inst.current.with_role(Role::Reference);
  const std::span<const Group> groups(inst.groups);
  auto no_kl = inst.cfg;
  no_kl.kl_beta = 0.0;
  auto strong_kl = inst.cfg;
  strong_kl.kl_beta = 0.9;
  const auto a = grpo_gradient(inst.current, inst.old, ref, groups, no_kl);
  const auto b = grpo_gradient(inst.current, inst.old, ref, groups, strong_kl);
  CHECK(relative_error(a, b) == 0.0);
}

TEST_CASE("roles are enforced") {
  Rng rng(6);
  auto inst = random_instance(rng, 2);
  const std::span<const Group> groups(inst.groups);
  CHECK_THROWS_AS(grpo_objective(inst.old, inst.old, inst.ref, groups, inst.cfg), std::logic_error);
  CHECK_THROWS_AS(grpo_gradient(inst.current, inst.old, inst.current, groups, inst.cfg),
                  std::logic_error);
}

TEST_CASE("objective is generic over the scalar type") {
  Rng rng(8);
  auto inst = random_instance(rng, 5);
  auto widen = [](const Policy& p) {
    SlotTensors<long double> w;
    for (const auto& m : p.weights().slots) w.slots.push_back(m.cast<long double>());
    return PolicyParams<long double>(p.schema(), p.features(), p.role(), std::move(w));
  };
  const std::span<const Group> groups(inst.groups);
  const long double wide = grpo_objective(widen(inst.current), widen(inst.old), widen(inst.ref),
                                          groups, inst.cfg);
  const double narrow = grpo_objective(inst.current, inst.old, inst.ref, groups, inst.cfg);
  CHECK(std::abs(static_cast<double>(wide) - narrow) < 1e-12);
}

TEST_CASE("config validation") {
  GrpoConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.group_size = 1;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("group_size"), ValidationError);
  cfg = {};
  cfg.clip_eps = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.kl_beta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
