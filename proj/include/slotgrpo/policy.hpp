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

// Linear-softmax slot policy. A response is one choice per slot:
//   slot 0          structure template (0 = well formed, 1.. = malformed)
//   slots 1..k      think tokens (Think mode only)
//   slot k + 1      answer letter
// Slots are conditionally independent given the item, so sequence
// log-probabilities and their gradients are exact sums over slots.
//
// Each slot owns a rows x (F + 1) weight matrix acting on [features; 1];
// the last column is the bias.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "slotgrpo/errors.hpp"
#include "slotgrpo/rng.hpp"
#include "slotgrpo/task_forge.hpp"

namespace slotgrpo {

enum class Mode { Think, NoThink };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct ResponseSchema {
  Mode mode = Mode::Think;
  int num_think_slots = 2;
  int think_vocab = 8;
  int num_structures = 4;
  int num_answers = 4;

  void validate() const;

  int num_slots() const { return num_think_slots + 2; }
  int structure_slot() const { return 0; }
  int think_slot(int t) const { return 1 + t; }
  int answer_slot() const { return num_think_slots + 1; }
  int slot_size(int slot) const;

  /// Schema for a mode with the remaining knobs defaulted; NoThink has k = 0.
  static ResponseSchema for_mode(Mode mode, int num_answers);

  bool operator==(const ResponseSchema&) const = default;
};

/// Number of malformed templates available per mode.
int num_malformed_templates(Mode mode);

struct Response {
  int structure_choice = 0;
  std::vector<int> think_tokens;
  int answer_choice = 0;
  std::string text;
  double logp_old = 0.0;

  int choice(const ResponseSchema& schema, int slot) const {
    if (slot == schema.structure_slot()) return structure_choice;
    if (slot == schema.answer_slot()) return answer_choice;
    return think_tokens[static_cast<std::size_t>(slot - 1)];
  }
  char answer_letter() const { return option_letter(answer_choice); }
};

/// Text of a response: well-formed template for structure 0, otherwise one of
/// the fixed malformed variants.
std::string render(const Response& response, const ResponseSchema& schema);

/// Throws ValidationError if any slot choice is outside its range.
void check_response(const Response& response, const ResponseSchema& schema);

enum class Role : std::uint8_t { New = 0, OldSnapshot = 1, Reference = 2 };

template <typename Scalar>
using WeightMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ProbVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// One weight matrix per slot. Also the gradient type.
template <typename Scalar>
struct SlotTensors {
  std::vector<WeightMatrix<Scalar>> slots;

  static SlotTensors zeros(const ResponseSchema& schema, Eigen::Index features) {
    SlotTensors t;
    for (int s = 0; s < schema.num_slots(); ++s)
      t.slots.push_back(WeightMatrix<Scalar>::Zero(schema.slot_size(s), features + 1));
    return t;
  }

  SlotTensors zeros_like() const {
    SlotTensors t = *this;
    for (auto& m : t.slots) m.setZero();
    return t;
  }

  Eigen::Index size() const {
    Eigen::Index n = 0;
    for (const auto& m : slots) n += m.size();
    return n;
  }

  /// Flat row-major coefficient access across all slots.
  Scalar& coeff(Eigen::Index flat) {
    for (auto& m : slots) {
      if (flat < m.size()) return m.data()[flat];
      flat -= m.size();
    }
    throw std::out_of_range("SlotTensors::coeff");
  }
  Scalar coeff(Eigen::Index flat) const {
    return const_cast<SlotTensors*>(this)->coeff(flat);
  }

  /// this += scale * other
  void axpy(Scalar scale, const SlotTensors& other) {
    for (std::size_t s = 0; s < slots.size(); ++s) slots[s] += scale * other.slots[s];
  }

  Scalar squared_norm() const {
    Scalar acc(0);
    for (const auto& m : slots) acc += m.squaredNorm();
    return acc;
  }

  bool all_finite() const {
    for (const auto& m : slots)
      if (!m.allFinite()) return false;
    return true;
  }

  bool operator==(const SlotTensors& other) const {
    if (slots.size() != other.slots.size()) return false;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s].rows() != other.slots[s].rows() ||
          slots[s].cols() != other.slots[s].cols() || slots[s] != other.slots[s])
        return false;
    }
    return true;
  }
};

template <typename Scalar>
class PolicyParams {
 public:
  PolicyParams(ResponseSchema schema, Eigen::Index features, Role role,
               SlotTensors<Scalar> weights)
      : schema_(schema), features_(features), role_(role),
        weights_(std::move(weights)) {
    schema_.validate();
    if (static_cast<int>(weights_.slots.size()) != schema_.num_slots())
      throw ValidationError("PolicyParams: slot count does not match schema");
    for (int s = 0; s < schema_.num_slots(); ++s) {
      const auto& m = weights_.slots[static_cast<std::size_t>(s)];
      if (m.rows() != schema_.slot_size(s) || m.cols() != features_ + 1)
        throw ValidationError("PolicyParams: slot " + std::to_string(s) +
                              " has wrong shape");
    }
  }

  const ResponseSchema& schema() const { return schema_; }
  Eigen::Index features() const { return features_; }
  Role role() const { return role_; }
  const SlotTensors<Scalar>& weights() const { return weights_; }
  const WeightMatrix<Scalar>& slot(int s) const {
    return weights_.slots[static_cast<std::size_t>(s)];
  }

  /// Reference parameters are frozen; asking to mutate them throws.
  SlotTensors<Scalar>& mutable_weights() {
    if (role_ == Role::Reference)
      throw std::logic_error("reference policy parameters are frozen");
    return weights_;
  }

  PolicyParams with_role(Role role) const {
    PolicyParams copy = *this;
    copy.role_ = role;
    return copy;
  }

  bool operator==(const PolicyParams& other) const {
    return schema_ == other.schema_ && features_ == other.features_ &&
           role_ == other.role_ && weights_ == other.weights_;
  }

 private:
  ResponseSchema schema_;
  Eigen::Index features_;
  Role role_;
  SlotTensors<Scalar> weights_;
};

using Policy = PolicyParams<double>;
using PolicyGradient = SlotTensors<double>;

/// Entries iid normal(0, scale^2); scale 0 is the uniform policy. Role New.
template <typename Scalar = double>
PolicyParams<Scalar> init_policy(const ResponseSchema& schema,
                                 Eigen::Index features, std::uint64_t seed,
                                 double scale) {
  schema.validate();
  if (features < 1) throw ValidationError("init_policy: features must be positive");
  if (!(scale >= 0.0)) throw ValidationError("init_policy: scale must be >= 0");
  auto weights = SlotTensors<Scalar>::zeros(schema, features);
  Rng rng = make_stream(seed, "init-policy");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& m : weights.slots)
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<Scalar>(scale * normal(rng));
  return PolicyParams<Scalar>(schema, features, Role::New, std::move(weights));
}

namespace detail {

inline void check_temperature(double temperature) {
  if (!(temperature > 0.0))
    throw ValidationError("temperature must be positive, got " +
                          std::to_string(temperature));
}

template <typename Scalar>
void check_item(const PolicyParams<Scalar>& params, const VqaItem& item) {
  if (item.features.size() != params.features())
    throw ValidationError("feature dimension mismatch: policy F=" +
                          std::to_string(params.features()) + ", item '" +
                          item.id + "' F=" + std::to_string(item.features.size()));
}

template <typename Scalar>
void check_slot(const PolicyParams<Scalar>& params, int slot) {
  if (slot < 0 || slot >= params.schema().num_slots())
    throw ValidationError("slot index " + std::to_string(slot) + " out of range");
}

}  // namespace detail

/// Raw logits W [x; 1] of one slot (temperature not applied).
template <typename Scalar>
ProbVector<Scalar> slot_logits(const PolicyParams<Scalar>& params,
                               const VqaItem& item, int slot) {
  detail::check_item(params, item);
  detail::check_slot(params, slot);
  const auto& w = params.slot(slot);
  const Eigen::Index f = params.features();
  return w.leftCols(f) * item.features.cast<Scalar>() + w.col(f);
}

/// log softmax(z / temperature), computed with the max shift.
template <typename Scalar>
ProbVector<Scalar> log_softmax(const ProbVector<Scalar>& logits,
                               double temperature) {
  detail::check_temperature(temperature);
  const ProbVector<Scalar> z = logits / static_cast<Scalar>(temperature);
  const Scalar shift = z.maxCoeff();
  const Scalar lse = shift + std::log((z.array() - shift).exp().sum());
  return (z.array() - lse).matrix();
}

template <typename Scalar>
ProbVector<Scalar> softmax(const ProbVector<Scalar>& logits, double temperature) {
  detail::check_temperature(temperature);
  const ProbVector<Scalar> z = logits / static_cast<Scalar>(temperature);
  const ProbVector<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename Scalar>
ProbVector<Scalar> slot_distribution(const PolicyParams<Scalar>& params,
                                     const VqaItem& item, int slot,
                                     double temperature) {
  return softmax<Scalar>(slot_logits(params, item, slot), temperature);
}

/// Sum of per-slot log-probabilities at the given temperature.
template <typename Scalar>
Scalar response_log_prob(const PolicyParams<Scalar>& params,
                         const Response& response, const VqaItem& item,
                         double temperature) {
  const auto& schema = params.schema();
  check_response(response, schema);
  Scalar total(0);
  for (int s = 0; s < schema.num_slots(); ++s) {
    const ProbVector<Scalar> lp =
        log_softmax<Scalar>(slot_logits(params, item, s), temperature);
    total += lp[response.choice(schema, s)];
  }
  return total;
}

/// grad += coeff * d/dW log pi(response | item). Per slot the contribution is
/// (onehot(choice) - p) [x; 1]^T / temperature.
template <typename Scalar>
void accumulate_log_prob_gradient(const PolicyParams<Scalar>& params,
                                  const Response& response, const VqaItem& item,
                                  double temperature, Scalar coeff,
                                  SlotTensors<Scalar>& grad) {
  const auto& schema = params.schema();
  check_response(response, schema);
  const Eigen::Index f = params.features();
  const ProbVector<Scalar> x = item.features.cast<Scalar>();
  for (int s = 0; s < schema.num_slots(); ++s) {
    ProbVector<Scalar> delta = -slot_distribution(params, item, s, temperature);
    delta[response.choice(schema, s)] += Scalar(1);
    delta *= coeff / static_cast<Scalar>(temperature);
    auto& g = grad.slots[static_cast<std::size_t>(s)];
    g.leftCols(f).noalias() += delta * x.transpose();
    g.col(f) += delta;
  }
}

template <typename Scalar>
SlotTensors<Scalar> log_prob_gradient(const PolicyParams<Scalar>& params,
                                      const Response& response,
                                      const VqaItem& item, double temperature) {
  auto grad = params.weights().zeros_like();
  accumulate_log_prob_gradient(params, response, item, temperature, Scalar(1), grad);
  return grad;
}

/// Inverse-CDF draw from a probability vector.
template <typename Scalar>
int sample_index(const ProbVector<Scalar>& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cumulative += static_cast<double>(probs[i]);
    if (u < cumulative) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

/// Draws one response from the behaviour (OldSnapshot) policy.
template <typename Scalar>
Response sample_response(const PolicyParams<Scalar>& params, const VqaItem& item,
                         double temperature, Rng& rng) {
  if (params.role() != Role::OldSnapshot)
    throw std::logic_error("sample_response: policy must be an OldSnapshot");
  const auto& schema = params.schema();
  Response r;
  r.think_tokens.resize(static_cast<std::size_t>(schema.num_think_slots));
  double logp = 0.0;
  for (int s = 0; s < schema.num_slots(); ++s) {
    const ProbVector<Scalar> lp =
        log_softmax<Scalar>(slot_logits(params, item, s), temperature);
    const int pick = sample_index<Scalar>(lp.array().exp().matrix(), rng);
    if (s == schema.structure_slot())
      r.structure_choice = pick;
    else if (s == schema.answer_slot())
      r.answer_choice = pick;
    else
      r.think_tokens[static_cast<std::size_t>(s - 1)] = pick;
    logp += static_cast<double>(lp[pick]);
  }
  r.logp_old = logp;
  r.text = render(r, schema);
  return r;
}

/// Per-slot argmax of the logits, ties to the lowest index.
template <typename Scalar>
Response greedy_decode(const PolicyParams<Scalar>& params, const VqaItem& item) {
  const auto& schema = params.schema();
  Response r;
  r.think_tokens.resize(static_cast<std::size_t>(schema.num_think_slots));
  for (int s = 0; s < schema.num_slots(); ++s) {
    const ProbVector<Scalar> z = slot_logits(params, item, s);
    int best = 0;
    for (int i = 1; i < z.size(); ++i)
      if (z[i] > z[best]) best = i;
    if (s == schema.structure_slot())
      r.structure_choice = best;
    else if (s == schema.answer_slot())
      r.answer_choice = best;
    else
      r.think_tokens[static_cast<std::size_t>(s - 1)] = best;
  }
  r.text = render(r, schema);
  r.logp_old = 0.0;
  return r;
}

}  // namespace slotgrpo
