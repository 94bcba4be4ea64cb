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

// Rule-based rewards on rendered response text. All functions are total over
// arbitrary strings.

#include <optional>
#include <string_view>

#include "slotgrpo/policy.hpp"

namespace slotgrpo {

struct RewardWeights {
  double format = 1.0;
  double accuracy = 1.0;
};

struct RewardBreakdown {
  int format = 0;
  int accuracy = 0;
  double total = 0.0;
};

/// 1 iff the tag structure is exactly right for the mode.
/// Think:   <think> ... </think> <answer> ... </answer>
/// NoThink: <answer> ... </answer>
/// Each tag appears exactly once; only whitespace outside and between blocks.
int format_reward(std::string_view text, Mode mode);

/// Leading option letter of the first <answer> block (or of the whole text if
/// there is none), upper-cased.
std::optional<char> extract_answer(std::string_view text);

/// Throws ValidationError unless ground_truth is one of A-D.
int accuracy_reward(std::string_view text, char ground_truth);

/// NoThink totals drop the format term; `format` is still reported.
RewardBreakdown total_reward(std::string_view text, char ground_truth, Mode mode,
                             const RewardWeights& weights = {});

}  // namespace slotgrpo
