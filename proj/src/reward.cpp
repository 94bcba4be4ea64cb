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

#include "slotgrpo/reward.hpp"

#include <cctype>
#include <string>

namespace slotgrpo {
namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t count(std::string_view text, std::string_view tag) {
  std::size_t n = 0;
  for (auto pos = text.find(tag); pos != std::string_view::npos;
       pos = text.find(tag, pos + tag.size()))
    ++n;
  return n;
}

bool blank(std::string_view s) { return trim(s).empty(); }

// `text` must be exactly one <answer>...</answer> block.
bool single_answer_block(std::string_view text) {
  return text.starts_with(kAnswerOpen) && text.ends_with(kAnswerClose) &&
         text.size() >= kAnswerOpen.size() + kAnswerClose.size();
}

}  // namespace

int format_reward(std::string_view text, Mode mode) {
  const std::string_view t = trim(text);
  if (count(t, kAnswerOpen) != 1 || count(t, kAnswerClose) != 1) return 0;
  if (mode == Mode::NoThink) {
    if (count(t, kThinkOpen) != 0 || count(t, kThinkClose) != 0) return 0;
    return single_answer_block(t) ? 1 : 0;
  }
  if (count(t, kThinkOpen) != 1 || count(t, kThinkClose) != 1) return 0;
  if (!t.starts_with(kThinkOpen)) return 0;
  const auto think_end = t.find(kThinkClose);
  const auto answer_begin = t.find(kAnswerOpen);
  if (think_end == std::string_view::npos || answer_begin < think_end) return 0;
  const auto gap_begin = think_end + kThinkClose.size();
  if (!blank(t.substr(gap_begin, answer_begin - gap_begin))) return 0;
  return single_answer_block(t.substr(answer_begin)) ? 1 : 0;
}

std::optional<char> extract_answer(std::string_view text) {
  std::string_view body = text;
  const auto open = text.find(kAnswerOpen);
  if (open != std::string_view::npos) {
    const auto start = open + kAnswerOpen.size();
    const auto close = text.find(kAnswerClose, start);
    if (close != std::string_view::npos) body = text.substr(start, close - start);
  }
  body = trim(body);
  if (body.empty()) return std::nullopt;
  const char lead = static_cast<char>(std::toupper(static_cast<unsigned char>(body[0])));
  if (lead < 'A' || lead > 'D') return std::nullopt;
  if (body.size() > 1) {
    const char next = body[1];
    if (next != ')' && next != '.' && next != ':' && !is_space(next))
      return std::nullopt;
  }
  return lead;
}

int accuracy_reward(std::string_view text, char ground_truth) {
  if (ground_truth < 'A' || ground_truth > 'D')
    throw ValidationError(std::string("ground truth must be one of A-D, got '") +
                          ground_truth + "'");
  const auto answer = extract_answer(text);
  return answer && *answer == ground_truth ? 1 : 0;
}

RewardBreakdown total_reward(std::string_view text, char ground_truth, Mode mode,
                             const RewardWeights& weights) {
  RewardBreakdown r;
  r.accuracy = accuracy_reward(text, ground_truth);
  r.format = format_reward(text, mode);
  r.total = weights.accuracy * r.accuracy;
  if (mode == Mode::Think) r.total += weights.format * r.format;
  return r;
}

}  // namespace slotgrpo
