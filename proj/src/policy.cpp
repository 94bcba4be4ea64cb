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

#include "slotgrpo/policy.hpp"

#include <array>

namespace slotgrpo {
namespace {

constexpr int kMalformedThink = 6;
constexpr int kMalformedNoThink = 6;

std::string think_block(const std::string& tokens) {
  return tokens.empty() ? "<think> </think>" : "<think> " + tokens + " </think>";
}

std::string render_think(int structure, const std::string& tokens,
                         const std::string& letter) {
  const std::string think = think_block(tokens);
  const std::string answer = "<answer> " + letter + " </answer>";
  switch (structure) {
    case 0: return think + " " + answer;
    case 1: return think + " <answer> " + letter;                 // no </answer>
    case 2: return answer + " " + think;                          // swapped
    case 3: return letter;                                        // bare letter
    case 4: return answer;                                        // no think block
    case 5: return think + " " + answer + " " + answer;           // duplicated
    case 6: return "<think> " + tokens + " " + answer;            // no </think>
    default: break;
  }
  throw ValidationError("structure index out of range");
}

std::string render_no_think(int structure, const std::string& letter) {
  const std::string answer = "<answer> " + letter + " </answer>";
  switch (structure) {
    case 0: return answer;
    case 1: return "<answer> " + letter;                          // no </answer>
    case 2: return letter;                                        // bare letter
    case 3: return "<think> </think> " + answer;                  // stray think
    case 4: return answer + " " + answer;                         // duplicated
    case 5: return "Answer: " + letter;                           // untagged
    case 6: return "</answer> " + letter + " <answer>";           // inverted tags
    default: break;
  }
  throw ValidationError("structure index out of range");
}

}  // namespace

const char* to_string(Mode mode) {
  return mode == Mode::Think ? "think" : "no-think";
}

Mode parse_mode(const std::string& text) {
  if (text == "think") return Mode::Think;
  if (text == "no-think" || text == "nothink") return Mode::NoThink;
  throw ValidationError("mode: expected 'think' or 'no-think', got '" + text + "'");
}

int num_malformed_templates(Mode mode) {
  return mode == Mode::Think ? kMalformedThink : kMalformedNoThink;
}

void ResponseSchema::validate() const {
  if (num_think_slots < 0)
    throw ValidationError("num_think_slots: must be non-negative");
  if (mode == Mode::NoThink && num_think_slots != 0)
    throw ValidationError("num_think_slots: must be 0 in no-think mode");
  if (think_vocab < 1) throw ValidationError("think_vocab: must be positive");
  if (num_structures < 2 || num_structures > 1 + num_malformed_templates(mode))
    throw ValidationError("num_structures: must be in [2, " +
                          std::to_string(1 + num_malformed_templates(mode)) + "]");
  if (num_answers < 2 || num_answers > kMaxOptions)
    throw ValidationError("num_answers: must be in [2, 4]");
}

int ResponseSchema::slot_size(int slot) const {
  if (slot == structure_slot()) return num_structures;
  if (slot == answer_slot()) return num_answers;
  if (slot > 0 && slot < answer_slot()) return think_vocab;
  throw ValidationError("slot index " + std::to_string(slot) + " out of range");
}

ResponseSchema ResponseSchema::for_mode(Mode mode, int num_answers) {
  ResponseSchema s;
  s.mode = mode;
  s.num_answers = num_answers;
  if (mode == Mode::NoThink) s.num_think_slots = 0;
  return s;
}

void check_response(const Response& response, const ResponseSchema& schema) {
  if (static_cast<int>(response.think_tokens.size()) != schema.num_think_slots)
    throw ValidationError("response has " +
                          std::to_string(response.think_tokens.size()) +
                          " think tokens, schema expects " +
                          std::to_string(schema.num_think_slots));
  for (int s = 0; s < schema.num_slots(); ++s) {
    const int c = response.choice(schema, s);
    if (c < 0 || c >= schema.slot_size(s))
      throw ValidationError("slot " + std::to_string(s) + " choice " +
                            std::to_string(c) + " out of range");
  }
}

std::string render(const Response& response, const ResponseSchema& schema) {
  check_response(response, schema);
  const std::string letter(1, response.answer_letter());
  if (schema.mode == Mode::NoThink)
    return render_no_think(response.structure_choice, letter);
  std::string tokens;
  for (int t : response.think_tokens) {
    if (!tokens.empty()) tokens += ' ';
    tokens += 't' + std::to_string(t);
  }
  return render_think(response.structure_choice, tokens, letter);
}

}  // namespace slotgrpo
