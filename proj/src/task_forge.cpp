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

#include "slotgrpo/task_forge.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "slotgrpo/errors.hpp"
#include "slotgrpo/rng.hpp"

namespace slotgrpo {
namespace {

constexpr std::array<const char*, 8> kModalities = {
    "CT", "MRI", "X-Ray", "US", "Der", "FP", "OCT", "Micro"};
constexpr std::array<const char*, 5> kTasks = {
    "Anatomy Identification", "Disease Diagnosis", "Lesion Grading",
    "Modality Recognition", "Other Biological Attributes"};

constexpr const char* kQuestion = "Which option best describes the finding?";

Eigen::MatrixXd gaussian_matrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

std::string zero_padded(int value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width)
    s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

}  // namespace

void validate_item(const VqaItem& item) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("item '" + item.id + "': " + why);
  };
  const int k = item.num_options();
  if (k < 2 || k > kMaxOptions) fail("option count must be in [2, 4]");
  int expect = 0;
  for (const auto& [letter, text] : item.options) {
    if (letter != option_letter(expect))
      fail("option letters must run A.. contiguously");
    ++expect;
  }
  if (!item.options.contains(item.answer))
    fail(std::string("answer '") + item.answer + "' is not an option key");
  if (item.features.size() == 0) fail("empty feature vector");
  if (!item.features.allFinite()) fail("non-finite feature value");
}

void validate(const SuiteSpec& spec) {
  if (spec.num_domains < 1)
    throw ValidationError("num_domains: must be positive");
  if (spec.features < 1) throw ValidationError("features: must be positive");
  if (spec.options < 2 || spec.options > kMaxOptions)
    throw ValidationError("options: must be in [2, 4]");
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0))
    throw ValidationError("alpha: must be in [0, 1]");
  if (spec.items_per_domain < spec.options)
    throw ValidationError("items_per_domain: must be at least options");
}

std::string domain_label(SuiteAxis axis, int d) {
  if (axis == SuiteAxis::Modality) {
    if (d < static_cast<int>(kModalities.size())) return kModalities[d];
    return "M" + std::to_string(d + 1);
  }
  if (d < static_cast<int>(kTasks.size())) return kTasks[d];
  return "T" + std::to_string(d + 1);
}

Eigen::MatrixXd domain_rule(const SuiteSpec& spec, int d) {
  Rng shared_rng = make_stream(spec.seed, "shared-rule");
  Rng domain_rng = make_stream(spec.seed, "domain-rule", {},
                               static_cast<std::uint64_t>(d));
  const Eigen::MatrixXd shared =
      gaussian_matrix(shared_rng, spec.options, spec.features);
  const Eigen::MatrixXd own =
      gaussian_matrix(domain_rng, spec.options, spec.features);
  return (1.0 - spec.alpha) * shared + spec.alpha * own;
}

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  int best = 0;
  for (int i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

DomainSuite generate_suite(const SuiteSpec& spec) {
  validate(spec);
  DomainSuite suite;
  suite.reserve(static_cast<std::size_t>(spec.num_domains));
  std::normal_distribution<double> normal;
  for (int d = 0; d < spec.num_domains; ++d) {
    const Eigen::MatrixXd rule = domain_rule(spec, d);
    const std::string label = domain_label(spec.axis, d);
    // The off-axis tag cycles through the other axis' labels.
    const SuiteAxis other = spec.axis == SuiteAxis::Modality
                                ? SuiteAxis::Task
                                : SuiteAxis::Modality;
    Rng rng = make_stream(spec.seed, "items", {}, static_cast<std::uint64_t>(d));
    std::vector<VqaItem> items;
    items.reserve(static_cast<std::size_t>(spec.items_per_domain));
    for (int i = 0; i < spec.items_per_domain; ++i) {
      VqaItem item;
      item.id = label + "-" + zero_padded(i, 5);
      const int other_count = other == SuiteAxis::Task ? 5 : 8;
      const std::string other_label = domain_label(other, i % other_count);
      item.domain = spec.axis == SuiteAxis::Modality ? label : other_label;
      item.task_type = spec.axis == SuiteAxis::Modality ? other_label : label;
      item.features.resize(spec.features);
      for (int f = 0; f < spec.features; ++f) item.features[f] = normal(rng);
      item.question = kQuestion;
      for (int k = 0; k < spec.options; ++k)
        item.options.emplace(option_letter(k),
                             std::string("option ") + option_letter(k));
      const Eigen::VectorXd scores = rule * item.features;
      item.answer = option_letter(argmax_lowest(scores));
      items.push_back(std::move(item));
    }
    suite.emplace_back(label, std::move(items));
  }
  return suite;
}

SplitDataset split_80_20(std::span<const VqaItem> items, std::uint64_t seed) {
  const std::size_t n = items.size();
  if (n < 5)
    throw ValidationError("split_80_20: need at least 5 items, got " +
                          std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  // round(0.8 n) in integer arithmetic; 4n/5 never lands on .5
  const std::size_t n_train = (4 * n + 2) / 5;
  SplitDataset out;
  out.train.reserve(n_train);
  out.test.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i)
    (i < n_train ? out.train : out.test).push_back(items[order[i]]);
  return out;
}

namespace {

VqaItem item_from_json(const nlohmann::json& j, std::size_t line_no) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + why);
  };
  if (!j.is_object()) fail("record is not a JSON object");
  static const std::array<const char*, 7> kKeys = {
      "id", "domain", "task_type", "features", "question", "options", "answer"};
  for (const char* key : kKeys)
    if (!j.contains(key)) fail(std::string("missing key '") + key + "'");
  if (j.size() != kKeys.size()) fail("unexpected extra keys");

  VqaItem item;
  try {
    item.id = j.at("id").get<std::string>();
    item.domain = j.at("domain").get<std::string>();
    item.task_type = j.at("task_type").get<std::string>();
    item.question = j.at("question").get<std::string>();
    const auto& feats = j.at("features");
    if (!feats.is_array()) fail("features is not an array");
    item.features.resize(static_cast<Eigen::Index>(feats.size()));
    for (std::size_t f = 0; f < feats.size(); ++f) {
      if (!feats[f].is_number()) fail("non-numeric feature");
      item.features[static_cast<Eigen::Index>(f)] = feats[f].get<double>();
    }
    const auto& opts = j.at("options");
    if (!opts.is_object()) fail("options is not an object");
    for (const auto& [key, value] : opts.items()) {
      if (key.size() != 1) fail("option key '" + key + "' is not a letter");
      item.options.emplace(key[0], value.get<std::string>());
    }
    const auto answer = j.at("answer").get<std::string>();
    if (answer.size() != 1)
      throw ValidationError("item '" + item.id + "': answer '" + answer +
                            "' is not a single letter");
    item.answer = answer[0];
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("wrong value type: ") + e.what());
  }
  validate_item(item);
  return item;
}

}  // namespace

std::vector<VqaItem> parse_dataset(const std::string& text) {
  std::vector<VqaItem> items;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": malformed JSON: " + e.what());
    }
    items.push_back(item_from_json(j, line_no));
  }
  return items;
}

std::vector<VqaItem> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string to_jsonl_line(const VqaItem& item) {
  nlohmann::ordered_json j;
  j["id"] = item.id;
  j["domain"] = item.domain;
  j["task_type"] = item.task_type;
  j["features"] = std::vector<double>(item.features.data(),
                                      item.features.data() + item.features.size());
  j["question"] = item.question;
  nlohmann::ordered_json opts = nlohmann::ordered_json::object();
  for (const auto& [letter, text] : item.options)
    opts[std::string(1, letter)] = text;
  j["options"] = opts;
  j["answer"] = std::string(1, item.answer);
  return j.dump();
}

void write_dataset(const std::filesystem::path& path,
                   std::span<const VqaItem> items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& item : items) out << to_jsonl_line(item) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace slotgrpo
