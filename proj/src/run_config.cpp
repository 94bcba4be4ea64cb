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

#include "slotgrpo/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace slotgrpo {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw ValidationError(key + ": cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ValidationError(key + ": expected true/false, got '" + value + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Field number_field(T RunConfig::*member) {
  return {[member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          },
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          }};
}

template <typename Part, typename T>
Field nested_number(Part RunConfig::*part, T Part::*member) {
  return {[=](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*part.*member);
            else return std::to_string(c.*part.*member);
          },
          [=](RunConfig& c, const std::string& k, const std::string& v) {
            c.*part.*member = parse_number<T>(k, v);
          }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string&, const std::string& v) {
            c.*member = v;
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["command"] = string_field(&RunConfig::command);
    t["trainer"] = {[](const RunConfig& c) { return c.trainer; },
                    [](RunConfig& c, const std::string&, const std::string& v) {
                      parse_trainer(v);
                      c.trainer = v;
                    }};
    t["compare"] = string_field(&RunConfig::compare);
    t["group_by"] = {[](const RunConfig& c) { return c.group_by; },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                       if (v != "domain" && v != "task")
                         throw ValidationError(k + ": expected domain or task");
                       c.group_by = v;
                     }};
    t["data"] = string_field(&RunConfig::data);
    t["test_data"] = string_field(&RunConfig::test_data);
    t["checkpoint"] = string_field(&RunConfig::checkpoint);
    t["log"] = string_field(&RunConfig::log);
    t["out"] = string_field(&RunConfig::out);
    t["jobs"] = number_field(&RunConfig::jobs);
    t["per_domain"] = {[](const RunConfig& c) { return std::string(c.per_domain ? "true" : "false"); },
                       [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.per_domain = parse_bool(k, v);
                       }};

    t["seed"] = {[](const RunConfig& c) { return std::to_string(c.grpo.seed); },
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   c.grpo.seed = parse_number<std::uint64_t>(k, v);
                   c.suite.seed = c.grpo.seed;
                 }};
    t["domains"] = nested_number(&RunConfig::suite, &SuiteSpec::num_domains);
    t["items"] = nested_number(&RunConfig::suite, &SuiteSpec::items_per_domain);
    t["features"] = nested_number(&RunConfig::suite, &SuiteSpec::features);
    t["options"] = nested_number(&RunConfig::suite, &SuiteSpec::options);
    t["alpha"] = nested_number(&RunConfig::suite, &SuiteSpec::alpha);
    t["axis"] = {[](const RunConfig& c) {
                   return std::string(c.suite.axis == SuiteAxis::Modality ? "modality" : "task");
                 },
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   if (v == "modality") c.suite.axis = SuiteAxis::Modality;
                   else if (v == "task") c.suite.axis = SuiteAxis::Task;
                   else throw ValidationError(k + ": expected modality or task");
                 }};

    t["group_size"] = nested_number(&RunConfig::grpo, &GrpoConfig::group_size);
    t["temp"] = nested_number(&RunConfig::grpo, &GrpoConfig::temperature);
    t["clip_eps"] = nested_number(&RunConfig::grpo, &GrpoConfig::clip_eps);
    t["kl_beta"] = nested_number(&RunConfig::grpo, &GrpoConfig::kl_beta);
    t["std_eps"] = nested_number(&RunConfig::grpo, &GrpoConfig::std_eps);
    t["lr"] = nested_number(&RunConfig::grpo, &GrpoConfig::lr);
    t["epochs"] = nested_number(&RunConfig::grpo, &GrpoConfig::epochs);
    t["steps"] = nested_number(&RunConfig::grpo, &GrpoConfig::steps);
    t["batch"] = nested_number(&RunConfig::grpo, &GrpoConfig::batch);
    t["think_slots"] = nested_number(&RunConfig::grpo, &GrpoConfig::think_slots);
    t["think_vocab"] = nested_number(&RunConfig::grpo, &GrpoConfig::think_vocab);
    t["structures"] = nested_number(&RunConfig::grpo, &GrpoConfig::structures);
    t["init_scale"] = nested_number(&RunConfig::grpo, &GrpoConfig::init_scale);
    t["eval_every"] = nested_number(&RunConfig::grpo, &GrpoConfig::eval_every);
    t["mode"] = {[](const RunConfig& c) { return std::string(to_string(c.grpo.mode)); },
                 [](RunConfig& c, const std::string&, const std::string& v) {
                   c.grpo.mode = parse_mode(v);
                 }};
    t["w_format"] = {[](const RunConfig& c) { return format_double(c.grpo.reward_weights.format); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                       c.grpo.reward_weights.format = parse_number<double>(k, v);
                     }};
    t["w_accuracy"] = {[](const RunConfig& c) { return format_double(c.grpo.reward_weights.accuracy); },
                       [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.grpo.reward_weights.accuracy = parse_number<double>(k, v);
                       }};
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ValidationError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ValidationError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : fields()) k.push_back(name);
    return k;
  }();
  return names;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& key : keys()) out += key + " = " + get(key) + "\n";
  return out;
}

void RunConfig::merge_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected key = value");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str());
}

}  // namespace slotgrpo
