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

#include "slotgrpo/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "slotgrpo/checkpoint.hpp"
#include "slotgrpo/eval.hpp"
#include "slotgrpo/reward.hpp"
#include "slotgrpo/run_config.hpp"

namespace slotgrpo {
namespace fs = std::filesystem;
namespace {

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

std::string file_stem(const std::string& label) {
  std::string s = label;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) c = '_';
  return s;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_resolved(const RunConfig& cfg, const std::string& name) {
  write_text(fs::path(cfg.out) / (name + ".config"), cfg.to_text());
}

// Domain files of a gen output directory, in manifest order.
std::vector<std::pair<std::string, fs::path>> manifest_domains(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest))
    throw IoError("no manifest.json in dataset directory '" + dir.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed manifest '" + manifest.string() + "': " + e.what());
  }
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& d : j.at("domains"))
    out.emplace_back(d.at("label").get<std::string>(), dir / d.at("file").get<std::string>());
  return out;
}

std::vector<VqaItem> load_items(const std::string& data) {
  if (data.empty()) throw ValidationError("data: no dataset path given");
  const fs::path path(data);
  if (!fs::exists(path)) throw IoError("dataset '" + data + "' does not exist");
  if (!fs::is_directory(path)) return load_dataset(path);
  std::vector<VqaItem> items;
  for (const auto& [label, file] : manifest_domains(path)) {
    auto part = load_dataset(file);
    items.insert(items.end(), std::make_move_iterator(part.begin()),
                 std::make_move_iterator(part.end()));
  }
  return items;
}

int cmd_gen(const RunConfig& cfg, std::ostream& out) {
  validate(cfg.suite);
  const fs::path dir(cfg.out);
  ensure_dir(dir);
  const auto suite = generate_suite(cfg.suite);
  nlohmann::ordered_json manifest;
  manifest["seed"] = cfg.suite.seed;
  manifest["alpha"] = cfg.suite.alpha;
  manifest["features"] = cfg.suite.features;
  manifest["options"] = cfg.suite.options;
  manifest["items_per_domain"] = cfg.suite.items_per_domain;
  manifest["axis"] = cfg.suite.axis == SuiteAxis::Modality ? "modality" : "task";
  manifest["domains"] = nlohmann::ordered_json::array();
  for (const auto& [label, items] : suite) {
    const std::string file = file_stem(label) + ".jsonl";
    write_dataset(dir / file, items);
    nlohmann::ordered_json entry;
    entry["label"] = label;
    entry["file"] = file;
    entry["count"] = items.size();
    manifest["domains"].push_back(entry);
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_resolved(cfg, "gen");
  out << "wrote " << suite.size() << " domain files to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto kind = parse_trainer(cfg.trainer);
  cfg.grpo.validate();
  const auto items = load_items(cfg.data);
  const auto split = split_80_20(items, cfg.grpo.seed);
  const fs::path dir(cfg.out);
  ensure_dir(dir);
  const auto result = train(kind, split, cfg.grpo);

  const fs::path ckpt = cfg.checkpoint.empty() ? dir / "policy.ckpt" : fs::path(cfg.checkpoint);
  const fs::path log = cfg.log.empty() ? dir / "train_log.jsonl" : fs::path(cfg.log);
  save_checkpoint(ckpt, result.policy);
  write_train_log(log, result.log);
  write_dataset(dir / "train_split.jsonl", split.train);
  write_dataset(dir / "test_split.jsonl", split.test);
  write_resolved(cfg, "train");

  nlohmann::ordered_json summary;
  summary["trainer"] = to_string(kind);
  summary["mode"] = to_string(cfg.grpo.mode);
  summary["steps"] = result.log.size();
  summary["train_accuracy"] = evaluate_accuracy(result.policy, split.train).accuracy;
  summary["test_accuracy"] = split.test.empty()
                                 ? nlohmann::ordered_json(nullptr)
                                 : nlohmann::ordered_json(
                                       evaluate_accuracy(result.policy, split.test).accuracy);
  summary["checkpoint"] = ckpt.string();
  out << summary.dump() << "\n";
  return kExitOk;
}

nlohmann::ordered_json result_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["correct"] = r.correct;
  j["accuracy"] = r.accuracy;
  return j;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  if (cfg.checkpoint.empty()) throw ValidationError("checkpoint: no path given");
  const Policy policy = load_checkpoint(cfg.checkpoint);
  const auto items = load_items(cfg.data);
  auto j = result_json(evaluate_accuracy(policy, items));
  if (cfg.per_domain) {
    j["per_domain"] = nlohmann::ordered_json::array();
    for (const auto& [domain, r] : evaluate_per_domain(policy, items)) {
      auto row = result_json(r);
      row["domain"] = domain;
      j["per_domain"].push_back(row);
    }
  }
  out << j.dump() << "\n";
  return kExitOk;
}

LabeledSplits matrix_suite(const RunConfig& cfg) {
  const fs::path dir(cfg.data);
  if (cfg.data.empty()) throw ValidationError("data: no dataset directory given");
  if (!fs::is_directory(dir))
    throw IoError("matrix needs a dataset directory, got '" + cfg.data + "'");
  std::vector<std::pair<std::string, std::vector<VqaItem>>> groups;
  auto add = [&](const std::string& label, VqaItem item) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == label; });
    if (it == groups.end()) {
      groups.emplace_back(label, std::vector<VqaItem>{});
      it = std::prev(groups.end());
    }
    it->second.push_back(std::move(item));
  };
  for (const auto& [label, file] : manifest_domains(dir)) {
    for (auto& item : load_dataset(file)) {
      const std::string key = cfg.group_by == "task" ? item.task_type : item.domain;
      add(key, std::move(item));
    }
  }
  LabeledSplits suite;
  for (const auto& [label, items] : groups)
    suite.emplace_back(label, split_80_20(items, derive_seed(cfg.grpo.seed, "split-row", label)));
  return suite;
}

std::vector<TrainerKind> matrix_trainers(const RunConfig& cfg) {
  std::vector<TrainerKind> kinds;
  if (cfg.compare.empty()) {
    kinds.push_back(parse_trainer(cfg.trainer));
    return kinds;
  }
  std::stringstream ss(cfg.compare);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto kind = parse_trainer(name);
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) kinds.push_back(kind);
  }
  if (kinds.empty()) throw ValidationError("compare: no trainers listed");
  return kinds;
}

int cmd_matrix(const RunConfig& cfg, std::ostream& out) {
  cfg.grpo.validate();
  const auto trainers = matrix_trainers(cfg);
  const auto suite = matrix_suite(cfg);
  if (suite.size() < 2)
    throw ValidationError("matrix: need at least 2 domains, got " + std::to_string(suite.size()));
  const fs::path dir(cfg.out);
  ensure_dir(dir / "logs");

  std::vector<MethodScores> scores;
  std::vector<std::string> columns;
  for (const auto kind : trainers) {
    std::vector<TrainLog> logs;
    const auto m = cross_matrix(suite, cfg.grpo, kind, cfg.jobs, &logs);
    const std::string name = to_string(kind);
    write_text(dir / ("matrix_" + name + ".csv"), matrix_csv(m));
    for (std::size_t r = 0; r < logs.size(); ++r)
      write_train_log(dir / "logs" / (name + "_" + file_stem(m.labels[r]) + ".jsonl"), logs[r]);
    scores.push_back(overall_scores(name, m));
    columns = m.labels;
    out << name << " grand overall " << m.overall.grand << "\n";
  }
  columns.push_back("Overall");
  const auto report = comparison_report(columns, scores);
  write_text(dir / "report.txt", report.text);
  write_text(dir / "report.csv", report.csv);
  write_resolved(cfg, "matrix");
  out << report.text;
  return kExitOk;
}

// Lines are `<ground truth letter>\t<response text>`.
int cmd_score(const RunConfig& cfg, std::ostream& out) {
  if (cfg.data.empty()) throw ValidationError("data: no response file given");
  std::istringstream in(read_text(cfg.data));
  std::string line;
  int line_no = 0;
  out << "line\tformat\taccuracy\ttotal\n";
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab != 1)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": expected '<letter>\\t<response>'");
    const auto b = total_reward(line.substr(2), line[0], cfg.grpo.mode,
                                cfg.grpo.reward_weights);
    out << line_no << '\t' << b.format << '\t' << b.accuracy << '\t' << b.total << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"slotgrpo: group-relative policy optimization on a slot policy"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen", "generate a synthetic multi-domain suite"},
      {"train", "train a policy (grpo or sft) on a dataset"},
      {"eval", "evaluate a checkpoint on a dataset"},
      {"matrix", "train x test generalization matrix"},
      {"score", "score response lines with the reward rules"}};

  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  bool per_domain_flag = false;
  CLI::Option* per_domain_opt = nullptr;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "flat key = value config file");
    for (const auto& key : RunConfig::keys()) {
      if (key == "command" || key == "per_domain") continue;
      options[name + ":" + key] = sub->add_option(flag_name(key), values[key]);
    }
    per_domain_opt = sub->add_flag("--per-domain", per_domain_flag, "per-domain rows");
    options[name + ":per_domain"] = per_domain_opt;
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& key : RunConfig::keys()) {
      const auto it = options.find(command + ":" + key);
      if (it == options.end() || it->second->count() == 0) continue;
      cfg.set(key, key == "per_domain" ? "true" : values[key]);
    }
    cfg.command = command;
    if (command == "gen") return cmd_gen(cfg, out);
    if (command == "train") return cmd_train(cfg, out);
    if (command == "eval") return cmd_eval(cfg, out);
    if (command == "matrix") return cmd_matrix(cfg, out);
    return cmd_score(cfg, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace slotgrpo
