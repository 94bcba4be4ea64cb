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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slotgrpo/checkpoint.hpp"
#include "slotgrpo/cli.hpp"
#include "slotgrpo/run_config.hpp"
#include "slotgrpo/trainer.hpp"

using namespace slotgrpo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("slotgrpo-cli-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel = "") const { return (path / rel).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t line_count(const fs::path& p) {
  const auto text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

Run gen(const TempDir& dir, const std::string& rel, std::vector<std::string> extra) {
  std::vector<std::string> args = {"gen", "--out", dir.str(rel)};
  args.insert(args.end(), extra.begin(), extra.end());
  return cli(args);
}

}  // namespace

TEST_CASE("gen writes one file per domain and is reproducible") {
  TempDir dir("gen");
  const std::vector<std::string> flags = {"--domains", "8", "--items", "500",
                                          "--alpha", "0.8", "--seed", "7"};
  REQUIRE(gen(dir, "a", flags).code == kExitOk);
  REQUIRE(gen(dir, "b", flags).code == kExitOk);
  const auto manifest = nlohmann::json::parse(slurp(dir.path / "a" / "manifest.json"));
  REQUIRE(manifest["domains"].size() == 8);
  for (const auto& d : manifest["domains"]) {
    const std::string file = d["file"];
    CHECK(line_count(dir.path / "a" / file) == 500);
    CHECK(slurp(dir.path / "a" / file) == slurp(dir.path / "b" / file));
  }
  CHECK(slurp(dir.path / "a" / "manifest.json") == slurp(dir.path / "b" / "manifest.json"));
  CHECK(fs::exists(dir.path / "a" / "gen.config"));
}

TEST_CASE("gen rejects invalid parameters") {
  TempDir dir("gen-bad");
  const auto r = gen(dir, "x", {"--alpha", "1.5"});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("alpha") != std::string::npos);
  CHECK(gen(dir, "x", {"--options", "1"}).code == kExitValidation);
  CHECK(gen(dir, "x", {"--alpha", "abc"}).code == kExitValidation);
  CHECK(cli({"gen", "--no-such-flag", "1"}).code == kExitValidation);
  CHECK(cli({}).code == kExitValidation);
}

TEST_CASE("train and eval round trip") {
  TempDir dir("train");
  REQUIRE(gen(dir, "data", {"--domains", "3", "--items", "200", "--features", "8"}).code ==
          kExitOk);

  SUBCASE("grpo defaults") {
    const auto r = cli({"train", "--data", dir.str("data"), "--out", dir.str("run")});
    REQUIRE(r.code == kExitOk);
    const auto summary = nlohmann::json::parse(r.out);
    CHECK(summary["trainer"] == "grpo");
    CHECK(summary["steps"] == 120);  // 480 train items, batch 4, 1 epoch
    CHECK(line_count(dir.path / "run" / "train_log.jsonl") == 120);
    CHECK(line_count(dir.path / "run" / "train_split.jsonl") +
              line_count(dir.path / "run" / "test_split.jsonl") == 600);
    const auto ckpt = load_checkpoint(dir.path / "run" / "policy.ckpt");
    CHECK(ckpt.features() == 8);
  }

  SUBCASE("lr 0 leaves the initial policy") {
    REQUIRE(cli({"train", "--data", dir.str("data"), "--out", dir.str("run"), "--lr", "0",
                 "--seed", "5"})
                .code == kExitOk);
    const auto ckpt = load_checkpoint(dir.path / "run" / "policy.ckpt");
    GrpoConfig cfg;
    cfg.seed = 5;
    const auto init = init_policy<double>(cfg.schema(4), 8, 5, cfg.init_scale);
    CHECK(ckpt.weights() == init.weights());
  }

  SUBCASE("sft then eval") {
    REQUIRE(cli({"train", "--trainer", "sft", "--data", dir.str("data"), "--out",
                 dir.str("run")})
                .code == kExitOk);
    const auto r = cli({"eval", "--checkpoint", dir.str("run/policy.ckpt"), "--data",
                        dir.str("run/test_split.jsonl")});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["n"] == 120);
    CHECK(j["accuracy"].get<double>() >= 0.0);
    CHECK(j["accuracy"].get<double>() <= 1.0);
    CHECK_FALSE(j.contains("per_domain"));
  }

  SUBCASE("per-domain eval") {
    REQUIRE(cli({"train", "--data", dir.str("data"), "--out", dir.str("run")}).code == kExitOk);
    const auto r = cli({"eval", "--checkpoint", dir.str("run/policy.ckpt"), "--data",
                        dir.str("data"), "--per-domain"});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["n"] == 600);
    REQUIRE(j["per_domain"].size() == 3);
    CHECK(j["per_domain"][0]["domain"] == "CT");
    std::size_t correct = 0;
    for (const auto& row : j["per_domain"]) correct += row["correct"].get<std::size_t>();
    CHECK(correct == j["correct"].get<std::size_t>());
  }

  SUBCASE("dimension mismatch is a validation error") {
    REQUIRE(cli({"train", "--data", dir.str("data"), "--out", dir.str("run")}).code == kExitOk);
    REQUIRE(gen(dir, "wide", {"--domains", "2", "--items", "20", "--features", "16"}).code ==
            kExitOk);
    const auto r = cli({"eval", "--checkpoint", dir.str("run/policy.ckpt"), "--data",
                        dir.str("wide")});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("F=8") != std::string::npos);
    CHECK(r.err.find("F=16") != std::string::npos);
  }

  SUBCASE("missing inputs are I/O errors") {
    CHECK(cli({"train", "--data", dir.str("nope.jsonl"), "--out", dir.str("run")}).code ==
          kExitIo);
    CHECK(cli({"eval", "--checkpoint", dir.str("nope.ckpt"), "--data", dir.str("data")}).code ==
          kExitIo);
    CHECK(cli({"train", "--out", dir.str("run")}).code == kExitValidation);
  }
}

TEST_CASE("matrix command") {
  TempDir dir("matrix");
  REQUIRE(gen(dir, "data", {"--domains", "8", "--items", "100", "--features", "8"}).code ==
          kExitOk);
  const std::vector<std::string> base = {"matrix", "--data", dir.str("data"), "--steps", "20"};

  auto run_to = [&](const std::string& out, std::vector<std::string> extra) {
    auto args = base;
    args.push_back("--out");
    args.push_back(dir.str(out));
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  };

  REQUIRE(run_to("m1", {}).code == kExitOk);
  const auto csv = slurp(dir.path / "m1" / "matrix_grpo.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);  // header + 8 rows + Overall
  CHECK(csv.rfind("train\\test,CT,MRI,X-Ray,US,Der,FP,OCT,Micro,Overall\n", 0) == 0);
  CHECK(fs::exists(dir.path / "m1" / "logs" / "grpo_X-Ray.jsonl"));
  CHECK(line_count(dir.path / "m1" / "logs" / "grpo_CT.jsonl") == 20);

  SUBCASE("deterministic and independent of jobs") {
    REQUIRE(run_to("m2", {"--jobs", "4"}).code == kExitOk);
    CHECK(slurp(dir.path / "m2" / "matrix_grpo.csv") == csv);
    for (const auto& e : fs::directory_iterator(dir.path / "m1" / "logs"))
      CHECK(slurp(e.path()) == slurp(dir.path / "m2" / "logs" / e.path().filename()));
  }

  SUBCASE("comparison report") {
    const auto r = run_to("cmp", {"--compare", "grpo,sft"});
    REQUIRE(r.code == kExitOk);
    CHECK(fs::exists(dir.path / "cmp" / "matrix_sft.csv"));
    const auto report = slurp(dir.path / "cmp" / "report.csv");
    CHECK(report.rfind("method,CT,MRI,X-Ray,US,Der,FP,OCT,Micro,Overall\n", 0) == 0);
    CHECK(std::count(report.begin(), report.end(), '*') == 9);
    CHECK(std::count(report.begin(), report.end(), '+') == 9);
    CHECK(r.out.find("* best, + second best") != std::string::npos);
  }

  SUBCASE("grouping by task type") {
    REQUIRE(run_to("task", {"--group-by", "task"}).code == kExitOk);
    const auto t = slurp(dir.path / "task" / "matrix_grpo.csv");
    CHECK(t.find("Disease Diagnosis") != std::string::npos);
  }

  SUBCASE("a single domain is rejected") {
    REQUIRE(gen(dir, "one", {"--domains", "1", "--items", "50"}).code == kExitOk);
    const auto r = cli({"matrix", "--data", dir.str("one"), "--out", dir.str("m3")});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("2 domains") != std::string::npos);
  }
}

TEST_CASE("score command") {
  TempDir dir("score");
  std::ofstream(dir.path / "resp.tsv") << "B\t<think> x </think> <answer> B </answer>\n"
                                       << "C\t<answer> A </answer>\n"
                                       << "\n"
                                       << "D\tD\n";
  const auto r = cli({"score", "--data", dir.str("resp.tsv")});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out == "line\tformat\taccuracy\ttotal\n1\t1\t1\t2\n2\t0\t0\t0\n4\t0\t1\t1\n");
  std::ofstream(dir.path / "bad.tsv") << "no tab here\n";
  CHECK(cli({"score", "--data", dir.str("bad.tsv")}).code == kExitValidation);
}

TEST_CASE("config files") {
  TempDir dir("config");
  std::ofstream(dir.path / "bad.cfg") << "alpha = 0.5\nbogus_key = 3\n";
  const auto r = cli({"gen", "--config", dir.str("bad.cfg"), "--out", dir.str("x")});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("bogus_key") != std::string::npos);
  CHECK(cli({"gen", "--config", dir.str("missing.cfg"), "--out", dir.str("x")}).code == kExitIo);

  // Flags override file values; the resolved config reloads to the same text.
  std::ofstream(dir.path / "good.cfg") << "# suite\nitems = 30\ndomains = 2\nalpha = 0.25\n";
  REQUIRE(cli({"gen", "--config", dir.str("good.cfg"), "--out", dir.str("g"), "--items", "40"})
              .code == kExitOk);
  const auto resolved = slurp(dir.path / "g" / "gen.config");
  CHECK(resolved.find("items = 40") != std::string::npos);
  CHECK(resolved.find("alpha = 0.25") != std::string::npos);
  RunConfig reloaded;
  reloaded.merge_file(dir.path / "g" / "gen.config");
  CHECK(reloaded.to_text() == resolved);
  CHECK(line_count(dir.path / "g" / "CT.jsonl") == 40);

  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("nope", "1"), ValidationError);
  CHECK_THROWS_AS(cfg.set("group_size", "x"), ValidationError);
}
