// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "clipstream/cli.hpp"
#include "clipstream/synthetic.hpp"
#include "test_support.hpp"

using namespace clipstream;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  Outcome o;
  const cli::ParseResult p = cli::parse(args);
  if (!p.invocation) {
    o.code = p.exit_code;
    (p.exit_code == 0 ? o.out : o.err) = p.message;
    return o;
  }
  std::ostringstream out, err;
  o.code = cli::run(*p.invocation, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

RunConfig parsed_run(const std::vector<std::string>& args) {
  const cli::ParseResult p = cli::parse(args);
  REQUIRE_MESSAGE(p.invocation, p.message);
  return p.invocation->run;
}

}  // namespace

TEST_CASE("flags map onto the run configuration") {
  const RunConfig c = parsed_run({"train", "--model", "meanframe", "--dataset", "d", "--batch-size", "4"});
  CHECK(c.batch_size == 4);
  CHECK(c.model == "meanframe");
  CHECK(c.dataset_root == fs::path("d"));
  CHECK(c.split == "train");

  const RunConfig t = parsed_run({"test", "--dataset", "d", "--clip-stride=-2", "--clip-length", "4",
                                  "--num-clips", "all", "--workers", "3",
                                  "--seed", "17", "--metric", "last_frame"});
  CHECK(t.split == "test");
  CHECK(t.clip.clip_stride == -2);
  CHECK(t.clip.clip_length == 4);
  CHECK_FALSE(t.clip.num_clips.has_value());
  CHECK_FALSE(t.clip.random_select);
  CHECK(parsed_run({"train", "--dataset", "d", "--clip-length", "4", "--random-extract"}).clip.random_select);
  CHECK(t.workers == 3);
  CHECK(t.seed == 17);
  CHECK(t.metric == "last_frame");

  const RunConfig w = parsed_run({"train", "--dataset", "d", "--clip-length", "whole"});
  CHECK_FALSE(w.clip.clip_length.has_value());
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(invoke({"train", "--dataset", "d", "--batch-size", "0"}).code == cli::kExitUsage);
  CHECK(invoke({"train", "--dataset", "d", "--frobnicate"}).code == cli::kExitUsage);
  CHECK(invoke({"train", "--dataset", "d", "--epochs", "two"}).code == cli::kExitUsage);
  CHECK(invoke({"train", "--dataset", "d", "--clip-length", "long"}).code == cli::kExitUsage);
  CHECK(invoke({"train", "--dataset", "d", "--metric", "svm"}).code == cli::kExitUsage);
  CHECK(invoke({"launch"}).code == cli::kExitUsage);

  const Outcome missing = invoke({"train", "--model", "meanframe"});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(missing.err.find("--dataset") != std::string::npos);
  const Outcome layer = invoke({"extract", "--dataset", "d"});
  CHECK(layer.code == cli::kExitUsage);
  CHECK(layer.err.find("--layer") != std::string::npos);
}

TEST_CASE("help lists every flag with a default") {
  const std::vector<std::string> required = {
      "--dataset", "--split",          "--model",       "--preprocess",  "--loss",
      "--batch-size", "--clip-length", "--num-clips",   "--clip-offset", "--clip-stride",
      "--random-extract", "--workers", "--epochs",      "--lr",          "--save-freq",
      "--metric",  "--exp-name",       "--layer",       "--seed",        "--config"};
  for (const std::string sub : {"train", "test", "extract"}) {
    const std::string help = cli::help_text(sub);
    // Flag name at line start, optional type, then a bracketed default.
    std::map<std::string, std::string> defaults;
    const std::regex line(R"(^\s+(--[a-z-]+)(?: [A-Z][^\[\n]*)? \[([^\]\n]*)\])");
    std::istringstream in(help);
    std::string l;
    while (std::getline(in, l)) {
      std::smatch m;
      if (std::regex_search(l, m, line)) defaults[m[1]] = m[2];
    }
    for (const auto& flag : required) CHECK_MESSAGE(defaults.count(flag), sub << " " << flag);
    CHECK(defaults.at("--batch-size") == "4");
    CHECK(defaults.at("--clip-length") == "whole");
    CHECK(defaults.at("--split") == (sub == "train" ? "train" : "test"));
  }
  const Outcome h = invoke({"--help"});
  CHECK(h.code == 0);
  for (const char* sub : {"convert", "train", "test", "extract", "create-model", "inspect"})
    CHECK(h.out.find(sub) != std::string::npos);
}

TEST_CASE("flags and config files produce identical configurations") {
  testing::TempDir tmp;
  const std::vector<std::string> flags = {
      "--dataset", "data/ucf",    "--model",      "lastframe", "--batch-size", "6",
      "--clip-length", "8",       "--num-clips",  "3",       "--clip-offset", "2",
      "--clip-stride", "-3",      "--workers",    "2",         "--epochs",     "7",
      "--lr", "0.25",             "--momentum",   "0.5",       "--save-freq",  "2",
      "--metric", "last_frame",   "--exp-name",   "e1",        "--seed",       "42",
      "--plateau-window", "4",    "--cooldown",   "1",         "--random-extract"};
  std::vector<std::string> args = {"train"};
  args.insert(args.end(), flags.begin(), flags.end());
  const RunConfig from_flags = parsed_run(args);

  {
    std::ofstream f(tmp / "run.json");
    f << R"({"dataset": "data/ucf", "model": "lastframe", "batch_size": 6, "clip_length": 8,
             "num_clips": 3, "clip_offset": 2, "clip_stride": -3, "workers": 2, "epochs": 7,
             "lr": 0.25, "momentum": 0.5, "save_freq": 2, "metric": "last_frame",
             "exp_name": "e1", "seed": 42, "plateau_window": 4, "cooldown": 1,
             "random_extract": true, "split": "train"})";
  }
  const RunConfig from_file = parsed_run({"train", "--config", (tmp / "run.json").string()});
  CHECK(from_file == from_flags);

  // Explicit flags win over the file.
  const RunConfig mixed =
      parsed_run({"train", "--config", (tmp / "run.json").string(), "--batch-size", "9"});
  CHECK(mixed.batch_size == 9);
  CHECK(mixed.seed == 42);

  {
    std::ofstream f(tmp / "bad.json");
    f << R"({"batchsize": 3})";
  }
  CHECK(invoke({"train", "--dataset", "d", "--config", (tmp / "bad.json").string()}).code ==
        cli::kExitUsage);
}

TEST_CASE("convert then inspect the index") {
  testing::TempDir tmp;
  SyntheticSpec s;
  s.videos_per_class = {{"train", 2}};
  s.frames = 4;
  s.height = 6;
  s.width = 6;
  make_synthetic_frame_tree(tmp / "frames", s);
  const Outcome c = invoke({"convert", "--src", (tmp / "frames").string(), "--out",
                            (tmp / "store").string()});
  REQUIRE_MESSAGE(c.code == 0, c.err);
  CHECK(nlohmann::json::parse(c.out).at("records") == 4);

  const Outcome i = invoke({"inspect", (tmp / "store").string()});
  REQUIRE(i.code == 0);
  const auto index = nlohmann::json::parse(i.out);
  std::size_t records = 0;
  for (const auto& [split, entries] : index.at("splits").items()) records += entries.size();
  CHECK(records == 4);

  const auto first = index.at("splits").at("train").at(0).at("path").get<std::string>();
  const Outcome r = invoke({"inspect", (tmp / "store" / first).string()});
  REQUIRE(r.code == 0);
  const auto header = nlohmann::json::parse(r.out);
  CHECK(header.at("kind") == "record");
  CHECK(header.at("num_frames") == 4);

  CHECK(invoke({"inspect", (tmp / "missing").string()}).code == cli::kExitRuntime);
}

TEST_CASE("test without a checkpoint exits 1 and names the directory") {
  testing::TempDir tmp;
  SyntheticSpec s;
  s.videos_per_class = {{"test", 2}};
  make_synthetic_dataset(tmp / "toy", s);
  const Outcome o = invoke({"test", "--dataset", (tmp / "toy").string(), "--results",
                            (tmp / "results").string()});
  CHECK(o.code == cli::kExitRuntime);
  CHECK(o.err.rfind("error: ", 0) == 0);
  CHECK(o.err.find((tmp / "results").string()) != std::string::npos);
  CHECK(o.err.find("checkpoints") != std::string::npos);
}

TEST_CASE("convert, train and test end to end") {
  testing::TempDir tmp;
  SyntheticSpec s;
  s.videos_per_class = {{"train", 6}};
  s.frames = 8;
  s.height = 16;
  s.width = 16;
  s.seed = 3;
  make_synthetic_frame_tree(tmp / "frames", s);
  {
    std::ofstream f(tmp / "splits.json");
    nlohmann::json splits;
    for (int c = 0; c < 2; ++c)
      for (int v = 0; v < 6; ++v) {
        char id[32];
        std::snprintf(id, sizeof id, "train_v%04d", c * 6 + v);
        splits[v < 4 ? "train" : "test"].push_back(id);
      }
    f << splits.dump();
  }
  const std::string store = (tmp / "store").string();
  const std::string results = (tmp / "results").string();
  const Outcome c = invoke({"convert", "--src", (tmp / "frames").string(), "--out", store,
                            "--splits", (tmp / "splits.json").string()});
  REQUIRE_MESSAGE(c.code == 0, c.err);

  const Outcome t = invoke({"train", "--dataset", store, "--results", results, "--epochs", "3",
                            "--lr", "0.5", "--clip-length", "4", "--num-clips", "2"});
  REQUIRE_MESSAGE(t.code == 0, t.err);
  CHECK(nlohmann::json::parse(t.out).at("checkpoints").size() == 3);

  const Outcome e = invoke({"test", "--dataset", store, "--results", results, "--clip-length", "4",
                            "--num-clips", "2"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const auto report = nlohmann::json::parse(e.out);
  CHECK(report.at("videos").size() == 4);
  const fs::path file = tmp / "results" / "meanframe" / "store" / "default" / "default" /
                        "avg_pooling" / "metric_report.json";
  CHECK(fs::exists(file));

  const Outcome x = invoke({"extract", "--dataset", store, "--results", results, "--layer", "pooled",
                            "--clip-length", "4"});
  REQUIRE_MESSAGE(x.code == 0, x.err);
  CHECK(fs::exists(nlohmann::json::parse(x.out).at("features").get<std::string>()));

  const std::string ckpt = nlohmann::json::parse(t.out).at("checkpoints").back();
  const Outcome h = invoke({"inspect", ckpt});
  REQUIRE(h.code == 0);
  CHECK(nlohmann::json::parse(h.out).dump().find("epoch") != std::string::npos);
}

TEST_CASE("create-model scaffolds a directory") {
  testing::TempDir tmp;
  const Outcome o = invoke({"create-model", "mynet", "--models-root", (tmp / "models").string()});
  REQUIRE_MESSAGE(o.code == 0, o.err);
  CHECK(fs::is_directory(tmp / "models" / "mynet"));
  CHECK(invoke({"create-model", "mynet", "--models-root", (tmp / "models").string()}).code ==
        cli::kExitRuntime);
}
