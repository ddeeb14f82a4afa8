// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/cli.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "clipstream/checkpoint.hpp"
#include "clipstream/errors.hpp"
#include "clipstream/model.hpp"
#include "clipstream/preprocess.hpp"
#include "clipstream/record_store.hpp"

namespace clipstream::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_run_command(const std::string& sub) {
  return sub == "train" || sub == "test" || sub == "extract";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cli", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flag values as typed on the command line. Each option carries a setter
// that copies its value into a RunConfig, applied only when the flag was
// given so config-file values survive.
struct RunFlags {
  RunConfig values;
  std::string clip_length = "whole";
  std::string num_clips = "1";
  std::string dataset;
  std::string results = "results";
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;
};

std::optional<std::int64_t> count_or_keyword(const std::string& text, const std::string& keyword,
                                             const std::string& flag) {
  if (text == keyword) return std::nullopt;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError(flag, "expected an integer or '" + keyword + "', got '" + text + "'");
}

template <typename T>
CLI::Option* bind_flag(CLI::App* app, RunFlags& f, const std::string& name, T& slot,
                  const std::string& help, std::function<void(RunConfig&)> setter) {
  CLI::Option* opt = app->add_option(name, slot, help)->capture_default_str();
  f.setters.emplace_back(opt, std::move(setter));
  return opt;
}

void add_run_flags(CLI::App* app, RunFlags& f) {
  RunConfig& v = f.values;
  bind_flag(app, f, "--dataset", f.dataset, "Converted dataset root",
       [&f](RunConfig& c) { c.dataset_root = f.dataset; })
      ->default_str("required");
  bind_flag(app, f, "--split", v.split, "Dataset split (default: train for train, test otherwise)",
       [&v](RunConfig& c) { c.split = v.split; });
  bind_flag(app, f, "--model", v.model, "Registered model name", [&v](RunConfig& c) { c.model = v.model; });
  bind_flag(app, f, "--preprocess", v.preprocess, "Registered preprocessing pipeline",
       [&v](RunConfig& c) { c.preprocess = v.preprocess; });
  bind_flag(app, f, "--loss", v.loss, "Loss type (cross_entropy, mean_squared_error)",
       [&v](RunConfig& c) { c.loss = v.loss; });
  bind_flag(app, f, "--batch-size", v.batch_size, "Clips per batch",
       [&v](RunConfig& c) { c.batch_size = v.batch_size; })
      ->check(CLI::PositiveNumber);
  bind_flag(app, f, "--clip-length", f.clip_length, "Frames per clip, or 'whole'",
       [&f](RunConfig& c) { c.clip.clip_length = count_or_keyword(f.clip_length, "whole", "--clip-length"); });
  bind_flag(app, f, "--num-clips", f.num_clips, "Clips per video, or 'all'",
       [&f](RunConfig& c) { c.clip.num_clips = count_or_keyword(f.num_clips, "all", "--num-clips"); });
  bind_flag(app, f, "--clip-offset", v.clip.clip_offset, "Frames skipped before the first clip",
       [&v](RunConfig& c) { c.clip.clip_offset = v.clip.clip_offset; })
      ->check(CLI::NonNegativeNumber);
  bind_flag(app, f, "--clip-stride", v.clip.clip_stride, "Gap between clips; negative values overlap",
       [&v](RunConfig& c) { c.clip.clip_stride = v.clip.clip_stride; });
  CLI::Option* random = app->add_flag("--random-extract", v.clip.random_select,
                                      "Pick clip start frames at random")
                            ->default_str("false");
  f.setters.emplace_back(random, [&v](RunConfig& c) { c.clip.random_select = v.clip.random_select; });
  bind_flag(app, f, "--workers", v.workers, "Pipeline worker threads",
       [&v](RunConfig& c) { c.workers = v.workers; })
      ->check(CLI::PositiveNumber);
  bind_flag(app, f, "--queue-capacity", v.queue_capacity, "Clips queue capacity (0 means 2 x batch size)",
       [&v](RunConfig& c) { c.queue_capacity = v.queue_capacity; })
      ->check(CLI::NonNegativeNumber);
  bind_flag(app, f, "--epochs", v.epochs, "Training epochs", [&v](RunConfig& c) { c.epochs = v.epochs; })
      ->check(CLI::PositiveNumber);
  bind_flag(app, f, "--lr", v.learning_rate, "Initial learning rate",
       [&v](RunConfig& c) { c.learning_rate = v.learning_rate; })
      ->check(CLI::NonNegativeNumber);
  bind_flag(app, f, "--momentum", v.momentum, "SGD momentum", [&v](RunConfig& c) { c.momentum = v.momentum; })
      ->check(CLI::Range(0.0, 1.0));
  bind_flag(app, f, "--plateau-window", v.plateau.window, "Iterations per plateau window",
       [&v](RunConfig& c) { c.plateau.window = v.plateau.window; })
      ->check(CLI::PositiveNumber);
  bind_flag(app, f, "--plateau-tolerance", v.plateau.tolerance, "Relative improvement required",
       [&v](RunConfig& c) { c.plateau.tolerance = v.plateau.tolerance; })
      ->check(CLI::NonNegativeNumber);
  bind_flag(app, f, "--decay", v.plateau.decay, "Learning-rate factor on a plateau",
       [&v](RunConfig& c) { c.plateau.decay = v.plateau.decay; });
  bind_flag(app, f, "--cooldown", v.plateau.cooldown, "Plateau decisions skipped after a decay",
       [&v](RunConfig& c) { c.plateau.cooldown = v.plateau.cooldown; })
      ->check(CLI::NonNegativeNumber);
  bind_flag(app, f, "--save-freq", v.save_freq, "Save a checkpoint every N epochs",
       [&v](RunConfig& c) { c.save_freq = v.save_freq; })
      ->check(CLI::PositiveNumber);
  bind_flag(app, f, "--metric", v.metric, "Video consensus (avg_pooling, last_frame)",
       [&v](RunConfig& c) { c.metric = v.metric; })
      ->check(CLI::IsMember({"avg_pooling", "last_frame"}));
  bind_flag(app, f, "--exp-name", v.experiment, "Experiment name",
       [&v](RunConfig& c) { c.experiment = v.experiment; });
  bind_flag(app, f, "--layer", v.layer, "Activation point to extract (extract only)",
       [&v](RunConfig& c) { c.layer = v.layer; })
      ->default_str("none");
  bind_flag(app, f, "--seed", v.seed, "Master seed", [&v](RunConfig& c) { c.seed = v.seed; });
  bind_flag(app, f, "--init", v.init, "Initial weights: zeros, uniform:<a> or a checkpoint path",
       [&v](RunConfig& c) { c.init = v.init; });
  bind_flag(app, f, "--results", f.results, "Results root directory",
       [&f](RunConfig& c) { c.results_root = f.results; });
  CLI::Option* resume = app->add_flag("--resume", v.resume, "Continue from the latest checkpoint")
                            ->default_str("false");
  f.setters.emplace_back(resume, [&v](RunConfig& c) { c.resume = v.resume; });
}

struct Parser {
  CLI::App app{"clipstream: video clip streaming and training harness", "clipstream"};
  RunFlags run_flags[3];
  std::string config_files[3];
  std::vector<std::string> pipeline_files[3];
  CliInvocation inv;
  std::string splits_file;

  Parser() {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    CLI::App* convert = app.add_subcommand("convert", "Convert frame folders or raw files into records");
    convert->add_option("--src", inv.src, "Source root laid out as <class>/<video>")->required();
    convert->add_option("--out", inv.out, "Output record store root")->required();
    convert->add_option("--splits", splits_file, "JSON file mapping split names to video lists");

    const char* run_names[3] = {"train", "test", "extract"};
    const char* run_help[3] = {"Train a model", "Evaluate the latest checkpoint",
                               "Write activations of one layer for a split"};
    for (int i = 0; i < 3; ++i) {
      CLI::App* sub = app.add_subcommand(run_names[i], run_help[i]);
      run_flags[i].values.split = i == 0 ? "train" : "test";
      add_run_flags(sub, run_flags[i]);
      sub->add_option("--config", config_files[i], "JSON config; explicit flags override it")
          ->default_str("none");
      sub->add_option("--pipelines", pipeline_files[i], "JSON pipeline definitions to register")
          ->default_str("none");
    }

    CLI::App* create = app.add_subcommand("create-model", "Scaffold a new model directory");
    create->add_option("name", inv.model_name, "Model identifier")->required();
    create->add_option("--models-root", inv.models_root, "Directory for model templates")
        ->capture_default_str();

    CLI::App* inspect = app.add_subcommand("inspect", "Print a record, checkpoint or index as JSON");
    inspect->add_option("path", inv.inspect_path, "Record file, checkpoint file or dataset root")
        ->required();
  }

  void finish_run(int i, const std::string& sub) {
    RunFlags& f = run_flags[i];
    RunConfig base;
    base.split = "";
    RunConfig cfg = config_files[i].empty() ? base
                                            : run_config_from_json(slurp(config_files[i]), base);
    for (auto& [opt, setter] : f.setters)
      if (opt->count() > 0) setter(cfg);
    if (cfg.split.empty()) cfg.split = sub == "train" ? "train" : "test";
    if (cfg.dataset_root.empty()) throw ConfigError("cli", "missing required flag --dataset");
    if (sub == "extract" && cfg.layer.empty()) throw ConfigError("cli", "missing required flag --layer");
    cfg.validate();
    inv.run = cfg;
    inv.pipeline_files.assign(pipeline_files[i].begin(), pipeline_files[i].end());
  }
};

json load_json_file(const fs::path& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw ConfigError("cli", "malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string inspect_json(const fs::path& path) {
  if (fs::is_directory(path)) return index_to_json(load_index(path));
  if (path.filename() == kIndexFileName) return index_to_json(load_index(path.parent_path()));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cli", "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (std::equal(magic, magic + 4, kRecordMagic)) {
    const RecordHeader h = read_record_header(path);
    return json{{"kind", "record"},
                {"name", h.name},
                {"class_name", h.class_name},
                {"label", h.label},
                {"num_frames", h.num_frames},
                {"height", h.height},
                {"width", h.width},
                {"channels", h.channels},
                {"file_size", h.file_size}}
        .dump(2);
  }
  if (std::equal(magic, magic + 4, kCheckpointMagic)) return checkpoint_header_json(path);
  throw ValidationError("cli", path.string() + " is not a record, checkpoint or dataset root");
}

}  // namespace

ParseResult parse(const std::vector<std::string>& args) {
  ParseResult result;
  Parser p;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    p.app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = p.app.get_subcommands();
    result.message = subs.empty() ? p.app.help() : subs.front()->help();
    return result;
  } catch (const CLI::CallForAllHelp&) {
    result.message = p.app.help("", CLI::AppFormatMode::All);
    return result;
  } catch (const CLI::ParseError& e) {
    result.exit_code = kExitUsage;
    result.message = std::string("usage error: ") + e.what();
    return result;
  }
  const std::string sub = p.app.get_subcommands().front()->get_name();
  p.inv.subcommand = sub;
  try {
    if (is_run_command(sub)) {
      const int i = sub == "train" ? 0 : sub == "test" ? 1 : 2;
      p.finish_run(i, sub);
    } else if (sub == "convert") {
      p.inv.splits_file = p.splits_file;
    }
  } catch (const CLI::ParseError& e) {
    result.exit_code = kExitUsage;
    result.message = std::string("usage error: ") + e.what();
    return result;
  } catch (const Error& e) {
    result.exit_code = kExitUsage;
    result.message = std::string("usage error: ") + e.what();
    return result;
  }
  result.invocation = std::move(p.inv);
  return result;
}

std::string help_text(const std::string& subcommand) {
  Parser p;
  if (subcommand.empty()) return p.app.help();
  return p.app.get_subcommand(subcommand)->help();
}

int run(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  try {
    for (const auto& file : inv.pipeline_files) preprocess_registry().load_file(file);
    const std::string& sub = inv.subcommand;
    if (sub == "convert") {
      std::optional<SplitLists> lists;
      if (!inv.splits_file.empty()) {
        const json j = load_json_file(inv.splits_file);
        try {
          lists = j.get<SplitLists>();
        } catch (const json::exception& e) {
          throw ConfigError("cli", "split file must map split names to lists of video names: " +
                                       std::string(e.what()));
        }
      }
      const ConversionResult r = convert_dataset(inv.src, inv.out, lists);
      json skipped = json::array();
      for (const auto& s : r.skipped) skipped.push_back({{"path", s.path}, {"reason", s.reason}});
      std::size_t records = 0;
      for (const auto& [name, entries] : r.index.splits) records += entries.size();
      for (const auto& w : r.warnings) err << "warning: " << w << "\n";
      out << json{{"root", inv.out.string()},
                  {"records", records},
                  {"classes", r.index.classes},
                  {"warnings", r.warnings},
                  {"skipped", skipped}}
                 .dump(2)
          << "\n";
    } else if (sub == "train") {
      const TrainReport r = train(inv.run);
      json checkpoints = json::array();
      for (const auto& c : r.checkpoints) checkpoints.push_back(c.string());
      out << json{{"iterations_per_epoch", r.iterations_per_epoch},
                  {"iterations", r.losses.size()},
                  {"final_loss", r.losses.empty() ? 0.0 : r.losses.back()},
                  {"final_learning_rate", r.learning_rates.empty() ? inv.run.learning_rate
                                                                   : r.learning_rates.back()},
                  {"epoch_seconds", r.epoch_seconds},
                  {"checkpoints", checkpoints},
                  {"aborted", r.aborted}}
                 .dump(2)
          << "\n";
      if (r.aborted) {
        err << "error: " << r.error << "\n";
        return kExitRuntime;
      }
    } else if (sub == "test") {
      const MetricReport r = test(inv.run);
      out << r.to_json() << "\n";
    } else if (sub == "extract") {
      const fs::path path = extract_features(inv.run, inv.run.layer);
      out << json{{"features", path.string()}, {"layer", inv.run.layer}}.dump(2) << "\n";
    } else if (sub == "create-model") {
      const fs::path dir = create_model_template(inv.model_name, inv.models_root);
      out << json{{"created", dir.string()}}.dump(2) << "\n";
    } else if (sub == "inspect") {
      out << inspect_json(inv.inspect_path) << "\n";
    } else {
      err << "usage error: unknown subcommand " << sub << "\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const ParseResult parsed = parse(args);
  if (!parsed.invocation) {
    (parsed.exit_code == kExitOk ? std::cout : std::cerr) << parsed.message << "\n";
    return parsed.exit_code;
  }
  return run(*parsed.invocation, std::cout, std::cerr);
}

}  // namespace clipstream::cli
