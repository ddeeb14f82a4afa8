// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/executor.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "clipstream/checkpoint.hpp"
#include "clipstream/errors.hpp"
#include "clipstream/preprocess.hpp"
#include "clipstream/rng.hpp"

namespace clipstream {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "executor";
constexpr const char* kVelocityPrefix = "optimizer/velocity/";
constexpr const char* kPlateauTensor = "optimizer/plateau_recent";

double mean_of(const std::deque<double>& d, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += d[i];
  return sum / static_cast<double>(end - begin);
}

// Everything a run needs resolved before the first batch.
struct Resolved {
  DatasetIndex index;
  PreprocessFn preprocess;
  std::unique_ptr<Model> model;
  Consensus consensus = Consensus::avg_pooling;
};

Resolved resolve(const RunConfig& cfg) {
  cfg.validate();
  Resolved r;
  r.index = load_index(cfg.dataset_root);
  try {
    r.preprocess = preprocess_registry().lookup(cfg.preprocess);
  } catch (const NotFoundError& e) {
    throw ConfigError(kModule, e.what());
  }
  r.model = model_registry().create(cfg.model, r.preprocess.output_shape(),
                                    static_cast<std::int64_t>(r.index.num_classes()));
  const auto& losses = r.model->spec().loss_types;
  if (std::find(losses.begin(), losses.end(), cfg.loss) == losses.end()) {
    std::string supported;
    for (const auto& l : losses) supported += (supported.empty() ? "" : ", ") + l;
    throw ConfigError(kModule, "model " + cfg.model + " does not support loss '" + cfg.loss +
                                   "' (supported: " + supported + ")");
  }
  r.consensus = parse_consensus(cfg.metric);
  if (!r.index.splits.count(cfg.split))
    throw ConfigError(kModule, "dataset " + cfg.dataset_root.string() + " has no split '" + cfg.split + "'");
  return r;
}

// Random clip selection draws from both the master seed and the spec's own.
ClipSpec effective_clip(const RunConfig& cfg) {
  ClipSpec spec = cfg.clip;
  spec.seed = mix_seed(cfg.seed, cfg.clip.seed);
  return spec;
}

fs::path require_checkpoint(const RunConfig& cfg) {
  const fs::path dir = cfg.checkpoint_directory();
  try {
    return latest_checkpoint(dir);
  } catch (const NotFoundError&) {
    throw NotFoundError(kModule, "no checkpoint found; searched " + dir.string());
  }
}

CheckpointBundle make_bundle(const RunConfig& cfg, const ModelState& state, const ParamMap& velocity,
                             const PlateauScheduler& scheduler, std::int64_t epoch, double lr) {
  CheckpointBundle bundle;
  for (const auto& [name, value] : state.parameters)
    bundle.tensors.emplace(name, TensorEntry::from_array(value));
  for (const auto& [name, value] : velocity)
    bundle.tensors.emplace(kVelocityPrefix + name, TensorEntry::from_array(value));
  NdArray recent({static_cast<std::int64_t>(scheduler.recent().size())});
  std::copy(scheduler.recent().begin(), scheduler.recent().end(), recent.values.begin());
  bundle.tensors.emplace(kPlateauTensor, TensorEntry::from_array(recent));
  bundle.meta.epoch = epoch;
  bundle.meta.global_step = state.step;
  bundle.meta.learning_rate = lr;
  bundle.meta.model = cfg.model;
  bundle.meta.dataset = cfg.dataset_name();
  bundle.meta.preprocessing = cfg.preprocess;
  bundle.meta.experiment = cfg.experiment;
  bundle.meta.metric = cfg.metric;
  bundle.meta.extra = nlohmann::json{{"plateau_iterations", scheduler.iterations()},
                                     {"plateau_cooldown_remaining", scheduler.cooldown_remaining()},
                                     {"seed", cfg.seed}}
                          .dump();
  return bundle;
}

}  // namespace

// ---------------------------------------------------------------------------
// Plateau

double PlateauScheduler::step(double loss, double lr) {
  const auto w = static_cast<std::size_t>(cfg_.window);
  ++iterations_;
  recent_.push_back(loss);
  if (recent_.size() > 2 * w) recent_.pop_front();
  if (iterations_ < 2 * cfg_.window || iterations_ % cfg_.window != 0) return lr;
  if (cooldown_remaining_ > 0) {
    --cooldown_remaining_;
    return lr;
  }
  const double previous = mean_of(recent_, 0, w);
  const double current = mean_of(recent_, w, 2 * w);
  if (previous - current > cfg_.tolerance * std::abs(previous)) return lr;
  cooldown_remaining_ = cfg_.cooldown;
  return lr * cfg_.decay;
}

void PlateauScheduler::restore(std::int64_t iterations, std::int64_t cooldown_remaining,
                               std::vector<double> recent) {
  iterations_ = iterations;
  cooldown_remaining_ = cooldown_remaining;
  recent_.assign(recent.begin(), recent.end());
}

double plateau_step(std::span<const double> loss_history, double lr, const PlateauConfig& cfg) {
  if (loss_history.empty()) return lr;
  PlateauScheduler scheduler(cfg);
  for (std::size_t i = 0; i + 1 < loss_history.size(); ++i) scheduler.step(loss_history[i], 1.0);
  return scheduler.step(loss_history.back(), lr);
}

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  if (model.empty()) throw ConfigError(kModule, "no model selected");
  if (dataset_root.empty()) throw ConfigError(kModule, "no dataset selected");
  if (batch_size < 1) throw ConfigError(kModule, "batch size must be >= 1");
  if (workers < 1) throw ConfigError(kModule, "workers must be >= 1");
  if (queue_capacity != 0 && queue_capacity < batch_size)
    throw ConfigError(kModule, "queue capacity must be at least the batch size");
  if (epochs < 1) throw ConfigError(kModule, "epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError(kModule, "learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError(kModule, "momentum must be in [0, 1)");
  if (plateau.window < 1) throw ConfigError(kModule, "plateau window must be >= 1");
  if (!(plateau.tolerance >= 0.0)) throw ConfigError(kModule, "plateau tolerance must be >= 0");
  if (!(plateau.decay > 0.0 && plateau.decay < 1.0))
    throw ConfigError(kModule, "decay factor must be in (0, 1)");
  if (plateau.cooldown < 0) throw ConfigError(kModule, "cooldown must be >= 0");
  if (save_freq < 1) throw ConfigError(kModule, "save frequency must be >= 1");
  try {
    clip.validate();
    validate_path_component(experiment, "experiment name");
  } catch (const ValidationError& e) {
    throw ConfigError(kModule, e.what());
  }
  parse_consensus(metric);
}

std::string RunConfig::dataset_name() const {
  fs::path p = dataset_root.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

fs::path RunConfig::checkpoint_directory() const {
  return checkpoint_dir(model, dataset_name(), preprocess, experiment, metric, results_root);
}

fs::path RunConfig::results_directory() const { return checkpoint_directory().parent_path(); }

PipelineConfig RunConfig::pipeline_config(Mode mode, std::uint64_t shuffle_seed) const {
  PipelineConfig p;
  p.batch_size = batch_size;
  p.num_workers = workers;
  p.clips_queue_capacity = queue_capacity;
  p.shuffle_seed = shuffle_seed;
  p.mode = mode;
  return p;
}

std::uint64_t epoch_seed(std::uint64_t master_seed, std::int64_t epoch) {
  return mix_seed(mix_seed(master_seed, "epoch"), static_cast<std::uint64_t>(epoch));
}

std::string run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["model"] = c.model;
  j["dataset"] = c.dataset_root.string();
  j["split"] = c.split;
  j["preprocess"] = c.preprocess;
  j["loss"] = c.loss;
  j["clip_length"] = c.clip.clip_length ? nlohmann::json(*c.clip.clip_length) : nlohmann::json("whole");
  j["num_clips"] = c.clip.num_clips ? nlohmann::json(*c.clip.num_clips) : nlohmann::json("all");
  j["clip_offset"] = c.clip.clip_offset;
  j["clip_stride"] = c.clip.clip_stride;
  j["random_extract"] = c.clip.random_select;
  j["clip_seed"] = c.clip.seed;
  j["batch_size"] = c.batch_size;
  j["workers"] = c.workers;
  j["queue_capacity"] = c.queue_capacity;
  j["epochs"] = c.epochs;
  j["lr"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["plateau_window"] = c.plateau.window;
  j["plateau_tolerance"] = c.plateau.tolerance;
  j["decay"] = c.plateau.decay;
  j["cooldown"] = c.plateau.cooldown;
  j["save_freq"] = c.save_freq;
  j["exp_name"] = c.experiment;
  j["metric"] = c.metric;
  j["seed"] = c.seed;
  j["init"] = c.init;
  j["results"] = c.results_root.string();
  j["resume"] = c.resume;
  j["layer"] = c.layer;
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text, RunConfig c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(kModule, std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError(kModule, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "model") c.model = v.get<std::string>();
      else if (key == "dataset") c.dataset_root = v.get<std::string>();
      else if (key == "split") c.split = v.get<std::string>();
      else if (key == "preprocess") c.preprocess = v.get<std::string>();
      else if (key == "loss") c.loss = v.get<std::string>();
      else if (key == "clip_length") {
        if (v.is_string() && v.get<std::string>() == "whole") c.clip.clip_length.reset();
        else c.clip.clip_length = v.get<std::int64_t>();
      } else if (key == "num_clips") {
        if (v.is_string() && v.get<std::string>() == "all") c.clip.num_clips.reset();
        else c.clip.num_clips = v.get<std::int64_t>();
      } else if (key == "clip_offset") c.clip.clip_offset = v.get<std::int64_t>();
      else if (key == "clip_stride") c.clip.clip_stride = v.get<std::int64_t>();
      else if (key == "random_extract") c.clip.random_select = v.get<bool>();
      else if (key == "clip_seed") c.clip.seed = v.get<std::uint64_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::int64_t>();
      else if (key == "workers") c.workers = v.get<int>();
      else if (key == "queue_capacity") c.queue_capacity = v.get<std::int64_t>();
      else if (key == "epochs") c.epochs = v.get<std::int64_t>();
      else if (key == "lr") c.learning_rate = v.get<double>();
      else if (key == "momentum") c.momentum = v.get<double>();
      else if (key == "plateau_window") c.plateau.window = v.get<std::int64_t>();
      else if (key == "plateau_tolerance") c.plateau.tolerance = v.get<double>();
      else if (key == "decay") c.plateau.decay = v.get<double>();
      else if (key == "cooldown") c.plateau.cooldown = v.get<std::int64_t>();
      else if (key == "save_freq") c.save_freq = v.get<std::int64_t>();
      else if (key == "exp_name") c.experiment = v.get<std::string>();
      else if (key == "metric") c.metric = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "init") c.init = v.get<std::string>();
      else if (key == "results") c.results_root = v.get<std::string>();
      else if (key == "resume") c.resume = v.get<bool>();
      else if (key == "layer") c.layer = v.get<std::string>();
      else throw ConfigError(kModule, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(kModule, std::string("bad config value: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Training

TrainReport train(const RunConfig& cfg) {
  Resolved r = resolve(cfg);
  const ModelSpec& spec = r.model->spec();
  const std::int64_t ipe = iterations_per_epoch(r.index, cfg.split, cfg.clip, cfg.batch_size,
                                                r.preprocess.copies());
  const fs::path ckdir = cfg.checkpoint_directory();

  TrainReport report;
  report.iterations_per_epoch = ipe;
  ModelState state;
  ParamMap velocity;
  PlateauScheduler scheduler(cfg.plateau);
  double lr = cfg.learning_rate;
  std::int64_t start_epoch = 0;

  if (cfg.resume) {
    const fs::path path = require_checkpoint(cfg);
    const CheckpointBundle bundle = load_checkpoint(path);
    state = state_from_bundle(spec, bundle);
    for (const auto& p : spec.manifest) {
      auto it = bundle.tensors.find(kVelocityPrefix + p.name);
      velocity[p.name] = it != bundle.tensors.end() ? it->second.to_array() : NdArray(p.shape);
    }
    std::vector<double> recent;
    if (auto it = bundle.tensors.find(kPlateauTensor); it != bundle.tensors.end())
      recent = it->second.to_array().values;
    const auto extra = nlohmann::json::parse(bundle.meta.extra);
    scheduler.restore(extra.value("plateau_iterations", std::int64_t{0}),
                      extra.value("plateau_cooldown_remaining", std::int64_t{0}), std::move(recent));
    lr = bundle.meta.learning_rate;
    start_epoch = bundle.meta.epoch;
  } else {
    state = load_default_weights(spec, InitSpec::parse(cfg.init), cfg.seed);
    check_manifest(spec, state.parameters);
    for (const auto& p : spec.manifest) velocity[p.name] = NdArray(p.shape);
  }
  report.first_epoch = start_epoch;

  ScalarLog log(cfg.results_directory() / "events.jsonl");
  for (std::int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    BatchStream stream(r.index, cfg.split, effective_clip(cfg), r.preprocess,
                       cfg.pipeline_config(Mode::train, epoch_seed(cfg.seed, epoch)));
    for (std::int64_t it = 0; it < ipe; ++it) {
      auto batch = stream.next_batch();
      if (!batch) throw IntegrityError(kModule, "training stream ended early");
      const BatchView view = batch->view();
      const ForwardResult fwd = r.model->forward(state, view);
      const LossResult loss = compute_loss(fwd.logits, batch->labels, cfg.loss, spec);
      const ParamMap grads = r.model->backward(state, view, loss.logit_gradient);
      for (auto& [name, value] : state.parameters) {
        NdArray& v = velocity.at(name);
        const NdArray& g = grads.at(name);
        for (std::size_t i = 0; i < value.values.size(); ++i) {
          v.values[i] = cfg.momentum * v.values[i] - lr * g.values[i];
          value.values[i] += v.values[i];
        }
      }
      ++state.step;
      report.losses.push_back(loss.value);
      lr = scheduler.step(loss.value, lr);
      report.learning_rates.push_back(lr);
      log.log_scalar(state.step, "train/loss", loss.value);
      log.log_scalar(state.step, "train/learning_rate", lr);
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epoch_seconds.push_back(seconds);
    log.log_scalar(state.step, "train/epoch_seconds", seconds);

    const bool last = epoch + 1 == cfg.epochs;
    if ((epoch + 1) % cfg.save_freq == 0 || last) {
      try {
        report.checkpoints.push_back(
            save_checkpoint(make_bundle(cfg, state, velocity, scheduler, epoch + 1, lr), ckdir));
      } catch (const IoError& e) {
        report.aborted = true;
        report.error = e.what();
        break;
      }
    }
  }
  report.final_state = std::move(state);
  return report;
}

// ---------------------------------------------------------------------------
// Testing and feature extraction

namespace {

struct Evaluated {
  Resolved resolved;
  ModelState state;
};

Evaluated load_for_eval(const RunConfig& cfg) {
  Evaluated e{resolve(cfg), {}};
  const fs::path path = require_checkpoint(cfg);
  e.state = state_from_bundle(e.resolved.model->spec(), load_checkpoint(path));
  return e;
}

}  // namespace

MetricReport test(const RunConfig& cfg) {
  Evaluated e = load_for_eval(cfg);
  const ModelSpec& spec = e.resolved.model->spec();
  BatchStream stream(e.resolved.index, cfg.split, effective_clip(cfg), e.resolved.preprocess,
                     cfg.pipeline_config(Mode::test, epoch_seed(cfg.seed, 0)));
  PredictionSet preds;
  preds.granularity = Granularity::per_clip;
  preds.num_classes = spec.num_classes;
  std::map<std::string, std::uint32_t> labels;
  while (auto batch = stream.next_batch()) {
    const ForwardResult fwd = e.resolved.model->forward(e.state, batch->view());
    for (std::int64_t b = 0; b < batch->size; ++b) {
      const auto& prov = batch->provenance[static_cast<std::size_t>(b)];
      const auto row = fwd.logits.values.begin() + b * spec.num_classes;
      preds.entries.push_back({prov.video_name, prov.clip_index,
                               std::vector<double>(row, row + spec.num_classes)});
      labels[prov.video_name] = batch->labels[static_cast<std::size_t>(b)];
    }
  }
  MetricReport report =
      top1_accuracy(aggregate(preds, e.resolved.consensus), labels, spec.num_classes, cfg.metric);
  report.write(cfg.results_directory() / "metric_report.json");
  ScalarLog log(cfg.results_directory() / "events.jsonl");
  log.log_scalar(e.state.step, "test/accuracy", report.accuracy);
  return report;
}

fs::path extract_features(const RunConfig& cfg, const std::string& layer) {
  Evaluated e = load_for_eval(cfg);
  const ModelSpec& spec = e.resolved.model->spec();
  const auto& points = spec.activation_points;
  if (std::find(points.begin(), points.end(), layer) == points.end()) {
    std::string available;
    for (const auto& p : points) available += (available.empty() ? "\"" : ", \"") + p + "\"";
    throw ConfigError(kModule, "unknown layer '" + layer + "'; available: [" + available + "]");
  }
  validate_path_component(layer, "layer name");
  BatchStream stream(e.resolved.index, cfg.split, effective_clip(cfg), e.resolved.preprocess,
                     cfg.pipeline_config(Mode::test, epoch_seed(cfg.seed, 0)));
  std::vector<double> rows;
  std::int64_t dim = 0;
  std::int64_t count = 0;
  nlohmann::json provenance = nlohmann::json::array();
  while (auto batch = stream.next_batch()) {
    const ForwardResult fwd = e.resolved.model->forward(e.state, batch->view());
    const NdArray& act = fwd.activations.at(layer);
    dim = act.numel() / batch->size;
    rows.insert(rows.end(), act.values.begin(), act.values.end());
    count += batch->size;
    for (std::int64_t b = 0; b < batch->size; ++b) {
      const auto& p = batch->provenance[static_cast<std::size_t>(b)];
      provenance.push_back({{"video", p.video_name},
                            {"clip_index", p.clip_index},
                            {"copy", p.copy},
                            {"label", batch->labels[static_cast<std::size_t>(b)]}});
    }
  }
  NdArray features({count, dim});
  features.values = std::move(rows);
  CheckpointBundle bundle;
  bundle.tensors.emplace("features", TensorEntry::from_array(features));
  bundle.meta.epoch = 0;
  bundle.meta.global_step = e.state.step;
  bundle.meta.model = cfg.model;
  bundle.meta.dataset = cfg.dataset_name();
  bundle.meta.preprocessing = cfg.preprocess;
  bundle.meta.experiment = cfg.experiment;
  bundle.meta.metric = cfg.metric;
  bundle.meta.extra = nlohmann::json{{"layer", layer}, {"split", cfg.split}, {"provenance", provenance}}.dump();
  const fs::path out = cfg.results_directory() / ("features-" + layer + ".mpck");
  fs::create_directories(out.parent_path());
  write_container(bundle, out);
  return out;
}

}  // namespace clipstream
