// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <filesystem>
#include <string>
#include <vector>

#include "clipstream/clip_engine.hpp"
#include "clipstream/metrics.hpp"
#include "clipstream/model.hpp"
#include "clipstream/pipeline.hpp"

namespace clipstream {

struct PlateauConfig {
  std::int64_t window = 10;
  double tolerance = 0.01;  // relative improvement required
  double decay = 0.1;
  std::int64_t cooldown = 0;  // decision boundaries skipped after a decay

  bool operator==(const PlateauConfig&) const = default;
};

// Learning-rate decay on a training-loss plateau. A decision is made every
// `window` iterations once 2 * window losses exist: if the mean of the last
// window did not improve on the mean of the window before it by at least
// `tolerance` (relative), the rate is multiplied by `decay`.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauConfig cfg) : cfg_(cfg) {}

  // Records one iteration's loss and returns the rate for what follows.
  double step(double loss, double lr);

  std::int64_t iterations() const { return iterations_; }
  std::int64_t cooldown_remaining() const { return cooldown_remaining_; }
  const std::deque<double>& recent() const { return recent_; }
  void restore(std::int64_t iterations, std::int64_t cooldown_remaining,
               std::vector<double> recent);

 private:
  PlateauConfig cfg_;
  std::int64_t iterations_ = 0;
  std::int64_t cooldown_remaining_ = 0;
  std::deque<double> recent_;  // last 2 * window losses
};

// Stateless form: replays the whole history through a fresh scheduler and
// returns the rate after its last entry.
double plateau_step(std::span<const double> loss_history, double lr, const PlateauConfig& cfg);

struct RunConfig {
  std::string model = "meanframe";
  std::filesystem::path dataset_root;
  std::string split = "train";
  std::string preprocess = "default";
  std::string loss = "cross_entropy";
  ClipSpec clip;
  std::int64_t batch_size = 4;
  int workers = 1;
  std::int64_t queue_capacity = 0;
  std::int64_t epochs = 1;
  double learning_rate = 0.01;
  double momentum = 0.9;
  PlateauConfig plateau;
  std::int64_t save_freq = 1;
  std::string experiment = "default";
  std::string metric = "avg_pooling";
  std::uint64_t seed = 0;
  std::string init = "uniform:0.01";
  std::filesystem::path results_root = "results";
  bool resume = false;
  std::string layer;

  void validate() const;
  std::string dataset_name() const;
  std::filesystem::path checkpoint_directory() const;
  std::filesystem::path results_directory() const;
  PipelineConfig pipeline_config(Mode mode, std::uint64_t shuffle_seed) const;

  bool operator==(const RunConfig&) const = default;
};

std::string run_config_to_json(const RunConfig& cfg);
// Fields missing from the JSON keep the values already in `base`.
RunConfig run_config_from_json(const std::string& text, RunConfig base = {});

struct TrainReport {
  std::vector<double> losses;
  std::vector<double> learning_rates;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<double> epoch_seconds;
  std::int64_t iterations_per_epoch = 0;
  std::int64_t first_epoch = 0;
  ModelState final_state;
  // Set when a checkpoint write failed; training stopped at that point.
  bool aborted = false;
  std::string error;
};

TrainReport train(const RunConfig& cfg);
MetricReport test(const RunConfig& cfg);
std::filesystem::path extract_features(const RunConfig& cfg, const std::string& layer);

// Stream seed for one epoch.
std::uint64_t epoch_seed(std::uint64_t master_seed, std::int64_t epoch);

}  // namespace clipstream
