// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace clipstream {

enum class Granularity { per_clip, per_video };
enum class Consensus { avg_pooling, last_frame };

std::string consensus_name(Consensus method);
Consensus parse_consensus(const std::string& name);

struct PredictionEntry {
  std::string video_name;
  std::int64_t clip_index = 0;
  std::vector<double> scores;  // raw, pre-softmax
};

struct PredictionSet {
  std::vector<PredictionEntry> entries;
  Granularity granularity = Granularity::per_clip;
  std::int64_t num_classes = 0;
};

using VideoScores = std::map<std::string, std::vector<double>>;

std::vector<double> softmax(std::span<const double> scores);

// Softmaxes every entry exactly once, then reduces per video: the mean over
// clips (avg_pooling) or the entry with the highest clip_index (last_frame;
// entries tied on that index, e.g. oversampled copies, are averaged).
VideoScores aggregate(const PredictionSet& preds, Consensus method);

// Index of the maximum; ties go to the lowest index.
std::int64_t argmax(std::span<const double> scores);

struct VideoPrediction {
  std::string video_name;
  std::int64_t predicted = 0;
  std::int64_t truth = 0;
};

struct MetricReport {
  std::vector<VideoPrediction> videos;
  double accuracy = 0.0;
  std::vector<std::vector<std::int64_t>> confusion;  // [truth][predicted]
  std::string method;
  std::int64_t num_classes = 0;

  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

MetricReport top1_accuracy(const VideoScores& video_scores,
                           const std::map<std::string, std::uint32_t>& true_labels,
                           std::int64_t num_classes, const std::string& method);

// Append-only JSON-lines scalar log: {"step", "tag", "value", "wall_time"}.
class ScalarLog {
 public:
  explicit ScalarLog(const std::filesystem::path& path);
  void log_scalar(std::int64_t step, const std::string& tag, double value);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace clipstream
