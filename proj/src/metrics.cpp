// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include <json.hpp>

#include "clipstream/errors.hpp"

namespace clipstream {

namespace {
constexpr const char* kModule = "metrics";
}

std::string consensus_name(Consensus method) {
  return method == Consensus::avg_pooling ? "avg_pooling" : "last_frame";
}

Consensus parse_consensus(const std::string& name) {
  if (name == "avg_pooling") return Consensus::avg_pooling;
  if (name == "last_frame") return Consensus::last_frame;
  throw ConfigError(kModule, "unknown metric '" + name + "' (available: avg_pooling, last_frame)");
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

std::int64_t argmax(std::span<const double> scores) {
  std::int64_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<std::int64_t>(i);
  return best;
}

VideoScores aggregate(const PredictionSet& preds, Consensus method) {
  const auto k = static_cast<std::size_t>(preds.num_classes);
  for (const auto& e : preds.entries)
    if (e.scores.size() != k)
      throw ConsistencyError(kModule, "entry for '" + e.video_name + "' has " +
                                          std::to_string(e.scores.size()) + " scores, expected " +
                                          std::to_string(k));

  VideoScores out;
  if (preds.granularity == Granularity::per_video) {
    for (const auto& e : preds.entries)
      if (!out.emplace(e.video_name, softmax(e.scores)).second)
        throw ConsistencyError(kModule, "per-video predictions contain '" + e.video_name +
                                            "' more than once");
    return out;
  }

  // Entries are grouped per video and put in a canonical order before
  // summing, so the result does not depend on arrival order.
  std::map<std::string, std::vector<const PredictionEntry*>> groups;
  for (const auto& e : preds.entries) groups[e.video_name].push_back(&e);
  for (auto& [name, group] : groups) {
    std::sort(group.begin(), group.end(), [](const PredictionEntry* a, const PredictionEntry* b) {
      return a->clip_index != b->clip_index ? a->clip_index < b->clip_index : a->scores < b->scores;
    });
    std::size_t first = 0;
    if (method == Consensus::last_frame) {
      first = group.size() - 1;
      while (first > 0 && group[first - 1]->clip_index == group.back()->clip_index) --first;
    }
    std::vector<double> sum(k, 0.0);
    for (std::size_t i = first; i < group.size(); ++i) {
      const auto p = softmax(group[i]->scores);
      for (std::size_t j = 0; j < k; ++j) sum[j] += p[j];
    }
    const auto count = static_cast<double>(group.size() - first);
    for (double& v : sum) v /= count;
    out.emplace(name, std::move(sum));
  }
  return out;
}

MetricReport top1_accuracy(const VideoScores& video_scores,
                           const std::map<std::string, std::uint32_t>& true_labels,
                           std::int64_t num_classes, const std::string& method) {
  MetricReport report;
  report.method = method;
  report.num_classes = num_classes;
  report.confusion.assign(static_cast<std::size_t>(num_classes),
                          std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
  std::int64_t correct = 0;
  for (const auto& [name, scores] : video_scores) {
    auto it = true_labels.find(name);
    if (it == true_labels.end()) throw ValidationError(kModule, "no true label for video '" + name + "'");
    if (it->second >= num_classes)
      throw ValidationError(kModule, "label " + std::to_string(it->second) + " of '" + name +
                                         "' is outside " + std::to_string(num_classes) + " classes");
    if (static_cast<std::int64_t>(scores.size()) != num_classes)
      throw ValidationError(kModule, "score vector of '" + name + "' has the wrong length");
    const std::int64_t pred = argmax(scores);
    report.videos.push_back({name, pred, it->second});
    ++report.confusion[it->second][static_cast<std::size_t>(pred)];
    if (pred == it->second) ++correct;
  }
  report.accuracy = report.videos.empty()
                        ? 0.0
                        : static_cast<double>(correct) / static_cast<double>(report.videos.size());
  return report;
}

std::string MetricReport::to_json() const {
  nlohmann::json videos_json = nlohmann::json::array();
  for (const auto& v : videos)
    videos_json.push_back({{"video", v.video_name}, {"predicted", v.predicted}, {"label", v.truth}});
  return nlohmann::json{{"method", method},
                        {"num_classes", num_classes},
                        {"accuracy", accuracy},
                        {"num_videos", videos.size()},
                        {"confusion", confusion},
                        {"videos", videos_json}}
      .dump(2);
}

void MetricReport::write(const std::filesystem::path& path) const {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << to_json() << "\n";
  if (!out) throw IoError(kModule, "cannot write metric report to " + path.string());
}

ScalarLog::ScalarLog(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw IoError(kModule, "cannot open scalar log " + path.string());
}

void ScalarLog::log_scalar(std::int64_t step, const std::string& tag, double value) {
  const double wall = std::chrono::duration<double>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
  nlohmann::json j = {{"step", step}, {"tag", tag}, {"value", value}, {"wall_time", wall}};
  // One write call per complete line.
  const std::string line = j.dump() + "\n";
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw IoError(kModule, "write to scalar log " + path_.string() + " failed");
}

}  // namespace clipstream
