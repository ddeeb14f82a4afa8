// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "clipstream/errors.hpp"
#include "clipstream/rng.hpp"

namespace clipstream {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "synthetic";

std::string class_name(std::size_t label) { return "class" + std::to_string(label); }

std::string video_id(const std::string& split, std::int64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_v%04lld", split.c_str(), static_cast<long long>(v));
  return buf;
}

std::uint32_t frame_count(const SyntheticSpec& spec, std::int64_t v) {
  if (spec.frames_min == 0 || spec.frames_min >= spec.frames) return spec.frames;
  const std::int64_t range = spec.frames - spec.frames_min + 1;
  return spec.frames_min + static_cast<std::uint32_t>(v % range);
}

std::vector<Frame> make_frames(const SyntheticSpec& spec, std::size_t label,
                               const std::string& split, std::int64_t v) {
  Rng rng(mix_seed(mix_seed(mix_seed(spec.seed, split), label), static_cast<std::uint64_t>(v)));
  const double mean = spec.class_means[label];
  std::vector<Frame> frames(frame_count(spec, v));
  for (auto& f : frames) {
    f.height = spec.height;
    f.width = spec.width;
    f.channels = spec.channels;
    f.pixels.resize(std::size_t{spec.height} * spec.width * spec.channels);
    for (auto& p : f.pixels) {
      const double value = 255.0 * (mean + spec.noise_sigma * rng.normal());
      p = static_cast<std::uint8_t>(std::clamp(std::round(value), 0.0, 255.0));
    }
  }
  return frames;
}

void check(const SyntheticSpec& spec) {
  if (spec.class_means.empty()) throw ConfigError(kModule, "at least one class is required");
  if (spec.frames == 0 || spec.height == 0 || spec.width == 0)
    throw ConfigError(kModule, "frame dimensions must be positive");
  if (spec.channels != 1 && spec.channels != 3) throw ConfigError(kModule, "channels must be 1 or 3");
}

}  // namespace

DatasetIndex make_synthetic_dataset(const fs::path& root, const SyntheticSpec& spec) {
  check(spec);
  DatasetIndex index;
  index.root = root;
  for (std::size_t k = 0; k < spec.class_means.size(); ++k) {
    index.classes.push_back(class_name(k));
    fs::create_directories(root / class_name(k));
  }
  for (const auto& [split, per_class] : spec.videos_per_class) {
    auto& entries = index.splits[split];
    for (std::int64_t v = 0; v < per_class; ++v) {
      for (std::size_t k = 0; k < spec.class_means.size(); ++k) {
        const auto frames = make_frames(spec, k, split, v);
        const std::string id = video_id(split, v);
        const std::string rel = class_name(k) + "/" + id + ".mprv";
        write_record(frames, static_cast<std::uint32_t>(k), class_name(k) + "/" + id, class_name(k),
                     root / rel);
        entries.push_back({rel, static_cast<std::uint32_t>(k),
                           static_cast<std::uint32_t>(frames.size())});
      }
    }
  }
  save_index(index);
  return index;
}

void make_synthetic_frame_tree(const fs::path& root, const SyntheticSpec& spec,
                               const std::string& split) {
  check(spec);
  auto it = spec.videos_per_class.find(split);
  if (it == spec.videos_per_class.end()) throw ConfigError(kModule, "no video count for split " + split);
  for (std::size_t k = 0; k < spec.class_means.size(); ++k) {
    for (std::int64_t v = 0; v < it->second; ++v) {
      const fs::path dir = root / class_name(k) / video_id(split, v);
      fs::create_directories(dir);
      const auto frames = make_frames(spec, k, split, v);
      for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.ppm", i + 1);
        write_ppm(frames[i], dir / name);
      }
    }
  }
}

}  // namespace clipstream
