// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "clipstream/record_store.hpp"

namespace clipstream {

// Gaussian-noise videos whose pixels centre on a per-class level in [0, 1].
struct SyntheticSpec {
  std::vector<double> class_means = {0.25, 0.75};
  double noise_sigma = 0.1;
  std::map<std::string, std::int64_t> videos_per_class = {{"train", 4}};
  std::uint32_t frames = 8;
  std::uint32_t height = 16;
  std::uint32_t width = 16;
  std::uint32_t channels = 3;
  // When set, video v gets frames_min + (v % (frames - frames_min + 1)) frames.
  std::uint32_t frames_min = 0;
  std::uint64_t seed = 0;
};

// Writes records and index.json directly under root.
DatasetIndex make_synthetic_dataset(const std::filesystem::path& root, const SyntheticSpec& spec);

// Same content as directories of numbered PPM frames, ready for convert.
void make_synthetic_frame_tree(const std::filesystem::path& root, const SyntheticSpec& spec,
                               const std::string& split = "train");

}  // namespace clipstream
