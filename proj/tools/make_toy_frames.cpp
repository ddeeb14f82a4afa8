// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// Writes a synthetic two-class dataset as <class>/<video>/frame_NNNN.ppm
// folders plus a split file, ready for `clipstream convert`.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "clipstream/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a toy frame-folder dataset"};
  std::string out;
  std::int64_t train_videos = 8;
  std::int64_t test_videos = 8;
  clipstream::SyntheticSpec spec;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--train-videos", train_videos, "Training videos per class")->capture_default_str();
  app.add_option("--test-videos", test_videos, "Test videos per class")->capture_default_str();
  app.add_option("--frames", spec.frames, "Frames per video")->capture_default_str();
  app.add_option("--height", spec.height, "Frame height")->capture_default_str();
  app.add_option("--width", spec.width, "Frame width")->capture_default_str();
  app.add_option("--seed", spec.seed, "Noise seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  spec.videos_per_class = {{"train", train_videos}, {"test", test_videos}};
  nlohmann::json splits;
  for (const auto& [split, n] : spec.videos_per_class) {
    clipstream::make_synthetic_frame_tree(out, spec, split);
    auto& names = splits[split] = nlohmann::json::array();
    for (std::size_t k = 0; k < spec.class_means.size(); ++k)
      for (std::int64_t v = 0; v < n; ++v) {
        char id[32];
        std::snprintf(id, sizeof id, "%s_v%04lld", split.c_str(), static_cast<long long>(v));
        names.push_back("class" + std::to_string(k) + "/" + id);
      }
  }
  std::ofstream(std::filesystem::path(out) / "splits.json") << splits.dump(2) << "\n";
  std::cout << out << "\n";
  return 0;
}
