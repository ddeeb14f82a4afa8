// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "clipstream/tensor.hpp"

namespace clipstream {

enum class CropKind { center, random, corner };
enum class ResampleMode { loop, stride };

struct ResizeStep {
  std::int64_t height = 0;
  std::int64_t width = 0;
};
struct CropStep {
  CropKind kind = CropKind::center;
  int corner = 0;  // 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right
  std::int64_t height = 0;
  std::int64_t width = 0;
};
struct FlipStep {
  double probability = 0.5;
};
struct NormalizeStep {
  std::vector<double> mean;
  double scale = 1.0;
};
struct ResampleStep {
  std::int64_t frames = 1;
  ResampleMode mode = ResampleMode::loop;
  std::int64_t stride = 1;
};
struct ShuffleStep {};
struct OversampleStep {
  std::int64_t height = 0;
  std::int64_t width = 0;
};

using Step = std::variant<ResizeStep, CropStep, FlipStep, NormalizeStep, ResampleStep,
                          ShuffleStep, OversampleStep>;

std::string step_name(const Step& step);

// Clip-level operations. Every spatial decision (crop window, flip) is made
// once per clip and applied to all of its frames.
Clip resize_bilinear(const Clip& clip, std::int64_t out_h, std::int64_t out_w);
Clip crop(const Clip& clip, CropKind kind, std::int64_t out_h, std::int64_t out_w,
          std::uint64_t seed = 0, int corner = 0);
Clip mirror(const Clip& clip);
Clip flip_horizontal(const Clip& clip, double probability, std::uint64_t seed);
Clip normalize(const Clip& clip, std::span<const double> per_channel_mean, double scale);
Clip resample_temporal(const Clip& clip, std::int64_t out_t, ResampleMode mode,
                       std::int64_t stride = 1);
Clip shuffle_frames(const Clip& clip, std::uint64_t seed);
// Center, four corners, then the mirror of each of those five.
std::vector<Clip> oversample(const Clip& clip, std::int64_t out_h, std::int64_t out_w);

// Top-left offset of a crop window.
struct CropOffset {
  std::int64_t y = 0;
  std::int64_t x = 0;
};
CropOffset crop_offset(std::int64_t h, std::int64_t w, CropKind kind, std::int64_t out_h,
                       std::int64_t out_w, std::uint64_t seed, int corner);

// A named, shape-checked sequence of steps with a fixed output shape.
class PreprocessFn {
 public:
  PreprocessFn() = default;

  const std::string& name() const { return name_; }
  const std::vector<Step>& steps() const { return steps_; }
  const Shape4& output_shape() const { return output_shape_; }
  bool is_training() const { return is_training_; }
  // Number of output clips per input clip (10 per oversample step).
  std::int64_t copies() const;

  // Same pipeline with randomized steps enabled (training) or replaced by
  // their deterministic counterparts (evaluation).
  PreprocessFn with_training(bool training) const;

  std::vector<Clip> apply(const RawClip& raw, std::uint64_t clip_seed) const;
  std::vector<Clip> apply(const Clip& clip, std::uint64_t clip_seed) const;

  std::string to_json() const;

 private:
  friend PreprocessFn make_pipeline(std::string, std::vector<Step>, Shape4);
  std::string name_;
  std::vector<Step> steps_;
  Shape4 output_shape_;
  bool is_training_ = true;
};

// Builds and shape-checks a pipeline without registering it. Dimensions not
// fixed by any step are unknown at composition time; T, H and W must be
// fixed by the steps, C may pass through and is checked when applied.
PreprocessFn make_pipeline(std::string name, std::vector<Step> steps, Shape4 output_shape);

PreprocessFn pipeline_from_json(const std::string& text);

class PreprocessRegistry {
 public:
  const PreprocessFn& compose(std::string name, std::vector<Step> steps, Shape4 output_shape);
  const PreprocessFn& add(PreprocessFn fn);
  PreprocessFn lookup(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

  // Registers every pipeline in a JSON file holding one definition or a list.
  std::vector<std::string> load_file(const std::filesystem::path& path);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, PreprocessFn> fns_;
};

// Process-wide registry, pre-populated with "default", "augment" and
// "oversample" (all producing (8, 16, 16, 3)).
PreprocessRegistry& preprocess_registry();

void register_builtin_pipelines(PreprocessRegistry& registry);

}  // namespace clipstream
