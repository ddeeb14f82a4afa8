// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clipstream/record_store.hpp"
#include "clipstream/tensor.hpp"

namespace clipstream {

// How clips are cut from a video. An empty clip_length means the whole video
// as a single clip; an empty num_clips means as many clips as fit.
struct ClipSpec {
  std::optional<std::int64_t> clip_length;
  std::optional<std::int64_t> num_clips = 1;
  std::int64_t clip_offset = 0;
  std::int64_t clip_stride = 0;  // > 0 gap frames, < 0 overlap frames
  bool random_select = false;
  std::uint64_t seed = 0;

  bool whole() const { return !clip_length.has_value(); }
  bool all() const { return !num_clips.has_value(); }

  static ClipSpec whole_video() { return ClipSpec{std::nullopt, 1, 0, 0, false, 0}; }

  // Throws ValidationError when the spec violates its invariants.
  void validate() const;
  bool operator==(const ClipSpec&) const = default;
};

struct ClipWindow {
  std::string video_name;
  std::int64_t clip_index = 0;
  std::int64_t start = 0;
  std::vector<std::int64_t> frame_indices;

  bool operator==(const ClipWindow&) const = default;
};

std::vector<ClipWindow> plan_clips(std::int64_t num_frames, const ClipSpec& spec,
                                   const std::string& video_name = {});

// Number of windows plan_clips would produce, without materializing them.
std::int64_t count_clips(std::int64_t num_frames, const ClipSpec& spec);

RawClip extract_clip(const VideoRecord& record, const ClipWindow& window);

}  // namespace clipstream
