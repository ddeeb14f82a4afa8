// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/clip_engine.hpp"

#include <algorithm>
#include <cstring>

#include "clipstream/errors.hpp"
#include "clipstream/rng.hpp"

namespace clipstream {

namespace {

constexpr const char* kModule = "clip_engine";

ClipWindow make_window(const std::string& name, std::int64_t k, std::int64_t start,
                       std::int64_t length, std::int64_t num_frames) {
  ClipWindow w{name, k, start, {}};
  w.frame_indices.resize(static_cast<std::size_t>(length));
  for (std::int64_t j = 0; j < length; ++j)
    w.frame_indices[static_cast<std::size_t>(j)] = (start + j) % num_frames;
  return w;
}

}  // namespace

void ClipSpec::validate() const {
  if (clip_length && *clip_length < 1) throw ValidationError(kModule, "clip length must be >= 1");
  if (num_clips && *num_clips < 1) throw ValidationError(kModule, "number of clips must be >= 1");
  if (clip_offset < 0) throw ValidationError(kModule, "clip offset must be >= 0");
  if (random_select && whole())
    throw ValidationError(kModule, "random clip selection needs a finite clip length");
  if (random_select && all())
    throw ValidationError(kModule, "random clip selection needs a finite number of clips");
  if (!whole() && clip_stride < 0 && -clip_stride >= *clip_length)
    throw ValidationError(kModule, "overlap " + std::to_string(-clip_stride) +
                                       " must be smaller than the clip length " +
                                       std::to_string(*clip_length));
}

std::vector<ClipWindow> plan_clips(std::int64_t num_frames, const ClipSpec& spec,
                                   const std::string& video_name) {
  if (num_frames < 1) throw ValidationError(kModule, "video has no frames");
  spec.validate();
  std::vector<ClipWindow> windows;

  if (spec.whole()) {
    windows.push_back(make_window(video_name, 0, 0, num_frames, num_frames));
    return windows;
  }

  const std::int64_t length = *spec.clip_length;
  if (spec.random_select) {
    Rng rng(spec.seed);
    const std::int64_t hi = std::max<std::int64_t>(num_frames - length, 0);
    std::vector<std::int64_t> starts(static_cast<std::size_t>(*spec.num_clips));
    for (auto& s : starts) s = rng.between(0, hi);
    std::sort(starts.begin(), starts.end());
    for (std::size_t k = 0; k < starts.size(); ++k)
      windows.push_back(make_window(video_name, static_cast<std::int64_t>(k), starts[k], length,
                                    num_frames));
    return windows;
  }

  const std::int64_t step = length + spec.clip_stride;  // >= 1 after validation
  if (spec.num_clips) {
    for (std::int64_t k = 0; k < *spec.num_clips; ++k)
      windows.push_back(make_window(video_name, k, spec.clip_offset + k * step, length, num_frames));
    return windows;
  }

  for (std::int64_t k = 0;; ++k) {
    const std::int64_t start = spec.clip_offset + k * step;
    if (start + length > num_frames) break;
    windows.push_back(make_window(video_name, k, start, length, num_frames));
  }
  if (windows.empty())
    windows.push_back(make_window(video_name, 0, spec.clip_offset, length, num_frames));
  return windows;
}

std::int64_t count_clips(std::int64_t num_frames, const ClipSpec& spec) {
  spec.validate();
  if (spec.whole()) return 1;
  if (spec.num_clips) return *spec.num_clips;
  const std::int64_t length = *spec.clip_length;
  const std::int64_t room = num_frames - spec.clip_offset - length;
  if (room < 0) return 1;
  return room / (length + spec.clip_stride) + 1;
}

RawClip extract_clip(const VideoRecord& record, const ClipWindow& window) {
  const Shape4 src = record.shape();
  RawClip clip(Shape4{static_cast<std::int64_t>(window.frame_indices.size()), src.h, src.w, src.c});
  const std::size_t frame_bytes = static_cast<std::size_t>(src.frame_size());
  for (std::size_t t = 0; t < window.frame_indices.size(); ++t) {
    const std::int64_t f = window.frame_indices[t];
    if (f < 0 || f >= src.t)
      throw ConsistencyError(kModule, "window of '" + window.video_name + "' references frame " +
                                          std::to_string(f) + " but the record has " +
                                          std::to_string(src.t) + " frames");
    std::memcpy(clip.data.data() + t * frame_bytes,
                record.data.data() + static_cast<std::size_t>(f) * frame_bytes, frame_bytes);
  }
  return clip;
}

}  // namespace clipstream
