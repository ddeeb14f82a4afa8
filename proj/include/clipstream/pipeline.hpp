// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// Two-queue streaming batcher. A file queue of video entries feeds W workers
// (read record -> plan clips -> extract -> preprocess); a bounded clips queue
// feeds a single consumer that assembles mini-batches. Excess clips of a
// video spill into the next batch; a short video's deficit is filled from the
// next video.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clipstream/clip_engine.hpp"
#include "clipstream/preprocess.hpp"
#include "clipstream/record_store.hpp"

namespace clipstream {

enum class Mode { train, test };

struct PipelineConfig {
  std::int64_t batch_size = 1;
  int num_workers = 1;
  std::int64_t clips_queue_capacity = 0;  // 0 selects 2 * batch_size
  std::uint64_t shuffle_seed = 0;
  Mode mode = Mode::train;
  // Instrumentation: artificial per-clip preprocessing cost and a hook
  // receiving the clips-queue occupancy after every enqueue.
  std::chrono::microseconds per_clip_delay{0};
  std::function<void(std::size_t)> on_enqueue;

  std::int64_t effective_capacity() const {
    return clips_queue_capacity > 0 ? clips_queue_capacity : 2 * batch_size;
  }
  void validate() const;
};

struct ClipTensor {
  Clip values;
  std::uint32_t label = 0;
  std::string video_name;
  std::int64_t clip_index = 0;
  int copy = 0;            // oversample copy tag
  std::int64_t pass = 0;   // how many times the file queue was refilled before this video
};

struct Provenance {
  std::string video_name;
  std::int64_t clip_index = 0;
  int copy = 0;
  std::int64_t pass = 0;
  bool operator==(const Provenance&) const = default;
};

// Contiguous (size, T, H, W, C) block of preprocessed clips.
struct BatchView {
  std::int64_t size = 0;
  Shape4 clip_shape;
  std::span<const double> data;
};

struct Batch {
  std::int64_t size = 0;
  Shape4 clip_shape;
  std::vector<double> clips;
  std::vector<std::uint32_t> labels;
  std::vector<Provenance> provenance;
  std::int64_t iteration = 0;

  BatchView view() const { return {size, clip_shape, clips}; }
};

struct StreamDiagnostics {
  std::int64_t videos_read = 0;
  std::int64_t clips_emitted = 0;
  std::int64_t batches_emitted = 0;
  std::int64_t max_queue_occupancy = 0;
  std::vector<SkippedVideo> skipped;

  std::string to_json() const;
};

class BatchStream {
 public:
  BatchStream(const DatasetIndex& index, const std::string& split, ClipSpec spec,
              PreprocessFn preprocess, PipelineConfig cfg);
  ~BatchStream();
  BatchStream(const BatchStream&) = delete;
  BatchStream& operator=(const BatchStream&) = delete;

  // Train mode: always a full batch. Test mode: full batches, then one
  // partial batch with the leftovers, then nullopt.
  std::optional<Batch> next_batch();

  StreamDiagnostics diagnostics() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<BatchStream> build_stream(const DatasetIndex& index, const std::string& split,
                                          const ClipSpec& spec, const PreprocessFn& preprocess,
                                          const PipelineConfig& cfg);

// ceil(total planned clips * copies / batch_size) using the index's stored
// frame counts.
std::int64_t iterations_per_epoch(const DatasetIndex& index, const std::string& split,
                                  const ClipSpec& spec, std::int64_t batch_size,
                                  std::int64_t copies_per_clip = 1);

// Video visiting order for one training pass.
std::vector<std::size_t> pass_order(std::size_t num_videos, std::uint64_t shuffle_seed,
                                    std::int64_t pass);

}  // namespace clipstream
