// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <deque>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "clipstream/bounded_queue.hpp"
#include "clipstream/errors.hpp"
#include "clipstream/kernels.hpp"
#include "clipstream/rng.hpp"

namespace clipstream {

namespace {

constexpr const char* kModule = "pipeline";

struct Task {
  std::size_t video = 0;
  std::int64_t pass = 0;
};

// Video entries awaiting a worker. In train mode it refills itself with a
// freshly shuffled pass whenever it runs dry; in test mode it holds a single
// pass in index order.
class FileQueue {
 public:
  FileQueue(std::size_t num_videos, Mode mode, std::uint64_t seed)
      : num_videos_(num_videos), mode_(mode), seed_(seed) {}

  std::optional<Task> pop() {
    std::lock_guard lock(mutex_);
    if (stopped_) return std::nullopt;
    if (tasks_.empty()) {
      if (mode_ == Mode::test && next_pass_ > 0) return std::nullopt;
      refill();
    }
    Task t = tasks_.front();
    tasks_.pop_front();
    return t;
  }

  void stop() {
    std::lock_guard lock(mutex_);
    stopped_ = true;
  }

 private:
  void refill() {
    const std::int64_t pass = next_pass_++;
    std::vector<std::size_t> order(num_videos_);
    if (mode_ == Mode::train) {
      order = pass_order(num_videos_, seed_, pass);
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
    }
    for (std::size_t v : order) tasks_.push_back({v, pass});
  }

  std::mutex mutex_;
  std::deque<Task> tasks_;
  std::size_t num_videos_;
  Mode mode_;
  std::uint64_t seed_;
  std::int64_t next_pass_ = 0;
  bool stopped_ = false;
};

}  // namespace

void PipelineConfig::validate() const {
  if (batch_size < 1) throw ConfigError(kModule, "batch size must be >= 1");
  if (num_workers < 1) throw ConfigError(kModule, "number of workers must be >= 1");
  if (effective_capacity() < batch_size)
    throw ConfigError(kModule, "clips queue capacity " + std::to_string(effective_capacity()) +
                                   " is smaller than the batch size " + std::to_string(batch_size));
}

std::vector<std::size_t> pass_order(std::size_t num_videos, std::uint64_t shuffle_seed,
                                    std::int64_t pass) {
  std::vector<std::size_t> order(num_videos);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(shuffle_seed, static_cast<std::uint64_t>(pass)));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::string StreamDiagnostics::to_json() const {
  nlohmann::json skipped_json = nlohmann::json::array();
  for (const auto& s : skipped) skipped_json.push_back({{"path", s.path}, {"reason", s.reason}});
  return nlohmann::json{{"videos_read", videos_read},
                        {"clips_emitted", clips_emitted},
                        {"batches_emitted", batches_emitted},
                        {"max_queue_occupancy", max_queue_occupancy},
                        {"skipped", skipped_json}}
      .dump(2);
}

static std::vector<RecordEntry> select_entries(const DatasetIndex& index, const std::string& split) {
  if (!index.splits.count(split))
    throw ConfigError(kModule, "dataset has no split named '" + split + "'");
  const auto& entries = index.split(split);
  if (entries.empty()) throw ConfigError(kModule, "split '" + split + "' is empty");
  return entries;
}

struct BatchStream::Impl {
  Impl(const DatasetIndex& index, const std::string& split, ClipSpec spec_in,
       PreprocessFn preprocess_in, PipelineConfig cfg_in)
      : root(index.root),
        entries(select_entries(index, split)),
        spec(std::move(spec_in)),
        preprocess(preprocess_in.with_training(cfg_in.mode == Mode::train)),
        cfg(std::move(cfg_in)),
        clips(static_cast<std::size_t>(cfg.effective_capacity())),
        files(entries.size(), cfg.mode, cfg.shuffle_seed) {
    cfg.validate();
    spec.validate();
    active_workers = cfg.num_workers;
    for (int i = 0; i < cfg.num_workers; ++i) workers.emplace_back([this] { work(); });
  }

  ~Impl() {
    files.stop();
    clips.close();
    for (auto& t : workers) t.join();
  }

  void work() {
    if (cfg.num_workers > 1) kernels::set_thread_kernel_parallelism(1);
    while (auto task = files.pop()) {
      const RecordEntry& entry = entries[task->video];
      std::vector<ClipTensor> produced;
      try {
        const VideoRecord record = read_record(root / entry.path);
        {
          std::lock_guard lock(diag_mutex);
          ++diag.videos_read;
        }
        const std::uint64_t video_seed =
            mix_seed(mix_seed(cfg.shuffle_seed, static_cast<std::uint64_t>(task->pass)), record.name);
        for (const auto& window : plan_clips(record.num_frames, spec, record.name)) {
          const RawClip raw = extract_clip(record, window);
          auto outputs =
              preprocess.apply(raw, mix_seed(video_seed, static_cast<std::uint64_t>(window.clip_index)));
          for (std::size_t copy = 0; copy < outputs.size(); ++copy) {
            if (cfg.per_clip_delay.count() > 0) std::this_thread::sleep_for(cfg.per_clip_delay);
            produced.push_back({std::move(outputs[copy]), entry.label, record.name,
                                window.clip_index, static_cast<int>(copy), task->pass});
          }
        }
      } catch (const std::exception& e) {
        record_failure(entry, e.what());
        continue;
      }
      consecutive_failures = 0;
      for (auto& clip : produced) {
        const std::size_t occupancy = clips.push(std::move(clip));
        if (occupancy == 0) return;  // shutting down
        std::int64_t seen = max_occupancy.load();
        while (static_cast<std::int64_t>(occupancy) > seen &&
               !max_occupancy.compare_exchange_weak(seen, static_cast<std::int64_t>(occupancy))) {
        }
        if (cfg.on_enqueue) cfg.on_enqueue(occupancy);
      }
    }
    if (--active_workers == 0) clips.close();
  }

  void record_failure(const RecordEntry& entry, const std::string& reason) {
    {
      std::lock_guard lock(diag_mutex);
      diag.skipped.push_back({(root / entry.path).string(), reason});
    }
    // In train mode the file queue never runs dry; stop once a whole pass
    // worth of consecutive videos failed.
    if (cfg.mode == Mode::train &&
        ++consecutive_failures >= static_cast<std::int64_t>(entries.size())) {
      fatal = true;
      files.stop();
      clips.close();
    }
  }

  std::optional<Batch> next_batch() {
    if (finished) return std::nullopt;
    const auto b = static_cast<std::size_t>(cfg.batch_size);
    std::vector<ClipTensor> items;
    items.reserve(b);
    while (items.size() < b) {
      auto clip = clips.pop();
      if (!clip) break;
      items.push_back(std::move(*clip));
    }
    if (fatal) throw IntegrityError(kModule, "every video in the split failed to load");
    if (items.empty() || (cfg.mode == Mode::train && items.size() < b)) {
      finished = true;
      return std::nullopt;
    }
    if (items.size() < b) finished = true;

    Batch batch;
    batch.size = static_cast<std::int64_t>(items.size());
    batch.clip_shape = preprocess.output_shape();
    batch.iteration = ++iteration;
    const std::size_t numel = static_cast<std::size_t>(batch.clip_shape.numel());
    batch.clips.resize(numel * items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      std::memcpy(batch.clips.data() + i * numel, items[i].values.data.data(), numel * sizeof(double));
      batch.labels.push_back(items[i].label);
      batch.provenance.push_back(
          {items[i].video_name, items[i].clip_index, items[i].copy, items[i].pass});
    }
    {
      std::lock_guard lock(diag_mutex);
      diag.clips_emitted += batch.size;
      ++diag.batches_emitted;
    }
    return batch;
  }

  StreamDiagnostics diagnostics() {
    std::lock_guard lock(diag_mutex);
    StreamDiagnostics d = diag;
    d.max_queue_occupancy = max_occupancy.load();
    return d;
  }

  std::filesystem::path root;
  std::vector<RecordEntry> entries;
  ClipSpec spec;
  PreprocessFn preprocess;
  PipelineConfig cfg;
  BoundedQueue<ClipTensor> clips;
  FileQueue files;
  std::vector<std::thread> workers;
  std::atomic<int> active_workers{0};
  std::atomic<std::int64_t> consecutive_failures{0};
  std::atomic<std::int64_t> max_occupancy{0};
  std::atomic<bool> fatal{false};
  std::mutex diag_mutex;
  StreamDiagnostics diag;
  std::int64_t iteration = 0;
  bool finished = false;
};

BatchStream::BatchStream(const DatasetIndex& index, const std::string& split, ClipSpec spec,
                         PreprocessFn preprocess, PipelineConfig cfg)
    : impl_(std::make_unique<Impl>(index, split, std::move(spec), std::move(preprocess),
                                   std::move(cfg))) {}

BatchStream::~BatchStream() = default;

std::optional<Batch> BatchStream::next_batch() { return impl_->next_batch(); }

StreamDiagnostics BatchStream::diagnostics() const { return impl_->diagnostics(); }

std::unique_ptr<BatchStream> build_stream(const DatasetIndex& index, const std::string& split,
                                          const ClipSpec& spec, const PreprocessFn& preprocess,
                                          const PipelineConfig& cfg) {
  return std::make_unique<BatchStream>(index, split, spec, preprocess, cfg);
}

std::int64_t iterations_per_epoch(const DatasetIndex& index, const std::string& split,
                                  const ClipSpec& spec, std::int64_t batch_size,
                                  std::int64_t copies_per_clip) {
  if (batch_size < 1) throw ConfigError(kModule, "batch size must be >= 1");
  if (!index.splits.count(split))
    throw ConfigError(kModule, "dataset has no split named '" + split + "'");
  std::int64_t total = 0;
  for (const auto& e : index.split(split)) total += count_clips(e.num_frames, spec);
  total *= copies_per_clip;
  return (total + batch_size - 1) / batch_size;
}

}  // namespace clipstream
