// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// One-file-per-video binary record store.
//
// Record layout (all integers little-endian u32):
//
//   offset  field
//   0       magic "MPRV"
//   4       format version (1)
//   8       num_frames
//   12      height
//   16      width
//   20      channels (1 or 3)
//   24      label
//   28      name length in bytes
//   32      class_name length in bytes
//   36      name, class_name, then num_frames*height*width*channels pixel bytes
//
// The dataset index is `index.json` in the store root.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clipstream/tensor.hpp"

namespace clipstream {

inline constexpr char kRecordMagic[4] = {'M', 'P', 'R', 'V'};
inline constexpr std::uint32_t kRecordVersion = 1;
inline constexpr std::size_t kRecordHeaderSize = 36;
inline constexpr std::uint32_t kIndexVersion = 1;
inline constexpr const char* kIndexFileName = "index.json";

struct VideoRecord {
  std::vector<std::uint8_t> data;
  std::uint32_t num_frames = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::uint32_t label = 0;
  std::string name;
  std::string class_name;

  Shape4 shape() const { return {num_frames, height, width, channels}; }
  bool operator==(const VideoRecord&) const = default;
};

// Header fields only; used for cheap index validation.
struct RecordHeader {
  std::uint32_t num_frames = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::uint32_t label = 0;
  std::string name;
  std::string class_name;
  std::uint64_t file_size = 0;
};

// A single decoded frame, (H, W, C) bytes.
struct Frame {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

struct RecordEntry {
  std::string path;  // relative to the index root
  std::uint32_t label = 0;
  std::uint32_t num_frames = 0;
  bool operator==(const RecordEntry&) const = default;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<std::string> classes;
  std::map<std::string, std::vector<RecordEntry>> splits;

  std::size_t num_classes() const { return classes.size(); }
  const std::vector<RecordEntry>& split(const std::string& name) const;
  std::filesystem::path record_path(const RecordEntry& e) const { return root / e.path; }
  bool operator==(const DatasetIndex&) const = default;
};

void write_record(std::span<const Frame> frames, std::uint32_t label, const std::string& name,
                  const std::string& class_name, const std::filesystem::path& out_path);
void write_record(const VideoRecord& record, const std::filesystem::path& out_path);

VideoRecord read_record(const std::filesystem::path& path);
RecordHeader read_record_header(const std::filesystem::path& path);

// Builds a record from frames, checking shape consistency.
VideoRecord make_record(std::span<const Frame> frames, std::uint32_t label, std::string name,
                        std::string class_name);

struct SkippedVideo {
  std::string path;
  std::string reason;
};

struct ConversionResult {
  DatasetIndex index;
  std::vector<std::string> warnings;
  std::vector<SkippedVideo> skipped;
};

using SplitLists = std::map<std::string, std::vector<std::string>>;

// src_root/<class>/<video> where <video> is a directory of numbered frame
// images (.png, .ppm, .pgm) or a raw file named <video>.<H>x<W>x<C>.raw.
ConversionResult convert_dataset(const std::filesystem::path& src_root,
                                 const std::filesystem::path& out_root,
                                 const std::optional<SplitLists>& split_lists = std::nullopt);

// Reads index.json and validates each referenced record header.
DatasetIndex load_index(const std::filesystem::path& root);
void save_index(const DatasetIndex& index);

std::string index_to_json(const DatasetIndex& index);
DatasetIndex index_from_json(const std::string& text, const std::filesystem::path& root);

// Frame-image decoding.
Frame read_frame_image(const std::filesystem::path& path);
void write_ppm(const Frame& frame, const std::filesystem::path& path);
void write_png(const Frame& frame, const std::filesystem::path& path);

}  // namespace clipstream
