// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// Named-array checkpoint container (.mpck).
//
//   bytes 0..3    magic "MPCK"
//   bytes 4..7    format version, u32 little-endian
//   bytes 8..15   manifest length in bytes, u64 little-endian
//   manifest      UTF-8 JSON: {"version", "meta", "tensors": [{"name",
//                 "dtype", "shape", "offset", "nbytes"}]}
//   payloads      raw little-endian tensor data; offsets are relative to
//                 the first payload byte, tensors sorted by name
//
// A checkpoint directory holds checkpoint-<epoch>.mpck files and a one-line
// text file `latest` naming the newest one.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clipstream/tensor.hpp"

namespace clipstream {

inline constexpr char kCheckpointMagic[4] = {'M', 'P', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr const char* kLatestMarker = "latest";

enum class DType { f32, f64 };

std::size_t dtype_size(DType dtype);
std::string dtype_name(DType dtype);

struct TensorEntry {
  DType dtype = DType::f64;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> payload;  // little-endian

  static TensorEntry from_array(const NdArray& array);
  static TensorEntry from_f32(std::vector<std::int64_t> shape, const std::vector<float>& values);
  NdArray to_array() const;
  std::int64_t numel() const;
  bool operator==(const TensorEntry&) const = default;
};

struct CheckpointMeta {
  std::int64_t epoch = 0;
  std::int64_t global_step = 0;
  double learning_rate = 0.0;
  std::string model;
  std::string dataset;
  std::string preprocessing;
  std::string experiment;
  std::string metric;
  std::uint32_t format_version = kCheckpointVersion;
  std::string extra = "{}";  // free-form JSON object

  bool operator==(const CheckpointMeta&) const = default;
};

struct CheckpointBundle {
  std::map<std::string, TensorEntry> tensors;
  CheckpointMeta meta;

  bool operator==(const CheckpointBundle&) const = default;
};

// results_root/<model>/<dataset>/<preprocessing>/<experiment>/<metric>/checkpoints
std::filesystem::path checkpoint_dir(const std::string& model, const std::string& dataset,
                                     const std::string& preprocessing,
                                     const std::string& experiment, const std::string& metric,
                                     const std::filesystem::path& results_root = "results");

// Throws ValidationError unless the string is a single, safe path component.
void validate_path_component(std::string_view component, std::string_view what);

struct SaveOptions {
  // Called before each stage ("write", "rename", "latest"); throwing from it
  // simulates a failure at that stage.
  std::function<void(std::string_view)> fault_hook;
};

std::filesystem::path save_checkpoint(const CheckpointBundle& bundle,
                                      const std::filesystem::path& dir,
                                      const SaveOptions& options = {});

// Writes a container to an exact file path (temp file + rename).
void write_container(const CheckpointBundle& bundle, const std::filesystem::path& path,
                     const SaveOptions& options = {});

CheckpointBundle load_checkpoint(const std::filesystem::path& path);

// Resolves via the `latest` marker, falling back to the highest epoch number
// among checkpoint-<n>.mpck files.
std::filesystem::path latest_checkpoint(const std::filesystem::path& dir);

std::vector<std::uint8_t> serialize_bundle(const CheckpointBundle& bundle);
CheckpointBundle parse_bundle(std::span<const std::uint8_t> bytes);

// Manifest JSON of a container, for inspection.
std::string checkpoint_header_json(const std::filesystem::path& path);

}  // namespace clipstream
