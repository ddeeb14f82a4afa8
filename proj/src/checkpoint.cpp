// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <regex>
#include <set>

#include <json.hpp>

#include "byte_io.hpp"
#include "clipstream/errors.hpp"

namespace clipstream {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "checkpoint";
constexpr std::size_t kPreambleSize = 16;

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  throw IntegrityError(kModule, "unknown dtype '" + s + "'");
}

std::int64_t product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

nlohmann::json meta_to_json(const CheckpointMeta& m) {
  return {{"epoch", m.epoch},
          {"global_step", m.global_step},
          {"learning_rate", m.learning_rate},
          {"model", m.model},
          {"dataset", m.dataset},
          {"preprocessing", m.preprocessing},
          {"experiment", m.experiment},
          {"metric", m.metric},
          {"format_version", m.format_version},
          {"extra", m.extra}};
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta m;
  m.epoch = j.at("epoch").get<std::int64_t>();
  m.global_step = j.at("global_step").get<std::int64_t>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.model = j.at("model").get<std::string>();
  m.dataset = j.at("dataset").get<std::string>();
  m.preprocessing = j.at("preprocessing").get<std::string>();
  m.experiment = j.at("experiment").get<std::string>();
  m.metric = j.at("metric").get<std::string>();
  m.format_version = j.at("format_version").get<std::uint32_t>();
  m.extra = j.at("extra").get<std::string>();
  return m;
}

struct Preamble {
  std::uint64_t manifest_len = 0;
  nlohmann::json manifest;
};

Preamble parse_preamble(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreambleSize)
    throw FormatError(kModule, "container shorter than its fixed header", bytes.size());
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw FormatError(kModule, "bad magic, not a checkpoint container", 0);
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion)
    throw FormatError(kModule, "unsupported container version " + std::to_string(version), 4);
  Preamble p;
  p.manifest_len = detail::get_u64(bytes.data() + 8);
  if (p.manifest_len > bytes.size() - kPreambleSize)
    throw FormatError(kModule, "manifest extends past the end of the container", 8);
  try {
    p.manifest = nlohmann::json::parse(bytes.begin() + kPreambleSize,
                                       bytes.begin() + kPreambleSize + static_cast<std::ptrdiff_t>(p.manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(kModule, std::string("unreadable manifest: ") + e.what(), kPreambleSize);
  }
  return p;
}

}  // namespace

std::size_t dtype_size(DType dtype) { return dtype == DType::f32 ? 4 : 8; }
std::string dtype_name(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

TensorEntry TensorEntry::from_array(const NdArray& array) {
  TensorEntry t;
  t.dtype = DType::f64;
  t.shape = array.shape;
  t.payload.reserve(array.values.size() * 8);
  for (double v : array.values) detail::put_u64(t.payload, std::bit_cast<std::uint64_t>(v));
  return t;
}

TensorEntry TensorEntry::from_f32(std::vector<std::int64_t> shape, const std::vector<float>& values) {
  TensorEntry t;
  t.dtype = DType::f32;
  t.shape = std::move(shape);
  t.payload.reserve(values.size() * 4);
  for (float v : values) detail::put_u32(t.payload, std::bit_cast<std::uint32_t>(v));
  return t;
}

std::int64_t TensorEntry::numel() const { return product(shape); }

NdArray TensorEntry::to_array() const {
  NdArray a;
  a.shape = shape;
  const auto n = static_cast<std::size_t>(numel());
  a.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (dtype == DType::f64)
      a.values[i] = std::bit_cast<double>(detail::get_u64(payload.data() + 8 * i));
    else
      a.values[i] = std::bit_cast<float>(detail::get_u32(payload.data() + 4 * i));
  }
  return a;
}

void validate_path_component(std::string_view component, std::string_view what) {
  const std::string label(what);
  if (component.empty() || component == "." || component == "..")
    throw ValidationError(kModule, label + " must be a non-empty name, got '" + std::string(component) + "'");
  for (char ch : component) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
    if (!ok)
      throw ValidationError(kModule, label + " '" + std::string(component) +
                                         "' contains a character that is unsafe in a path");
  }
}

fs::path checkpoint_dir(const std::string& model, const std::string& dataset,
                        const std::string& preprocessing, const std::string& experiment,
                        const std::string& metric, const fs::path& results_root) {
  validate_path_component(model, "model name");
  validate_path_component(dataset, "dataset name");
  validate_path_component(preprocessing, "preprocessing name");
  validate_path_component(experiment, "experiment name");
  validate_path_component(metric, "metric name");
  return results_root / model / dataset / preprocessing / experiment / metric / "checkpoints";
}

std::vector<std::uint8_t> serialize_bundle(const CheckpointBundle& bundle) {
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : bundle.tensors) {
    const std::uint64_t expected = static_cast<std::uint64_t>(t.numel()) * dtype_size(t.dtype);
    if (t.payload.size() != expected)
      throw IntegrityError(kModule, "tensor '" + name + "' has " + std::to_string(t.payload.size()) +
                                        " payload bytes, shape " + shape_str(t.shape) + " needs " +
                                        std::to_string(expected));
    tensors.push_back({{"name", name},
                       {"dtype", dtype_name(t.dtype)},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"nbytes", t.payload.size()}});
    offset += t.payload.size();
  }
  const std::string manifest =
      nlohmann::json{{"version", kCheckpointVersion}, {"meta", meta_to_json(bundle.meta)}, {"tensors", tensors}}
          .dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPreambleSize + manifest.size() + offset);
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, manifest.size());
  detail::put_bytes(out, manifest);
  for (const auto& [name, t] : bundle.tensors) out.insert(out.end(), t.payload.begin(), t.payload.end());
  return out;
}

CheckpointBundle parse_bundle(std::span<const std::uint8_t> bytes) {
  const Preamble p = parse_preamble(bytes);
  const std::size_t payload_start = kPreambleSize + p.manifest_len;
  const std::uint64_t payload_size = bytes.size() - payload_start;
  CheckpointBundle bundle;
  std::uint64_t covered = 0;
  try {
    if (p.manifest.at("version").get<std::uint32_t>() != kCheckpointVersion)
      throw FormatError(kModule, "manifest version mismatch", kPreambleSize);
    bundle.meta = meta_from_json(p.manifest.at("meta"));
    for (const auto& t : p.manifest.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      TensorEntry entry;
      entry.dtype = parse_dtype(t.at("dtype").get<std::string>());
      entry.shape = t.at("shape").get<std::vector<std::int64_t>>();
      for (auto d : entry.shape)
        if (d < 0) throw IntegrityError(kModule, "tensor '" + name + "' has a negative dimension");
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto nbytes = t.at("nbytes").get<std::uint64_t>();
      const std::uint64_t expected = static_cast<std::uint64_t>(entry.numel()) * dtype_size(entry.dtype);
      if (nbytes != expected)
        throw IntegrityError(kModule, "tensor '" + name + "' declares " + std::to_string(nbytes) +
                                          " bytes, shape " + shape_str(entry.shape) + " needs " +
                                          std::to_string(expected));
      if (offset > payload_size || nbytes > payload_size - offset)
        throw IntegrityError(kModule, "payload of tensor '" + name + "' is truncated");
      entry.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(payload_start + offset),
                           bytes.begin() + static_cast<std::ptrdiff_t>(payload_start + offset + nbytes));
      covered += nbytes;
      if (!bundle.tensors.emplace(name, std::move(entry)).second)
        throw IntegrityError(kModule, "duplicate tensor name '" + name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(kModule, std::string("malformed manifest: ") + e.what(), kPreambleSize);
  }
  if (covered != payload_size)
    throw IntegrityError(kModule, "container holds " + std::to_string(payload_size) +
                                      " payload bytes but the manifest accounts for " +
                                      std::to_string(covered));
  return bundle;
}

void write_container(const CheckpointBundle& bundle, const fs::path& path, const SaveOptions& options) {
  const auto bytes = serialize_bundle(bundle);
  fs::path tmp = path;
  tmp += ".partial";
  try {
    if (options.fault_hook) options.fault_hook("write");
    detail::write_file(tmp, bytes, kModule);
    if (options.fault_hook) options.fault_hook("rename");
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError(kModule, "cannot move checkpoint into place at " + path.string());
  }
}

fs::path save_checkpoint(const CheckpointBundle& bundle, const fs::path& dir, const SaveOptions& options) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(kModule, "cannot create checkpoint directory " + dir.string());
  const std::string filename = "checkpoint-" + std::to_string(bundle.meta.epoch) + ".mpck";
  const fs::path path = dir / filename;
  write_container(bundle, path, options);
  if (options.fault_hook) options.fault_hook("latest");
  const std::string marker = filename + "\n";
  detail::write_file_atomic(dir / kLatestMarker,
                            std::span(reinterpret_cast<const std::uint8_t*>(marker.data()), marker.size()),
                            kModule);
  return path;
}

CheckpointBundle load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw NotFoundError(kModule, "no checkpoint file at " + path.string());
  const auto bytes = detail::read_file(path, kModule);
  return parse_bundle(bytes);
}

fs::path latest_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NotFoundError(kModule, "no checkpoint directory " + dir.string());
  const fs::path marker = dir / kLatestMarker;
  if (fs::exists(marker)) {
    std::ifstream in(marker);
    std::string line;
    std::getline(in, line);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty() && fs::exists(dir / line)) return dir / line;
  }
  static const std::regex pattern(R"(^checkpoint-(\d+)\.mpck$)");
  long long best = -1;
  fs::path best_path;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) {
      const long long epoch = std::stoll(m[1]);
      if (epoch > best) {
        best = epoch;
        best_path = entry.path();
      }
    }
  }
  if (best < 0) throw NotFoundError(kModule, "no checkpoint found in " + dir.string());
  return best_path;
}

std::string checkpoint_header_json(const fs::path& path) {
  const auto bytes = detail::read_file(path, kModule);
  Preamble p = parse_preamble(bytes);
  p.manifest["file"] = path.string();
  p.manifest["file_size"] = bytes.size();
  p.manifest["format"] = "MPCK";
  return p.manifest.dump(2);
}

}  // namespace clipstream
