// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/record_store.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <regex>
#include <set>

#include <json.hpp>

#include "byte_io.hpp"
#include "clipstream/errors.hpp"

namespace clipstream {

namespace fs = std::filesystem;
using detail::get_u32;
using detail::put_u32;

namespace {

constexpr const char* kModule = "record_store";

void check_dims(std::uint32_t frames, std::uint32_t h, std::uint32_t w, std::uint32_t c) {
  if (frames < 1 || h < 1 || w < 1)
    throw ShapeError(kModule, "frame count, height and width must be >= 1");
  if (c != 1 && c != 3) throw ShapeError(kModule, "channels must be 1 or 3, got " + std::to_string(c));
}

std::vector<std::uint8_t> encode(const VideoRecord& r) {
  std::vector<std::uint8_t> out;
  out.reserve(kRecordHeaderSize + r.name.size() + r.class_name.size() + r.data.size());
  out.insert(out.end(), std::begin(kRecordMagic), std::end(kRecordMagic));
  put_u32(out, kRecordVersion);
  put_u32(out, r.num_frames);
  put_u32(out, r.height);
  put_u32(out, r.width);
  put_u32(out, r.channels);
  put_u32(out, r.label);
  put_u32(out, static_cast<std::uint32_t>(r.name.size()));
  put_u32(out, static_cast<std::uint32_t>(r.class_name.size()));
  detail::put_bytes(out, r.name);
  detail::put_bytes(out, r.class_name);
  out.insert(out.end(), r.data.begin(), r.data.end());
  return out;
}

// Parses the fixed header plus the two strings. Returns the payload offset.
std::size_t decode_header(std::span<const std::uint8_t> bytes, std::uint64_t file_size,
                          RecordHeader& h, const fs::path& path) {
  const std::string where = " in " + path.string();
  if (bytes.size() < kRecordHeaderSize)
    throw FormatError(kModule, "truncated header" + where, bytes.size());
  if (std::memcmp(bytes.data(), kRecordMagic, 4) != 0)
    throw FormatError(kModule, "bad magic" + where, 0);
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kRecordVersion)
    throw FormatError(kModule, "unsupported version " + std::to_string(version) + where, 4);
  h.num_frames = get_u32(bytes.data() + 8);
  h.height = get_u32(bytes.data() + 12);
  h.width = get_u32(bytes.data() + 16);
  h.channels = get_u32(bytes.data() + 20);
  h.label = get_u32(bytes.data() + 24);
  const std::uint32_t name_len = get_u32(bytes.data() + 28);
  const std::uint32_t class_len = get_u32(bytes.data() + 32);
  try {
    check_dims(h.num_frames, h.height, h.width, h.channels);
  } catch (const ShapeError& e) {
    throw FormatError(kModule, std::string("invalid dimensions") + where, 8);
  }
  const std::size_t strings_end = kRecordHeaderSize + std::size_t{name_len} + class_len;
  if (bytes.size() < strings_end)
    throw FormatError(kModule, "truncated name fields" + where, bytes.size());
  const char* p = reinterpret_cast<const char*>(bytes.data()) + kRecordHeaderSize;
  h.name.assign(p, name_len);
  h.class_name.assign(p + name_len, class_len);
  h.file_size = file_size;
  const std::uint64_t payload = std::uint64_t{h.num_frames} * h.height * h.width * h.channels;
  if (file_size < strings_end + payload)
    throw FormatError(kModule, "truncated pixel payload" + where, file_size);
  if (file_size > strings_end + payload)
    throw FormatError(kModule, "trailing bytes after payload" + where, strings_end + payload);
  return strings_end;
}

}  // namespace

const std::vector<RecordEntry>& DatasetIndex::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw NotFoundError(kModule, "no split named '" + name + "'");
  return it->second;
}

VideoRecord make_record(std::span<const Frame> frames, std::uint32_t label, std::string name,
                        std::string class_name) {
  if (frames.empty()) throw ShapeError(kModule, "a record needs at least one frame");
  const Frame& first = frames.front();
  check_dims(1, first.height, first.width, first.channels);
  VideoRecord r;
  r.num_frames = static_cast<std::uint32_t>(frames.size());
  r.height = first.height;
  r.width = first.width;
  r.channels = first.channels;
  r.label = label;
  r.name = std::move(name);
  r.class_name = std::move(class_name);
  const std::size_t frame_bytes = std::size_t{r.height} * r.width * r.channels;
  r.data.reserve(frame_bytes * frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    if (f.height != r.height || f.width != r.width || f.channels != r.channels)
      throw ShapeError(kModule, "frame " + std::to_string(i) + " is " + std::to_string(f.height) +
                                    "x" + std::to_string(f.width) + "x" +
                                    std::to_string(f.channels) + ", expected " +
                                    std::to_string(r.height) + "x" + std::to_string(r.width) +
                                    "x" + std::to_string(r.channels));
    if (f.pixels.size() != frame_bytes)
      throw ShapeError(kModule, "frame " + std::to_string(i) + " has " +
                                    std::to_string(f.pixels.size()) + " bytes, expected " +
                                    std::to_string(frame_bytes));
    r.data.insert(r.data.end(), f.pixels.begin(), f.pixels.end());
  }
  return r;
}

void write_record(std::span<const Frame> frames, std::uint32_t label, const std::string& name,
                  const std::string& class_name, const fs::path& out_path) {
  write_record(make_record(frames, label, name, class_name), out_path);
}

void write_record(const VideoRecord& record, const fs::path& out_path) {
  check_dims(record.num_frames, record.height, record.width, record.channels);
  if (record.data.size() !=
      std::size_t{record.num_frames} * record.height * record.width * record.channels)
    throw ShapeError(kModule, "pixel buffer length does not match dimensions");
  const auto bytes = encode(record);
  detail::write_file(out_path, bytes, kModule);
}

VideoRecord read_record(const fs::path& path) {
  const auto bytes = detail::read_file(path, kModule);
  RecordHeader h;
  const std::size_t offset = decode_header(bytes, bytes.size(), h, path);
  VideoRecord r;
  r.num_frames = h.num_frames;
  r.height = h.height;
  r.width = h.width;
  r.channels = h.channels;
  r.label = h.label;
  r.name = std::move(h.name);
  r.class_name = std::move(h.class_name);
  r.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return r;
}

RecordHeader read_record_header(const fs::path& path) {
  std::uint64_t size = 0;
  auto bytes = detail::read_prefix(path, kRecordHeaderSize, size, kModule);
  RecordHeader h;
  if (bytes.size() >= kRecordHeaderSize) {
    const std::size_t strings =
        std::size_t{get_u32(bytes.data() + 28)} + get_u32(bytes.data() + 32);
    bytes = detail::read_prefix(path, kRecordHeaderSize + strings, size, kModule);
  }
  decode_header(bytes, size, h, path);
  return h;
}

// ---------------------------------------------------------------------------
// Index

std::string index_to_json(const DatasetIndex& index) {
  nlohmann::json j;
  j["version"] = kIndexVersion;
  j["classes"] = index.classes;
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [name, entries] : index.splits) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : entries)
      list.push_back({{"path", e.path}, {"label", e.label}, {"num_frames", e.num_frames}});
    splits[name] = std::move(list);
  }
  j["splits"] = std::move(splits);
  return j.dump(2);
}

DatasetIndex index_from_json(const std::string& text, const fs::path& root) {
  DatasetIndex index;
  index.root = root;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<std::uint32_t>() != kIndexVersion)
      throw IntegrityError(kModule, "unsupported index version");
    index.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& [name, list] : j.at("splits").items()) {
      auto& entries = index.splits[name];
      for (const auto& e : list)
        entries.push_back({e.at("path").get<std::string>(), e.at("label").get<std::uint32_t>(),
                           e.at("num_frames").get<std::uint32_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(kModule, std::string("malformed index: ") + e.what());
  }
  return index;
}

void save_index(const DatasetIndex& index) {
  const std::string text = index_to_json(index);
  detail::write_file_atomic(index.root / kIndexFileName,
                            std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
                            kModule);
}

DatasetIndex load_index(const fs::path& root) {
  const fs::path file = root / kIndexFileName;
  if (!fs::exists(file)) throw NotFoundError(kModule, "no index file at " + file.string());
  const auto bytes = detail::read_file(file, kModule);
  DatasetIndex index = index_from_json(std::string(bytes.begin(), bytes.end()), root);

  std::set<std::string> seen_paths;
  for (const auto& [split, entries] : index.splits) {
    std::set<std::string> names;
    for (const auto& e : entries) {
      if (!seen_paths.insert(e.path).second)
        throw IntegrityError(kModule, "record " + e.path + " listed in more than one split entry");
      const fs::path path = index.record_path(e);
      if (!fs::exists(path)) throw IntegrityError(kModule, "missing record file " + path.string());
      if (e.label >= index.num_classes())
        throw IntegrityError(kModule, "label " + std::to_string(e.label) + " of " + e.path +
                                          " exceeds class count");
      RecordHeader h;
      try {
        h = read_record_header(path);
      } catch (const FormatError& err) {
        throw IntegrityError(kModule, std::string("unreadable record: ") + err.what());
      }
      if (h.num_frames != e.num_frames || h.label != e.label)
        throw IntegrityError(kModule, "header of " + path.string() + " does not match index entry");
      if (!names.insert(h.name).second)
        throw IntegrityError(kModule, "duplicate video name '" + h.name + "' in split " + split);
    }
  }
  return index;
}

// ---------------------------------------------------------------------------
// Conversion

namespace {

struct VideoSource {
  fs::path path;
  std::string class_name;
  std::uint32_t label = 0;
  std::string video_id;  // bare name
  std::string split;
  bool raw = false;
};

bool is_frame_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

// Numeric key taken from the last run of digits in the file stem.
std::pair<long long, std::string> frame_key(const fs::path& p) {
  const std::string stem = p.stem().string();
  long long value = -1;
  std::size_t end = stem.find_last_of("0123456789");
  if (end != std::string::npos) {
    std::size_t begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    value = std::stoll(stem.substr(begin, std::min<std::size_t>(end - begin + 1, 18)));
  }
  return {value, stem};
}

const std::regex& raw_name_pattern() {
  static const std::regex re(R"(^(.+)\.(\d+)x(\d+)x(\d+)\.raw$)");
  return re;
}

std::vector<Frame> load_frames(const VideoSource& v) {
  std::vector<Frame> frames;
  if (v.raw) {
    std::smatch m;
    const std::string fname = v.path.filename().string();
    std::regex_match(fname, m, raw_name_pattern());
    const auto h = static_cast<std::uint32_t>(std::stoul(m[2]));
    const auto w = static_cast<std::uint32_t>(std::stoul(m[3]));
    const auto c = static_cast<std::uint32_t>(std::stoul(m[4]));
    check_dims(1, h, w, c);
    const auto bytes = detail::read_file(v.path, kModule);
    const std::size_t frame_bytes = std::size_t{h} * w * c;
    if (bytes.empty() || bytes.size() % frame_bytes != 0)
      throw ShapeError(kModule, "raw file size is not a whole number of " + std::to_string(h) +
                                    "x" + std::to_string(w) + "x" + std::to_string(c) + " frames");
    for (std::size_t off = 0; off < bytes.size(); off += frame_bytes) {
      Frame f{h, w, c, {}};
      f.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                      bytes.begin() + static_cast<std::ptrdiff_t>(off + frame_bytes));
      frames.push_back(std::move(f));
    }
    return frames;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(v.path))
    if (entry.is_regular_file() && is_frame_image(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return frame_key(a) < frame_key(b); });
  if (files.empty()) throw IoError(kModule, "no frame images in " + v.path.string());
  for (const auto& f : files) frames.push_back(read_frame_image(f));
  return frames;
}

}  // namespace

ConversionResult convert_dataset(const fs::path& src_root, const fs::path& out_root,
                                 const std::optional<SplitLists>& split_lists) {
  if (!fs::is_directory(src_root))
    throw IoError(kModule, "source root " + src_root.string() + " is not a directory");
  ConversionResult result;
  DatasetIndex& index = result.index;
  index.root = out_root;

  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(src_root))
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  std::sort(classes.begin(), classes.end());
  index.classes = classes;

  // Bare or class-qualified video name -> split.
  std::map<std::string, std::string> split_of;
  if (split_lists) {
    for (const auto& [split, names] : *split_lists) {
      index.splits[split];
      for (const auto& n : names) split_of[n] = split;
    }
  } else {
    index.splits["train"];
  }

  std::vector<VideoSource> sources;
  for (std::uint32_t label = 0; label < classes.size(); ++label) {
    std::vector<fs::directory_entry> videos;
    for (const auto& entry : fs::directory_iterator(src_root / classes[label])) {
      const std::string fname = entry.path().filename().string();
      if (entry.is_directory() ||
          (entry.is_regular_file() && std::regex_match(fname, raw_name_pattern())))
        videos.push_back(entry);
    }
    std::sort(videos.begin(), videos.end(),
              [](const auto& a, const auto& b) { return a.path().filename() < b.path().filename(); });
    if (videos.empty())
      result.warnings.push_back("class '" + classes[label] + "' has no videos");
    for (const auto& entry : videos) {
      VideoSource v;
      v.path = entry.path();
      v.class_name = classes[label];
      v.label = label;
      v.raw = !entry.is_directory();
      if (v.raw) {
        std::smatch m;
        const std::string fname = entry.path().filename().string();
        std::regex_match(fname, m, raw_name_pattern());
        v.video_id = m[1];
      } else {
        v.video_id = entry.path().filename().string();
      }
      if (split_lists) {
        auto it = split_of.find(v.class_name + "/" + v.video_id);
        if (it == split_of.end()) it = split_of.find(v.video_id);
        if (it == split_of.end()) {
          result.warnings.push_back("video " + v.class_name + "/" + v.video_id +
                                    " is not in any split list; skipped");
          continue;
        }
        v.split = it->second;
      } else {
        v.split = "train";
      }
      sources.push_back(std::move(v));
    }
  }

  fs::create_directories(out_root);
  for (const auto& c : classes) fs::create_directories(out_root / c);

  struct Outcome {
    bool ok = false;
    std::uint32_t num_frames = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(sources.size());
  const auto n = static_cast<std::int64_t>(sources.size());

  // One record per iteration; each file is written by exactly one thread.
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const VideoSource& v = sources[static_cast<std::size_t>(i)];
    Outcome& o = outcomes[static_cast<std::size_t>(i)];
    try {
      const auto frames = load_frames(v);
      const VideoRecord r =
          make_record(frames, v.label, v.class_name + "/" + v.video_id, v.class_name);
      write_record(r, out_root / v.class_name / (v.video_id + ".mprv"));
      o.num_frames = r.num_frames;
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  }

  for (std::size_t i = 0; i < sources.size(); ++i) {
    const VideoSource& v = sources[i];
    if (!outcomes[i].ok) {
      result.skipped.push_back({v.path.string(), outcomes[i].error});
      continue;
    }
    index.splits[v.split].push_back({(fs::path(v.class_name) / (v.video_id + ".mprv")).generic_string(),
                                     v.label, outcomes[i].num_frames});
  }
  save_index(index);
  return result;
}

}  // namespace clipstream
