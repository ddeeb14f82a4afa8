// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>
#include <cstdio>

#include "clipstream/errors.hpp"
#include "clipstream/record_store.hpp"
#include "test_support.hpp"

using namespace clipstream;
using testing::TempDir;

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> concat(const std::vector<Frame>& frames) {
  std::vector<std::uint8_t> out;
  for (const auto& f : frames) out.insert(out.end(), f.pixels.begin(), f.pixels.end());
  return out;
}

void write_frame_dir(const fs::path& dir, const std::vector<Frame>& frames, bool png = false) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    // Unpadded numbers so lexicographic order would be wrong past 9 frames.
    const fs::path p = dir / ("img" + std::to_string(i + 1) + (png ? ".png" : ".ppm"));
    if (png) write_png(frames[i], p);
    else write_ppm(frames[i], p);
  }
}

}  // namespace

TEST_CASE("single black pixel round-trips") {
  TempDir tmp;
  Frame f{1, 1, 3, {0, 0, 0}};
  write_record(std::span(&f, 1), 0, "v", "c", tmp / "a.mprv");
  const VideoRecord r = read_record(tmp / "a.mprv");
  CHECK(r.data == std::vector<std::uint8_t>{0, 0, 0});
  CHECK(r.num_frames == 1);
  CHECK(r.height == 1);
  CHECK(r.width == 1);
  CHECK(r.channels == 3);
  CHECK(r.name == "v");
  CHECK(r.class_name == "c");
}

TEST_CASE("random frames round-trip byte for byte") {
  TempDir tmp;
  const auto frames = testing::random_frames(16, 8, 8, 3, 7);
  write_record(frames, 3, "class/video", "class", tmp / "r.mprv");
  const VideoRecord r = read_record(tmp / "r.mprv");
  CHECK(r.data == concat(frames));
  CHECK(r.label == 3);
  CHECK(r.shape() == Shape4{16, 8, 8, 3});
}

TEST_CASE("grayscale records are supported") {
  TempDir tmp;
  const auto frames = testing::random_frames(3, 5, 7, 1, 1);
  write_record(frames, 0, "g", "c", tmp / "g.mprv");
  CHECK(read_record(tmp / "g.mprv").data == concat(frames));
}

TEST_CASE("mixed frame sizes are a shape error") {
  TempDir tmp;
  auto frames = testing::random_frames(1, 8, 8, 3, 1);
  const auto small = testing::random_frames(1, 4, 4, 3, 2);
  frames.push_back(small[0]);
  CHECK_THROWS_AS(write_record(frames, 0, "v", "c", tmp / "x.mprv"), ShapeError);
  CHECK_FALSE(fs::exists(tmp / "x.mprv"));
}

TEST_CASE("bad channel count and empty input are rejected") {
  TempDir tmp;
  const auto two = testing::random_frames(1, 2, 2, 2, 1);
  CHECK_THROWS_AS(write_record(two, 0, "v", "c", tmp / "x.mprv"), ShapeError);
  std::vector<Frame> none;
  CHECK_THROWS_AS(write_record(none, 0, "v", "c", tmp / "x.mprv"), ShapeError);
}

TEST_CASE("unwritable path is an I/O error") {
  TempDir tmp;
  const auto frames = testing::random_frames(1, 2, 2, 3, 1);
  testing::write_bytes(tmp / "file", {1});
  CHECK_THROWS_AS(write_record(frames, 0, "v", "c", tmp / "file" / "sub" / "x.mprv"), IoError);
}

TEST_CASE("truncation and bad magic are format errors with offsets") {
  TempDir tmp;
  const auto frames = testing::random_frames(4, 4, 4, 3, 9);
  write_record(frames, 0, "v", "c", tmp / "r.mprv");
  auto bytes = testing::file_bytes(tmp / "r.mprv");

  auto half = bytes;
  half.resize(bytes.size() / 2);
  testing::write_bytes(tmp / "half.mprv", half);
  try {
    read_record(tmp / "half.mprv");
    FAIL("truncated record was accepted");
  } catch (const FormatError& e) {
    CHECK(e.offset() <= half.size());
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }

  auto header_only = bytes;
  header_only.resize(10);
  testing::write_bytes(tmp / "short.mprv", header_only);
  CHECK_THROWS_AS(read_record(tmp / "short.mprv"), FormatError);

  auto magic = bytes;
  magic[0] = 'X';
  testing::write_bytes(tmp / "magic.mprv", magic);
  try {
    read_record(tmp / "magic.mprv");
    FAIL("bad magic was accepted");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  auto longer = bytes;
  longer.push_back(0);
  testing::write_bytes(tmp / "long.mprv", longer);
  CHECK_THROWS_AS(read_record(tmp / "long.mprv"), FormatError);
}

TEST_CASE("record header matches the documented byte layout") {
  TempDir tmp;
  const auto frames = testing::random_frames(2, 3, 5, 1, 4);
  write_record(frames, 6, "ab", "xyz", tmp / "r.mprv");
  const auto b = testing::file_bytes(tmp / "r.mprv");
  auto u32 = [&](std::size_t off) {
    return std::uint32_t(b[off]) | std::uint32_t(b[off + 1]) << 8 | std::uint32_t(b[off + 2]) << 16 |
           std::uint32_t(b[off + 3]) << 24;
  };
  CHECK(std::string(b.begin(), b.begin() + 4) == "MPRV");
  CHECK(u32(4) == 1);
  CHECK(u32(8) == 2);
  CHECK(u32(12) == 3);
  CHECK(u32(16) == 5);
  CHECK(u32(20) == 1);
  CHECK(u32(24) == 6);
  CHECK(u32(28) == 2);
  CHECK(u32(32) == 3);
  CHECK(std::string(b.begin() + 36, b.begin() + 41) == "abxyz");
  CHECK(b.size() == 41 + 2 * 3 * 5);
  const RecordHeader h = read_record_header(tmp / "r.mprv");
  CHECK(h.num_frames == 2);
  CHECK(h.name == "ab");
  CHECK(h.file_size == b.size());
}

TEST_CASE("100-record corpus reads back equal to the retained originals") {
  TempDir tmp;
  std::vector<VideoRecord> originals;
  for (int i = 0; i < 100; ++i) {
    const auto frames = testing::random_frames(1 + i % 5, 2 + i % 3, 3 + i % 4, i % 2 ? 3 : 1, i);
    originals.push_back(make_record(frames, i % 7, "c/v" + std::to_string(i), "c"));
    write_record(originals.back(), tmp / (std::to_string(i) + ".mprv"));
  }
  for (int i = 0; i < 100; ++i)
    CHECK(read_record(tmp / (std::to_string(i) + ".mprv")) == originals[static_cast<std::size_t>(i)]);
}

TEST_CASE("convert 2 classes x 2 videos x 4 frames") {
  TempDir tmp;
  for (const char* cls : {"jump", "run"})
    for (const char* vid : {"a", "b"})
      write_frame_dir(tmp / "src" / cls / vid, testing::random_frames(4, 6, 5, 3, 1));
  const ConversionResult r = convert_dataset(tmp / "src", tmp / "out");
  CHECK(r.index.num_classes() == 2);
  const auto& train = r.index.split("train");
  REQUIRE(train.size() == 4);
  std::vector<std::uint32_t> labels;
  for (const auto& e : train) labels.push_back(e.label);
  CHECK(labels == std::vector<std::uint32_t>{0, 0, 1, 1});
  CHECK(r.skipped.empty());
  CHECK(load_index(tmp / "out") == r.index);
  const VideoRecord rec = read_record(r.index.record_path(train[2]));
  CHECK(rec.name == "run/a");
  CHECK(rec.class_name == "run");
  CHECK(rec.num_frames == 4);
}

TEST_CASE("class order is lexicographic") {
  TempDir tmp;
  for (const char* cls : {"brush_hair", "archery"})
    write_frame_dir(tmp / "src" / cls / "v1", testing::random_frames(2, 2, 2, 3, 1));
  const ConversionResult r = convert_dataset(tmp / "src", tmp / "out");
  CHECK(r.index.classes == std::vector<std::string>{"archery", "brush_hair"});
  for (const auto& e : r.index.split("train"))
    CHECK(e.label == (e.path.rfind("archery", 0) == 0 ? 0u : 1u));
}

TEST_CASE("frames are ordered numerically, not lexicographically") {
  TempDir tmp;
  write_frame_dir(tmp / "src" / "c" / "v", testing::indexed_frames(12));
  const ConversionResult r = convert_dataset(tmp / "src", tmp / "out");
  const VideoRecord rec = read_record(r.index.record_path(r.index.split("train")[0]));
  for (std::uint32_t t = 0; t < 12; ++t) CHECK(rec.data[t * 4] == t);
}

TEST_CASE("PNG frames and raw files convert") {
  TempDir tmp;
  const auto rgb = testing::random_frames(3, 4, 6, 3, 11);
  const auto gray = testing::random_frames(2, 5, 3, 1, 12);
  write_frame_dir(tmp / "src" / "a" / "png_rgb", rgb, true);
  write_frame_dir(tmp / "src" / "a" / "png_gray", gray, true);
  const auto raw = testing::random_frames(5, 3, 4, 3, 13);
  fs::create_directories(tmp / "src" / "b");
  testing::write_bytes(tmp / "src" / "b" / "clip7.3x4x3.raw", concat(raw));
  const ConversionResult r = convert_dataset(tmp / "src", tmp / "out");
  REQUIRE(r.skipped.empty());
  std::map<std::string, VideoRecord> by_name;
  for (const auto& e : r.index.split("train")) {
    VideoRecord rec = read_record(r.index.record_path(e));
    by_name[rec.name] = rec;
  }
  CHECK(by_name.at("a/png_rgb").data == concat(rgb));
  CHECK(by_name.at("a/png_gray").data == concat(gray));
  CHECK(by_name.at("a/png_gray").channels == 1);
  CHECK(by_name.at("b/clip7").data == concat(raw));
  CHECK(by_name.at("b/clip7").num_frames == 5);
}

TEST_CASE("unreadable video is skipped and reported; others convert") {
  TempDir tmp;
  write_frame_dir(tmp / "src" / "c" / "good", testing::random_frames(2, 2, 2, 3, 1));
  fs::create_directories(tmp / "src" / "c" / "bad");
  testing::write_bytes(tmp / "src" / "c" / "bad" / "1.ppm", {'P', '6', '\n', 'x'});
  write_frame_dir(tmp / "src" / "d" / "fine", testing::random_frames(2, 2, 2, 3, 2));
  const ConversionResult r = convert_dataset(tmp / "src", tmp / "out");
  REQUIRE(r.skipped.size() == 1);
  CHECK(r.skipped[0].path.find("bad") != std::string::npos);
  CHECK(r.index.split("train").size() == 2);
}

TEST_CASE("empty class directory warns and keeps the class") {
  TempDir tmp;
  fs::create_directories(tmp / "src" / "a_empty");
  write_frame_dir(tmp / "src" / "b" / "v", testing::random_frames(2, 2, 2, 3, 1));
  const ConversionResult r = convert_dataset(tmp / "src", tmp / "out");
  CHECK(r.index.classes == std::vector<std::string>{"a_empty", "b"});
  CHECK(r.warnings.size() == 1);
  CHECK(r.index.split("train")[0].label == 1);
}

TEST_CASE("split lists route videos and are disjoint") {
  TempDir tmp;
  for (const char* v : {"v1", "v2", "v3"})
    write_frame_dir(tmp / "src" / "c" / v, testing::random_frames(2, 2, 2, 3, 1));
  SplitLists lists{{"train", {"c/v1", "v3"}}, {"test", {"v2"}}};
  const ConversionResult r = convert_dataset(tmp / "src", tmp / "out", lists);
  CHECK(r.index.split("train").size() == 2);
  CHECK(r.index.split("test").size() == 1);
  CHECK(r.index.split("test")[0].path == "c/v2.mprv");
}

TEST_CASE("converting the same tree twice yields identical indices") {
  TempDir tmp;
  for (int c = 0; c < 3; ++c)
    for (int v = 0; v < 3; ++v)
      write_frame_dir(tmp / "src" / ("k" + std::to_string(c)) / ("v" + std::to_string(v)),
                      testing::random_frames(2, 3, 3, 3, c * 10 + v));
  const auto a = convert_dataset(tmp / "src", tmp / "o1").index;
  const auto b = convert_dataset(tmp / "src", tmp / "o2").index;
  CHECK(index_to_json(a) == index_to_json(b));
  CHECK(testing::file_bytes(tmp / "o1" / "index.json") == testing::file_bytes(tmp / "o2" / "index.json"));
}

TEST_CASE("51-class corpus index round-trips through load_index") {
  TempDir tmp;
  for (int c = 0; c < 51; ++c) {
    char name[16];
    std::snprintf(name, sizeof name, "class%02d", 50 - c);
    write_frame_dir(tmp / "src" / name / "v", testing::random_frames(1 + c % 3, 2, 2, 3, c));
  }
  const ConversionResult r = convert_dataset(tmp / "src", tmp / "out");
  const DatasetIndex loaded = load_index(tmp / "out");
  CHECK(loaded.num_classes() == 51);
  CHECK(loaded.classes == r.index.classes);
  CHECK(loaded.splits == r.index.splits);
  CHECK(loaded.root == r.index.root);
  CHECK(index_from_json(index_to_json(loaded), loaded.root) == loaded);
}

TEST_CASE("index referencing a deleted record is an integrity error naming it") {
  TempDir tmp;
  write_frame_dir(tmp / "src" / "c" / "v1", testing::random_frames(2, 2, 2, 3, 1));
  write_frame_dir(tmp / "src" / "c" / "v2", testing::random_frames(2, 2, 2, 3, 2));
  convert_dataset(tmp / "src", tmp / "out");
  fs::remove(tmp / "out" / "c" / "v2.mprv");
  try {
    load_index(tmp / "out");
    FAIL("missing record not detected");
  } catch (const IntegrityError& e) {
    CHECK(std::string(e.what()).find("v2.mprv") != std::string::npos);
  }
}

TEST_CASE("index header mismatch and bad labels are integrity errors") {
  TempDir tmp;
  write_frame_dir(tmp / "src" / "c" / "v1", testing::random_frames(2, 2, 2, 3, 1));
  DatasetIndex idx = convert_dataset(tmp / "src", tmp / "out").index;
  idx.splits["train"][0].num_frames = 5;
  save_index(idx);
  CHECK_THROWS_AS(load_index(tmp / "out"), IntegrityError);
  idx.splits["train"][0].num_frames = 2;
  idx.splits["train"][0].label = 4;
  save_index(idx);
  CHECK_THROWS_AS(load_index(tmp / "out"), IntegrityError);
  idx.splits["train"][0].label = 0;
  idx.splits["test"] = idx.splits["train"];
  save_index(idx);
  CHECK_THROWS_AS(load_index(tmp / "out"), IntegrityError);
}

TEST_CASE("load_index scales linearly with entry count") {
  TempDir tmp;
  // Large payloads make any full read show up against header-only validation.
  const auto frames = testing::random_frames(8, 32, 32, 3, 1);
  DatasetIndex idx;
  idx.root = tmp.path();
  idx.classes = {"c"};
  fs::create_directories(tmp / "c");
  for (int i = 0; i < 1000; ++i) {
    const std::string rel = "c/v" + std::to_string(i) + ".mprv";
    write_record(frames, 0, "c/v" + std::to_string(i), "c", tmp / rel);
    idx.splits["train"].push_back({rel, 0, 8});
  }
  save_index(idx);
  auto time_load = [&](const fs::path& root) {
    const auto t0 = std::chrono::steady_clock::now();
    const DatasetIndex loaded = load_index(root);
    CHECK(loaded.split("train").size() > 0);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  DatasetIndex small = idx;
  small.splits["train"].resize(250);
  small.root = tmp / "small";
  fs::create_directories(small.root);
  fs::create_directory_symlink(tmp / "c", small.root / "c");
  save_index(small);
  time_load(tmp.path());  // warm the page cache
  const double t_small = time_load(small.root);
  const double t_full = time_load(tmp.path());
  MESSAGE("250 entries: " << t_small << " s, 1000 entries: " << t_full << " s");
  CHECK(t_full < 1.0);
  CHECK(t_full < 10.0 * t_small + 0.05);
}
