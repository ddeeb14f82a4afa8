// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// Frame image decoding: binary PPM/PGM (P6/P5, maxval <= 255) and PNG.

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string>

#include <png.h>

#include "byte_io.hpp"
#include "clipstream/errors.hpp"
#include "clipstream/record_store.hpp"

namespace clipstream {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "record_store";

class PnmReader {
 public:
  PnmReader(const std::vector<std::uint8_t>& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  // Next whitespace-separated header token, skipping '#' comments.
  unsigned long next_number() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) ++pos_;
    if (start == pos_) throw FormatError(kModule, "bad PNM header in " + path_.string(), pos_);
    return std::stoul(std::string(bytes_.begin() + static_cast<std::ptrdiff_t>(start),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_)));
  }

  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t pos_ = 2;

 private:
  const std::vector<std::uint8_t>& bytes_;
  const fs::path& path_;
};

Frame read_pnm(const fs::path& path) {
  const auto bytes = detail::read_file(path, kModule);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5'))
    throw FormatError(kModule, "not a binary PPM/PGM: " + path.string(), 0);
  PnmReader reader(bytes, path);
  Frame f;
  f.channels = bytes[1] == '6' ? 3 : 1;
  f.width = static_cast<std::uint32_t>(reader.next_number());
  f.height = static_cast<std::uint32_t>(reader.next_number());
  const unsigned long maxval = reader.next_number();
  if (maxval == 0 || maxval > 255)
    throw FormatError(kModule, "unsupported PNM maxval in " + path.string(), reader.pos_);
  // Exactly one whitespace byte separates the header from the raster.
  std::size_t start = reader.pos_ + 1;
  const std::size_t need = std::size_t{f.width} * f.height * f.channels;
  if (f.width == 0 || f.height == 0 || bytes.size() < start + need)
    throw FormatError(kModule, "truncated PNM raster in " + path.string(), bytes.size());
  f.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                  bytes.begin() + static_cast<std::ptrdiff_t>(start + need));
  return f;
}

Frame read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError(kModule, "cannot decode PNG " + path.string() + ": " + image.message);
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Frame f;
  f.width = image.width;
  f.height = image.height;
  f.channels = gray ? 1 : 3;
  f.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, f.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(kModule, "cannot decode PNG " + path.string() + ": " + msg);
  }
  return f;
}

}  // namespace

Frame read_frame_image(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") return read_png(path);
  return read_pnm(path);
}

void write_ppm(const Frame& frame, const fs::path& path) {
  const std::string header = std::string(frame.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(frame.width) + " " + std::to_string(frame.height) +
                             "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), frame.pixels.begin(), frame.pixels.end());
  detail::write_file(path, bytes, kModule);
}

void write_png(const Frame& frame, const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = frame.width;
  image.height = frame.height;
  image.format = frame.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, frame.pixels.data(), 0, nullptr))
    throw IoError(kModule, "cannot write PNG " + path.string() + ": " + image.message);
}

}  // namespace clipstream
