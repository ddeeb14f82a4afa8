// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace clipstream {

// Base for every error raised by the library. The module tag is prefixed to
// what() so messages surfaced by the CLI are module-qualified.
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(module) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

#define CLIPSTREAM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    Name(const std::string& module, const std::string& message)        \
        : Error(module, message) {}                                     \
  }

CLIPSTREAM_DEFINE_ERROR(ShapeError);
CLIPSTREAM_DEFINE_ERROR(IoError);
CLIPSTREAM_DEFINE_ERROR(IntegrityError);
CLIPSTREAM_DEFINE_ERROR(ConfigError);
CLIPSTREAM_DEFINE_ERROR(NotFoundError);
CLIPSTREAM_DEFINE_ERROR(ValidationError);
CLIPSTREAM_DEFINE_ERROR(ConsistencyError);
CLIPSTREAM_DEFINE_ERROR(RegistrationError);
CLIPSTREAM_DEFINE_ERROR(CompositionError);
CLIPSTREAM_DEFINE_ERROR(NotImplementedError);

#undef CLIPSTREAM_DEFINE_ERROR

// Malformed binary input; offset is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& module, const std::string& message,
              std::uint64_t offset)
      : Error(module, message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace clipstream
