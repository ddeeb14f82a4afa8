// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace clipstream {

// (frames, height, width, channels) of a clip.
struct Shape4 {
  std::int64_t t = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::int64_t c = 0;

  std::int64_t numel() const { return t * h * w * c; }
  std::int64_t frame_size() const { return h * w * c; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

// Dense row-major frame volume, frame-major then row, column, channel.
template <typename T>
struct Tensor4 {
  Shape4 shape;
  std::vector<T> data;

  Tensor4() = default;
  explicit Tensor4(Shape4 s, T fill = T{})
      : shape(s), data(static_cast<std::size_t>(s.numel()), fill) {}

  std::size_t index(std::int64_t t, std::int64_t y, std::int64_t x, std::int64_t c) const {
    return static_cast<std::size_t>(((t * shape.h + y) * shape.w + x) * shape.c + c);
  }
  T& at(std::int64_t t, std::int64_t y, std::int64_t x, std::int64_t c) {
    return data[index(t, y, x, c)];
  }
  const T& at(std::int64_t t, std::int64_t y, std::int64_t x, std::int64_t c) const {
    return data[index(t, y, x, c)];
  }
  T* frame(std::int64_t t) { return data.data() + t * shape.frame_size(); }
  const T* frame(std::int64_t t) const { return data.data() + t * shape.frame_size(); }

  bool operator==(const Tensor4&) const = default;
};

using RawClip = Tensor4<std::uint8_t>;
using Clip = Tensor4<double>;

// N-dimensional real array used for model parameters, logits and activations.
struct NdArray {
  std::vector<std::int64_t> shape;
  std::vector<double> values;

  NdArray() = default;
  explicit NdArray(std::vector<std::int64_t> s, double fill = 0.0);

  std::int64_t numel() const;
  double& operator()(std::int64_t i, std::int64_t j) {
    return values[static_cast<std::size_t>(i * shape[1] + j)];
  }
  double operator()(std::int64_t i, std::int64_t j) const {
    return values[static_cast<std::size_t>(i * shape[1] + j)];
  }
  bool operator==(const NdArray&) const = default;
};

std::string shape_str(const std::vector<std::int64_t>& shape);

// Converts raw bytes to real values in [0, 255].
Clip to_real(const RawClip& raw);

}  // namespace clipstream
