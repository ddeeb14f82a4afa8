// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/tensor.hpp"

#include <numeric>

namespace clipstream {

std::string Shape4::str() const {
  return "(" + std::to_string(t) + ", " + std::to_string(h) + ", " + std::to_string(w) + ", " +
         std::to_string(c) + ")";
}

NdArray::NdArray(std::vector<std::int64_t> s, double fill) : shape(std::move(s)) {
  values.assign(static_cast<std::size_t>(numel()), fill);
}

std::int64_t NdArray::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         [](std::int64_t a, std::int64_t b) { return a * b; });
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Clip to_real(const RawClip& raw) {
  Clip out;
  out.shape = raw.shape;
  out.data.assign(raw.data.begin(), raw.data.end());
  return out;
}

}  // namespace clipstream
