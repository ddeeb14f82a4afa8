// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// Straightforward single-threaded versions of the kernels, one output
// element at a time. Reference for tests and the benchmark baseline.

#include <algorithm>
#include <cmath>

#include "clipstream/kernels.hpp"

namespace clipstream::kernels::serial {

namespace {

void source_coord(std::int64_t i, std::int64_t in, std::int64_t out, std::int64_t& lo,
                  std::int64_t& hi, double& frac) {
  double src = (static_cast<double>(i) + 0.5) * (static_cast<double>(in) / static_cast<double>(out)) - 0.5;
  if (src < 0.0) src = 0.0;
  lo = std::min(static_cast<std::int64_t>(std::floor(src)), in - 1);
  hi = std::min(lo + 1, in - 1);
  frac = src - static_cast<double>(lo);
}

}  // namespace

void resize_bilinear(std::span<const double> src, std::int64_t frames, std::int64_t h,
                     std::int64_t w, std::int64_t c, std::span<double> dst,
                     std::int64_t out_h, std::int64_t out_w) {
  auto at = [&](std::int64_t t, std::int64_t y, std::int64_t x, std::int64_t ch) {
    return src[((t * h + y) * w + x) * c + ch];
  };
  for (std::int64_t t = 0; t < frames; ++t) {
    for (std::int64_t y = 0; y < out_h; ++y) {
      std::int64_t y0, y1;
      double ly;
      source_coord(y, h, out_h, y0, y1, ly);
      for (std::int64_t x = 0; x < out_w; ++x) {
        std::int64_t x0, x1;
        double lx;
        source_coord(x, w, out_w, x0, x1, lx);
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double top = at(t, y0, x0, ch) + (at(t, y0, x1, ch) - at(t, y0, x0, ch)) * lx;
          const double bot = at(t, y1, x0, ch) + (at(t, y1, x1, ch) - at(t, y1, x0, ch)) * lx;
          dst[((t * out_h + y) * out_w + x) * c + ch] = top + (bot - top) * ly;
        }
      }
    }
  }
}

void normalize(std::span<const double> in, std::span<const double> mean, double scale,
               std::span<double> out) {
  const std::size_t c = mean.size();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] - mean[i % c]) * scale;
}

void temporal_mean(std::span<const double> x, std::int64_t batch, std::int64_t frames,
                   std::int64_t dim, std::span<double> out) {
  const double inv = 1.0 / static_cast<double>(frames);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t d = 0; d < dim; ++d) {
      double sum = 0.0;
      for (std::int64_t t = 0; t < frames; ++t) sum += x[(b * frames + t) * dim + d];
      out[b * dim + d] = sum * inv;
    }
  }
}

void linear_forward(std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::int64_t batch, std::int64_t dim,
                    std::int64_t k, std::span<double> out) {
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t j = 0; j < k; ++j) {
      double acc = bias[j];
      for (std::int64_t d = 0; d < dim; ++d) acc += x[b * dim + d] * weight[d * k + j];
      out[b * k + j] = acc;
    }
  }
}

void linear_backward(std::span<const double> x, std::span<const double> grad, std::int64_t batch,
                     std::int64_t dim, std::int64_t k, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
  for (std::int64_t d = 0; d < dim; ++d) {
    for (std::int64_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::int64_t b = 0; b < batch; ++b) acc += x[b * dim + d] * grad[b * k + j];
      grad_weight[d * k + j] = acc;
    }
  }
  for (std::int64_t j = 0; j < k; ++j) {
    double acc = 0.0;
    for (std::int64_t b = 0; b < batch; ++b) acc += grad[b * k + j];
    grad_bias[j] = acc;
  }
}

}  // namespace clipstream::kernels::serial
