// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <omp.h>

namespace clipstream::kernels {

namespace {

// Source coordinate table for one axis, half-pixel centres, edge-clamped.
struct AxisTaps {
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> hi;
  std::vector<double> frac;
};

AxisTaps axis_taps(std::int64_t in, std::int64_t out) {
  AxisTaps taps;
  taps.lo.resize(out);
  taps.hi.resize(out);
  taps.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::int64_t lo = static_cast<std::int64_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    taps.lo[i] = lo;
    taps.hi[i] = std::min(lo + 1, in - 1);
    taps.frac[i] = src - static_cast<double>(lo);
  }
  return taps;
}

}  // namespace

void resize_bilinear(std::span<const double> src, std::int64_t frames, std::int64_t h,
                     std::int64_t w, std::int64_t c, std::span<double> dst,
                     std::int64_t out_h, std::int64_t out_w) {
  const AxisTaps ys = axis_taps(h, out_h);
  const AxisTaps xs = axis_taps(w, out_w);
  const double* in = src.data();
  double* out = dst.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t t = 0; t < frames; ++t) {
    for (std::int64_t y = 0; y < out_h; ++y) {
      const double* row0 = in + (t * h + ys.lo[y]) * w * c;
      const double* row1 = in + (t * h + ys.hi[y]) * w * c;
      const double ly = ys.frac[y];
      double* o = out + (t * out_h + y) * out_w * c;
      for (std::int64_t x = 0; x < out_w; ++x) {
        const std::int64_t x0 = xs.lo[x] * c;
        const std::int64_t x1 = xs.hi[x] * c;
        const double lx = xs.frac[x];
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double top = row0[x0 + ch] + (row0[x1 + ch] - row0[x0 + ch]) * lx;
          const double bot = row1[x0 + ch] + (row1[x1 + ch] - row1[x0 + ch]) * lx;
          o[x * c + ch] = top + (bot - top) * ly;
        }
      }
    }
  }
}

void normalize(std::span<const double> in, std::span<const double> mean, double scale,
               std::span<double> out) {
  const std::int64_t n = static_cast<std::int64_t>(in.size());
  const std::int64_t c = static_cast<std::int64_t>(mean.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = (in[i] - mean[i % c]) * scale;
  }
}

void temporal_mean(std::span<const double> x, std::int64_t batch, std::int64_t frames,
                   std::int64_t dim, std::span<double> out) {
  const double inv = 1.0 / static_cast<double>(frames);
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t d = 0; d < dim; ++d) {
      const double* base = x.data() + b * frames * dim + d;
      double sum = 0.0;
      for (std::int64_t t = 0; t < frames; ++t) sum += base[t * dim];
      out[b * dim + d] = sum * inv;
    }
  }
}

void linear_forward(std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::int64_t batch, std::int64_t dim,
                    std::int64_t k, std::span<double> out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t j = 0; j < k; ++j) {
      const double* row = x.data() + b * dim;
      double acc = bias[j];
      for (std::int64_t d = 0; d < dim; ++d) acc += row[d] * weight[d * k + j];
      out[b * k + j] = acc;
    }
  }
}

void linear_backward(std::span<const double> x, std::span<const double> grad, std::int64_t batch,
                     std::int64_t dim, std::int64_t k, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
#pragma omp parallel for schedule(static)
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

void set_thread_kernel_parallelism(int threads) { omp_set_num_threads(std::max(threads, 1)); }

}  // namespace clipstream::kernels
