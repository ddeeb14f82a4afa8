// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// Data-parallel inner loops. The functions in `kernels` run OpenMP-parallel
// over independent outputs; each output element is still accumulated in a
// fixed serial order, so results are bit-identical to `kernels::serial`,
// which is kept as the reference the tests compare against.

#pragma once

#include <cstdint>
#include <span>

namespace clipstream::kernels {

// Half-pixel-centre bilinear resize (no corner alignment), edge-clamped.
// src is (frames, h, w, c), dst is (frames, out_h, out_w, c).
void resize_bilinear(std::span<const double> src, std::int64_t frames, std::int64_t h,
                     std::int64_t w, std::int64_t c, std::span<double> dst,
                     std::int64_t out_h, std::int64_t out_w);

// out[i] = (in[i] - mean[i % c]) * scale
void normalize(std::span<const double> in, std::span<const double> mean, double scale,
               std::span<double> out);

// x is (batch, frames, dim); out[b, d] = mean over t of x[b, t, d].
void temporal_mean(std::span<const double> x, std::int64_t batch, std::int64_t frames,
                   std::int64_t dim, std::span<double> out);

// out (batch, k) = x (batch, dim) * weight (dim, k) + bias (k).
void linear_forward(std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::int64_t batch, std::int64_t dim,
                    std::int64_t k, std::span<double> out);

// grad_weight (dim, k) = x^T grad; grad_bias (k) = column sums of grad (batch, k).
void linear_backward(std::span<const double> x, std::span<const double> grad, std::int64_t batch,
                     std::int64_t dim, std::int64_t k, std::span<double> grad_weight,
                     std::span<double> grad_bias);

namespace serial {

void resize_bilinear(std::span<const double> src, std::int64_t frames, std::int64_t h,
                     std::int64_t w, std::int64_t c, std::span<double> dst,
                     std::int64_t out_h, std::int64_t out_w);
void normalize(std::span<const double> in, std::span<const double> mean, double scale,
               std::span<double> out);
void temporal_mean(std::span<const double> x, std::int64_t batch, std::int64_t frames,
                   std::int64_t dim, std::span<double> out);
void linear_forward(std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::int64_t batch, std::int64_t dim,
                    std::int64_t k, std::span<double> out);
void linear_backward(std::span<const double> x, std::span<const double> grad, std::int64_t batch,
                     std::int64_t dim, std::int64_t k, std::span<double> grad_weight,
                     std::span<double> grad_bias);

}  // namespace serial

// Limits OpenMP parallelism for kernels called from the calling thread.
// Pipeline workers use this so W workers do not each spawn a full team.
void set_thread_kernel_parallelism(int threads);

}  // namespace clipstream::kernels
