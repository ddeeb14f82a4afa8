// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "clipstream/kernels.hpp"

namespace kn = clipstream::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

template <bool Parallel>
void BM_Resize(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  const std::int64_t frames = 16, c = 3, out = side / 2 + 3;
  const auto src = random_values(static_cast<std::size_t>(frames * side * side * c), 1);
  std::vector<double> dst(static_cast<std::size_t>(frames * out * out * c));
  for (auto _ : state) {
    if constexpr (Parallel)
      kn::resize_bilinear(src, frames, side, side, c, dst, out, out);
    else
      kn::serial::resize_bilinear(src, frames, side, side, c, dst, out, out);
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dst.size()));
}

template <bool Parallel>
void BM_Normalize(benchmark::State& state) {
  const auto in = random_values(static_cast<std::size_t>(state.range(0)), 2);
  const std::vector<double> mean = {127.5, 127.5, 127.5};
  std::vector<double> out(in.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      kn::normalize(in, mean, 1.0 / 255.0, out);
    else
      kn::serial::normalize(in, mean, 1.0 / 255.0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(in.size() * sizeof(double)));
}

template <bool Parallel>
void BM_TemporalMean(benchmark::State& state) {
  const std::int64_t batch = state.range(0), frames = 8, dim = 112 * 112 * 3;
  const auto x = random_values(static_cast<std::size_t>(batch * frames * dim), 3);
  std::vector<double> out(static_cast<std::size_t>(batch * dim));
  for (auto _ : state) {
    if constexpr (Parallel)
      kn::temporal_mean(x, batch, frames, dim, out);
    else
      kn::serial::temporal_mean(x, batch, frames, dim, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_LinearForward(benchmark::State& state) {
  const std::int64_t batch = state.range(0), dim = 16 * 16 * 3, k = 101;
  const auto x = random_values(static_cast<std::size_t>(batch * dim), 4);
  const auto w = random_values(static_cast<std::size_t>(dim * k), 5);
  const auto b = random_values(static_cast<std::size_t>(k), 6);
  std::vector<double> out(static_cast<std::size_t>(batch * k));
  for (auto _ : state) {
    if constexpr (Parallel)
      kn::linear_forward(x, w, b, batch, dim, k, out);
    else
      kn::serial::linear_forward(x, w, b, batch, dim, k, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_LinearBackward(benchmark::State& state) {
  const std::int64_t batch = state.range(0), dim = 16 * 16 * 3, k = 101;
  const auto x = random_values(static_cast<std::size_t>(batch * dim), 7);
  const auto g = random_values(static_cast<std::size_t>(batch * k), 8);
  std::vector<double> gw(static_cast<std::size_t>(dim * k)), gb(static_cast<std::size_t>(k));
  for (auto _ : state) {
    if constexpr (Parallel)
      kn::linear_backward(x, g, batch, dim, k, gw, gb);
    else
      kn::serial::linear_backward(x, g, batch, dim, k, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
}

}  // namespace

BENCHMARK(BM_Resize<false>)->Arg(64)->Arg(128);
BENCHMARK(BM_Resize<true>)->Arg(64)->Arg(128);
BENCHMARK(BM_Normalize<false>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_Normalize<true>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_TemporalMean<false>)->Arg(4)->Arg(16);
BENCHMARK(BM_TemporalMean<true>)->Arg(4)->Arg(16);
BENCHMARK(BM_LinearForward<false>)->Arg(8)->Arg(64);
BENCHMARK(BM_LinearForward<true>)->Arg(8)->Arg(64);
BENCHMARK(BM_LinearBackward<false>)->Arg(8)->Arg(64);
BENCHMARK(BM_LinearBackward<true>)->Arg(8)->Arg(64);

BENCHMARK_MAIN();
