// SPDX-License-Identifier: Apache-2.0
// Serial reference kernels against their OpenMP counterparts, plus batched
// detector inference.

#include <benchmark/benchmark.h>

#include <vector>

#include "mgtd/corpus.hpp"
#include "mgtd/kernels.hpp"
#include "mgtd/model.hpp"
#include "mgtd/rng.hpp"
#include "mgtd/synthetic.hpp"
#include "mgtd/train.hpp"

namespace {

std::vector<float> random_matrix(std::size_t n, std::uint64_t seed) {
  mgtd::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

template <void (*Gemm)(std::size_t, std::size_t, std::size_t, const float*, const float*, float*, bool)>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n * n, 1);
  const auto b = random_matrix(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    Gemm(n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

BENCHMARK(bm_gemm<mgtd::kernels::serial::gemm_nn<float>>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<mgtd::kernels::omp::gemm_nn<float>>)->Name("gemm_nn/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<mgtd::kernels::serial::gemm_nt<float>>)->Name("gemm_nt/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<mgtd::kernels::omp::gemm_nt<float>>)->Name("gemm_nt/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<mgtd::kernels::serial::gemm_tn<float>>)->Name("gemm_tn/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<mgtd::kernels::omp::gemm_tn<float>>)->Name("gemm_tn/omp")->Arg(64)->Arg(256);

void bm_predict(benchmark::State& state) {
  const auto records = mgtd::synthetic::detection_corpus(256, 7);
  const auto vocab = mgtd::Vocab::build(records, 1000);
  const auto spec = mgtd::make_variant("bilstm_frozen", mgtd::Preset::desk, vocab.size());
  const mgtd::Model<float> model(spec, 7);
  const auto samples = mgtd::prepare_samples(records, vocab, 128);
  for (auto _ : state) benchmark::DoNotOptimize(mgtd::predict(model, samples));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * samples.size()));
  state.counters["threads"] = mgtd::kernels::max_threads();
}

BENCHMARK(bm_predict)->Name("predict/bilstm_frozen_desk")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
