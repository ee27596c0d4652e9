// Parallel kernels against the serial reference loops, at the shapes the
// SAE trainer sees (rows x d_model=768, 200 features).

#include <random>

#include <benchmark/benchmark.h>

#include "sc/kernels.hpp"

namespace {

sc::Matrix filled(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  sc::Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = u(g);
  return m;
}

constexpr std::size_t kD = 768, kM = 200;

struct Shapes {
  sc::Matrix X, W_E, W_D, Z, pre, Xhat, G, out;
  std::vector<double> b, b_E;
  explicit Shapes(std::size_t n)
      : X(filled(n, kD, 1)), W_E(filled(kM, kD, 2)), W_D(filled(kD, kM, 3)), Z(filled(n, kM, 4)),
        pre(n, kM), Xhat(n, kD), G(n, kM), out(kD, kM), b(kD, 0.1), b_E(kM, -0.1) {}
};

template <bool Parallel>
void BM_encode(benchmark::State& state) {
  Shapes s(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) sc::kernels::encode_rows(s.X, s.W_E, s.b, s.b_E, s.pre, s.Z);
    else sc::reference::encode_rows(s.X, s.W_E, s.b, s.b_E, s.pre, s.Z);
    benchmark::DoNotOptimize(s.Z.data());
  }
}

template <bool Parallel>
void BM_decode(benchmark::State& state) {
  Shapes s(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) sc::kernels::decode_rows(s.Z, s.W_D, s.b, s.Xhat);
    else sc::reference::decode_rows(s.Z, s.W_D, s.b, s.Xhat);
    benchmark::DoNotOptimize(s.Xhat.data());
  }
}

template <bool Parallel>
void BM_backprop(benchmark::State& state) {
  Shapes s(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) sc::kernels::backprop_codes(s.X, s.W_D, s.G);
    else sc::reference::backprop_codes(s.X, s.W_D, s.G);
    benchmark::DoNotOptimize(s.G.data());
  }
}

template <bool Parallel>
void BM_outer(benchmark::State& state) {
  Shapes s(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) sc::kernels::outer_accumulate(s.X, s.Z, s.out);
    else sc::reference::outer_accumulate(s.X, s.Z, s.out);
    benchmark::DoNotOptimize(s.out.data());
  }
}

}  // namespace

BENCHMARK(BM_encode<false>)->Name("encode/reference")->Arg(10)->Arg(500);
BENCHMARK(BM_encode<true>)->Name("encode/parallel")->Arg(10)->Arg(500);
BENCHMARK(BM_decode<false>)->Name("decode/reference")->Arg(10)->Arg(500);
BENCHMARK(BM_decode<true>)->Name("decode/parallel")->Arg(10)->Arg(500);
BENCHMARK(BM_backprop<false>)->Name("backprop/reference")->Arg(10)->Arg(500);
BENCHMARK(BM_backprop<true>)->Name("backprop/parallel")->Arg(10)->Arg(500);
BENCHMARK(BM_outer<false>)->Name("outer/reference")->Arg(10)->Arg(500);
BENCHMARK(BM_outer<true>)->Name("outer/parallel")->Arg(10)->Arg(500);

BENCHMARK_MAIN();
