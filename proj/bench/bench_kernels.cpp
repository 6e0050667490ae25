#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "pnunet/kernels.hpp"

namespace {

using pnunet::kernels::ConvShape;

std::vector<double> random_values(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

struct ConvFixture {
    ConvShape s;
    std::vector<double> input, weight, bias, output, grad_w, grad_b;

    explicit ConvFixture(const benchmark::State& state) {
        s = {static_cast<int>(state.range(0)), static_cast<int>(state.range(0)),
             static_cast<int>(state.range(1)), static_cast<int>(state.range(2)), 3};
        input = random_values(std::size_t(s.height) * s.width * s.in_channels, 1);
        weight = random_values(std::size_t(9) * s.in_channels * s.out_channels, 2);
        bias = random_values(s.out_channels, 3);
        output.resize(std::size_t(s.height) * s.width * s.out_channels);
        grad_w.resize(weight.size());
        grad_b.resize(bias.size());
    }

    double macs() const {
        return double(s.height) * s.width * 9 * s.in_channels * s.out_channels;
    }
};

template <auto Kernel>
void BM_ConvForward(benchmark::State& state) {
    ConvFixture f(state);
    for (auto _ : state) {
        Kernel(f.s, f.input, f.weight, f.bias, f.output);
        benchmark::DoNotOptimize(f.output.data());
    }
    state.counters["MAC/s"] = benchmark::Counter(f.macs(), benchmark::Counter::kIsIterationInvariantRate);
}

template <auto Kernel>
void BM_ConvBackwardInput(benchmark::State& state) {
    ConvFixture f(state);
    for (auto _ : state) {
        Kernel(f.s, f.output, f.weight, f.input);
        benchmark::DoNotOptimize(f.input.data());
    }
    state.counters["MAC/s"] = benchmark::Counter(f.macs(), benchmark::Counter::kIsIterationInvariantRate);
}

template <auto Kernel>
void BM_ConvBackwardWeight(benchmark::State& state) {
    ConvFixture f(state);
    for (auto _ : state) {
        Kernel(f.s, f.input, f.output, f.grad_w, f.grad_b);
        benchmark::DoNotOptimize(f.grad_w.data());
    }
    state.counters["MAC/s"] = benchmark::Counter(f.macs(), benchmark::Counter::kIsIterationInvariantRate);
}

template <auto Kernel>
void BM_SeparableFilter(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const auto taps = std::vector<double>(11, 1.0 / 11.0);
    const auto input = random_values(std::size_t(side) * side, 4);
    std::vector<double> output(input.size());
    for (auto _ : state) {
        Kernel(side, side, 1, taps, input, output);
        benchmark::DoNotOptimize(output.data());
    }
}

// {side, in_channels, out_channels}: shapes from a 64x64, 8-channel model.
#define CONV_ARGS ->Args({64, 8, 8})->Args({64, 24, 8})->Args({32, 16, 16})->Args({16, 32, 32})

BENCHMARK(BM_ConvForward<pnunet::kernels::conv2d_forward>) CONV_ARGS;
BENCHMARK(BM_ConvForward<pnunet::kernels::reference::conv2d_forward>) CONV_ARGS;
BENCHMARK(BM_ConvBackwardInput<pnunet::kernels::conv2d_backward_input>) CONV_ARGS;
BENCHMARK(BM_ConvBackwardInput<pnunet::kernels::reference::conv2d_backward_input>) CONV_ARGS;
BENCHMARK(BM_ConvBackwardWeight<pnunet::kernels::conv2d_backward_weight>) CONV_ARGS;
BENCHMARK(BM_ConvBackwardWeight<pnunet::kernels::reference::conv2d_backward_weight>) CONV_ARGS;
BENCHMARK(BM_SeparableFilter<pnunet::kernels::separable_filter>)->Arg(64)->Arg(256);
BENCHMARK(BM_SeparableFilter<pnunet::kernels::reference::separable_filter>)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
