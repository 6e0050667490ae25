#include <random>
#include <vector>

#include <gtest/gtest.h>
#include <omp.h>

#include "pnunet/kernels.hpp"
#include "pnunet/ssim.hpp"

using namespace pnunet;
namespace k = pnunet::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

struct Case {
    k::ConvShape shape;
};

class ConvKernels : public ::testing::TestWithParam<k::ConvShape> {};

}  // namespace

TEST_P(ConvKernels, ParallelMatchesReference) {
    const k::ConvShape s = GetParam();
    const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
    const auto in = random_vec(hw * s.in_channels, 1);
    const auto w = random_vec(static_cast<std::size_t>(s.kernel) * s.kernel * s.in_channels * s.out_channels, 2);
    const auto b = random_vec(s.out_channels, 3);
    const auto go = random_vec(hw * s.out_channels, 4);

    std::vector<double> out(hw * s.out_channels), ref_out(out.size());
    k::conv2d_forward(s, in, w, b, out);
    k::reference::conv2d_forward(s, in, w, b, ref_out);
    EXPECT_LE(max_abs_diff(out, ref_out), 1e-12);

    std::vector<double> gi(hw * s.in_channels, 7.0), ref_gi(gi.size(), -3.0);
    k::conv2d_backward_input(s, go, w, gi);
    k::reference::conv2d_backward_input(s, go, w, ref_gi);
    EXPECT_LE(max_abs_diff(gi, ref_gi), 1e-12);

    std::vector<double> gw(w.size(), 0.5), ref_gw(w.size(), 0.5);
    std::vector<double> gb(b.size(), 0.25), ref_gb(b.size(), 0.25);
    k::conv2d_backward_weight(s, in, go, gw, gb);
    k::reference::conv2d_backward_weight(s, in, go, ref_gw, ref_gb);
    EXPECT_LE(max_abs_diff(gw, ref_gw), 1e-10);
    EXPECT_LE(max_abs_diff(gb, ref_gb), 1e-10);
}

TEST_P(ConvKernels, BackwardInputIsAdjointOfForward) {
    // <conv(x), y> == <x, conv^T(y)> with zero bias.
    const k::ConvShape s = GetParam();
    const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
    const auto x = random_vec(hw * s.in_channels, 11);
    const auto y = random_vec(hw * s.out_channels, 12);
    const auto w = random_vec(static_cast<std::size_t>(s.kernel) * s.kernel * s.in_channels * s.out_channels, 13);
    const std::vector<double> zero(s.out_channels, 0.0);
    std::vector<double> ax(y.size()), aty(x.size());
    k::conv2d_forward(s, x, w, zero, ax);
    k::conv2d_backward_input(s, y, w, aty);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += ax[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
    EXPECT_NEAR(lhs, rhs, 1e-9 * (1 + std::abs(lhs)));
}

TEST_P(ConvKernels, ResultIndependentOfThreadCount) {
    const k::ConvShape s = GetParam();
    const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
    const auto in = random_vec(hw * s.in_channels, 21);
    const auto w = random_vec(static_cast<std::size_t>(s.kernel) * s.kernel * s.in_channels * s.out_channels, 22);
    const auto b = random_vec(s.out_channels, 23);
    const auto go = random_vec(hw * s.out_channels, 24);
    auto run = [&](int threads) {
        const int saved = omp_get_max_threads();
        omp_set_num_threads(threads);
        std::vector<double> out(hw * s.out_channels), gw(w.size()), gb(b.size()), gi(in.size());
        k::conv2d_forward(s, in, w, b, out);
        k::conv2d_backward_weight(s, in, go, gw, gb);
        k::conv2d_backward_input(s, go, w, gi);
        omp_set_num_threads(saved);
        out.insert(out.end(), gw.begin(), gw.end());
        out.insert(out.end(), gb.begin(), gb.end());
        out.insert(out.end(), gi.begin(), gi.end());
        return out;
    };
    const auto one = run(1);
    EXPECT_EQ(one, run(3));
    EXPECT_EQ(one, run(4));
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvKernels,
                         ::testing::Values(k::ConvShape{8, 8, 1, 4, 3}, k::ConvShape{9, 7, 3, 2, 3},
                                           k::ConvShape{16, 16, 4, 8, 5}, k::ConvShape{5, 6, 2, 3, 1},
                                           k::ConvShape{12, 10, 6, 5, 3}));

TEST(SeparableFilter, MatchesDirectWindowSum) {
    for (int window : {3, 7, 11}) {
        const auto taps = gaussian_taps(window, 1.5);
        const int h = 13, w = 17, c = 2;
        const auto in = random_vec(static_cast<std::size_t>(h) * w * c, 31 + window);
        std::vector<double> out(in.size()), ref(in.size());
        k::separable_filter(h, w, c, taps, in, out);
        k::reference::separable_filter(h, w, c, taps, in, ref);
        EXPECT_LE(max_abs_diff(out, ref), 1e-12) << "window " << window;
    }
}

TEST(SeparableFilter, PreservesMassAndIsSelfAdjoint) {
    const auto taps = gaussian_taps(11, 1.5);
    const int h = 16, w = 12, c = 1;
    const auto x = random_vec(static_cast<std::size_t>(h) * w, 41);
    const auto y = random_vec(x.size(), 42);
    std::vector<double> fx(x.size()), fy(y.size());
    k::separable_filter(h, w, c, taps, x, fx);
    k::separable_filter(h, w, c, taps, y, fy);
    double sx = 0, sfx = 0, lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sfx += fx[i];
        lhs += fx[i] * y[i];
        rhs += x[i] * fy[i];
    }
    EXPECT_NEAR(sx, sfx, 1e-10);
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(SeparableFilter, ConstantIsFixedPoint) {
    const auto taps = gaussian_taps(11, 1.5);
    std::vector<double> in(10 * 10, 0.37), out(in.size());
    k::separable_filter(10, 10, 1, taps, in, out);
    for (double v : out) EXPECT_NEAR(v, 0.37, 1e-14);
}

TEST(MirrorIndex, HalfSampleSymmetric) {
    EXPECT_EQ(k::mirror_index(-1, 5), 0);
    EXPECT_EQ(k::mirror_index(-3, 5), 2);
    EXPECT_EQ(k::mirror_index(5, 5), 4);
    EXPECT_EQ(k::mirror_index(7, 5), 2);
    EXPECT_EQ(k::mirror_index(2, 5), 2);
}
