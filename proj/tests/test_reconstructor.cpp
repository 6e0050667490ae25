#include <cmath>

#include <gtest/gtest.h>

#include "pnunet/errors.hpp"
#include "pnunet/reconstructor.hpp"
#include "pnunet/ssim.hpp"
#include "test_util.hpp"

using namespace pnunet;

namespace {

ReconstructorConfig tiny_config(int channels = 1) {
    ReconstructorConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 4;
    cfg.in_channels = channels;
    cfg.seed = 3;
    return cfg;
}

// Small nonzero biases so bias gradients are exercised away from the init point.
void perturb_biases(Reconstructor& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-0.1, 0.1);
    for (auto& t : model.params)
        if (t.name.ends_with(".bias"))
            for (double& v : t.values) v = d(rng);
}

}  // namespace

TEST(Reconstructor, InitIsDeterministicWithZeroBiases) {
    ReconstructorConfig cfg;
    cfg.seed = 42;
    const Reconstructor a = init_reconstructor(cfg), b = init_reconstructor(cfg);
    EXPECT_EQ(a.params, b.params);
    cfg.seed = 43;
    EXPECT_NE(a.params, init_reconstructor(cfg).params);
    for (const auto& t : a.params)
        if (t.name.ends_with(".bias"))
            for (double v : t.values) EXPECT_EQ(v, 0.0) << t.name;
}

TEST(Reconstructor, LayoutFollowsConfig) {
    const Reconstructor m = init_reconstructor(ReconstructorConfig{});
    EXPECT_EQ(m.params.at("enc0.weight").shape, (std::vector<int>{3, 3, 1, 16}));
    EXPECT_EQ(m.params.at("enc3.weight").shape, (std::vector<int>{3, 3, 64, 128}));
    EXPECT_EQ(m.params.at("dec2.weight").shape, (std::vector<int>{3, 3, 128 + 64, 64}));
    EXPECT_EQ(m.params.at("head.weight").shape, (std::vector<int>{3, 3, 16, 1}));
    std::vector<std::string> names;
    for (const auto& t : m.params) names.push_back(t.name);
    EXPECT_EQ(names.front(), "enc0.weight");
    EXPECT_EQ(names.back(), "head.bias");
}

TEST(Reconstructor, InitWithinFanInBound) {
    const Reconstructor m = init_reconstructor(tiny_config());
    for (const auto& t : m.params) {
        if (!t.name.ends_with(".weight")) continue;
        const double bound = std::sqrt(6.0 / (t.shape[0] * t.shape[1] * t.shape[2]));
        for (double v : t.values) {
            EXPECT_LE(std::abs(v), bound);
            EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
        }
    }
}

TEST(Reconstructor, ZeroParamsGiveHalfEverywhere) {
    const Reconstructor m = zero_reconstructor(tiny_config(3));
    const ImageTensor y = forward(m, test::random_image(16, 24, 3, 1));
    for (double v : y.data) EXPECT_EQ(v, 0.5);
}

TEST(Reconstructor, ShapePreservedAndOutputInOpenUnitInterval) {
    for (int ch : {1, 3}) {
        const Reconstructor m = init_reconstructor(tiny_config(ch));
        for (auto [h, w] : {std::pair{8, 8}, std::pair{16, 32}, std::pair{24, 12}}) {
            const ImageTensor x = test::random_image(h, w, ch, h * w);
            const ImageTensor y = forward(m, x);
            EXPECT_TRUE(y.same_shape(x));
            for (double v : y.data) {
                EXPECT_GT(v, 0.0);
                EXPECT_LT(v, 1.0);
            }
        }
    }
}

TEST(Reconstructor, ForwardIsDeterministic) {
    const Reconstructor m = init_reconstructor(tiny_config());
    const ImageTensor x = test::random_image(16, 16, 1, 9);
    EXPECT_EQ(forward(m, x), forward(m, x));
}

TEST(Reconstructor, RejectsBadInput) {
    const Reconstructor m = init_reconstructor(tiny_config());
    EXPECT_THROW(forward(m, ImageTensor(10, 16, 1, 0.5)), ArgumentError);
    EXPECT_THROW(forward(m, ImageTensor(16, 16, 3, 0.5)), ArgumentError);
    ReconstructorConfig bad = tiny_config();
    bad.kernel_size = 4;
    EXPECT_THROW(init_reconstructor(bad), ArgumentError);
    bad = tiny_config();
    bad.base_channels = 1;
    EXPECT_THROW(init_reconstructor(bad), ArgumentError);
}

TEST(Reconstructor, GradientMatchesFiniteDifferences) {
    // loss = ssim_loss(x, forward(params, x + z)); every parameter is checked.
    Reconstructor m = init_reconstructor(tiny_config());
    perturb_biases(m, 5);
    SsimConfig scfg;
    scfg.window_size = 7;
    const ImageTensor x = test::random_image(8, 8, 1, 21, 0.2, 0.8);
    ImageTensor xz = x;
    const ImageTensor z = test::random_image(8, 8, 1, 22, -0.1, 0.1);
    for (std::size_t i = 0; i < xz.size(); ++i) xz.data[i] += z.data[i];

    auto loss_of = [&](const Reconstructor& model) { return ssim_loss(x, forward(model, xz), scfg); };

    ReconstructorTape tape;
    const ImageTensor y = forward_with_tape(m, xz, tape);
    ImageTensor gy;
    ssim_loss_grad(x, y, scfg, nullptr, &gy);
    ParamSet grads = m.params.zeros_like();
    backward(m, tape, gy, grads);

    const double h = 1e-5;  // near cbrt(eps); smaller steps are roundoff-bound
    double worst = 0;
    std::size_t checked = 0;
    for (auto& t : m.params) {
        const auto& g = grads.at(t.name).values;
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const double saved = t.values[i];
            t.values[i] = saved + h;
            const double lp = loss_of(m);
            t.values[i] = saved - h;
            const double lm = loss_of(m);
            t.values[i] = saved;
            const double fd = (lp - lm) / (2 * h);
            const double rel = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6});
            worst = std::max(worst, rel);
            ASSERT_LE(rel, 1e-3) << t.name << "[" << i << "] fd=" << fd << " analytic=" << g[i];
            ++checked;
        }
    }
    EXPECT_EQ(checked, m.params.total_count());
    RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Reconstructor, InputGradientMatchesFiniteDifferences) {
    Reconstructor m = init_reconstructor(tiny_config());
    perturb_biases(m, 6);
    const ImageTensor x = test::random_image(8, 8, 1, 31);
    ImageTensor w = test::random_image(8, 8, 1, 32);

    ReconstructorTape tape;
    forward_with_tape(m, x, tape);
    ParamSet grads = m.params.zeros_like();
    ImageTensor gx;
    backward(m, tape, w, grads, &gx);

    auto dot = [&](const ImageTensor& in) {
        const ImageTensor y = forward(m, in);
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * w.data[i];
        return s;
    };
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ImageTensor p = x, q = x;
        p.data[i] += h;
        q.data[i] -= h;
        const double fd = (dot(p) - dot(q)) / (2 * h);
        EXPECT_NEAR(fd, gx.data[i], 1e-6 + 1e-4 * std::abs(fd));
    }
}

TEST(Reconstructor, WeightsRoundTrip) {
    const auto dir = test::scratch_dir("reconstructor_io");
    const Reconstructor m = init_reconstructor(tiny_config(3));
    save_weights(m, dir / "m.pnuw");
    const Reconstructor back = load_weights(dir / "m.pnuw");
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.params, m.params);
    const ImageTensor x = test::random_image(16, 16, 3, 4);
    EXPECT_EQ(forward(back, x), forward(m, x));
}
