#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pnunet/baseline.hpp"
#include "pnunet/errors.hpp"
#include "pnunet/trainer.hpp"
#include "test_util.hpp"

using namespace pnunet;

namespace {

AutoencoderConfig tiny_ae(int side = 8) {
    AutoencoderConfig c;
    c.levels = 1;
    c.base_channels = 2;
    c.latent_dim = 4;
    c.height = side;
    c.width = side;
    c.seed = 3;
    return c;
}

SsimConfig small_window() {
    SsimConfig s;
    s.window_size = 7;
    return s;
}

void perturb_biases(Autoencoder& ae, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-0.1, 0.1);
    for (auto& t : ae.params)
        if (t.name.ends_with(".bias"))
            for (double& v : t.values) v = d(rng);
}

double relative_error(double fd, double analytic) {
    return std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
}

}  // namespace

TEST(Autoencoder, DecoderOutputShape) {
    for (int side : {8, 16}) {
        AutoencoderConfig c = tiny_ae(side);
        c.levels = 2;
        const Autoencoder ae = init_autoencoder(c);
        const auto z = encode(ae, test::random_image(side, side, 1, 1));
        EXPECT_EQ(z.size(), 4u);
        const ImageTensor y = decode(ae, z);
        EXPECT_EQ(y.height, side);
        EXPECT_EQ(y.width, side);
        EXPECT_EQ(y.channels, 1);
        for (double v : y.data) {
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 1.0);
        }
    }
    AutoencoderConfig bad = tiny_ae(12);
    bad.levels = 3;
    EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(Autoencoder, ParameterGradientsMatchFiniteDifferences) {
    Autoencoder ae = init_autoencoder(tiny_ae());
    perturb_biases(ae, 9);
    const SsimConfig s = small_window();
    const ImageTensor x = test::random_image(8, 8, 1, 4, 0.2, 0.8);
    auto loss_of = [&] { return ssim_loss(x, decode(ae, encode(ae, x)), s); };

    EncoderTape et;
    DecoderTape dt;
    const ImageTensor y = decode(ae, encode(ae, x, &et), &dt);
    ImageTensor g;
    ssim_loss_grad(x, y, s, nullptr, &g);
    ParamSet grads = ae.params.zeros_like();
    std::vector<double> g_latent;
    decoder_backward(ae, dt, g, &grads, &g_latent);
    encoder_backward(ae, et, g_latent, grads);

    const double h = 1e-5;
    std::size_t checked = 0;
    for (auto& t : ae.params) {
        const auto& ga = grads.at(t.name).values;
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const double saved = t.values[i];
            t.values[i] = saved + h;
            const double lp = loss_of();
            t.values[i] = saved - h;
            const double lm = loss_of();
            t.values[i] = saved;
            const double fd = (lp - lm) / (2 * h);
            ASSERT_LE(relative_error(fd, ga[i]), 1e-3) << t.name << "[" << i << "]";
            ++checked;
        }
    }
    EXPECT_EQ(checked, ae.params.total_count());
}

TEST(Autoencoder, LatentGradientMatchesFiniteDifferences) {
    Autoencoder ae = init_autoencoder(tiny_ae());
    perturb_biases(ae, 10);
    const SsimConfig s = small_window();
    const ImageTensor x = test::random_image(8, 8, 1, 5, 0.2, 0.8);
    std::vector<double> z = encode(ae, x);

    DecoderTape dt;
    ImageTensor g;
    ssim_loss_grad(x, decode(ae, z, &dt), s, nullptr, &g);
    std::vector<double> g_latent;
    decoder_backward(ae, dt, g, nullptr, &g_latent);
    ASSERT_EQ(g_latent.size(), z.size());

    const double h = 1e-6;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double saved = z[i];
        z[i] = saved + h;
        const double lp = ssim_loss(x, decode(ae, z), s);
        z[i] = saved - h;
        const double lm = ssim_loss(x, decode(ae, z), s);
        z[i] = saved;
        EXPECT_LE(relative_error((lp - lm) / (2 * h), g_latent[i]), 1e-3) << i;
    }
}

TEST(Autoencoder, TrainingReducesLossAndZeroRateIsIdentity) {
    Dataset d;
    d.normal.push_back({"x", test::random_image(8, 8, 1, 7, 0.3, 0.7)});
    TrainConfig cfg;
    cfg.iterations = 150;
    cfg.batch_size = 1;
    cfg.patch_size = 8;
    cfg.learning_rate = 1e-2;
    const auto r = train_autoencoder(d, cfg, tiny_ae(), small_window());
    ASSERT_EQ(r.loss_history.size(), 150u);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());

    cfg.learning_rate = 0.0;
    cfg.iterations = 3;
    EXPECT_EQ(train_autoencoder(d, cfg, tiny_ae(), small_window()).model.params,
              init_autoencoder(tiny_ae()).params);
    cfg.patch_size = 16;
    EXPECT_THROW(train_autoencoder(d, cfg, tiny_ae(), small_window()), ArgumentError);
}

TEST(Autoencoder, WeightFileRoundTrip) {
    const auto dir = test::scratch_dir("baseline_ae");
    Autoencoder ae = init_autoencoder(tiny_ae());
    save_autoencoder(ae, dir / "ae.pnuw");
    const Autoencoder back = load_autoencoder(dir / "ae.pnuw");
    EXPECT_EQ(back.params, ae.params);
    EXPECT_EQ(to_json(back.config), to_json(ae.config));
    ReconstructorConfig rc;
    rc.levels = 1;
    rc.base_channels = 2;
    save_weights(init_reconstructor(rc), dir / "recon.pnuw");
    EXPECT_THROW(load_autoencoder(dir / "recon.pnuw"), FormatError);
}

TEST(LatentSearch, ZeroStepsIsPlainAutoencoding) {
    const Autoencoder ae = init_autoencoder(tiny_ae(16));
    const ImageTensor x = test::random_image(16, 16, 1, 1);
    SearchConfig sc;
    sc.steps = 0;
    const SearchResult r = latent_search_infer(ae, x, sc);
    EXPECT_EQ(r.reconstruction, decode(ae, encode(ae, x)));
    EXPECT_EQ(r.best_loss, r.initial_loss);
    EXPECT_GE(r.elapsed_seconds, 0.0);
    EXPECT_EQ(r.residual_map.channels, 1);
}

TEST(LatentSearch, BestLossIsMonotoneInSteps) {
    const Autoencoder ae = init_autoencoder(tiny_ae(16));
    const ImageTensor x = test::random_image(16, 16, 1, 2, 0.2, 0.8);
    SearchConfig sc;
    sc.step_size = 0.5;
    double prev = 1e9;
    for (int n : {0, 5, 20, 60}) {
        sc.steps = n;
        const SearchResult r = latent_search_infer(ae, x, sc);
        EXPECT_LE(r.best_loss, r.initial_loss);
        EXPECT_LE(r.best_loss, prev) << n;
        EXPECT_NEAR(ssim_loss(x, r.reconstruction, SsimConfig{}), r.best_loss, 1e-12);
        prev = r.best_loss;
    }
    EXPECT_LT(prev, latent_search_infer(ae, x, {.steps = 0}).initial_loss);

    sc.restarts = 3;
    sc.steps = 20;
    const SearchResult multi = latent_search_infer(ae, x, sc);
    sc.restarts = 1;
    EXPECT_LE(multi.best_loss, latent_search_infer(ae, x, sc).best_loss);
}

TEST(LatentSearch, InvalidConfig) {
    const Autoencoder ae = init_autoencoder(tiny_ae());
    const ImageTensor x = test::random_image(8, 8, 1, 1);
    EXPECT_THROW(latent_search_infer(ae, x, {.steps = -1}), ArgumentError);
    EXPECT_THROW(latent_search_infer(ae, x, {.steps = 1, .step_size = 0.0}), ArgumentError);
    EXPECT_THROW(latent_search_infer(ae, x, {.steps = 1, .step_size = 0.1, .restarts = 0}), ArgumentError);
}

TEST(LatentSearch, ElapsedTimeIsLinearInSteps) {
    AutoencoderConfig c = tiny_ae(32);
    c.levels = 2;
    c.base_channels = 4;
    const Autoencoder ae = init_autoencoder(c);
    const ImageTensor x = test::random_image(32, 32, 1, 3);
    const std::vector<double> ns{50, 100, 200, 400};
    std::vector<double> ts;
    for (double n : ns) {
        double best = 1e9;
        for (int rep = 0; rep < 3; ++rep)
            best = std::min(best, latent_search_infer(ae, x, {.steps = static_cast<int>(n)}).elapsed_seconds);
        ts.push_back(best);
    }
    // Least-squares line and its coefficient of determination.
    const double k = static_cast<double>(ns.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        mx += ns[i] / k;
        my += ts[i] / k;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        sxy += (ns[i] - mx) * (ts[i] - my);
        sxx += (ns[i] - mx) * (ns[i] - mx);
        syy += (ts[i] - my) * (ts[i] - my);
    }
    const double r2 = sxy * sxy / (sxx * syy);
    EXPECT_GE(r2, 0.95);
    EXPECT_GT(sxy, 0.0);
    RecordProperty("r_squared", std::to_string(r2));
}

TEST(Bench, RatioIsRecordedMeanQuotient) {
    ReconstructorConfig rc;
    rc.levels = 2;
    rc.base_channels = 4;
    const Reconstructor recon = init_reconstructor(rc);
    AutoencoderConfig ac = tiny_ae(16);
    ac.levels = 2;
    const Autoencoder ae = init_autoencoder(ac);
    std::vector<ImageTensor> images;
    for (int i = 0; i < 10; ++i) images.push_back(test::random_image(16, 16, 1, 40 + i));

    const BenchReport zero = bench_inference(recon, ae, images, {.steps = 0});
    EXPECT_EQ(zero.forward_seconds.size(), 10u);
    EXPECT_EQ(zero.ratio, zero.mean_search_seconds / zero.mean_forward_seconds);
    EXPECT_LT(zero.ratio, 10.0);

    const BenchReport many = bench_inference(recon, ae, images, {.steps = 100});
    EXPECT_EQ(many.ratio, many.mean_search_seconds / many.mean_forward_seconds);
    EXPECT_GT(many.mean_search_seconds, zero.mean_search_seconds);
    EXPECT_EQ(many.steps, 100);
    EXPECT_EQ(many.height, 16);
    const auto j = many.to_json();
    EXPECT_EQ(j["ratio"].get<double>(), many.ratio);
    EXPECT_EQ(j["search_seconds"].size(), 10u);
    EXPECT_FALSE(many.host.empty());
    EXPECT_THROW(bench_inference(recon, ae, {}, {}), ArgumentError);
}
