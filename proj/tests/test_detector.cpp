#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pnunet/detector.hpp"
#include "pnunet/errors.hpp"
#include "test_util.hpp"

using namespace pnunet;

namespace {

const ReconstructFn identity = [](const ImageTensor& x) { return x; };

// Mann-Whitney statistic over every (positive, negative) pair; ties count half.
double pairwise_auroc(const std::vector<double>& s, const std::vector<unsigned char>& l) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (l[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (l[j] != 0) continue;
            pairs += 1.0;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

AnomalyResult wrap(ImageTensor map) {
    AnomalyResult r;
    r.map = std::move(map);
    return r;
}

double total(const ImageTensor& m) {
    double s = 0.0;
    for (double v : m.data) s += v;
    return s;
}

}  // namespace

TEST(PixelAuroc, FourPixelExample) {
    const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    const std::vector<unsigned char> l{1, 0, 1, 0};
    EXPECT_DOUBLE_EQ(pixel_auroc(s, l), 0.75);
    EXPECT_DOUBLE_EQ(pairwise_auroc(s, l), 0.75);
}

TEST(PixelAuroc, PerfectAndConstantMaps) {
    const ImageTensor gt = binarize(test::random_image(8, 8, 1, 3));
    const std::vector<AnomalyResult> perfect{wrap(gt)};
    const std::vector<ImageTensor> gts{gt};
    EXPECT_DOUBLE_EQ(pixel_auroc(perfect, gts), 1.0);
    const std::vector<AnomalyResult> flat{wrap(ImageTensor(8, 8, 1, 0.3))};
    EXPECT_DOUBLE_EQ(pixel_auroc(flat, gts), 0.5);
}

TEST(PixelAuroc, MatchesPairwiseOracleWithTies) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> level(0, 9);  // few levels force ties
    std::bernoulli_distribution label(0.3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s(300);
        std::vector<unsigned char> l(300);
        for (std::size_t i = 0; i < s.size(); ++i) {
            l[i] = label(rng) ? 1 : 0;
            s[i] = level(rng) * 0.1 + (l[i] ? 0.15 : 0.0);
        }
        l[0] = 1;
        l[1] = 0;
        EXPECT_NEAR(pixel_auroc(s, l), pairwise_auroc(s, l), 1e-12);
    }
}

TEST(PixelAuroc, InvariantUnderIncreasingTransforms) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(500);
    std::vector<unsigned char> l(500);
    for (std::size_t i = 0; i < s.size(); ++i) {
        l[i] = u(rng) < 0.2 ? 1 : 0;
        s[i] = std::round((u(rng) + 0.3 * l[i]) * 50.0) / 50.0;
    }
    const double base = pixel_auroc(s, l);
    for (auto f : {+[](double v) { return std::exp(3.0 * v); }, +[](double v) { return v * v * v + 2.0; },
                   +[](double v) { return std::log1p(v) * 1e-6; }}) {
        std::vector<double> t(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) t[i] = f(s[i]);
        EXPECT_DOUBLE_EQ(pixel_auroc(t, l), base);
    }
}

TEST(PixelAuroc, SingleClassIsUndefined) {
    const std::vector<double> s{0.1, 0.2};
    EXPECT_THROW(pixel_auroc(s, std::vector<unsigned char>{1, 1}), MetricError);
    EXPECT_THROW(pixel_auroc(s, std::vector<unsigned char>{0, 0}), MetricError);
    const std::vector<AnomalyResult> maps{wrap(ImageTensor(4, 4, 1, 0.5))};
    const std::vector<ImageTensor> gts{ImageTensor(4, 4, 1, 0.0)};
    EXPECT_THROW(pixel_auroc(maps, gts), MetricError);
    const std::vector<ImageTensor> wrong{ImageTensor(4, 8, 1, 0.0)};
    EXPECT_THROW(pixel_auroc(maps, wrong), ArgumentError);
}

TEST(Threshold, PercentileExamples) {
    std::vector<double> v(99, 0.0);
    v.push_back(1.0);
    EXPECT_EQ(percentile_linear(v, 50.0), 0.0);
    EXPECT_NEAR(percentile_linear(v, 99.5), 0.505, 1e-12);  // position 0.995 * 99 = 98.505
    EXPECT_NEAR(percentile_linear(v, 100.0 - 1e-9), 1.0, 1e-6);
    EXPECT_DOUBLE_EQ(percentile_linear({1.0, 2.0, 3.0, 4.0}, 50.0), 2.5);
    EXPECT_THROW(percentile_linear({}, 50.0), ArgumentError);
    EXPECT_THROW(percentile_linear(v, 0.0), ArgumentError);
    EXPECT_THROW(percentile_linear(v, 100.0), ArgumentError);

    const std::vector<AnomalyResult> zeros{wrap(ImageTensor(8, 8, 1, 0.0)), wrap(ImageTensor(8, 8, 1, 0.0))};
    EXPECT_EQ(choose_threshold(zeros, 99.5), 0.0);
    EXPECT_THROW(choose_threshold(std::vector<AnomalyResult>{}, 99.5), ArgumentError);
}

TEST(Threshold, FalsePositiveRateOnSameDistribution) {
    // Normal maps drawn i.i.d.: the held-out exceedance rate tracks 100 - p.
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::vector<AnomalyResult> val, held;
        for (int i = 0; i < 10; ++i) {
            val.push_back(wrap(test::random_image(64, 64, 1, seed * 100 + i)));
            held.push_back(wrap(test::random_image(64, 64, 1, seed * 100 + 50 + i)));
        }
        const double t = choose_threshold(val, 99.5);
        EXPECT_LE(positive_pixel_rate(held, t), 0.005 + 0.002);
    }
}

TEST(Threshold, ApplyThresholdBinarizes) {
    AnomalyResult r = wrap(test::random_image(8, 8, 1, 4));
    apply_threshold(r, 0.5);
    ASSERT_TRUE(r.binary_mask.has_value());
    EXPECT_EQ(*r.threshold_used, 0.5);
    for (std::size_t i = 0; i < r.map.size(); ++i)
        EXPECT_EQ(r.binary_mask->data[i], r.map.data[i] > 0.5 ? 1.0 : 0.0);
}

TEST(AnomalyMap, IdentityReconstructorGivesZeroMap) {
    const ImageTensor x = test::random_image(16, 16, 3, 9);
    for (double sigma : {0.0, 1.0}) {
        const AnomalyResult r = anomaly_map(identity, x, sigma);
        EXPECT_EQ(r.map.channels, 1);
        for (double v : r.map.data) EXPECT_EQ(v, 0.0);
        EXPECT_EQ(r.image_score, 0.0);
    }
}

TEST(AnomalyMap, SinglePixelIsLocalWithoutSmoothing) {
    const ReconstructFn fixed = [](const ImageTensor& x) { return ImageTensor(x.height, x.width, x.channels, 0.4); };
    ImageTensor x(16, 16, 2, 0.4);
    x.at(5, 9, 0) = 1.0;
    const AnomalyResult r = anomaly_map(fixed, x, 0.0);
    for (int y = 0; y < 16; ++y)
        for (int xx = 0; xx < 16; ++xx)
            EXPECT_NEAR(r.map.at(y, xx), (y == 5 && xx == 9) ? 0.3 : 0.0, 1e-15);
    EXPECT_NEAR(r.image_score, 0.3, 1e-15);

    const AnomalyResult smooth = anomaly_map(fixed, x, 1.0);
    for (int y = 0; y < 16; ++y)
        for (int xx = 0; xx < 16; ++xx)
            if (std::abs(y - 5) > 3 || std::abs(xx - 9) > 3) EXPECT_EQ(smooth.map.at(y, xx), 0.0);
}

TEST(AnomalyMap, SmoothingPreservesMass) {
    const ReconstructFn half = [](const ImageTensor& x) { return ImageTensor(x.height, x.width, x.channels, 0.5); };
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const ImageTensor x = test::random_image(24, 20, 1, seed);
        const double raw = total(anomaly_map(half, x, 0.0).map);
        for (double sigma : {0.5, 1.0, 2.5, 10.0})
            EXPECT_NEAR(total(anomaly_map(half, x, sigma).map), raw, 1e-6) << sigma;
    }
}

TEST(AnomalyMap, ScoreIsMaxAndMapIsNonnegative) {
    const ReconstructFn shift = [](const ImageTensor& x) {
        ImageTensor y = x;
        for (double& v : y.data) v = 1.0 - v;
        return y;
    };
    const ImageTensor x = test::random_image(16, 16, 1, 12);
    for (MapMode mode : {MapMode::abs_diff, MapMode::ssim}) {
        const AnomalyResult r = anomaly_map(shift, x, 1.0, mode);
        double mx = 0.0;
        for (double v : r.map.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_TRUE(std::isfinite(v));
            mx = std::max(mx, v);
        }
        EXPECT_EQ(r.image_score, mx);
    }
}

TEST(AnomalyMap, DeterministicAndNoiseFree) {
    ReconstructorConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 4;
    const Reconstructor model = init_reconstructor(cfg);
    const ImageTensor x = test::random_image(16, 16, 1, 2);
    const AnomalyResult a = anomaly_map(model, x, 1.0);
    const AnomalyResult b = anomaly_map(model, x, 1.0);
    EXPECT_EQ(a.map, b.map);
    const ImageTensor recon = forward(model, x);
    const AnomalyResult raw = anomaly_map(model, x, 0.0);
    for (int y = 0; y < 16; ++y)
        for (int xx = 0; xx < 16; ++xx) EXPECT_EQ(raw.map.at(y, xx), std::abs(x.at(y, xx) - recon.at(y, xx)));
    EXPECT_THROW(anomaly_map(model, x, -1.0), ArgumentError);
}

TEST(Contrast, RatioOfMeans) {
    ImageTensor map(4, 4, 1, 0.1);
    ImageTensor gt(4, 4, 1, 0.0);
    map.at(0, 0) = 0.5;
    gt.at(0, 0) = 1.0;
    const std::vector<AnomalyResult> maps{wrap(map)};
    const std::vector<ImageTensor> gts{gt};
    EXPECT_NEAR(contrast_ratio(maps, gts), 5.0, 1e-12);
    const std::vector<ImageTensor> empty{ImageTensor(4, 4, 1, 0.0)};
    EXPECT_THROW(contrast_ratio(maps, empty), MetricError);
}
