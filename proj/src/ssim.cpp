#include "pnunet/ssim.hpp"

#include <algorithm>
#include <cmath>

#include "pnunet/errors.hpp"
#include "pnunet/kernels.hpp"

namespace pnunet {

void SsimConfig::validate() const {
    if (window_size < 3 || window_size % 2 == 0)
        throw ArgumentError("ssim window_size must be odd and >= 3");
    if (!(sigma > 0.0)) throw ArgumentError("ssim sigma must be positive");
    if (!(dynamic_range > 0.0)) throw ArgumentError("ssim dynamic_range must be positive");
    if (!(c1() > 0.0) || !(c2() > 0.0)) throw ArgumentError("ssim stabilizers must be positive");
}

std::vector<double> gaussian_taps(int window_size, double sigma) {
    const int r = window_size / 2;
    std::vector<double> taps(static_cast<std::size_t>(window_size));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        taps[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += taps[i + r];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

namespace {

// Window statistics of one operand pair, kept for the backward pass.
struct Moments {
    std::vector<double> mu_a, mu_b, var_a, var_b, cov;
};

void check_operands(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg) {
    cfg.validate();
    require_same_shape(a, b, "ssim");
    if (cfg.window_size > std::min(a.height, a.width))
        throw ArgumentError("ssim window " + std::to_string(cfg.window_size) +
                            " does not fit image " + a.shape_string());
}

std::vector<double> blur(const ImageTensor& like, const std::vector<double>& taps,
                         const std::vector<double>& values) {
    std::vector<double> out(values.size());
    kernels::separable_filter(like.height, like.width, like.channels, taps, values, out);
    return out;
}

Moments moments(const ImageTensor& a, const ImageTensor& b, const std::vector<double>& taps) {
    const std::size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a.data[i] * a.data[i];
        bb[i] = b.data[i] * b.data[i];
        ab[i] = a.data[i] * b.data[i];
    }
    Moments m;
    m.mu_a = blur(a, taps, a.data);
    m.mu_b = blur(a, taps, b.data);
    m.var_a = blur(a, taps, aa);
    m.var_b = blur(a, taps, bb);
    m.cov = blur(a, taps, ab);
    for (std::size_t i = 0; i < n; ++i) {
        m.var_a[i] -= m.mu_a[i] * m.mu_a[i];
        m.var_b[i] -= m.mu_b[i] * m.mu_b[i];
        m.cov[i] -= m.mu_a[i] * m.mu_b[i];
    }
    return m;
}

}  // namespace

ImageTensor ssim_map(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg) {
    check_operands(a, b, cfg);
    const auto taps = gaussian_taps(cfg.window_size, cfg.sigma);
    const Moments m = moments(a, b, taps);
    const double c1 = cfg.c1(), c2 = cfg.c2();
    ImageTensor out(a.height, a.width, 1);
    const double inv_c = 1.0 / a.channels;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            double s = 0.0;
            for (int c = 0; c < a.channels; ++c) {
                const std::size_t i = a.index(y, x, c);
                const double num = (2.0 * m.mu_a[i] * m.mu_b[i] + c1) * (2.0 * m.cov[i] + c2);
                const double den = (m.mu_a[i] * m.mu_a[i] + m.mu_b[i] * m.mu_b[i] + c1) *
                                   (m.var_a[i] + m.var_b[i] + c2);
                s += num / den;
            }
            out.at(y, x) = s * inv_c;
        }
    return out;
}

double ssim_loss(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg) {
    return ssim_loss_grad(a, b, cfg, nullptr, nullptr);
}

double ssim_loss_grad(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg,
                      ImageTensor* grad_a, ImageTensor* grad_b) {
    check_operands(a, b, cfg);
    const auto taps = gaussian_taps(cfg.window_size, cfg.sigma);
    const Moments m = moments(a, b, taps);
    const double c1 = cfg.c1(), c2 = cfg.c2();
    const std::size_t n = a.size();

    // dS/d(window statistic) for each operand: mean, E[x^2] and E[ab].
    std::vector<double> d_mu_a, d_sq_a, d_mu_b, d_sq_b, d_ab;
    const bool need_grad = grad_a != nullptr || grad_b != nullptr;
    if (need_grad) {
        d_mu_a.resize(n);
        d_sq_a.resize(n);
        d_mu_b.resize(n);
        d_sq_b.resize(n);
        d_ab.resize(n);
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ma = m.mu_a[i], mb = m.mu_b[i];
        const double a1 = 2.0 * ma * mb + c1;
        const double a2 = 2.0 * m.cov[i] + c2;
        const double b1 = ma * ma + mb * mb + c1;
        const double b2 = m.var_a[i] + m.var_b[i] + c2;
        const double s = a1 * a2 / (b1 * b2);
        total += s;
        if (!need_grad) continue;

        const double ds_dcov = 2.0 * a1 / (b1 * b2);
        const double ds_dvar = -s / b2;
        const double ds_dma = 2.0 * mb * a2 / (b1 * b2) - 2.0 * ma * s / b1;
        const double ds_dmb = 2.0 * ma * a2 / (b1 * b2) - 2.0 * mb * s / b1;
        // var = E[x^2] - mu^2 and cov = E[ab] - mu_a mu_b feed back into the means.
        d_mu_a[i] = ds_dma - 2.0 * ma * ds_dvar - mb * ds_dcov;
        d_mu_b[i] = ds_dmb - 2.0 * mb * ds_dvar - ma * ds_dcov;
        d_sq_a[i] = ds_dvar;
        d_sq_b[i] = ds_dvar;
        d_ab[i] = ds_dcov;
    }
    const double scale = -1.0 / static_cast<double>(n);

    if (need_grad) {
        // The mirrored Gaussian blur is self-adjoint, so its transpose is itself.
        const auto k_ab = blur(a, taps, d_ab);
        if (grad_a != nullptr) {
            const auto k_mu = blur(a, taps, d_mu_a);
            const auto k_sq = blur(a, taps, d_sq_a);
            *grad_a = ImageTensor(a.height, a.width, a.channels);
            for (std::size_t i = 0; i < n; ++i)
                grad_a->data[i] =
                    scale * (k_mu[i] + 2.0 * a.data[i] * k_sq[i] + b.data[i] * k_ab[i]);
        }
        if (grad_b != nullptr) {
            const auto k_mu = blur(a, taps, d_mu_b);
            const auto k_sq = blur(a, taps, d_sq_b);
            *grad_b = ImageTensor(a.height, a.width, a.channels);
            for (std::size_t i = 0; i < n; ++i)
                grad_b->data[i] =
                    scale * (k_mu[i] + 2.0 * b.data[i] * k_sq[i] + a.data[i] * k_ab[i]);
        }
    }
    return 1.0 - total / static_cast<double>(n);
}

}  // namespace pnunet
