#pragma once

#include <vector>

#include "pnunet/image.hpp"

namespace pnunet {

struct SsimConfig {
    int window_size = 11;
    double sigma = 1.5;
    double dynamic_range = 1.0;
    double k1 = 0.01;
    double k2 = 0.03;

    double c1() const noexcept { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const noexcept { return (k2 * dynamic_range) * (k2 * dynamic_range); }

    // Throws ArgumentError for an even/too-small window, nonpositive sigma or
    // range, or vanishing stabilizers.
    void validate() const;
};

// Normalized 1-D Gaussian taps of length window_size.
std::vector<double> gaussian_taps(int window_size, double sigma);

// Per-pixel SSIM with a Gaussian window (mirrored borders), computed per
// channel and averaged to H x W x 1.
ImageTensor ssim_map(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg);

// 1 - mean SSIM, in [0, 2].
double ssim_loss(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg);

// Loss together with its exact gradient with respect to either operand.
// Null outputs are skipped.
double ssim_loss_grad(const ImageTensor& a, const ImageTensor& b, const SsimConfig& cfg,
                      ImageTensor* grad_a, ImageTensor* grad_b);

}  // namespace pnunet
