#pragma once

#include <span>

// Data-parallel inner loops shared by every network in the project. The
// top-level namespace holds the OpenMP kernels; kernels::reference holds the
// plain serial versions the tests and the benchmark compare them against.
//
// Layout is channels-last everywhere: activations [H][W][C], convolution
// weights [K][K][Cin][Cout]. Convolutions are stride 1 with zero "same"
// padding of K/2. Partitioning never splits a reduction across threads, so
// results do not depend on the thread count.

namespace pnunet::kernels {

struct ConvShape {
    int height = 0;
    int width = 0;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
};

// output = bias + conv(input, weight); output is overwritten.
void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> output);

// grad_input is overwritten.
void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);

// grad_weight and grad_bias are accumulated into.
void conv2d_backward_weight(const ConvShape& s, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias);

// Separable filter with odd symmetric taps applied along both axes of an
// [H][W][C] array, boundary mirrored about the pixel edge (d c b a | a b c d).
// Requires taps.size() / 2 <= min(H, W). With symmetric taps the operator is
// self-adjoint, which the SSIM gradient relies on.
void separable_filter(int height, int width, int channels, std::span<const double> taps,
                      std::span<const double> input, std::span<double> output);

// Mirror index for the boundary rule above; valid for -n <= i < 2n.
inline int mirror_index(int i, int n) noexcept {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - i - 1;
    return i;
}

namespace reference {

void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> output);
void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_weight(const ConvShape& s, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias);
// Direct 2-D window sum with the outer-product kernel.
void separable_filter(int height, int width, int channels, std::span<const double> taps,
                      std::span<const double> input, std::span<double> output);

}  // namespace reference

}  // namespace pnunet::kernels
