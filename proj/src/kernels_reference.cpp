#include "pnunet/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace pnunet::kernels::reference {

namespace {

std::size_t act(const ConvShape& s, int y, int x, int c, int channels) {
    return (static_cast<std::size_t>(y) * s.width + x) * channels + c;
}

std::size_t wgt(const ConvShape& s, int ky, int kx, int ci, int co) {
    return ((static_cast<std::size_t>(ky) * s.kernel + kx) * s.in_channels + ci) * s.out_channels +
           co;
}

}  // namespace

void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> output) {
    const int pad = s.kernel / 2;
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
            for (int co = 0; co < s.out_channels; ++co) {
                double sum = bias[co];
                for (int ky = 0; ky < s.kernel; ++ky)
                    for (int kx = 0; kx < s.kernel; ++kx) {
                        const int iy = y + ky - pad, ix = x + kx - pad;
                        if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                        for (int ci = 0; ci < s.in_channels; ++ci)
                            sum += input[act(s, iy, ix, ci, s.in_channels)] *
                                   weight[wgt(s, ky, kx, ci, co)];
                    }
                output[act(s, y, x, co, s.out_channels)] = sum;
            }
}

void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
    const int pad = s.kernel / 2;
    std::fill(grad_input.begin(), grad_input.end(), 0.0);
    // Scatter form: the transpose of the forward gather.
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
            for (int co = 0; co < s.out_channels; ++co) {
                const double g = grad_output[act(s, y, x, co, s.out_channels)];
                for (int ky = 0; ky < s.kernel; ++ky)
                    for (int kx = 0; kx < s.kernel; ++kx) {
                        const int iy = y + ky - pad, ix = x + kx - pad;
                        if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                        for (int ci = 0; ci < s.in_channels; ++ci)
                            grad_input[act(s, iy, ix, ci, s.in_channels)] +=
                                g * weight[wgt(s, ky, kx, ci, co)];
                    }
            }
}

void conv2d_backward_weight(const ConvShape& s, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
    const int pad = s.kernel / 2;
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
            for (int co = 0; co < s.out_channels; ++co) {
                const double g = grad_output[act(s, y, x, co, s.out_channels)];
                grad_bias[co] += g;
                for (int ky = 0; ky < s.kernel; ++ky)
                    for (int kx = 0; kx < s.kernel; ++kx) {
                        const int iy = y + ky - pad, ix = x + kx - pad;
                        if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                        for (int ci = 0; ci < s.in_channels; ++ci)
                            grad_weight[wgt(s, ky, kx, ci, co)] +=
                                g * input[act(s, iy, ix, ci, s.in_channels)];
                    }
            }
}

void separable_filter(int height, int width, int channels, std::span<const double> taps,
                      std::span<const double> input, std::span<double> output) {
    const int r = static_cast<int>(taps.size()) / 2;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c) {
                double sum = 0.0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int sy = mirror_index(y + dy, height);
                        const int sx = mirror_index(x + dx, width);
                        sum += taps[dy + r] * taps[dx + r] *
                               input[(static_cast<std::size_t>(sy) * width + sx) * channels + c];
                    }
                output[(static_cast<std::size_t>(y) * width + x) * channels + c] = sum;
            }
}

}  // namespace pnunet::kernels::reference
