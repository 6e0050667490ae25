#include "pnunet/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace pnunet::kernels {

namespace {

// Channel counts the network actually uses get a compile-time width so the
// register-blocked loops below unroll completely; N == 0 is the runtime-width
// fallback.
template <typename F>
void dispatch_width(int n, F&& f) {
    switch (n) {
        case 1: f.template operator()<1>(); break;
        case 2: f.template operator()<2>(); break;
        case 4: f.template operator()<4>(); break;
        case 8: f.template operator()<8>(); break;
        case 12: f.template operator()<12>(); break;
        case 16: f.template operator()<16>(); break;
        case 24: f.template operator()<24>(); break;
        case 32: f.template operator()<32>(); break;
        case 48: f.template operator()<48>(); break;
        case 64: f.template operator()<64>(); break;
        default: f.template operator()<0>(); break;
    }
}

// Four-double vector for the register-blocked micro-kernels. Loads and stores
// go through memcpy, which keeps them unaligned-safe without making the
// accumulators aliasable.
typedef double vec4 __attribute__((vector_size(32)));

inline vec4 load4(const double* p) noexcept {
    vec4 v;
    std::memcpy(&v, p, sizeof v);
    return v;
}
inline void store4(double* p, vec4 v) noexcept { std::memcpy(p, &v, sizeof v); }

// Independent accumulators per block, enough to hide FMA latency.
constexpr int block_for(int width) noexcept { return width >= 32 ? 1 : (width >= 16 ? 2 : (width >= 8 ? 4 : 8)); }

// PX horizontally adjacent output pixels of one row whose taps are all in
// bounds horizontally; the ky range is already clipped. FCO % 4 == 0.
template <int FCO, int PX>
inline void forward_block(const double* input, const double* weight, const double* bias, double* out,
                          int W, int CI, int K, int pad, int y, int x, int ky0, int ky1) {
    constexpr int NV = FCO / 4;
    vec4 acc[PX][NV];
    for (int p = 0; p < PX; ++p)
        for (int v = 0; v < NV; ++v) acc[p][v] = load4(bias + 4 * v);
    for (int ky = ky0; ky < ky1; ++ky) {
        const double* in_row = input + (static_cast<std::size_t>(y + ky - pad) * W + (x - pad)) * CI;
        for (int kx = 0; kx < K; ++kx) {
            const double* in = in_row + static_cast<std::size_t>(kx) * CI;
            const double* wk = weight + static_cast<std::size_t>(ky * K + kx) * CI * FCO;
            for (int c = 0; c < CI; ++c) {
                vec4 w[NV];
                for (int v = 0; v < NV; ++v) w[v] = load4(wk + static_cast<std::size_t>(c) * FCO + 4 * v);
                for (int p = 0; p < PX; ++p) {
                    const double a = in[static_cast<std::size_t>(p) * CI + c];
                    for (int v = 0; v < NV; ++v) acc[p][v] += a * w[v];
                }
            }
        }
    }
    for (int p = 0; p < PX; ++p)
        for (int v = 0; v < NV; ++v) store4(out + static_cast<std::size_t>(p) * FCO + 4 * v, acc[p][v]);
}

template <int FCO>
void forward_impl(const ConvShape& s, const double* input, const double* weight,
                  const double* bias, double* output) {
    const int H = s.height, W = s.width, CI = s.in_channels, K = s.kernel;
    const int CO = FCO > 0 ? FCO : s.out_channels;
    const int pad = K / 2;
    constexpr int PX = block_for(FCO > 0 ? FCO : 64);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; ++y) {
        const int ky0 = std::max(0, pad - y), ky1 = std::min(K, H + pad - y);
        auto single = [&](int x) {
            const int kx0 = std::max(0, pad - x), kx1 = std::min(K, W + pad - x);
            double* out = output + (static_cast<std::size_t>(y) * W + x) * CO;
            std::copy_n(bias, CO, out);
            for (int ky = ky0; ky < ky1; ++ky)
                for (int kx = kx0; kx < kx1; ++kx) {
                    const double* in =
                        input + (static_cast<std::size_t>(y + ky - pad) * W + (x + kx - pad)) * CI;
                    const double* wk = weight + static_cast<std::size_t>(ky * K + kx) * CI * CO;
                    for (int c = 0; c < CI; ++c) {
                        const double a = in[c];
                        const double* wrow = wk + static_cast<std::size_t>(c) * CO;
#pragma omp simd
                        for (int o = 0; o < CO; ++o) out[o] += a * wrow[o];
                    }
                }
        };
        int x = 0;
        for (; x < std::min(pad, W); ++x) single(x);
        if constexpr (FCO > 0 && FCO % 4 == 0) {
            for (; x + PX - 1 + pad < W; x += PX)
                forward_block<FCO, PX>(input, weight, bias,
                                       output + (static_cast<std::size_t>(y) * W + x) * FCO, W, CI, K,
                                       pad, y, x, ky0, ky1);
        }
        for (; x < W; ++x) single(x);
    }
}

// CB input channels at a time, each with its own accumulator row. FCO % 4 == 0.
template <int FCO, int CB>
inline void weight_block(const double* input, const double* grad_output, double* gw, int W, int CI,
                         int pad, int ky, int kx, int c, int y0, int y1, int x0, int x1) {
    constexpr int NV = FCO / 4;
    vec4 acc[CB][NV];
    for (int b = 0; b < CB; ++b)
        for (int v = 0; v < NV; ++v) acc[b][v] = load4(gw + static_cast<std::size_t>(c + b) * FCO + 4 * v);
    for (int y = y0; y < y1; ++y) {
        const double* in_row = input + (static_cast<std::size_t>(y + ky - pad) * W + (kx - pad)) * CI + c;
        const double* g_row = grad_output + static_cast<std::size_t>(y) * W * FCO;
        for (int x = x0; x < x1; ++x) {
            const double* in = in_row + static_cast<std::size_t>(x) * CI;
            vec4 g[NV];
            for (int v = 0; v < NV; ++v) g[v] = load4(g_row + static_cast<std::size_t>(x) * FCO + 4 * v);
            for (int b = 0; b < CB; ++b) {
                const double a = in[b];
                for (int v = 0; v < NV; ++v) acc[b][v] += a * g[v];
            }
        }
    }
    for (int b = 0; b < CB; ++b)
        for (int v = 0; v < NV; ++v) store4(gw + static_cast<std::size_t>(c + b) * FCO + 4 * v, acc[b][v]);
}

template <int FCO>
void backward_weight_impl(const ConvShape& s, const double* input, const double* grad_output,
                          double* grad_weight) {
    const int H = s.height, W = s.width, CI = s.in_channels, K = s.kernel;
    const int CO = FCO > 0 ? FCO : s.out_channels;
    const int pad = K / 2;
    constexpr int CB = block_for(FCO > 0 ? FCO : 64);
    // Each (ky, kx) tap owns a disjoint slice of grad_weight.
#pragma omp parallel for collapse(2) schedule(static)
    for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
            double* gw = grad_weight + static_cast<std::size_t>(ky * K + kx) * CI * CO;
            const int y0 = std::max(0, pad - ky), y1 = std::min(H, H + pad - ky);
            const int x0 = std::max(0, pad - kx), x1 = std::min(W, W + pad - kx);
            if constexpr (FCO > 0 && FCO % 4 == 0) {
                int c = 0;
                for (; c + CB <= CI; c += CB)
                    weight_block<FCO, CB>(input, grad_output, gw, W, CI, pad, ky, kx, c, y0, y1, x0, x1);
                for (; c < CI; ++c)
                    weight_block<FCO, 1>(input, grad_output, gw, W, CI, pad, ky, kx, c, y0, y1, x0, x1);
            } else {
                for (int y = y0; y < y1; ++y) {
                    const int iy = y + ky - pad;
                    for (int x = x0; x < x1; ++x) {
                        const int ix = x + kx - pad;
                        const double* in = input + (static_cast<std::size_t>(iy) * W + ix) * CI;
                        const double* g = grad_output + (static_cast<std::size_t>(y) * W + x) * CO;
                        for (int c = 0; c < CI; ++c) {
                            const double a = in[c];
                            double* gwrow = gw + static_cast<std::size_t>(c) * CO;
#pragma omp simd
                            for (int o = 0; o < CO; ++o) gwrow[o] += a * g[o];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> output) {
    dispatch_width(s.out_channels, [&]<int N>() {
        forward_impl<N>(s, input.data(), weight.data(), bias.data(), output.data());
    });
}

void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
    // The input gradient of a same-padded odd-kernel convolution is itself a
    // convolution of grad_output with the spatially flipped, channel-transposed
    // kernel: [K][K][CO][CI] with (ky, kx) -> (K-1-ky, K-1-kx).
    const int CI = s.in_channels, CO = s.out_channels, K = s.kernel;
    std::vector<double> flipped(weight.size());
    for (int ky = 0; ky < K; ++ky)
        for (int kx = 0; kx < K; ++kx) {
            const std::size_t src = static_cast<std::size_t>(ky * K + kx) * CI * CO;
            const std::size_t dst = static_cast<std::size_t>((K - 1 - ky) * K + (K - 1 - kx)) * CO * CI;
            for (int c = 0; c < CI; ++c)
                for (int o = 0; o < CO; ++o)
                    flipped[dst + static_cast<std::size_t>(o) * CI + c] =
                        weight[src + static_cast<std::size_t>(c) * CO + o];
        }
    const std::vector<double> zero(static_cast<std::size_t>(CI), 0.0);
    const ConvShape t{s.height, s.width, CO, CI, K};
    conv2d_forward(t, grad_output, flipped, zero, grad_input);
}

void conv2d_backward_weight(const ConvShape& s, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
    dispatch_width(s.out_channels, [&]<int N>() {
        backward_weight_impl<N>(s, input.data(), grad_output.data(), grad_weight.data());
    });
    const int CO = s.out_channels;
    const std::size_t pixels = static_cast<std::size_t>(s.height) * s.width;
    for (std::size_t p = 0; p < pixels; ++p) {
        const double* g = grad_output.data() + p * CO;
        for (int o = 0; o < CO; ++o) grad_bias[o] += g[o];
    }
}

void separable_filter(int height, int width, int channels, std::span<const double> taps,
                      std::span<const double> input, std::span<double> output) {
    const int r = static_cast<int>(taps.size()) / 2;
    const int C = channels;
    const std::size_t row_len = static_cast<std::size_t>(width) * C;
    std::vector<double> rows(input.size());
    // Horizontal pass over a mirrored copy of each row, so the tap loop runs
    // branch-free over contiguous memory.
#pragma omp parallel
    {
        std::vector<double> padded(static_cast<std::size_t>(width + 2 * r) * C);
#pragma omp for schedule(static)
        for (int y = 0; y < height; ++y) {
            const double* in = input.data() + static_cast<std::size_t>(y) * row_len;
            for (int x = -r; x < width + r; ++x)
                std::copy_n(in + static_cast<std::size_t>(mirror_index(x, width)) * C, C,
                            padded.data() + static_cast<std::size_t>(x + r) * C);
            double* out = rows.data() + static_cast<std::size_t>(y) * row_len;
            std::fill_n(out, row_len, 0.0);
            for (int k = 0; k <= 2 * r; ++k) {
                const double t = taps[k];
                const double* src = padded.data() + static_cast<std::size_t>(k) * C;
#pragma omp simd
                for (std::size_t i = 0; i < row_len; ++i) out[i] += t * src[i];
            }
        }
    }
    // Vertical pass.
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        double* out = output.data() + static_cast<std::size_t>(y) * row_len;
        std::fill_n(out, row_len, 0.0);
        for (int k = -r; k <= r; ++k) {
            const int sy = mirror_index(y + k, height);
            const double t = taps[k + r];
            const double* in = rows.data() + static_cast<std::size_t>(sy) * row_len;
#pragma omp simd
            for (std::size_t i = 0; i < row_len; ++i) out[i] += t * in[i];
        }
    }
}

}  // namespace pnunet::kernels
