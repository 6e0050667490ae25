#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "pnunet/image.hpp"
#include "pnunet/reconstructor.hpp"

namespace pnunet {

// Additive training noise with values in [-amplitude, +amplitude].
struct NoiseField {
    ImageTensor data;
    double amplitude = 0.0;
};

// Spatial masks built from reconstruction residuals, H x W x 1, both in [0,1].
//   positive: where anomalies show up; scales the injected noise.
//   negative: where normal images always deviate; gates the noise off.
struct NoiseMaskPair {
    ImageTensor positive;
    ImageTensor negative;
    long long updated_at_iteration = 0;

    // positive = 1, negative = 0: the composition reduces to plain z.
    static NoiseMaskPair neutral(int height, int width);
    bool is_neutral() const noexcept;
};

// i.i.d. uniform noise on [-amplitude, +amplitude].
NoiseField sample_base_noise(int height, int width, int channels, double amplitude,
                             std::uint64_t rng_seed);

// positive = mean anomalous residual |x - f(x)| (channel mean), scaled to a
// peak of 1, or all ones when there are no anomalous images or the peak is
// below 1e-6. negative = mean normal residual clamped to [0,1].
NoiseMaskPair update_residual_maps(const ReconstructFn& reconstruct,
                                   std::span<const ImageTensor> normal_images,
                                   std::span<const ImageTensor> anomalous_images,
                                   long long iteration);

// z * R_p, mask broadcast over channels.
NoiseField make_positive_noise(const NoiseField& z, const NoiseMaskPair& masks);

// clamp(1 - |z| * R_n, 0, 1).
ImageTensor make_negative_gate(const NoiseField& z, const NoiseMaskPair& masks);

// (blend * z + (1 - blend) * z * R_p) * gate. Evaluated as
// z + (1 - blend) * z * (R_p - 1) so neutral masks return z bit-exactly.
NoiseField compose_applied_noise(const NoiseField& z, const NoiseMaskPair& masks, double blend);

// clamp(x + z_hat, 0, 1).
ImageTensor apply_noise(const ImageTensor& x, const NoiseField& z_hat);

// mask_p_<iter>.png/.f32 and mask_n_<iter>.png/.f32 inside dir.
void dump_masks(const std::filesystem::path& dir, const NoiseMaskPair& masks, long long iteration);

}  // namespace pnunet
