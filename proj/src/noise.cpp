#include "pnunet/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pnunet/errors.hpp"

namespace pnunet {

NoiseMaskPair NoiseMaskPair::neutral(int height, int width) {
    return {ImageTensor(height, width, 1, 1.0), ImageTensor(height, width, 1, 0.0), 0};
}

bool NoiseMaskPair::is_neutral() const noexcept {
    return std::all_of(positive.data.begin(), positive.data.end(), [](double v) { return v == 1.0; }) &&
           std::all_of(negative.data.begin(), negative.data.end(), [](double v) { return v == 0.0; });
}

NoiseField sample_base_noise(int height, int width, int channels, double amplitude,
                             std::uint64_t rng_seed) {
    if (!(amplitude > 0.0)) throw ArgumentError("noise amplitude must be positive");
    NoiseField z{ImageTensor(height, width, channels), amplitude};
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    for (double& v : z.data.data) v = dist(rng);
    return z;
}

namespace {

ImageTensor mean_residual(const ReconstructFn& reconstruct, std::span<const ImageTensor> images) {
    const ImageTensor& first = images.front();
    ImageTensor acc(first.height, first.width, 1);
    for (const auto& x : images) {
        require_same_shape(first, x, "update_residual_maps");
        const ImageTensor r = reconstruct(x);
        require_same_shape(x, r, "update_residual_maps reconstruction");
        const double inv_c = 1.0 / x.channels;
        for (int y = 0; y < x.height; ++y)
            for (int xx = 0; xx < x.width; ++xx) {
                double s = 0.0;
                for (int c = 0; c < x.channels; ++c) s += std::abs(x.at(y, xx, c) - r.at(y, xx, c));
                acc.at(y, xx) += s * inv_c;
            }
    }
    const double inv_n = 1.0 / static_cast<double>(images.size());
    for (double& v : acc.data) v *= inv_n;
    return acc;
}

void check_mask_shape(const ImageTensor& field, const ImageTensor& mask, const char* what) {
    if (field.height != mask.height || field.width != mask.width || mask.channels != 1)
        throw ArgumentError(std::string(what) + ": mask " + mask.shape_string() +
                            " incompatible with noise " + field.shape_string());
}

}  // namespace

NoiseMaskPair update_residual_maps(const ReconstructFn& reconstruct,
                                   std::span<const ImageTensor> normal_images,
                                   std::span<const ImageTensor> anomalous_images,
                                   long long iteration) {
    if (normal_images.empty()) throw ArgumentError("update_residual_maps needs normal images");
    const ImageTensor& ref = normal_images.front();
    for (const auto& a : anomalous_images) require_same_shape(ref, a, "update_residual_maps");

    NoiseMaskPair masks = NoiseMaskPair::neutral(ref.height, ref.width);
    masks.updated_at_iteration = iteration;

    masks.negative = mean_residual(reconstruct, normal_images);
    for (double& v : masks.negative.data) v = std::clamp(v, 0.0, 1.0);

    if (!anomalous_images.empty()) {
        ImageTensor rp = mean_residual(reconstruct, anomalous_images);
        const double peak = *std::max_element(rp.data.begin(), rp.data.end());
        if (peak > 1e-6) {
            for (double& v : rp.data) v = std::min(v / peak, 1.0);
            masks.positive = std::move(rp);
        }
    }
    return masks;
}

NoiseField make_positive_noise(const NoiseField& z, const NoiseMaskPair& masks) {
    check_mask_shape(z.data, masks.positive, "make_positive_noise");
    NoiseField out = z;
    for (int y = 0; y < z.data.height; ++y)
        for (int x = 0; x < z.data.width; ++x) {
            const double m = masks.positive.at(y, x);
            for (double& v : out.data.pixel(y, x)) v *= m;
        }
    return out;
}

ImageTensor make_negative_gate(const NoiseField& z, const NoiseMaskPair& masks) {
    check_mask_shape(z.data, masks.negative, "make_negative_gate");
    ImageTensor gate(z.data.height, z.data.width, z.data.channels);
    for (int y = 0; y < z.data.height; ++y)
        for (int x = 0; x < z.data.width; ++x) {
            const double m = masks.negative.at(y, x);
            for (int c = 0; c < z.data.channels; ++c)
                gate.at(y, x, c) = std::clamp(1.0 - std::abs(z.data.at(y, x, c)) * m, 0.0, 1.0);
        }
    return gate;
}

NoiseField compose_applied_noise(const NoiseField& z, const NoiseMaskPair& masks, double blend) {
    if (!(blend >= 0.0 && blend <= 1.0)) throw ArgumentError("noise blend must lie in [0,1]");
    check_mask_shape(z.data, masks.positive, "compose_applied_noise");
    const ImageTensor gate = make_negative_gate(z, masks);
    NoiseField out = z;
    for (int y = 0; y < z.data.height; ++y)
        for (int x = 0; x < z.data.width; ++x) {
            const double rp = masks.positive.at(y, x);
            for (int c = 0; c < z.data.channels; ++c) {
                const double zv = z.data.at(y, x, c);
                out.data.at(y, x, c) = (zv + (1.0 - blend) * zv * (rp - 1.0)) * gate.at(y, x, c);
            }
        }
    return out;
}

ImageTensor apply_noise(const ImageTensor& x, const NoiseField& z_hat) {
    require_same_shape(x, z_hat.data, "apply_noise");
    ImageTensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = std::clamp(x.data[i] + z_hat.data.data[i], 0.0, 1.0);
    return out;
}

void dump_masks(const std::filesystem::path& dir, const NoiseMaskPair& masks, long long iteration) {
    const std::string it = std::to_string(iteration);
    save_png16(dir / ("mask_p_" + it + ".png"), masks.positive, false);
    save_f32(dir / ("mask_p_" + it + ".f32"), masks.positive);
    save_png16(dir / ("mask_n_" + it + ".png"), masks.negative, false);
    save_f32(dir / ("mask_n_" + it + ".f32"), masks.negative);
}

}  // namespace pnunet
