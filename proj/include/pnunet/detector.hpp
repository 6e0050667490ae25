#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pnunet/image.hpp"
#include "pnunet/reconstructor.hpp"
#include "pnunet/ssim.hpp"

namespace pnunet {

enum class MapMode {
    abs_diff,  // channel-mean |x - f(x)|
    ssim,      // (1 - SSIM(x, f(x))) / 2
};

struct AnomalyResult {
    ImageTensor map;  // H x W x 1, nonnegative
    double image_score = 0.0;
    std::optional<ImageTensor> binary_mask;
    std::optional<double> threshold_used;
};

// Mirrored-border Gaussian blur with radius ceil(3 sigma) (capped by the image
// size). Preserves the total mass of the map. sigma == 0 returns the input.
ImageTensor gaussian_blur(const ImageTensor& map, double sigma);

// No noise is injected at inference: the map compares x with f(x) directly.
// image_score is the map maximum.
AnomalyResult anomaly_map(const ReconstructFn& reconstruct, const ImageTensor& x,
                          double smooth_sigma, MapMode mode = MapMode::abs_diff,
                          const SsimConfig& ssim = {});
AnomalyResult anomaly_map(const Reconstructor& model, const ImageTensor& x, double smooth_sigma,
                          MapMode mode = MapMode::abs_diff, const SsimConfig& ssim = {});

// binary_mask = map > threshold.
void apply_threshold(AnomalyResult& result, double threshold);

// Pooled-pixel ROC area: sweep thresholds over the distinct scores, integrate
// with the trapezoid rule. Ties count half. Throws MetricError when the labels
// hold only one class.
double pixel_auroc(std::span<const double> scores, std::span<const unsigned char> labels);
double pixel_auroc(std::span<const AnomalyResult> maps, std::span<const ImageTensor> gts);

// Linear-interpolation percentile of the pooled normal-map pixels, p in (0,100).
double choose_threshold(std::span<const AnomalyResult> normal_maps, double percentile);
double percentile_linear(std::vector<double> values, double percentile);

// Fraction of pixels above threshold across the maps.
double positive_pixel_rate(std::span<const AnomalyResult> maps, double threshold);

// Mean map value on gt pixels divided by the mean on the rest.
double contrast_ratio(std::span<const AnomalyResult> maps, std::span<const ImageTensor> gts);

}  // namespace pnunet
