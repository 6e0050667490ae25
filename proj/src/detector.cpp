#include "pnunet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pnunet/errors.hpp"
#include "pnunet/kernels.hpp"

namespace pnunet {

ImageTensor gaussian_blur(const ImageTensor& map, double sigma) {
    if (sigma < 0.0) throw ArgumentError("smoothing sigma must be nonnegative");
    if (sigma == 0.0) return map;
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    radius = std::min({radius, map.height, map.width});
    const auto taps = gaussian_taps(2 * radius + 1, sigma);
    ImageTensor out(map.height, map.width, map.channels);
    kernels::separable_filter(map.height, map.width, map.channels, taps, map.data, out.data);
    return out;
}

AnomalyResult anomaly_map(const ReconstructFn& reconstruct, const ImageTensor& x,
                          double smooth_sigma, MapMode mode, const SsimConfig& ssim) {
    if (smooth_sigma < 0.0) throw ArgumentError("smooth_sigma must be nonnegative");
    const ImageTensor recon = reconstruct(x);
    require_same_shape(x, recon, "anomaly_map");
    ImageTensor map(x.height, x.width, 1);
    if (mode == MapMode::abs_diff) {
        const double inv_c = 1.0 / x.channels;
        for (int y = 0; y < x.height; ++y)
            for (int xx = 0; xx < x.width; ++xx) {
                double s = 0.0;
                for (int c = 0; c < x.channels; ++c) s += std::abs(x.at(y, xx, c) - recon.at(y, xx, c));
                map.at(y, xx) = s * inv_c;
            }
    } else {
        map = ssim_map(x, recon, ssim);
        for (double& v : map.data) v = std::max(0.0, (1.0 - v) / 2.0);
    }
    AnomalyResult result;
    result.map = gaussian_blur(map, smooth_sigma);
    result.image_score = *std::max_element(result.map.data.begin(), result.map.data.end());
    return result;
}

AnomalyResult anomaly_map(const Reconstructor& model, const ImageTensor& x, double smooth_sigma,
                          MapMode mode, const SsimConfig& ssim) {
    return anomaly_map(as_function(model), x, smooth_sigma, mode, ssim);
}

void apply_threshold(AnomalyResult& result, double threshold) {
    ImageTensor mask(result.map.height, result.map.width, 1);
    for (std::size_t i = 0; i < mask.size(); ++i) mask.data[i] = result.map.data[i] > threshold ? 1.0 : 0.0;
    result.binary_mask = std::move(mask);
    result.threshold_used = threshold;
}

double pixel_auroc(std::span<const double> scores, std::span<const unsigned char> labels) {
    if (scores.size() != labels.size()) throw ArgumentError("pixel_auroc size mismatch");
    const auto positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double negatives = static_cast<double>(labels.size()) - positives;
    if (positives == 0.0 || negatives == 0.0)
        throw MetricError("pixel AUROC is undefined when ground truth holds a single class");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double tp = 0.0, fp = 0.0, area = 0.0;
    double prev_tpr = 0.0, prev_fpr = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        // Every pixel scoring >= threshold is called positive.
        for (; i < order.size() && scores[order[i]] == threshold; ++i) {
            if (labels[order[i]] == 1) tp += 1.0;
            else fp += 1.0;
        }
        const double tpr = tp / positives, fpr = fp / negatives;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    return area;
}

double pixel_auroc(std::span<const AnomalyResult> maps, std::span<const ImageTensor> gts) {
    if (maps.size() != gts.size()) throw ArgumentError("pixel_auroc needs one ground truth per map");
    std::vector<double> scores;
    std::vector<unsigned char> labels;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const ImageTensor& m = maps[i].map;
        const ImageTensor& g = gts[i];
        if (m.height != g.height || m.width != g.width || g.channels != 1)
            throw ArgumentError("map/ground-truth shape mismatch at index " + std::to_string(i));
        scores.insert(scores.end(), m.data.begin(), m.data.end());
        for (double v : g.data) labels.push_back(v >= 0.5 ? 1 : 0);
    }
    return pixel_auroc(scores, labels);
}

double percentile_linear(std::vector<double> values, double percentile) {
    if (values.empty()) throw ArgumentError("percentile of an empty set");
    if (!(percentile > 0.0 && percentile < 100.0))
        throw ArgumentError("percentile must lie in (0, 100)");
    std::sort(values.begin(), values.end());
    const double pos = percentile / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double choose_threshold(std::span<const AnomalyResult> normal_maps, double percentile) {
    if (normal_maps.empty()) throw ArgumentError("choose_threshold needs normal maps");
    std::vector<double> pooled;
    for (const auto& r : normal_maps) pooled.insert(pooled.end(), r.map.data.begin(), r.map.data.end());
    return percentile_linear(std::move(pooled), percentile);
}

double positive_pixel_rate(std::span<const AnomalyResult> maps, double threshold) {
    std::size_t above = 0, total = 0;
    for (const auto& r : maps) {
        for (double v : r.map.data) above += v > threshold ? 1 : 0;
        total += r.map.size();
    }
    return total ? static_cast<double>(above) / static_cast<double>(total) : 0.0;
}

double contrast_ratio(std::span<const AnomalyResult> maps, std::span<const ImageTensor> gts) {
    if (maps.size() != gts.size()) throw ArgumentError("contrast_ratio needs one ground truth per map");
    double on = 0.0, off = 0.0;
    std::size_t n_on = 0, n_off = 0;
    for (std::size_t i = 0; i < maps.size(); ++i)
        for (std::size_t p = 0; p < maps[i].map.size(); ++p) {
            if (gts[i].data[p] >= 0.5) {
                on += maps[i].map.data[p];
                ++n_on;
            } else {
                off += maps[i].map.data[p];
                ++n_off;
            }
        }
    if (n_on == 0 || n_off == 0) throw MetricError("contrast ratio needs both pixel classes");
    const double mean_off = off / static_cast<double>(n_off);
    return mean_off > 0.0 ? (on / static_cast<double>(n_on)) / mean_off : 0.0;
}

}  // namespace pnunet
