#include "pnunet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "pnunet/errors.hpp"

namespace pnunet {

void TrainConfig::validate() const {
    if (iterations <= 0) throw ArgumentError("iterations must be positive");
    if (mask_update_interval <= 0) throw ArgumentError("mask_update_interval must be positive");
    if (batch_size <= 0) throw ArgumentError("batch_size must be positive");
    if (!(learning_rate >= 0.0)) throw ArgumentError("learning_rate must be nonnegative");
    if (!(noise_amplitude > 0.0)) throw ArgumentError("noise_amplitude must be positive");
    if (!(blend >= 0.0 && blend <= 1.0)) throw ArgumentError("blend must lie in [0,1]");
    if (patch_size < kMinImageSide) throw ArgumentError("patch_size must be at least 8");
    if (checkpoint_every <= 0) throw ArgumentError("checkpoint_every must be positive");
    if (mask_pool_normal <= 0) throw ArgumentError("mask_pool_normal must be positive");
}

TrainState init_train_state(const ReconstructorConfig& model_cfg, const TrainConfig& cfg) {
    cfg.validate();
    TrainState s;
    s.model = init_reconstructor(model_cfg);
    s.optimizer = Adam(s.model.params, {.learning_rate = cfg.learning_rate});
    s.masks = NoiseMaskPair::neutral(cfg.patch_size, cfg.patch_size);
    s.rng.seed(cfg.seed);
    return s;
}

namespace {

std::string batch_stats(std::span<const ImageTensor> batch) {
    double lo = 1e300, hi = -1e300, sum = 0.0;
    std::size_t n = 0;
    for (const auto& x : batch)
        for (double v : x.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
            ++n;
        }
    std::ostringstream os;
    os << "batch of " << batch.size() << " min=" << lo << " max=" << hi
       << " mean=" << (n ? sum / static_cast<double>(n) : 0.0);
    return os.str();
}

}  // namespace

double train_step(TrainState& state, std::span<const ImageTensor> batch, const TrainConfig& cfg,
                  const SsimConfig& ssim) {
    if (batch.empty()) throw ArgumentError("train_step needs a nonempty batch");
    ParamSet grads = state.model.params.zeros_like();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    ReconstructorTape tape;
    for (const auto& x : batch) {
        if (x.height != state.masks.positive.height || x.width != state.masks.positive.width)
            throw ArgumentError("batch image " + x.shape_string() + " does not match mask size");
        const NoiseField z =
            sample_base_noise(x.height, x.width, x.channels, cfg.noise_amplitude, state.rng());
        const NoiseField z_hat = compose_applied_noise(z, state.masks, cfg.blend);
        const ImageTensor recon = forward_with_tape(state.model, apply_noise(x, z_hat), tape);
        ImageTensor g_recon;
        loss += inv_b * ssim_loss_grad(x, recon, ssim, nullptr, &g_recon);
        for (double& g : g_recon.data) g *= inv_b;
        backward(state.model, tape, g_recon, grads);
    }
    if (!std::isfinite(loss))
        throw TrainingError("non-finite loss at iteration " + std::to_string(state.iteration + 1) +
                            " (" + batch_stats(batch) + ")");
    state.optimizer.step(state.model.params, grads);
    if (!state.model.params.all_finite())
        throw TrainingError("non-finite parameters after iteration " +
                            std::to_string(state.iteration + 1));
    ++state.iteration;
    state.loss_history.push_back(loss);
    return loss;
}

bool maybe_update_masks(TrainState& state, std::span<const ImageTensor> normal_pool,
                        std::span<const ImageTensor> anomalous_pool, const TrainConfig& cfg) {
    if (!cfg.masks_enabled) return false;
    if (state.iteration <= 0 || state.iteration % cfg.mask_update_interval != 0) return false;
    NoiseMaskPair next =
        update_residual_maps(as_function(state.model), normal_pool, anomalous_pool, state.iteration);
    // Swap in a complete snapshot; readers never see a half-built pair.
    state.masks = std::move(next);
    state.mask_update_iterations.push_back(state.iteration);
    return true;
}

nlohmann::json TrainingReport::to_json() const {
    double mean_s = 0.0;
    for (double s : seconds_per_iteration) mean_s += s;
    if (!seconds_per_iteration.empty()) mean_s /= static_cast<double>(seconds_per_iteration.size());
    return {{"loss_history", loss_history},
            {"mask_update_iterations", mask_update_iterations},
            {"seconds_per_iteration", seconds_per_iteration},
            {"mean_seconds_per_iteration", mean_s},
            {"total_seconds", total_seconds},
            {"checkpoints", checkpoints},
            {"warnings", warnings}};
}

std::vector<ImageTensor> anomalous_pool(const Dataset& data, int patch_size) {
    std::vector<ImageTensor> pool;
    for (const auto& a : data.anomalous) {
        if (a.image.height == patch_size && a.image.width == patch_size) {
            pool.push_back(a.image);
        } else if (a.image.height >= patch_size && a.image.width >= patch_size) {
            for (auto& t : tile_patches(a.image, patch_size)) pool.push_back(std::move(t));
        } else {
            throw ArgumentError("anomalous image " + a.stem + " is smaller than the patch size");
        }
    }
    return pool;
}

TrainingResult run_training(const Dataset& data, const TrainConfig& cfg,
                            const ReconstructorConfig& model_cfg, const SsimConfig& ssim,
                            const TrainingIo& io) {
    cfg.validate();
    if (data.normal.empty()) throw ArgumentError("training needs normal images");
    for (const auto& n : data.normal)
        if (n.image.height < cfg.patch_size || n.image.width < cfg.patch_size)
            throw ArgumentError("normal image " + n.stem + " is smaller than the patch size");

    TrainState state = init_train_state(model_cfg, cfg);
    TrainingReport report;
    if (cfg.mask_update_interval > cfg.iterations) {
        report.warnings.push_back("mask_update_interval exceeds iterations; masks stay neutral");
        std::cerr << "warning: " << report.warnings.back() << "\n";
    }
    const std::vector<ImageTensor> anomalies = anomalous_pool(data, cfg.patch_size);

    std::uniform_int_distribution<std::size_t> pick(0, data.normal.size() - 1);
    auto random_patch = [&]() {
        const ImageTensor& img = data.normal[pick(state.rng)].image;
        std::uniform_int_distribution<int> ys(0, img.height - cfg.patch_size);
        std::uniform_int_distribution<int> xs(0, img.width - cfg.patch_size);
        const int y = ys(state.rng);
        const int x = xs(state.rng);
        return crop(img, y, x, cfg.patch_size, cfg.patch_size);
    };

    std::string last_checkpoint = "(none)";
    auto checkpoint = [&]() {
        if (io.checkpoint_dir.empty()) return;
        const auto path = io.checkpoint_dir / ("ckpt_" + std::to_string(state.iteration) + ".pnuw");
        try {
            save_weights(state.model, path);
            if (io.dump_masks) dump_masks(io.checkpoint_dir, state.masks, state.iteration);
        } catch (const IoError& e) {
            throw TrainingError(std::string("checkpoint failed at iteration ") +
                                std::to_string(state.iteration) + ": " + e.what() +
                                "; last good checkpoint: " + last_checkpoint);
        }
        last_checkpoint = path.string();
        report.checkpoints.push_back(last_checkpoint);
    };

    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    std::vector<ImageTensor> batch(static_cast<std::size_t>(cfg.batch_size));
    while (state.iteration < cfg.iterations) {
        const auto t0 = clock::now();
        for (auto& b : batch) b = random_patch();
        const double loss = train_step(state, batch, cfg, ssim);

        if (cfg.masks_enabled && state.iteration % cfg.mask_update_interval == 0) {
            std::vector<ImageTensor> normal_pool;
            for (int i = 0; i < cfg.mask_pool_normal; ++i) normal_pool.push_back(random_patch());
            if (maybe_update_masks(state, normal_pool, anomalies, cfg) && io.dump_masks_on_update &&
                !io.checkpoint_dir.empty())
                dump_masks(io.checkpoint_dir, state.masks, state.iteration);
        }
        report.seconds_per_iteration.push_back(
            std::chrono::duration<double>(clock::now() - t0).count());
        if (io.progress) io.progress(state.iteration, loss);
        if (state.iteration % cfg.checkpoint_every == 0 || state.iteration == cfg.iterations)
            checkpoint();
    }
    report.total_seconds = std::chrono::duration<double>(clock::now() - start).count();
    report.loss_history = state.loss_history;
    report.mask_update_iterations = state.mask_update_iterations;
    return {std::move(state.model), std::move(state.masks), std::move(report)};
}

}  // namespace pnunet
