#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnunet/image.hpp"
#include "pnunet/noise.hpp"
#include "pnunet/params.hpp"
#include "pnunet/reconstructor.hpp"
#include "pnunet/ssim.hpp"

namespace pnunet {

struct TrainConfig {
    long long iterations = 5000;
    long long mask_update_interval = 1000;
    int batch_size = 8;
    double learning_rate = 1e-3;
    double noise_amplitude = 0.2;
    double blend = 0.25;
    int patch_size = 64;
    std::uint64_t seed = 0;
    long long checkpoint_every = 1000;
    // false runs the plain-denoising ablation: masks stay neutral throughout.
    bool masks_enabled = true;
    int mask_pool_normal = 16;

    void validate() const;
};

struct TrainState {
    Reconstructor model;
    Adam optimizer;
    NoiseMaskPair masks;
    long long iteration = 0;
    std::vector<double> loss_history;
    std::vector<long long> mask_update_iterations;
    std::mt19937_64 rng;
};

TrainState init_train_state(const ReconstructorConfig& model_cfg, const TrainConfig& cfg);

// One optimizer step on the denoising objective: every image gets fresh
// uniform noise shaped by the current masks, and the mean SSIM loss between
// the clean image and the reconstruction of the noisy one is minimized.
// Returns the batch loss. Throws TrainingError on a non-finite loss.
double train_step(TrainState& state, std::span<const ImageTensor> batch, const TrainConfig& cfg,
                  const SsimConfig& ssim);

// Replaces the masks from current residuals when iteration is a positive
// multiple of the update interval (and masks are enabled). Returns whether
// an update happened.
bool maybe_update_masks(TrainState& state, std::span<const ImageTensor> normal_pool,
                        std::span<const ImageTensor> anomalous_pool, const TrainConfig& cfg);

struct TrainingReport {
    std::vector<double> loss_history;
    std::vector<long long> mask_update_iterations;
    std::vector<double> seconds_per_iteration;
    double total_seconds = 0.0;
    std::vector<std::string> checkpoints;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

struct TrainingResult {
    Reconstructor model;
    NoiseMaskPair masks;
    TrainingReport report;
};

struct TrainingIo {
    std::filesystem::path checkpoint_dir;  // empty: no checkpoints
    bool dump_masks = true;            // mask files alongside each checkpoint
    bool dump_masks_on_update = false;  // and at every mask update
    std::function<void(long long iteration, double loss)> progress;
};

// Full loop: T iterations of train_step + maybe_update_masks on random patches
// of the normal images. Anomalous images feed only the positive mask; those
// larger than the patch are split into patch tiles.
TrainingResult run_training(const Dataset& data, const TrainConfig& cfg,
                            const ReconstructorConfig& model_cfg, const SsimConfig& ssim,
                            const TrainingIo& io = {});

// Patch-sized views of the anomalous images used for positive-mask updates.
std::vector<ImageTensor> anomalous_pool(const Dataset& data, int patch_size);

}  // namespace pnunet
