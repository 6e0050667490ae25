#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnunet/autoencoder.hpp"
#include "pnunet/baseline.hpp"
#include "pnunet/detector.hpp"
#include "pnunet/image.hpp"
#include "pnunet/reconstructor.hpp"
#include "pnunet/ssim.hpp"
#include "pnunet/synthetic.hpp"
#include "pnunet/trainer.hpp"

namespace pnunet {

struct AutoencoderSettings {
    int levels = 3;
    int base_channels = 16;
    int kernel_size = 3;
    int latent_dim = 64;
    long long iterations = 2000;
    int batch_size = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct DetectorSettings {
    std::string weights;           // reconstructor .pnuw
    std::string input_dir;         // images to score
    std::string ground_truth_dir;  // eval: masks with the same stems
    std::string validation_dir;    // normal images for the threshold
    std::string heldout_normal_dir;  // eval: optional false-positive check
    double smooth_sigma = 1.0;
    double percentile = 99.5;
    double threshold = -1.0;  // >= 0 pins the threshold
    MapMode map_mode = MapMode::abs_diff;
};

struct BenchSettings {
    std::string weights;              // reconstructor .pnuw
    std::string autoencoder_weights;  // empty: train one from the dataset
    std::string input_dir;
    int max_images = 10;
};

// Everything a command needs, fully resolved.
struct RunConfig {
    DatasetSpec dataset;
    TrainConfig trainer;
    bool dump_masks = false;
    SsimConfig ssim;
    ReconstructorConfig reconstructor;
    AutoencoderSettings autoencoder;
    SearchConfig search;
    DetectorSettings detector;
    BenchSettings bench;
    CorpusSpec gen_data;
    std::filesystem::path output_dir = "out";
};

nlohmann::json to_json(const RunConfig& cfg);

// Strict: every key must exist in the default schema with a compatible type.
// overrides are "dotted.path=value"; values parse as JSON, falling back to a
// plain string. Throws ConfigError naming the offending key path.
RunConfig parse_run_config(const nlohmann::json& file, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

// Sets every seed field in the config.
void apply_seed(RunConfig& cfg, std::uint64_t seed);

AutoencoderConfig autoencoder_config(const RunConfig& cfg);

}  // namespace pnunet
