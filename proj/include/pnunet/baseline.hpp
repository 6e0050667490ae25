#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnunet/autoencoder.hpp"
#include "pnunet/reconstructor.hpp"
#include "pnunet/ssim.hpp"

namespace pnunet {

struct SearchConfig {
    int steps = 500;
    double step_size = 0.05;
    int restarts = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SearchResult {
    ImageTensor reconstruction;  // best decode seen
    ImageTensor residual_map;    // channel-mean |x - reconstruction|
    double elapsed_seconds = 0.0;
    double initial_loss = 0.0;
    double best_loss = 0.0;
};

// Iterative inference: start from encode(x) and take `steps` gradient-descent
// steps on ssim_loss(x, decode(latent)) with the decoder frozen, keeping the
// best decode. Extra restarts begin from the encoder latent plus seeded
// Gaussian jitter. steps == 0 returns decode(encode(x)).
SearchResult latent_search_infer(const Autoencoder& ae, const ImageTensor& x,
                                 const SearchConfig& scfg, const SsimConfig& ssim = {});

struct BenchReport {
    std::vector<double> forward_seconds;
    std::vector<double> search_seconds;
    double mean_forward_seconds = 0.0;
    double mean_search_seconds = 0.0;
    double ratio = 0.0;  // mean_search_seconds / mean_forward_seconds
    int steps = 0;
    int height = 0;
    int width = 0;
    std::string host;

    nlohmann::json to_json() const;
};

// Per-image wall clock of one reconstructor forward pass against one latent
// search, single-threaded, after an untimed warm-up on the first image.
BenchReport bench_inference(const Reconstructor& recon, const Autoencoder& ae,
                            std::span<const ImageTensor> images, const SearchConfig& scfg,
                            const SsimConfig& ssim = {});

std::string host_descriptor();

}  // namespace pnunet
