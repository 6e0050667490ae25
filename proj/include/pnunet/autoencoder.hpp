#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnunet/image.hpp"
#include "pnunet/params.hpp"
#include "pnunet/ssim.hpp"

namespace pnunet {

struct TrainConfig;

// Plain convolutional autoencoder of the reconstructor's family without skip
// connections: the encoder's conv/pool ladder ends in a dense projection to
// the latent code, the decoder mirrors it with nearest-neighbour upsampling.
// Its decoder stands in for a generator during latent-search inference.
struct AutoencoderConfig {
    int levels = 3;
    int base_channels = 16;
    int in_channels = 1;
    int kernel_size = 3;
    int latent_dim = 64;
    int height = 64;
    int width = 64;
    std::uint64_t seed = 0;

    int channels_at(int level) const noexcept { return base_channels << level; }
    int bottleneck_height() const noexcept { return height >> levels; }
    int bottleneck_width() const noexcept { return width >> levels; }
    void validate() const;
};

nlohmann::json to_json(const AutoencoderConfig& cfg);
AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j);

struct Autoencoder {
    AutoencoderConfig config;
    ParamSet params;
};

Autoencoder init_autoencoder(const AutoencoderConfig& cfg);

struct EncoderTape {
    std::vector<ImageTensor> enc_in, enc_pre, enc_act;
    std::vector<double> flat;
};

struct DecoderTape {
    std::vector<double> latent;
    ImageTensor fc_pre;
    std::vector<ImageTensor> dec_in, dec_pre, dec_act;
    ImageTensor head_in, output;
};

std::vector<double> encode(const Autoencoder& ae, const ImageTensor& x, EncoderTape* tape = nullptr);
ImageTensor decode(const Autoencoder& ae, const std::vector<double>& latent,
                   DecoderTape* tape = nullptr);

// Gradients into grads (may be null to skip parameter gradients) and
// optionally into the latent code.
void decoder_backward(const Autoencoder& ae, const DecoderTape& tape, const ImageTensor& grad_output,
                      ParamSet* grads, std::vector<double>* grad_latent);
void encoder_backward(const Autoencoder& ae, const EncoderTape& tape,
                      const std::vector<double>& grad_latent, ParamSet& grads);

// Minimizes ssim_loss(x, decode(encode(x))) on random normal patches with
// Adam; no noise, no masks. Uses iterations, batch_size, learning_rate,
// patch_size and seed from cfg.
struct AutoencoderTraining {
    Autoencoder model;
    std::vector<double> loss_history;
};
AutoencoderTraining train_autoencoder(const Dataset& data, const TrainConfig& cfg,
                                      const AutoencoderConfig& ae_cfg, const SsimConfig& ssim);

void save_autoencoder(const Autoencoder& ae, const std::filesystem::path& path);
Autoencoder load_autoencoder(const std::filesystem::path& path);

}  // namespace pnunet
