#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnunet/image.hpp"
#include "pnunet/params.hpp"

namespace pnunet {

// Skip-connected encoder-decoder. Level l (0..levels) runs one KxK conv with
// base_channels * 2^l outputs; levels are joined by 2x2 average pooling on the
// way down and nearest-neighbour upsampling plus channel concatenation with
// the matching encoder features on the way up. Leaky-ReLU inside, sigmoid head.
struct ReconstructorConfig {
    int levels = 3;
    int base_channels = 16;
    int in_channels = 1;
    int kernel_size = 3;
    std::uint64_t seed = 0;

    int channels_at(int level) const noexcept { return base_channels << level; }
    void validate() const;
    // H and W divisible by 2^levels, channels match.
    void check_input(const ImageTensor& x) const;

    friend bool operator==(const ReconstructorConfig&, const ReconstructorConfig&) = default;
};

nlohmann::json to_json(const ReconstructorConfig& cfg);
ReconstructorConfig reconstructor_config_from_json(const nlohmann::json& j);

struct Reconstructor {
    ReconstructorConfig config;
    ParamSet params;
};

// Fan-in scaled uniform weights (bound sqrt(6 / fan_in)), zero biases.
Reconstructor init_reconstructor(const ReconstructorConfig& cfg);

// Every tensor zero; forward then yields sigmoid(0) = 0.5 everywhere.
Reconstructor zero_reconstructor(const ReconstructorConfig& cfg);

// Intermediate activations recorded by forward_with_tape for backward.
struct ReconstructorTape {
    std::vector<ImageTensor> enc_in, enc_pre, enc_act;
    std::vector<ImageTensor> dec_in, dec_pre, dec_act;
    ImageTensor head_in, output;
};

ImageTensor forward(const Reconstructor& model, const ImageTensor& x);
ImageTensor forward_with_tape(const Reconstructor& model, const ImageTensor& x,
                              ReconstructorTape& tape);

// Accumulates parameter gradients into grads (laid out like model.params).
void backward(const Reconstructor& model, const ReconstructorTape& tape,
              const ImageTensor& grad_output, ParamSet& grads, ImageTensor* grad_input = nullptr);

// Any image -> reconstruction mapping; lets residual and detection code run
// against mock reconstructors.
using ReconstructFn = std::function<ImageTensor(const ImageTensor&)>;
ReconstructFn as_function(const Reconstructor& model);

// PNUW v1 weight files.
void save_weights(const Reconstructor& model, const std::filesystem::path& path);
Reconstructor load_weights(const std::filesystem::path& path);

}  // namespace pnunet
