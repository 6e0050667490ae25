#include "pnunet/reconstructor.hpp"

#include <cmath>
#include <random>
#include <string>

#include "pnunet/errors.hpp"
#include "pnunet/layers.hpp"
#include "pnunet/weights_io.hpp"

namespace pnunet {

namespace {

std::string enc(int l) { return "enc" + std::to_string(l); }
std::string dec(int l) { return "dec" + std::to_string(l); }

void add_conv(ParamSet& p, const std::string& name, int k, int cin, int cout) {
    p.add(name + ".weight", {k, k, cin, cout});
    p.add(name + ".bias", {cout});
}

ParamSet layout(const ReconstructorConfig& cfg) {
    const int k = cfg.kernel_size;
    ParamSet p;
    add_conv(p, enc(0), k, cfg.in_channels, cfg.channels_at(0));
    for (int l = 1; l <= cfg.levels; ++l)
        add_conv(p, enc(l), k, cfg.channels_at(l - 1), cfg.channels_at(l));
    for (int l = cfg.levels - 1; l >= 0; --l)
        add_conv(p, dec(l), k, cfg.channels_at(l + 1) + cfg.channels_at(l), cfg.channels_at(l));
    add_conv(p, "head", k, cfg.channels_at(0), cfg.in_channels);
    return p;
}

const ParamTensor& w(const ParamSet& p, const std::string& layer) { return p.at(layer + ".weight"); }
const ParamTensor& b(const ParamSet& p, const std::string& layer) { return p.at(layer + ".bias"); }

}  // namespace

void ReconstructorConfig::validate() const {
    if (levels < 1) throw ArgumentError("reconstructor levels must be >= 1");
    if (base_channels < 2) throw ArgumentError("reconstructor base_channels must be >= 2");
    if (in_channels != 1 && in_channels != 3)
        throw ArgumentError("reconstructor in_channels must be 1 or 3");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ArgumentError("reconstructor kernel_size must be odd");
}

void ReconstructorConfig::check_input(const ImageTensor& x) const {
    const int div = 1 << levels;
    if (x.channels != in_channels)
        throw ArgumentError("reconstructor expects " + std::to_string(in_channels) +
                            " channels, got " + x.shape_string());
    if (x.height % div != 0 || x.width % div != 0 || x.height == 0 || x.width == 0)
        throw ArgumentError("input " + x.shape_string() + " not divisible by 2^levels = " +
                            std::to_string(div));
}

nlohmann::json to_json(const ReconstructorConfig& cfg) {
    return {{"levels", cfg.levels},
            {"base_channels", cfg.base_channels},
            {"in_channels", cfg.in_channels},
            {"kernel_size", cfg.kernel_size},
            {"seed", cfg.seed}};
}

ReconstructorConfig reconstructor_config_from_json(const nlohmann::json& j) {
    ReconstructorConfig cfg;
    cfg.levels = j.at("levels").get<int>();
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.kernel_size = j.at("kernel_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

Reconstructor init_reconstructor(const ReconstructorConfig& cfg) {
    cfg.validate();
    Reconstructor model{cfg, layout(cfg)};
    std::mt19937_64 rng(cfg.seed);
    for (auto& t : model.params) {
        if (t.shape.size() != 4) continue;  // biases stay zero
        const double fan_in = static_cast<double>(t.shape[0]) * t.shape[1] * t.shape[2];
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : t.values) v = dist(rng);
    }
    round_to_float(model.params);
    return model;
}

Reconstructor zero_reconstructor(const ReconstructorConfig& cfg) {
    cfg.validate();
    return {cfg, layout(cfg)};
}

ImageTensor forward_with_tape(const Reconstructor& model, const ImageTensor& x,
                              ReconstructorTape& t) {
    const auto& cfg = model.config;
    const auto& p = model.params;
    cfg.check_input(x);
    const int L = cfg.levels;
    t.enc_in.assign(L + 1, {});
    t.enc_pre.assign(L + 1, {});
    t.enc_act.assign(L + 1, {});
    t.dec_in.assign(L, {});
    t.dec_pre.assign(L, {});
    t.dec_act.assign(L, {});

    for (int l = 0; l <= L; ++l) {
        t.enc_in[l] = l == 0 ? x : layers::avg_pool2(t.enc_act[l - 1]);
        t.enc_pre[l] = layers::conv2d(t.enc_in[l], w(p, enc(l)), b(p, enc(l)));
        t.enc_act[l] = layers::leaky_relu(t.enc_pre[l]);
    }
    const ImageTensor* cur = &t.enc_act[L];
    for (int l = L - 1; l >= 0; --l) {
        t.dec_in[l] = layers::concat_channels(layers::upsample2(*cur), t.enc_act[l]);
        t.dec_pre[l] = layers::conv2d(t.dec_in[l], w(p, dec(l)), b(p, dec(l)));
        t.dec_act[l] = layers::leaky_relu(t.dec_pre[l]);
        cur = &t.dec_act[l];
    }
    t.head_in = *cur;
    t.output = layers::sigmoid(layers::conv2d(t.head_in, w(p, "head"), b(p, "head")));
    return t.output;
}

ImageTensor forward(const Reconstructor& model, const ImageTensor& x) {
    ReconstructorTape tape;
    return forward_with_tape(model, x, tape);
}

void backward(const Reconstructor& model, const ReconstructorTape& t,
              const ImageTensor& grad_output, ParamSet& grads, ImageTensor* grad_input) {
    const auto& p = model.params;
    const int L = model.config.levels;

    auto conv_back = [&](const std::string& layer, const ImageTensor& input,
                         const ImageTensor& g_pre, ImageTensor* g_in) {
        layers::conv2d_backward(input, w(p, layer), g_pre, &grads.at(layer + ".weight"),
                                &grads.at(layer + ".bias"), g_in);
    };

    ImageTensor g_cur;
    conv_back("head", t.head_in, layers::sigmoid_backward(t.output, grad_output), &g_cur);

    // Gradients flowing into each encoder activation from its skip connection.
    std::vector<ImageTensor> g_enc_act(L + 1);
    for (int l = 0; l < L; ++l) {
        ImageTensor g_dec_in;
        conv_back(dec(l), t.dec_in[l], layers::leaky_relu_backward(t.dec_pre[l], g_cur), &g_dec_in);
        ImageTensor g_up, g_skip;
        const int up_channels = t.dec_in[l].channels - t.enc_act[l].channels;
        layers::split_channels(g_dec_in, up_channels, &g_up, &g_skip);
        g_enc_act[l] = std::move(g_skip);
        g_cur = layers::upsample2_backward(g_up);
    }
    g_enc_act[L] = std::move(g_cur);

    for (int l = L; l >= 0; --l) {
        const ImageTensor g_pre = layers::leaky_relu_backward(t.enc_pre[l], g_enc_act[l]);
        if (l == 0) {
            conv_back(enc(0), t.enc_in[0], g_pre, grad_input);
        } else {
            ImageTensor g_in;
            conv_back(enc(l), t.enc_in[l], g_pre, &g_in);
            layers::add_inplace(g_enc_act[l - 1], layers::avg_pool2_backward(g_in));
        }
    }
}

ReconstructFn as_function(const Reconstructor& model) {
    return [&model](const ImageTensor& x) { return forward(model, x); };
}

void save_weights(const Reconstructor& model, const std::filesystem::path& path) {
    write_weight_file(path, "reconstructor", to_json(model.config), model.params);
}

Reconstructor load_weights(const std::filesystem::path& path) {
    WeightFile file = read_weight_file(path);
    if (file.model != "reconstructor")
        throw FormatError(path.string() + " holds a '" + file.model + "' model, not a reconstructor");
    Reconstructor model;
    try {
        model.config = reconstructor_config_from_json(file.config);
        model.config.validate();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("bad reconstructor config in " + path.string() + ": " + e.what());
    }
    const ParamSet expected = layout(model.config);
    bool same = expected.size() == file.params.size();
    if (same) {
        auto it = file.params.begin();
        for (const auto& t : expected) {
            same = same && t.name == it->name && t.shape == it->shape;
            ++it;
        }
    }
    if (!same) throw CorruptionError("tensor layout in " + path.string() + " does not match its config");
    if (!file.params.all_finite()) throw CorruptionError("non-finite weights in " + path.string());
    model.params = std::move(file.params);
    return model;
}

}  // namespace pnunet
