#include "pnunet/autoencoder.hpp"

#include <cmath>
#include <random>

#include "pnunet/errors.hpp"
#include "pnunet/layers.hpp"
#include "pnunet/trainer.hpp"
#include "pnunet/weights_io.hpp"

namespace pnunet {

namespace {

std::string enc(int l) { return "enc" + std::to_string(l); }
std::string dec(int l) { return "dec" + std::to_string(l); }

ParamSet layout(const AutoencoderConfig& cfg) {
    const int k = cfg.kernel_size;
    const int flat = cfg.bottleneck_height() * cfg.bottleneck_width() * cfg.channels_at(cfg.levels);
    ParamSet p;
    auto conv = [&](const std::string& name, int cin, int cout) {
        p.add(name + ".weight", {k, k, cin, cout});
        p.add(name + ".bias", {cout});
    };
    conv(enc(0), cfg.in_channels, cfg.channels_at(0));
    for (int l = 1; l <= cfg.levels; ++l) conv(enc(l), cfg.channels_at(l - 1), cfg.channels_at(l));
    p.add("fc_enc.weight", {cfg.latent_dim, flat});
    p.add("fc_enc.bias", {cfg.latent_dim});
    p.add("fc_dec.weight", {flat, cfg.latent_dim});
    p.add("fc_dec.bias", {flat});
    for (int l = cfg.levels - 1; l >= 0; --l) conv(dec(l), cfg.channels_at(l + 1), cfg.channels_at(l));
    conv("head", cfg.channels_at(0), cfg.in_channels);
    return p;
}

const ParamTensor& w(const ParamSet& p, const std::string& layer) { return p.at(layer + ".weight"); }
const ParamTensor& b(const ParamSet& p, const std::string& layer) { return p.at(layer + ".bias"); }

}  // namespace

void AutoencoderConfig::validate() const {
    if (levels < 1) throw ArgumentError("autoencoder levels must be >= 1");
    if (base_channels < 2) throw ArgumentError("autoencoder base_channels must be >= 2");
    if (in_channels != 1 && in_channels != 3) throw ArgumentError("autoencoder in_channels must be 1 or 3");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ArgumentError("autoencoder kernel_size must be odd");
    if (latent_dim <= 0) throw ArgumentError("latent_dim must be positive");
    const int div = 1 << levels;
    if (height <= 0 || width <= 0 || height % div != 0 || width % div != 0)
        throw ArgumentError("autoencoder image size must be divisible by 2^levels");
}

nlohmann::json to_json(const AutoencoderConfig& cfg) {
    return {{"levels", cfg.levels},       {"base_channels", cfg.base_channels},
            {"in_channels", cfg.in_channels}, {"kernel_size", cfg.kernel_size},
            {"latent_dim", cfg.latent_dim}, {"height", cfg.height},
            {"width", cfg.width},         {"seed", cfg.seed}};
}

AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j) {
    AutoencoderConfig cfg;
    cfg.levels = j.at("levels").get<int>();
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.kernel_size = j.at("kernel_size").get<int>();
    cfg.latent_dim = j.at("latent_dim").get<int>();
    cfg.height = j.at("height").get<int>();
    cfg.width = j.at("width").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

Autoencoder init_autoencoder(const AutoencoderConfig& cfg) {
    cfg.validate();
    Autoencoder ae{cfg, layout(cfg)};
    std::mt19937_64 rng(cfg.seed);
    for (auto& t : ae.params) {
        if (t.shape.size() == 1) continue;
        const double fan_in = t.shape.size() == 4
                                  ? static_cast<double>(t.shape[0]) * t.shape[1] * t.shape[2]
                                  : static_cast<double>(t.shape[1]);
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : t.values) v = dist(rng);
    }
    round_to_float(ae.params);
    return ae;
}

std::vector<double> encode(const Autoencoder& ae, const ImageTensor& x, EncoderTape* tape) {
    const auto& cfg = ae.config;
    const auto& p = ae.params;
    if (x.height != cfg.height || x.width != cfg.width || x.channels != cfg.in_channels)
        throw ArgumentError("autoencoder expects " + std::to_string(cfg.height) + "x" +
                            std::to_string(cfg.width) + "x" + std::to_string(cfg.in_channels) +
                            ", got " + x.shape_string());
    EncoderTape local;
    EncoderTape& t = tape ? *tape : local;
    const int L = cfg.levels;
    t.enc_in.assign(L + 1, {});
    t.enc_pre.assign(L + 1, {});
    t.enc_act.assign(L + 1, {});
    for (int l = 0; l <= L; ++l) {
        t.enc_in[l] = l == 0 ? x : layers::avg_pool2(t.enc_act[l - 1]);
        t.enc_pre[l] = layers::conv2d(t.enc_in[l], w(p, enc(l)), b(p, enc(l)));
        t.enc_act[l] = layers::leaky_relu(t.enc_pre[l]);
    }
    t.flat = t.enc_act[L].data;
    return layers::dense(t.flat, w(p, "fc_enc"), b(p, "fc_enc"));
}

ImageTensor decode(const Autoencoder& ae, const std::vector<double>& latent, DecoderTape* tape) {
    const auto& cfg = ae.config;
    const auto& p = ae.params;
    if (static_cast<int>(latent.size()) != cfg.latent_dim)
        throw ArgumentError("latent code has the wrong dimension");
    DecoderTape local;
    DecoderTape& t = tape ? *tape : local;
    const int L = cfg.levels;
    t.latent = latent;
    t.fc_pre = ImageTensor(cfg.bottleneck_height(), cfg.bottleneck_width(), cfg.channels_at(L));
    t.fc_pre.data = layers::dense(latent, w(p, "fc_dec"), b(p, "fc_dec"));
    t.dec_in.assign(L, {});
    t.dec_pre.assign(L, {});
    t.dec_act.assign(L, {});
    ImageTensor cur = layers::leaky_relu(t.fc_pre);
    for (int l = L - 1; l >= 0; --l) {
        t.dec_in[l] = layers::upsample2(cur);
        t.dec_pre[l] = layers::conv2d(t.dec_in[l], w(p, dec(l)), b(p, dec(l)));
        t.dec_act[l] = layers::leaky_relu(t.dec_pre[l]);
        cur = t.dec_act[l];
    }
    t.head_in = cur;
    t.output = layers::sigmoid(layers::conv2d(t.head_in, w(p, "head"), b(p, "head")));
    return t.output;
}

void decoder_backward(const Autoencoder& ae, const DecoderTape& t, const ImageTensor& grad_output,
                      ParamSet* grads, std::vector<double>* grad_latent) {
    const auto& p = ae.params;
    const int L = ae.config.levels;
    auto gw = [&](const std::string& layer) { return grads ? &grads->at(layer + ".weight") : nullptr; };
    auto gb = [&](const std::string& layer) { return grads ? &grads->at(layer + ".bias") : nullptr; };

    ImageTensor g_cur;
    layers::conv2d_backward(t.head_in, w(p, "head"), layers::sigmoid_backward(t.output, grad_output),
                            gw("head"), gb("head"), &g_cur);
    for (int l = 0; l < L; ++l) {
        ImageTensor g_in;
        layers::conv2d_backward(t.dec_in[l], w(p, dec(l)),
                                layers::leaky_relu_backward(t.dec_pre[l], g_cur), gw(dec(l)),
                                gb(dec(l)), &g_in);
        g_cur = layers::upsample2_backward(g_in);
    }
    const ImageTensor g_fc = layers::leaky_relu_backward(t.fc_pre, g_cur);
    layers::dense_backward(t.latent, w(p, "fc_dec"), g_fc.data, gw("fc_dec"), gb("fc_dec"),
                           grad_latent);
}

void encoder_backward(const Autoencoder& ae, const EncoderTape& t,
                      const std::vector<double>& grad_latent, ParamSet& grads) {
    const auto& p = ae.params;
    const int L = ae.config.levels;
    std::vector<double> g_flat;
    layers::dense_backward(t.flat, w(p, "fc_enc"), grad_latent, &grads.at("fc_enc.weight"),
                           &grads.at("fc_enc.bias"), &g_flat);
    ImageTensor g_act = t.enc_act[L];
    g_act.data = std::move(g_flat);
    for (int l = L; l >= 0; --l) {
        const ImageTensor g_pre = layers::leaky_relu_backward(t.enc_pre[l], g_act);
        ImageTensor g_in;
        layers::conv2d_backward(t.enc_in[l], w(p, enc(l)), g_pre, &grads.at(enc(l) + ".weight"),
                                &grads.at(enc(l) + ".bias"), l > 0 ? &g_in : nullptr);
        if (l > 0) g_act = layers::avg_pool2_backward(g_in);
    }
}

AutoencoderTraining train_autoencoder(const Dataset& data, const TrainConfig& cfg,
                                      const AutoencoderConfig& ae_cfg, const SsimConfig& ssim) {
    cfg.validate();
    if (data.normal.empty()) throw ArgumentError("autoencoder training needs normal images");
    if (ae_cfg.height != cfg.patch_size || ae_cfg.width != cfg.patch_size)
        throw ArgumentError("autoencoder image size must equal the patch size");
    AutoencoderTraining out{init_autoencoder(ae_cfg), {}};
    Adam adam(out.model.params, {.learning_rate = cfg.learning_rate});
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.normal.size() - 1);

    EncoderTape et;
    DecoderTape dt;
    for (long long it = 0; it < cfg.iterations; ++it) {
        ParamSet grads = out.model.params.zeros_like();
        const double inv_b = 1.0 / cfg.batch_size;
        double loss = 0.0;
        for (int i = 0; i < cfg.batch_size; ++i) {
            const ImageTensor& img = data.normal[pick(rng)].image;
            std::uniform_int_distribution<int> ys(0, img.height - cfg.patch_size);
            std::uniform_int_distribution<int> xs(0, img.width - cfg.patch_size);
            const int y = ys(rng);
            const int x = xs(rng);
            const ImageTensor patch = crop(img, y, x, cfg.patch_size, cfg.patch_size);
            const ImageTensor recon = decode(out.model, encode(out.model, patch, &et), &dt);
            ImageTensor g;
            loss += inv_b * ssim_loss_grad(patch, recon, ssim, nullptr, &g);
            for (double& v : g.data) v *= inv_b;
            std::vector<double> g_latent;
            decoder_backward(out.model, dt, g, &grads, &g_latent);
            encoder_backward(out.model, et, g_latent, grads);
        }
        if (!std::isfinite(loss))
            throw TrainingError("non-finite autoencoder loss at iteration " + std::to_string(it + 1));
        adam.step(out.model.params, grads);
        out.loss_history.push_back(loss);
    }
    return out;
}

void save_autoencoder(const Autoencoder& ae, const std::filesystem::path& path) {
    write_weight_file(path, "autoencoder", to_json(ae.config), ae.params);
}

Autoencoder load_autoencoder(const std::filesystem::path& path) {
    WeightFile file = read_weight_file(path);
    if (file.model != "autoencoder")
        throw FormatError(path.string() + " holds a '" + file.model + "' model, not an autoencoder");
    Autoencoder ae;
    try {
        ae.config = autoencoder_config_from_json(file.config);
        ae.config.validate();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("bad autoencoder config in " + path.string() + ": " + e.what());
    }
    const ParamSet expected = layout(ae.config);
    if (expected.size() != file.params.size())
        throw CorruptionError("tensor layout in " + path.string() + " does not match its config");
    auto it = file.params.begin();
    for (const auto& t : expected) {
        if (t.name != it->name || t.shape != it->shape)
            throw CorruptionError("tensor layout in " + path.string() + " does not match its config");
        ++it;
    }
    ae.params = std::move(file.params);
    return ae;
}

}  // namespace pnunet
