#include "pnunet/run_config.hpp"

#include <fstream>

#include "pnunet/errors.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace pnunet {

namespace {

std::string map_mode_name(MapMode m) { return m == MapMode::ssim ? "ssim" : "abs_diff"; }

bool compatible(const json& schema, const json& value) {
    if (schema.is_boolean()) return value.is_boolean();
    if (schema.is_string()) return value.is_string();
    if (schema.is_number_float()) return value.is_number();
    if (schema.is_number_unsigned()) return value.is_number_unsigned() ||
                                            (value.is_number_integer() && value.get<long long>() >= 0);
    if (schema.is_number_integer()) return value.is_number_integer();
    if (schema.is_object()) return value.is_object();
    return false;
}

std::string describe(const json& schema) {
    if (schema.is_boolean()) return "a boolean";
    if (schema.is_string()) return "a string";
    if (schema.is_number_float()) return "a number";
    if (schema.is_number_unsigned()) return "a nonnegative integer";
    if (schema.is_number_integer()) return "an integer";
    if (schema.is_object()) return "an object";
    return "a value";
}

void merge_strict(json& target, const json& source, const std::string& prefix) {
    if (!source.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (auto it = source.begin(); it != source.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!target.contains(it.key())) throw ConfigError(path, "unknown key");
        json& slot = target[it.key()];
        if (!compatible(slot, it.value())) throw ConfigError(path, "expected " + describe(slot));
        if (slot.is_object()) {
            merge_strict(slot, it.value(), path);
        } else if (slot.is_number_float()) {
            slot = it.value().get<double>();
        } else {
            slot = it.value();
        }
    }
}

void apply_override(json& tree, const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(text, "override must look like key=value");
    const std::string path = text.substr(0, eq);
    const std::string raw = text.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &tree;
    std::size_t start = 0;
    std::string walked;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        walked = walked.empty() ? key : walked + "." + key;
        if (!node->is_object() || !node->contains(key)) throw ConfigError(walked, "unknown key");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (node->is_object()) throw ConfigError(path, "cannot override a whole section");
    if (!compatible(*node, value)) throw ConfigError(path, "expected " + describe(*node));
    *node = node->is_number_float() ? json(value.get<double>()) : value;
}

template <typename T>
T get(const json& tree, const std::string& path) {
    const json* node = &tree;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        node = &node->at(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return node->get<T>();
}

// Runs a validator and re-labels its ArgumentError with a key path. Validator
// messages name the field in their first or second word ("ssim sigma must
// ..."); when that word is a key of the section the path points at it.
template <typename F>
void validated(const json& tree, const std::string& section, F&& check) {
    try {
        check();
    } catch (const ArgumentError& e) {
        const std::string msg = e.what();
        const json& node = tree.at(section);
        std::size_t start = 0;
        for (int word = 0; word < 2 && start < msg.size(); ++word) {
            const auto end = msg.find(' ', start);
            const std::string field = msg.substr(start, end - start);
            if (node.contains(field)) throw ConfigError(section + "." + field, msg);
            if (end == std::string::npos) break;
            start = end + 1;
        }
        throw ConfigError(section, msg);
    }
}

}  // namespace

json to_json(const RunConfig& c) {
    json j;
    j["dataset"] = {{"normal_dir", c.dataset.normal_dir.string()},
                    {"anomalous_dir", c.dataset.anomalous_dir.string()},
                    {"ground_truth_dir", c.dataset.ground_truth_dir.string()},
                    {"grayscale", c.dataset.grayscale}};
    const auto& t = c.trainer;
    j["trainer"] = {{"iterations", t.iterations},
                    {"mask_update_interval", t.mask_update_interval},
                    {"batch_size", t.batch_size},
                    {"learning_rate", t.learning_rate},
                    {"noise_amplitude", t.noise_amplitude},
                    {"blend", t.blend},
                    {"patch_size", t.patch_size},
                    {"seed", t.seed},
                    {"checkpoint_every", t.checkpoint_every},
                    {"masks_enabled", t.masks_enabled},
                    {"mask_pool_normal", t.mask_pool_normal},
                    {"dump_masks", c.dump_masks}};
    j["ssim"] = {{"window_size", c.ssim.window_size},
                 {"sigma", c.ssim.sigma},
                 {"dynamic_range", c.ssim.dynamic_range},
                 {"k1", c.ssim.k1},
                 {"k2", c.ssim.k2}};
    j["reconstructor"] = to_json(c.reconstructor);
    const auto& a = c.autoencoder;
    j["autoencoder"] = {{"levels", a.levels},         {"base_channels", a.base_channels},
                        {"kernel_size", a.kernel_size}, {"latent_dim", a.latent_dim},
                        {"iterations", a.iterations}, {"batch_size", a.batch_size},
                        {"learning_rate", a.learning_rate}, {"seed", a.seed}};
    j["search"] = {{"steps", c.search.steps},
                   {"step_size", c.search.step_size},
                   {"restarts", c.search.restarts},
                   {"seed", c.search.seed}};
    const auto& d = c.detector;
    j["detector"] = {{"weights", d.weights},
                     {"input_dir", d.input_dir},
                     {"ground_truth_dir", d.ground_truth_dir},
                     {"validation_dir", d.validation_dir},
                     {"heldout_normal_dir", d.heldout_normal_dir},
                     {"smooth_sigma", d.smooth_sigma},
                     {"percentile", d.percentile},
                     {"threshold", d.threshold},
                     {"map_mode", map_mode_name(d.map_mode)}};
    j["bench"] = {{"weights", c.bench.weights},
                  {"autoencoder_weights", c.bench.autoencoder_weights},
                  {"input_dir", c.bench.input_dir},
                  {"max_images", c.bench.max_images}};
    const auto& g = c.gen_data;
    j["gen_data"] = {{"normal_count", g.normal_count},
                     {"normal_size", g.normal_size},
                     {"anomalous_count", g.anomalous_count},
                     {"validation_count", g.validation_count},
                     {"test_count", g.test_count},
                     {"test_normal_count", g.test_normal_count},
                     {"image_size", g.image_size},
                     {"grain", g.grain},
                     {"min_intensity", g.min_intensity},
                     {"max_intensity", g.max_intensity},
                     {"min_defect_size", g.min_defect_size},
                     {"max_defect_size", g.max_defect_size},
                     {"seed", g.seed}};
    j["output_dir"] = c.output_dir.string();
    return j;
}

RunConfig parse_run_config(const json& file, const std::vector<std::string>& overrides) {
    json tree = to_json(RunConfig{});
    merge_strict(tree, file, "");
    for (const auto& o : overrides) apply_override(tree, o);

    RunConfig c;
    c.dataset.normal_dir = get<std::string>(tree, "dataset.normal_dir");
    c.dataset.anomalous_dir = get<std::string>(tree, "dataset.anomalous_dir");
    c.dataset.ground_truth_dir = get<std::string>(tree, "dataset.ground_truth_dir");
    c.dataset.grayscale = get<bool>(tree, "dataset.grayscale");

    auto& t = c.trainer;
    t.iterations = get<long long>(tree, "trainer.iterations");
    t.mask_update_interval = get<long long>(tree, "trainer.mask_update_interval");
    t.batch_size = get<int>(tree, "trainer.batch_size");
    t.learning_rate = get<double>(tree, "trainer.learning_rate");
    t.noise_amplitude = get<double>(tree, "trainer.noise_amplitude");
    t.blend = get<double>(tree, "trainer.blend");
    t.patch_size = get<int>(tree, "trainer.patch_size");
    t.seed = get<std::uint64_t>(tree, "trainer.seed");
    t.checkpoint_every = get<long long>(tree, "trainer.checkpoint_every");
    t.masks_enabled = get<bool>(tree, "trainer.masks_enabled");
    t.mask_pool_normal = get<int>(tree, "trainer.mask_pool_normal");
    c.dump_masks = get<bool>(tree, "trainer.dump_masks");
    validated(tree, "trainer", [&] { t.validate(); });

    c.ssim.window_size = get<int>(tree, "ssim.window_size");
    c.ssim.sigma = get<double>(tree, "ssim.sigma");
    c.ssim.dynamic_range = get<double>(tree, "ssim.dynamic_range");
    c.ssim.k1 = get<double>(tree, "ssim.k1");
    c.ssim.k2 = get<double>(tree, "ssim.k2");
    validated(tree, "ssim", [&] { c.ssim.validate(); });

    try {
        c.reconstructor = reconstructor_config_from_json(tree.at("reconstructor"));
    } catch (const json::exception& e) {
        throw ConfigError("reconstructor", e.what());
    }
    validated(tree, "reconstructor", [&] { c.reconstructor.validate(); });

    auto& a = c.autoencoder;
    a.levels = get<int>(tree, "autoencoder.levels");
    a.base_channels = get<int>(tree, "autoencoder.base_channels");
    a.kernel_size = get<int>(tree, "autoencoder.kernel_size");
    a.latent_dim = get<int>(tree, "autoencoder.latent_dim");
    a.iterations = get<long long>(tree, "autoencoder.iterations");
    a.batch_size = get<int>(tree, "autoencoder.batch_size");
    a.learning_rate = get<double>(tree, "autoencoder.learning_rate");
    a.seed = get<std::uint64_t>(tree, "autoencoder.seed");
    validated(tree, "autoencoder", [&] { autoencoder_config(c).validate(); });

    c.search.steps = get<int>(tree, "search.steps");
    c.search.step_size = get<double>(tree, "search.step_size");
    c.search.restarts = get<int>(tree, "search.restarts");
    c.search.seed = get<std::uint64_t>(tree, "search.seed");
    validated(tree, "search", [&] { c.search.validate(); });

    auto& d = c.detector;
    d.weights = get<std::string>(tree, "detector.weights");
    d.input_dir = get<std::string>(tree, "detector.input_dir");
    d.ground_truth_dir = get<std::string>(tree, "detector.ground_truth_dir");
    d.validation_dir = get<std::string>(tree, "detector.validation_dir");
    d.heldout_normal_dir = get<std::string>(tree, "detector.heldout_normal_dir");
    d.smooth_sigma = get<double>(tree, "detector.smooth_sigma");
    d.percentile = get<double>(tree, "detector.percentile");
    d.threshold = get<double>(tree, "detector.threshold");
    const auto mode = get<std::string>(tree, "detector.map_mode");
    if (mode == "abs_diff") d.map_mode = MapMode::abs_diff;
    else if (mode == "ssim") d.map_mode = MapMode::ssim;
    else throw ConfigError("detector.map_mode", "expected \"abs_diff\" or \"ssim\"");
    if (d.smooth_sigma < 0.0) throw ConfigError("detector.smooth_sigma", "must be nonnegative");
    if (!(d.percentile > 0.0 && d.percentile < 100.0))
        throw ConfigError("detector.percentile", "must lie in (0, 100)");

    c.bench.weights = get<std::string>(tree, "bench.weights");
    c.bench.autoencoder_weights = get<std::string>(tree, "bench.autoencoder_weights");
    c.bench.input_dir = get<std::string>(tree, "bench.input_dir");
    c.bench.max_images = get<int>(tree, "bench.max_images");
    if (c.bench.max_images <= 0) throw ConfigError("bench.max_images", "must be positive");

    auto& g = c.gen_data;
    g.normal_count = get<int>(tree, "gen_data.normal_count");
    g.normal_size = get<int>(tree, "gen_data.normal_size");
    g.anomalous_count = get<int>(tree, "gen_data.anomalous_count");
    g.validation_count = get<int>(tree, "gen_data.validation_count");
    g.test_count = get<int>(tree, "gen_data.test_count");
    g.test_normal_count = get<int>(tree, "gen_data.test_normal_count");
    g.image_size = get<int>(tree, "gen_data.image_size");
    g.grain = get<double>(tree, "gen_data.grain");
    g.min_intensity = get<double>(tree, "gen_data.min_intensity");
    g.max_intensity = get<double>(tree, "gen_data.max_intensity");
    g.min_defect_size = get<int>(tree, "gen_data.min_defect_size");
    g.max_defect_size = get<int>(tree, "gen_data.max_defect_size");
    g.seed = get<std::uint64_t>(tree, "gen_data.seed");

    c.output_dir = get<std::string>(tree, "output_dir");
    return c;
}

RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read config " + path.string());
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ConfigError("<file>", "config is not valid JSON: " + path.string());
    return parse_run_config(file, overrides);
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.trainer.seed = seed;
    cfg.reconstructor.seed = seed;
    cfg.autoencoder.seed = seed;
    cfg.search.seed = seed;
    cfg.gen_data.seed = seed;
}

AutoencoderConfig autoencoder_config(const RunConfig& cfg) {
    AutoencoderConfig a;
    a.levels = cfg.autoencoder.levels;
    a.base_channels = cfg.autoencoder.base_channels;
    a.in_channels = cfg.reconstructor.in_channels;
    a.kernel_size = cfg.autoencoder.kernel_size;
    a.latent_dim = cfg.autoencoder.latent_dim;
    a.height = cfg.trainer.patch_size;
    a.width = cfg.trainer.patch_size;
    a.seed = cfg.autoencoder.seed;
    return a;
}

}  // namespace pnunet
