#include "pnunet/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>

#include "pnunet/errors.hpp"
#include "pnunet/weights_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace pnunet::commands {

std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                          std::istreambuf_iterator<char>()};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", crc32_of(bytes));
    return std::string("crc32:") + buf;
}

namespace {

json seeds(const RunConfig& cfg) {
    return {{"trainer", cfg.trainer.seed},
            {"reconstructor", cfg.reconstructor.seed},
            {"autoencoder", cfg.autoencoder.seed},
            {"search", cfg.search.seed},
            {"gen_data", cfg.gen_data.seed}};
}

json hash_outputs(const fs::path& dir) {
    json artifacts = json::object();
    if (!fs::is_directory(dir)) return artifacts;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "report.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) artifacts[fs::relative(f, dir).generic_string()] = file_hash(f);
    return artifacts;
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("short write to " + path.string());
}

json finish(const std::string& command, const RunConfig& cfg, json result) {
    json report;
    report["command"] = command;
    report["config"] = to_json(cfg);
    report["seeds"] = seeds(cfg);
    report["result"] = std::move(result);
    report["artifacts"] = hash_outputs(cfg.output_dir);
    write_json(cfg.output_dir / "report.json", report);
    return report;
}

fs::path require_path(const std::string& value, const std::string& key) {
    if (value.empty()) throw ConfigError(key, "required for this command");
    return value;
}

std::vector<LoadedImage> load_folder(const fs::path& dir, bool grayscale) {
    std::vector<LoadedImage> out;
    for (const auto& p : list_images(dir)) {
        out.push_back({p.stem().string(), load_image(p, grayscale)});
        validate_image(out.back().image);
    }
    return out;
}

std::vector<AnomalyResult> score_folder(const Reconstructor& model,
                                        const std::vector<LoadedImage>& images,
                                        const RunConfig& cfg) {
    std::vector<AnomalyResult> maps;
    for (const auto& li : images)
        maps.push_back(anomaly_map(model, li.image, cfg.detector.smooth_sigma, cfg.detector.map_mode,
                                   cfg.ssim));
    return maps;
}

void write_map_outputs(const fs::path& dir, const std::string& stem, const AnomalyResult& r) {
    save_png16(dir / (stem + "_map.png"), r.map, true);
    save_f32(dir / (stem + "_map.f32"), r.map);
    if (r.binary_mask) save_png8(dir / (stem + "_mask.png"), *r.binary_mask);
}

double resolve_threshold(const Reconstructor& model, const RunConfig& cfg,
                         const std::vector<AnomalyResult>& fallback) {
    if (cfg.detector.threshold >= 0.0) return cfg.detector.threshold;
    if (!cfg.detector.validation_dir.empty()) {
        const auto normals = load_folder(cfg.detector.validation_dir, cfg.dataset.grayscale);
        return choose_threshold(score_folder(model, normals, cfg), cfg.detector.percentile);
    }
    return choose_threshold(fallback, cfg.detector.percentile);
}

}  // namespace

json gen_data(const RunConfig& cfg) {
    CorpusSpec spec = cfg.gen_data;
    spec.root = cfg.output_dir;
    json manifest = generate_corpus(spec);
    return finish("gen-data", cfg, {{"manifest", cfg.output_dir / "manifest.json"},
                                    {"normal", manifest["normal"].size()},
                                    {"test_anomalous", manifest["test_anomalous"].size()}});
}

json train(const RunConfig& cfg) {
    DatasetSpec ds = cfg.dataset;
    require_path(ds.normal_dir.string(), "dataset.normal_dir");
    const Dataset data = load_dataset(ds);
    ReconstructorConfig model_cfg = cfg.reconstructor;

    TrainConfig tc = cfg.trainer;
    TrainingIo io;
    io.checkpoint_dir = cfg.output_dir;
    io.dump_masks = true;
    io.dump_masks_on_update = cfg.dump_masks;
    const long long every = std::max<long long>(1, tc.iterations / 20);
    io.progress = [&](long long it, double loss) {
        if (it % every == 0 || it == tc.iterations)
            std::cerr << "iter " << it << "/" << tc.iterations << " loss " << loss << "\n";
    };

    TrainingResult result = run_training(data, tc, model_cfg, cfg.ssim, io);
    save_weights(result.model, cfg.output_dir / "model.pnuw");
    json out = result.report.to_json();
    out["model"] = "model.pnuw";
    return finish("train", cfg, std::move(out));
}

json infer(const RunConfig& cfg) {
    const Reconstructor model = load_weights(require_path(cfg.detector.weights, "detector.weights"));
    const auto images = load_folder(require_path(cfg.detector.input_dir, "detector.input_dir"),
                                    cfg.dataset.grayscale);
    auto maps = score_folder(model, images, cfg);
    const double threshold = resolve_threshold(model, cfg, maps);
    json per_image = json::array();
    for (std::size_t i = 0; i < images.size(); ++i) {
        apply_threshold(maps[i], threshold);
        write_map_outputs(cfg.output_dir, images[i].stem, maps[i]);
        per_image.push_back({{"stem", images[i].stem}, {"score", maps[i].image_score}});
    }
    return finish("infer", cfg, {{"threshold", threshold}, {"images", per_image}});
}

json eval(const RunConfig& cfg) {
    const Reconstructor model = load_weights(require_path(cfg.detector.weights, "detector.weights"));
    DatasetSpec ds;
    ds.normal_dir = require_path(cfg.detector.validation_dir, "detector.validation_dir");
    ds.anomalous_dir = require_path(cfg.detector.input_dir, "detector.input_dir");
    ds.ground_truth_dir = require_path(cfg.detector.ground_truth_dir, "detector.ground_truth_dir");
    ds.grayscale = cfg.dataset.grayscale;
    const Dataset data = load_dataset(ds);

    auto maps = score_folder(model, data.anomalous, cfg);
    const auto normal_maps = score_folder(model, data.normal, cfg);
    const double threshold = cfg.detector.threshold >= 0.0
                                 ? cfg.detector.threshold
                                 : choose_threshold(normal_maps, cfg.detector.percentile);
    std::vector<ImageTensor> gts;
    for (const auto& g : data.ground_truth) gts.push_back(g.image);
    const double auroc = pixel_auroc(maps, gts);

    json per_image = json::array();
    for (std::size_t i = 0; i < maps.size(); ++i) {
        apply_threshold(maps[i], threshold);
        write_map_outputs(cfg.output_dir / "maps", data.anomalous[i].stem, maps[i]);
        per_image.push_back({{"stem", data.anomalous[i].stem}, {"score", maps[i].image_score}});
    }
    json result = {{"pixel_auroc", auroc},
                   {"threshold", threshold},
                   {"percentile", cfg.detector.percentile},
                   {"contrast_ratio", contrast_ratio(maps, gts)},
                   {"images", per_image}};
    if (!cfg.detector.heldout_normal_dir.empty()) {
        const auto heldout = load_folder(cfg.detector.heldout_normal_dir, cfg.dataset.grayscale);
        result["heldout_false_positive_rate"] =
            positive_pixel_rate(score_folder(model, heldout, cfg), threshold);
    }
    write_json(cfg.output_dir / "eval.json", result);
    return finish("eval", cfg, result);
}

json bench(const RunConfig& cfg) {
    const Reconstructor model = load_weights(require_path(cfg.bench.weights, "bench.weights"));
    Autoencoder ae;
    json ae_info;
    if (!cfg.bench.autoencoder_weights.empty()) {
        ae = load_autoencoder(cfg.bench.autoencoder_weights);
        ae_info = {{"loaded", cfg.bench.autoencoder_weights}};
    } else {
        require_path(cfg.dataset.normal_dir.string(), "dataset.normal_dir");
        const Dataset data = load_dataset(cfg.dataset);
        TrainConfig tc = cfg.trainer;
        tc.iterations = cfg.autoencoder.iterations;
        tc.batch_size = cfg.autoencoder.batch_size;
        tc.learning_rate = cfg.autoencoder.learning_rate;
        tc.seed = cfg.autoencoder.seed;
        auto trained = train_autoencoder(data, tc, autoencoder_config(cfg), cfg.ssim);
        ae = std::move(trained.model);
        save_autoencoder(ae, cfg.output_dir / "autoencoder.pnuw");
        ae_info = {{"trained", "autoencoder.pnuw"},
                   {"final_loss", trained.loss_history.empty() ? 0.0 : trained.loss_history.back()}};
    }
    const auto images = load_folder(require_path(cfg.bench.input_dir, "bench.input_dir"),
                                    cfg.dataset.grayscale);
    std::vector<ImageTensor> batch;
    for (const auto& li : images) {
        if (static_cast<int>(batch.size()) >= cfg.bench.max_images) break;
        batch.push_back(li.image);
    }
    if (batch.size() < 10) std::cerr << "warning: fewer than 10 images; timings will be noisy\n";
    const BenchReport report = bench_inference(model, ae, batch, cfg.search, cfg.ssim);
    json out = report.to_json();
    out["autoencoder"] = ae_info;
    write_json(cfg.output_dir / "bench.json", out);
    return finish("bench", cfg, out);
}

json dispatch(const std::string& command, const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    if (command == "gen-data") return gen_data(cfg);
    if (command == "train") return train(cfg);
    if (command == "infer") return infer(cfg);
    if (command == "eval") return eval(cfg);
    if (command == "bench") return bench(cfg);
    throw ArgumentError("unknown command '" + command + "'");
}

}  // namespace pnunet::commands
