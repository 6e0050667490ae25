#include "pnunet/baseline.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include <omp.h>
#include <unistd.h>

#include "pnunet/errors.hpp"

namespace pnunet {

void SearchConfig::validate() const {
    if (steps < 0) throw ArgumentError("search steps must be nonnegative");
    if (!(step_size > 0.0)) throw ArgumentError("search step_size must be positive");
    if (restarts < 1) throw ArgumentError("search restarts must be >= 1");
}

namespace {

using clock_type = std::chrono::steady_clock;

ImageTensor residual(const ImageTensor& x, const ImageTensor& recon) {
    ImageTensor map(x.height, x.width, 1);
    for (int y = 0; y < x.height; ++y)
        for (int xx = 0; xx < x.width; ++xx) {
            double s = 0.0;
            for (int c = 0; c < x.channels; ++c) s += std::abs(x.at(y, xx, c) - recon.at(y, xx, c));
            map.at(y, xx) = s / x.channels;
        }
    return map;
}

// Restores the OpenMP thread count on scope exit.
class SingleThreaded {
public:
    SingleThreaded() : saved_(omp_get_max_threads()) { omp_set_num_threads(1); }
    ~SingleThreaded() { omp_set_num_threads(saved_); }
    SingleThreaded(const SingleThreaded&) = delete;
    SingleThreaded& operator=(const SingleThreaded&) = delete;

private:
    int saved_;
};

}  // namespace

SearchResult latent_search_infer(const Autoencoder& ae, const ImageTensor& x,
                                 const SearchConfig& scfg, const SsimConfig& ssim) {
    scfg.validate();
    const auto t0 = clock_type::now();
    const std::vector<double> start = encode(ae, x);

    SearchResult result;
    result.reconstruction = decode(ae, start);
    result.initial_loss = ssim_loss(x, result.reconstruction, ssim);
    result.best_loss = result.initial_loss;
    if (!std::isfinite(result.initial_loss)) throw SearchError("non-finite initial search loss");

    std::mt19937_64 rng(scfg.seed);
    std::normal_distribution<double> jitter(0.0, 0.1);
    DecoderTape tape;
    for (int r = 0; r < scfg.restarts && scfg.steps > 0; ++r) {
        std::vector<double> latent = start;
        if (r > 0)
            for (double& v : latent) v += jitter(rng);
        ImageTensor recon = decode(ae, latent, &tape);
        auto consider = [&](double loss, int step) {
            if (!std::isfinite(loss))
                throw SearchError("non-finite search loss at step " + std::to_string(step));
            if (loss < result.best_loss) {
                result.best_loss = loss;
                result.reconstruction = recon;
            }
        };
        for (int step = 0; step < scfg.steps; ++step) {
            ImageTensor g_out;
            consider(ssim_loss_grad(x, recon, ssim, nullptr, &g_out), step);
            std::vector<double> g_latent;
            decoder_backward(ae, tape, g_out, nullptr, &g_latent);
            for (std::size_t i = 0; i < latent.size(); ++i) latent[i] -= scfg.step_size * g_latent[i];
            recon = decode(ae, latent, &tape);
        }
        consider(ssim_loss(x, recon, ssim), scfg.steps);
    }
    result.residual_map = residual(x, result.reconstruction);
    result.elapsed_seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
    return result;
}

nlohmann::json BenchReport::to_json() const {
    return {{"forward_seconds", forward_seconds},
            {"search_seconds", search_seconds},
            {"mean_forward_seconds", mean_forward_seconds},
            {"mean_search_seconds", mean_search_seconds},
            {"ratio", ratio},
            {"steps", steps},
            {"image_size", {height, width}},
            {"host", host}};
}

BenchReport bench_inference(const Reconstructor& recon, const Autoencoder& ae,
                            std::span<const ImageTensor> images, const SearchConfig& scfg,
                            const SsimConfig& ssim) {
    if (images.empty()) throw ArgumentError("bench_inference needs images");
    SingleThreaded single;

    (void)forward(recon, images.front());
    (void)latent_search_infer(ae, images.front(), scfg, ssim);

    BenchReport report;
    report.steps = scfg.steps;
    report.height = images.front().height;
    report.width = images.front().width;
    report.host = host_descriptor();
    for (const auto& x : images) {
        const auto t0 = clock_type::now();
        const ImageTensor out = forward(recon, x);
        const auto t1 = clock_type::now();
        report.forward_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
        report.search_seconds.push_back(latent_search_infer(ae, x, scfg, ssim).elapsed_seconds);
    }
    for (double s : report.forward_seconds) report.mean_forward_seconds += s;
    for (double s : report.search_seconds) report.mean_search_seconds += s;
    report.mean_forward_seconds /= static_cast<double>(images.size());
    report.mean_search_seconds /= static_cast<double>(images.size());
    report.ratio = report.mean_search_seconds / report.mean_forward_seconds;
    return report;
}

std::string host_descriptor() {
    char name[256] = {};
    if (gethostname(name, sizeof name - 1) != 0) name[0] = '\0';
    return std::string(name[0] ? name : "unknown") + ", " +
           std::to_string(std::thread::hardware_concurrency()) + " hw threads, " +
#if defined(__clang__)
           "clang " __clang_version__;
#elif defined(__GNUC__)
           "gcc " __VERSION__;
#else
           "unknown compiler";
#endif
}

}  // namespace pnunet
