#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pnunet/commands.hpp"
#include "pnunet/errors.hpp"
#include "pnunet/run_config.hpp"

namespace {

std::string quoted(const std::string& s) {
    return nlohmann::json(s).dump();
}

int fail(int code, const std::string& kind, const std::string& key, const std::string& message) {
    std::cerr << "error kind=" << kind;
    if (!key.empty()) std::cerr << " key=" << key;
    std::cerr << " message=" << quoted(message) << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anomaly detection with positive/negative noise-mask self-training"};
    std::string command;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool dump_masks = false;

    app.add_option("command", command, "train | infer | eval | bench | gen-data")
        ->required()
        ->check(CLI::IsMember({"train", "infer", "eval", "bench", "gen-data"}));
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--set", overrides, "Override a config key: dotted.path=value (repeatable)");
    app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
    app.add_option("--seed", seed, "Set every seed in the configuration");
    app.add_flag("--dump-masks", dump_masks, "Write mask PNG/f32 files at every mask update");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(2, "usage", "", e.what());
    }

    try {
        pnunet::RunConfig cfg = config_path.empty()
                                    ? pnunet::parse_run_config(nlohmann::json::object(), overrides)
                                    : pnunet::load_run_config(config_path, overrides);
        if (seed) pnunet::apply_seed(cfg, *seed);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (dump_masks) cfg.dump_masks = true;

        const nlohmann::json report = pnunet::commands::dispatch(command, cfg);
        std::cout << "ok command=" << command << " report=" << quoted((cfg.output_dir / "report.json").string())
                  << "\n";
        return 0;
    } catch (const pnunet::ConfigError& e) {
        return fail(2, e.kind(), e.key_path(), e.what());
    } catch (const pnunet::Error& e) {
        return fail(1, e.kind(), "", e.what());
    } catch (const std::exception& e) {
        return fail(1, "runtime", "", e.what());
    }
}
