#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "pnunet/run_config.hpp"

// CLI command bodies. Each writes its artifacts plus report.json into
// cfg.output_dir and returns the report.
namespace pnunet::commands {

nlohmann::json gen_data(const RunConfig& cfg);
nlohmann::json train(const RunConfig& cfg);
nlohmann::json infer(const RunConfig& cfg);
nlohmann::json eval(const RunConfig& cfg);
nlohmann::json bench(const RunConfig& cfg);

// Throws ArgumentError for an unknown command name.
nlohmann::json dispatch(const std::string& command, const RunConfig& cfg);

// "crc32:xxxxxxxx" of a file's bytes.
std::string file_hash(const std::filesystem::path& path);

}  // namespace pnunet::commands
