#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "pnunet/params.hpp"

// PNUW v1 container:
//   bytes 0-3  magic "PNUW"
//   byte  4    version 0x01
//   bytes 5-8  little-endian uint32 header length N
//   N bytes    UTF-8 JSON {"model", "config", "tensors": [{name, shape, offset}]}
//   payload    little-endian float32 values, tensors concatenated in order;
//              offset is the byte offset of each tensor within the payload
//   4 bytes    little-endian CRC32 of the payload
namespace pnunet {

inline constexpr std::uint8_t kPnuwVersion = 1;

struct WeightFile {
    std::string model;
    nlohmann::json config;
    ParamSet params;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

// Written to a sibling temp file and renamed into place.
void write_weight_file(const std::filesystem::path& path, const std::string& model,
                       const nlohmann::json& config, const ParamSet& params);

// Throws FormatError (magic), VersionError, CorruptionError (truncation,
// malformed header, checksum); never returns partial data.
WeightFile read_weight_file(const std::filesystem::path& path);

}  // namespace pnunet
