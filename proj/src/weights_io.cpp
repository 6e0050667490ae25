#include "pnunet/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <zlib.h>

#include "pnunet/errors.hpp"

namespace fs = std::filesystem;

namespace pnunet {

namespace {

constexpr char kMagic[4] = {'P', 'N', 'U', 'W'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        crc = crc32(crc, bytes.data() + done, n);
        done += n;
    }
    return static_cast<std::uint32_t>(crc);
}

void write_weight_file(const fs::path& path, const std::string& model,
                       const nlohmann::json& config, const ParamSet& params) {
    nlohmann::json header;
    header["model"] = model;
    header["config"] = config;
    header["tensors"] = nlohmann::json::array();

    std::vector<std::uint8_t> payload;
    payload.reserve(params.total_count() * 4);
    for (const auto& t : params) {
        header["tensors"].push_back(
            {{"name", t.name}, {"shape", t.shape}, {"offset", payload.size()}});
        for (double v : t.values) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            put_u32(payload, bits);
        }
    }
    const std::string header_text = header.dump();

    std::vector<std::uint8_t> bytes(std::begin(kMagic), std::end(kMagic));
    bytes.push_back(kPnuwVersion);
    put_u32(bytes, static_cast<std::uint32_t>(header_text.size()));
    bytes.insert(bytes.end(), header_text.begin(), header_text.end());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    put_u32(bytes, crc32_of(payload));

    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

WeightFile read_weight_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                          std::istreambuf_iterator<char>()};
    const std::string where = path.string();

    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(where + " is not a PNUW weight file (bad magic)");
    if (bytes.size() < 9) throw CorruptionError(where + " is truncated");
    if (bytes[4] != kPnuwVersion)
        throw VersionError(where + ": unsupported PNUW version " + std::to_string(bytes[4]) +
                           " (this build reads version " + std::to_string(kPnuwVersion) + ")");
    const std::size_t header_len = get_u32(bytes.data() + 5);
    if (bytes.size() < 9 + header_len + 4) throw CorruptionError(where + " is truncated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 9,
                                       bytes.begin() + 9 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(where + ": malformed header: " + e.what());
    }

    const std::uint8_t* payload = bytes.data() + 9 + header_len;
    const std::size_t payload_len = bytes.size() - 9 - header_len - 4;
    const std::uint32_t stored_crc = get_u32(bytes.data() + bytes.size() - 4);

    WeightFile file;
    std::size_t expected_len = 0;
    try {
        file.model = header.at("model").get<std::string>();
        file.config = header.at("config");
        for (const auto& entry : header.at("tensors")) {
            auto shape = entry.at("shape").get<std::vector<int>>();
            for (int d : shape)
                if (d <= 0) throw CorruptionError(where + ": nonpositive tensor dimension");
            const auto offset = entry.at("offset").get<std::size_t>();
            if (offset != expected_len) throw CorruptionError(where + ": tensor offsets out of order");
            auto& t = file.params.add(entry.at("name").get<std::string>(), std::move(shape));
            expected_len += t.count() * 4;
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(where + ": malformed header: " + e.what());
    } catch (const ArgumentError& e) {
        throw CorruptionError(where + ": " + e.what());
    }
    if (expected_len != payload_len)
        throw CorruptionError(where + ": payload is " + std::to_string(payload_len) +
                              " bytes, header describes " + std::to_string(expected_len));
    if (crc32_of({payload, payload_len}) != stored_crc)
        throw CorruptionError(where + ": payload checksum mismatch");

    std::size_t pos = 0;
    for (auto& t : file.params)
        for (double& v : t.values) {
            v = static_cast<double>(std::bit_cast<float>(get_u32(payload + pos)));
            pos += 4;
        }
    return file;
}

}  // namespace pnunet
