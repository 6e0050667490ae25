#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "pnunet/image.hpp"

namespace pnunet {

enum class DefectKind { scratch, blob, brightness_patch };

std::string to_string(DefectKind kind);
DefectKind defect_kind_from_string(const std::string& name);

struct SyntheticDefectSpec {
    DefectKind kind = DefectKind::blob;
    double intensity = 0.3;  // peak additive change; 0 or in [1e-6, 1]
    int size_px = 8;         // extent of the shape, < min(H, W)
    std::uint64_t seed = 0;
};

struct DefectPair {
    ImageTensor defective;
    ImageTensor gt_mask;  // H x W x 1, values in {0, 1}
};

// gt_mask marks the shape support regardless of intensity. For intensity > 0
// the defective image differs from base on exactly the masked pixels.
DefectPair gen_synthetic_pair(const ImageTensor& base, const SyntheticDefectSpec& spec);

// Stationary stripe texture with random phases and a little grain, in [0,1].
struct TextureSpec {
    int height = 64;
    int width = 64;
    double grain = 0.01;
    std::uint64_t seed = 0;
};

ImageTensor make_texture(const TextureSpec& spec);

struct CorpusSpec {
    std::filesystem::path root;
    int normal_count = 16;
    int normal_size = 128;
    int anomalous_count = 4;
    int validation_count = 10;
    int test_count = 20;
    int test_normal_count = 10;
    int image_size = 64;
    double grain = 0.01;
    double min_intensity = 0.05;
    double max_intensity = 0.10;
    int min_defect_size = 6;
    int max_defect_size = 16;
    std::uint64_t seed = 0;
};

// Writes normal/, anomalous/ + gt/, validation/normal/, test/anomalous/ +
// test/gt/, test/normal/ and manifest.json below spec.root. Defects alternate
// scratch/blob. Returns the manifest.
nlohmann::json generate_corpus(const CorpusSpec& spec);

}  // namespace pnunet
