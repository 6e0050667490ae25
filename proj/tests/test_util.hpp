#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "pnunet/image.hpp"

namespace pnunet::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::path(PNUNET_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline ImageTensor random_image(int h, int w, int c, std::uint64_t seed, double lo = 0.0,
                                double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    ImageTensor img(h, w, c);
    for (double& v : img.data) v = dist(rng);
    return img;
}

}  // namespace pnunet::test
