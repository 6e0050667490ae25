#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pnunet {

// Channels-last H x W x C array of doubles. Carries images, noise fields,
// network feature maps and anomaly maps alike; only images are required to
// stay inside [0, 1] (see validate_image).
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    ImageTensor() = default;
    ImageTensor(int h, int w, int c, double fill = 0.0);

    std::size_t size() const noexcept { return data.size(); }
    std::size_t index(int y, int x, int c = 0) const noexcept {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int y, int x, int c = 0) noexcept { return data[index(y, x, c)]; }
    double at(int y, int x, int c = 0) const noexcept { return data[index(y, x, c)]; }

    std::span<double> pixel(int y, int x) noexcept {
        return {data.data() + index(y, x), static_cast<std::size_t>(channels)};
    }
    std::span<const double> pixel(int y, int x) const noexcept {
        return {data.data() + index(y, x), static_cast<std::size_t>(channels)};
    }

    bool same_shape(const ImageTensor& other) const noexcept {
        return height == other.height && width == other.width && channels == other.channels;
    }
    std::string shape_string() const;

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

inline constexpr int kMinImageSide = 8;

// Throws ArgumentError unless dims >= 8, channels in {1,3}, values finite in [0,1].
void validate_image(const ImageTensor& image);

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what);

// Mean over channels, producing H x W x 1.
ImageTensor channel_mean(const ImageTensor& image);

ImageTensor load_image(const std::filesystem::path& path, bool grayscale);

// 8-bit PNG; values are clamped to [0,1]. Multi-channel tensors keep their channels.
void save_png8(const std::filesystem::path& path, const ImageTensor& image);

// 16-bit grayscale PNG of a single-channel map. When normalize is set the map
// is min-max stretched for display; otherwise it is clamped to [0,1].
void save_png16(const std::filesystem::path& path, const ImageTensor& map, bool normalize);

// Raw little-endian float32, row-major, channels interleaved. No header.
void save_f32(const std::filesystem::path& path, const ImageTensor& image);
ImageTensor load_f32(const std::filesystem::path& path, int height, int width, int channels);

// Upper-left corners of sampled patches; exposed so the sampling rule is testable.
struct PatchCorner {
    int y = 0;
    int x = 0;
};

ImageTensor crop(const ImageTensor& image, int y, int x, int h, int w);

std::vector<PatchCorner> sample_patch_corners(int height, int width, int patch_size, int count,
                                              std::uint64_t rng_seed);

std::vector<ImageTensor> sample_patches(const ImageTensor& image, int patch_size, int count,
                                        std::uint64_t rng_seed);

// Non-overlapping patch_size tiles in raster order; the remainder is dropped.
std::vector<ImageTensor> tile_patches(const ImageTensor& image, int patch_size);

struct DatasetSpec {
    std::filesystem::path normal_dir;
    std::filesystem::path anomalous_dir;     // empty when absent
    std::filesystem::path ground_truth_dir;  // empty when absent
    bool grayscale = true;
};

struct LoadedImage {
    std::string stem;
    ImageTensor image;
};

struct Dataset {
    std::vector<LoadedImage> normal;
    std::vector<LoadedImage> anomalous;
    std::vector<LoadedImage> ground_truth;  // parallel to anomalous when present
};

// Sorted (by filename) raster files in a directory.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

Dataset load_dataset(const DatasetSpec& spec);

// Ground-truth masks are binarized at 0.5.
ImageTensor binarize(const ImageTensor& mask, double threshold = 0.5);

}  // namespace pnunet
