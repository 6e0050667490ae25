#include "pnunet/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "pnunet/errors.hpp"

namespace fs = std::filesystem;

namespace pnunet {

ImageTensor::ImageTensor(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c),
           fill) {
    if (h < 0 || w < 0 || c < 0) throw ArgumentError("negative tensor dimension");
}

std::string ImageTensor::shape_string() const {
    std::ostringstream os;
    os << height << "x" << width << "x" << channels;
    return os.str();
}

void validate_image(const ImageTensor& image) {
    if (image.height < kMinImageSide || image.width < kMinImageSide)
        throw ArgumentError("image must be at least 8x8, got " + image.shape_string());
    if (image.channels != 1 && image.channels != 3)
        throw ArgumentError("image must have 1 or 3 channels, got " + image.shape_string());
    for (double v : image.data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ArgumentError("image values must be finite and within [0,1]");
    }
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ArgumentError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                            b.shape_string());
}

ImageTensor channel_mean(const ImageTensor& image) {
    ImageTensor out(image.height, image.width, 1);
    const double inv = 1.0 / image.channels;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            double s = 0.0;
            for (double v : image.pixel(y, x)) s += v;
            out.at(y, x) = s * inv;
        }
    return out;
}

ImageTensor load_image(const fs::path& path, bool grayscale) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw IoError("cannot read image " + path.string());
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    if (mat.empty()) throw IoError("cannot decode image " + path.string());

    double scale = 0.0;
    switch (mat.depth()) {
        case CV_8U: scale = 1.0 / 255.0; break;
        case CV_16U: scale = 1.0 / 65535.0; break;
        default: throw FormatError("unsupported bit depth in " + path.string());
    }
    const int src_channels = mat.channels();
    if (src_channels != 1 && src_channels != 3 && src_channels != 4)
        throw FormatError("unsupported channel count in " + path.string());

    // OpenCV decodes color as BGR(A); alpha is dropped.
    const int color_channels = src_channels == 1 ? 1 : 3;
    ImageTensor rgb(mat.rows, mat.cols, color_channels);
    for (int y = 0; y < mat.rows; ++y) {
        for (int x = 0; x < mat.cols; ++x) {
            for (int c = 0; c < color_channels; ++c) {
                const int src_c = color_channels == 1 ? 0 : 2 - c;
                double raw = 0.0;
                if (mat.depth() == CV_8U)
                    raw = mat.ptr<std::uint8_t>(y)[x * src_channels + src_c];
                else
                    raw = mat.ptr<std::uint16_t>(y)[x * src_channels + src_c];
                rgb.at(y, x, c) = raw * scale;
            }
        }
    }
    if (grayscale && color_channels == 3) return channel_mean(rgb);
    return rgb;
}

namespace {

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
}

void write_mat(const fs::path& path, const cv::Mat& mat) {
    ensure_parent(path);
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), mat);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write " + path.string() + ": " + e.what());
    }
    if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace

void save_png8(const fs::path& path, const ImageTensor& image) {
    const int type = image.channels == 1 ? CV_8UC1 : CV_8UC3;
    if (image.channels != 1 && image.channels != 3)
        throw ArgumentError("save_png8 expects 1 or 3 channels");
    cv::Mat mat(image.height, image.width, type);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) {
                const int dst_c = image.channels == 1 ? 0 : 2 - c;
                const double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
                mat.ptr<std::uint8_t>(y)[x * image.channels + dst_c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    write_mat(path, mat);
}

void save_png16(const fs::path& path, const ImageTensor& map, bool normalize) {
    if (map.channels != 1) throw ArgumentError("save_png16 expects a single-channel map");
    double lo = 0.0, hi = 1.0;
    if (normalize && !map.data.empty()) {
        auto [mn, mx] = std::minmax_element(map.data.begin(), map.data.end());
        lo = *mn;
        hi = *mx;
    }
    const double span = hi - lo;
    cv::Mat mat(map.height, map.width, CV_16UC1);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            double v = span > 0.0 ? (map.at(y, x) - lo) / span : 0.0;
            if (!normalize) v = map.at(y, x);
            v = std::clamp(v, 0.0, 1.0);
            mat.ptr<std::uint16_t>(y)[x] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }
    write_mat(path, mat);
}

void save_f32(const fs::path& path, const ImageTensor& image) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    ensure_parent(path);
    std::vector<float> buf(image.data.begin(), image.data.end());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("short write to " + path.string());
}

ImageTensor load_f32(const fs::path& path, int height, int width, int channels) {
    ImageTensor image(height, width, channels);
    std::vector<float> buf(image.size());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
        throw FormatError("size mismatch reading " + path.string());
    std::copy(buf.begin(), buf.end(), image.data.begin());
    return image;
}

ImageTensor crop(const ImageTensor& image, int y, int x, int h, int w) {
    if (y < 0 || x < 0 || h <= 0 || w <= 0 || y + h > image.height || x + w > image.width)
        throw ArgumentError("crop window outside image");
    ImageTensor out(h, w, image.channels);
    const std::size_t row = static_cast<std::size_t>(w) * image.channels;
    for (int r = 0; r < h; ++r)
        std::copy_n(image.data.begin() + static_cast<std::ptrdiff_t>(image.index(y + r, x)), row,
                    out.data.begin() + static_cast<std::ptrdiff_t>(out.index(r, 0)));
    return out;
}

std::vector<PatchCorner> sample_patch_corners(int height, int width, int patch_size, int count,
                                              std::uint64_t rng_seed) {
    if (patch_size <= 0 || patch_size > std::min(height, width))
        throw ArgumentError("patch_size " + std::to_string(patch_size) +
                            " does not fit a " + std::to_string(height) + "x" +
                            std::to_string(width) + " image");
    if (count < 0) throw ArgumentError("patch count must be nonnegative");
    std::mt19937_64 rng(rng_seed);
    std::uniform_int_distribution<int> ys(0, height - patch_size);
    std::uniform_int_distribution<int> xs(0, width - patch_size);
    std::vector<PatchCorner> corners(static_cast<std::size_t>(count));
    for (auto& c : corners) {
        c.y = ys(rng);
        c.x = xs(rng);
    }
    return corners;
}

std::vector<ImageTensor> sample_patches(const ImageTensor& image, int patch_size, int count,
                                        std::uint64_t rng_seed) {
    std::vector<ImageTensor> patches;
    for (const auto& c : sample_patch_corners(image.height, image.width, patch_size, count, rng_seed))
        patches.push_back(crop(image, c.y, c.x, patch_size, patch_size));
    return patches;
}

std::vector<ImageTensor> tile_patches(const ImageTensor& image, int patch_size) {
    if (patch_size <= 0 || patch_size > std::min(image.height, image.width))
        throw ArgumentError("tile size does not fit image " + image.shape_string());
    std::vector<ImageTensor> tiles;
    for (int y = 0; y + patch_size <= image.height; y += patch_size)
        for (int x = 0; x + patch_size <= image.width; x += patch_size)
            tiles.push_back(crop(image, y, x, patch_size, patch_size));
    return tiles;
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        if (ext == ".png" || ext == ".pgm" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

ImageTensor binarize(const ImageTensor& mask, double threshold) {
    ImageTensor out = mask.channels == 1 ? mask : channel_mean(mask);
    for (double& v : out.data) v = v >= threshold ? 1.0 : 0.0;
    return out;
}

Dataset load_dataset(const DatasetSpec& spec) {
    Dataset ds;
    for (const auto& p : list_images(spec.normal_dir))
        ds.normal.push_back({p.stem().string(), load_image(p, spec.grayscale)});
    if (ds.normal.empty())
        throw IoError("no readable images in normal_dir " + spec.normal_dir.string());

    if (!spec.anomalous_dir.empty()) {
        std::error_code ec;
        if (fs::is_directory(spec.anomalous_dir, ec)) {
            for (const auto& p : list_images(spec.anomalous_dir))
                ds.anomalous.push_back({p.stem().string(), load_image(p, spec.grayscale)});
        }
    }
    if (!spec.ground_truth_dir.empty()) {
        for (const auto& a : ds.anomalous) {
            fs::path gt_path;
            for (const char* ext : {".png", ".pgm", ".bmp"}) {
                fs::path candidate = spec.ground_truth_dir / (a.stem + ext);
                if (fs::exists(candidate)) {
                    gt_path = candidate;
                    break;
                }
            }
            if (gt_path.empty()) throw IoError("missing ground-truth mask for " + a.stem);
            ImageTensor gt = binarize(load_image(gt_path, true));
            if (gt.height != a.image.height || gt.width != a.image.width)
                throw ArgumentError("ground-truth mask size differs for " + a.stem);
            ds.ground_truth.push_back({a.stem, std::move(gt)});
        }
    }
    for (const auto& set : {&ds.normal, &ds.anomalous})
        for (const auto& li : *set) validate_image(li.image);
    return ds;
}

}  // namespace pnunet
