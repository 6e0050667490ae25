#include "pnunet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "pnunet/errors.hpp"

namespace fs = std::filesystem;

namespace pnunet {

std::string to_string(DefectKind kind) {
    switch (kind) {
        case DefectKind::scratch: return "scratch";
        case DefectKind::blob: return "blob";
        case DefectKind::brightness_patch: return "brightness_patch";
    }
    return "unknown";
}

DefectKind defect_kind_from_string(const std::string& name) {
    if (name == "scratch") return DefectKind::scratch;
    if (name == "blob") return DefectKind::blob;
    if (name == "brightness_patch") return DefectKind::brightness_patch;
    throw ArgumentError("unknown defect kind '" + name + "'");
}

namespace {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

double segment_distance(Point p, Point a, Point b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
    return std::sqrt(ex * ex + ey * ey);
}

// Shape profile in [0,1] per pixel; zero outside the support.
ImageTensor scratch_profile(int h, int w, int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int stroke = 1 + static_cast<int>(unit(rng) * 3.0) % 3;  // 1..3 px
    const int segments = 2 + static_cast<int>(unit(rng) * 3.0) % 3;
    double angle = unit(rng) * 2.0 * std::numbers::pi;
    const double seg_len = static_cast<double>(size - stroke) / segments;

    std::vector<Point> pts{{0.0, 0.0}};
    for (int s = 0; s < segments; ++s) {
        angle += (unit(rng) - 0.5) * std::numbers::pi / 3.0;
        const Point& last = pts.back();
        pts.push_back({last.x + seg_len * std::cos(angle), last.y + seg_len * std::sin(angle)});
    }
    double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
    for (const auto& p : pts) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    // Translate so the stroke's bounding box lands inside the image.
    const double margin = stroke / 2.0 + 0.5;
    const double room_x = std::max(0.0, w - 1 - 2 * margin - (max_x - min_x));
    const double room_y = std::max(0.0, h - 1 - 2 * margin - (max_y - min_y));
    const double off_x = margin + unit(rng) * room_x - min_x;
    const double off_y = margin + unit(rng) * room_y - min_y;
    for (auto& p : pts) {
        p.x += off_x;
        p.y += off_y;
    }

    ImageTensor profile(h, w, 1);
    const double half = stroke / 2.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double d = 1e300;
            for (std::size_t i = 0; i + 1 < pts.size(); ++i)
                d = std::min(d, segment_distance({double(x), double(y)}, pts[i], pts[i + 1]));
            const double coverage = std::clamp(half + 0.5 - d, 0.0, 1.0);
            profile.at(y, x) = coverage >= 0.1 ? coverage : 0.0;
        }
    return profile;
}

ImageTensor blob_profile(int h, int w, int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double radius = std::max(1.0, size / 2.0);
    const double cx = radius + unit(rng) * std::max(0.0, w - 1 - 2 * radius);
    const double cy = radius + unit(rng) * std::max(0.0, h - 1 - 2 * radius);
    const double s = radius / 2.0;
    ImageTensor profile(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if (r2 <= radius * radius) profile.at(y, x) = std::exp(-r2 / (2.0 * s * s));
        }
    return profile;
}

ImageTensor patch_profile(int h, int w, int size, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> extra(0, size / 2);
    const int pw = size;
    const int ph = std::max(1, size / 2 + extra(rng));
    std::uniform_int_distribution<int> ys(0, h - ph), xs(0, w - pw);
    const int y0 = ys(rng), x0 = xs(rng);
    ImageTensor profile(h, w, 1);
    for (int y = y0; y < y0 + ph; ++y)
        for (int x = x0; x < x0 + pw; ++x) profile.at(y, x) = 1.0;
    return profile;
}

}  // namespace

DefectPair gen_synthetic_pair(const ImageTensor& base, const SyntheticDefectSpec& spec) {
    validate_image(base);
    if (spec.size_px <= 0 || spec.size_px >= std::min(base.height, base.width))
        throw ArgumentError("defect size_px must be positive and below min(H, W)");
    if (!(spec.intensity == 0.0 || (spec.intensity >= 1e-6 && spec.intensity <= 1.0)))
        throw ArgumentError("defect intensity must be 0 or within [1e-6, 1]");

    std::mt19937_64 rng(spec.seed);
    const double sign = (rng() & 1u) ? 1.0 : -1.0;
    ImageTensor profile;
    switch (spec.kind) {
        case DefectKind::scratch: profile = scratch_profile(base.height, base.width, spec.size_px, rng); break;
        case DefectKind::blob: profile = blob_profile(base.height, base.width, spec.size_px, rng); break;
        case DefectKind::brightness_patch: profile = patch_profile(base.height, base.width, spec.size_px, rng); break;
    }

    DefectPair pair{base, ImageTensor(base.height, base.width, 1)};
    for (int y = 0; y < base.height; ++y)
        for (int x = 0; x < base.width; ++x) {
            const double p = profile.at(y, x);
            if (p <= 0.0) continue;
            pair.gt_mask.at(y, x) = 1.0;
            if (spec.intensity == 0.0) continue;
            const double delta = sign * spec.intensity * p;
            for (int c = 0; c < base.channels; ++c) {
                const double b = base.at(y, x, c);
                double v = std::clamp(b + delta, 0.0, 1.0);
                // Clipping at a saturated pixel would erase the change; push the other way.
                if (v == b) v = b - delta;
                pair.defective.at(y, x, c) = v;
            }
        }
    return pair;
}

ImageTensor make_texture(const TextureSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double phi1 = phase(rng), phi2 = phase(rng), phi3 = phase(rng);
    const double two_pi = 2.0 * std::numbers::pi;
    const double t1 = 0.35, t2 = 1.9;
    std::uniform_real_distribution<double> grain(-spec.grain, spec.grain);
    ImageTensor img(spec.height, spec.width, 1);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            double v = 0.5;
            v += 0.12 * std::sin(two_pi * (x * std::cos(t1) + y * std::sin(t1)) / 9.0 + phi1);
            v += 0.08 * std::sin(two_pi * (x * std::cos(t2) + y * std::sin(t2)) / 14.0 + phi2);
            v += 0.04 * std::sin(two_pi * y / 23.0 + phi3);
            if (spec.grain > 0.0) v += grain(rng);
            img.at(y, x) = std::clamp(v, 0.0, 1.0);
        }
    return img;
}

nlohmann::json generate_corpus(const CorpusSpec& spec) {
    if (spec.image_size <= spec.max_defect_size)
        throw ArgumentError("image_size must exceed max_defect_size");
    if (spec.min_defect_size <= 0 || spec.min_defect_size > spec.max_defect_size)
        throw ArgumentError("invalid defect size range");
    if (spec.normal_count <= 0) throw ArgumentError("normal_count must be positive");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> intensity(spec.min_intensity, spec.max_intensity);
    std::uniform_int_distribution<int> size(spec.min_defect_size, spec.max_defect_size);

    nlohmann::json manifest;
    manifest["seed"] = spec.seed;
    manifest["image_size"] = spec.image_size;
    manifest["normal_size"] = spec.normal_size;

    auto name = [](const char* prefix, int i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s_%03d.png", prefix, i);
        return std::string(buf);
    };
    auto texture = [&](int side) {
        return make_texture({side, side, spec.grain, rng()});
    };
    auto write_normals = [&](const fs::path& dir, int count, int side, const char* prefix) {
        nlohmann::json list = nlohmann::json::array();
        for (int i = 0; i < count; ++i) {
            const auto file = name(prefix, i);
            save_png16(dir / file, texture(side), false);
            list.push_back(file);
        }
        return list;
    };
    auto write_defects = [&](const fs::path& img_dir, const fs::path& gt_dir, int count,
                             const char* prefix) {
        nlohmann::json list = nlohmann::json::array();
        for (int i = 0; i < count; ++i) {
            SyntheticDefectSpec d;
            d.kind = i % 2 == 0 ? DefectKind::scratch : DefectKind::blob;
            d.intensity = intensity(rng);
            d.size_px = size(rng);
            d.seed = rng();
            const auto pair = gen_synthetic_pair(texture(spec.image_size), d);
            const auto file = name(prefix, i);
            save_png16(img_dir / file, pair.defective, false);
            save_png16(gt_dir / file, pair.gt_mask, false);
            list.push_back({{"file", file},
                            {"kind", to_string(d.kind)},
                            {"intensity", d.intensity},
                            {"size_px", d.size_px},
                            {"seed", d.seed}});
        }
        return list;
    };

    const fs::path& r = spec.root;
    manifest["normal"] = write_normals(r / "normal", spec.normal_count, spec.normal_size, "normal");
    manifest["anomalous"] = write_defects(r / "anomalous", r / "gt", spec.anomalous_count, "anomalous");
    manifest["validation_normal"] =
        write_normals(r / "validation" / "normal", spec.validation_count, spec.image_size, "val");
    manifest["test_anomalous"] =
        write_defects(r / "test" / "anomalous", r / "test" / "gt", spec.test_count, "test");
    manifest["test_normal"] =
        write_normals(r / "test" / "normal", spec.test_normal_count, spec.image_size, "heldout");

    // Empty directories still exist so the layout is uniform.
    for (const auto& d : {r / "anomalous", r / "gt", r / "test" / "anomalous", r / "test" / "gt"})
        fs::create_directories(d);

    std::ofstream out(r / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + r.string());
    out << manifest.dump(2) << "\n";
    return manifest;
}

}  // namespace pnunet
