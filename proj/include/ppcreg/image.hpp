#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace ppcreg {

enum class ImageStyle { bone, realistic, augmented, external };

std::string to_string(ImageStyle s);
ImageStyle image_style_from_string(const std::string& s);

/// Rendered DRR or loaded external projection. Row-major, x-fastest:
/// data[u + width * v].
struct Image2D {
    int width = 0;
    int height = 0;
    Eigen::Vector2d spacing = Eigen::Vector2d::Ones(); // mm/px
    ImageStyle style = ImageStyle::external;
    std::vector<float> data;

    float& at(int u, int v) { return data[static_cast<std::size_t>(u) + static_cast<std::size_t>(width) * static_cast<std::size_t>(v)]; }
    float at(int u, int v) const { return data[static_cast<std::size_t>(u) + static_cast<std::size_t>(width) * static_cast<std::size_t>(v)]; }

    static Image2D zeros(int width, int height, const Eigen::Vector2d& spacing);

    void validate() const;
};

/// Bilinear sample at continuous pixel coordinates; valid for
/// u in [0, width-1], v in [0, height-1] (use in_bounds to check).
inline double sample_bilinear(const Image2D& img, double u, double v) {
    const int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
    const double tu = u - u0, tv = v - v0;
    const int u1 = std::min(u0 + 1, img.width - 1), v1 = std::min(v0 + 1, img.height - 1);
    const double a = img.at(u0, v0), b = img.at(u1, v0);
    const double c = img.at(u0, v1), d = img.at(u1, v1);
    const double top = a + (b - a) * tu;
    const double bot = c + (d - c) * tu;
    return top + (bot - top) * tv;
}

inline bool in_bounds(const Image2D& img, double u, double v) {
    return u >= 0.0 && v >= 0.0 && u <= img.width - 1 && v <= img.height - 1;
}

/// Same header + raw float32 container as volumes, with dims (w, h, 1) and
/// an extra style key.
Image2D load_image(const std::filesystem::path& path);
void save_image(const Image2D& img, const std::filesystem::path& path);

/// 8-bit PGM with min-max windowing, for visual inspection.
void save_pgm(const Image2D& img, const std::filesystem::path& path);

} // namespace ppcreg
