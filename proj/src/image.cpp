#include "ppcreg/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ppcreg/errors.hpp"
#include "raw_format.hpp"

namespace ppcreg {

std::string to_string(ImageStyle s) {
    switch (s) {
    case ImageStyle::bone: return "bone";
    case ImageStyle::realistic: return "realistic";
    case ImageStyle::augmented: return "augmented";
    case ImageStyle::external: return "external";
    }
    return "external";
}

ImageStyle image_style_from_string(const std::string& s) {
    if (s == "bone") return ImageStyle::bone;
    if (s == "realistic") return ImageStyle::realistic;
    if (s == "augmented") return ImageStyle::augmented;
    if (s == "external") return ImageStyle::external;
    throw std::invalid_argument("unknown image style '" + s + "'");
}

Image2D Image2D::zeros(int width, int height, const Eigen::Vector2d& spacing) {
    Image2D img;
    img.width = width;
    img.height = height;
    img.spacing = spacing;
    img.data.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0f);
    return img;
}

void Image2D::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("image dims must be positive");
    if (!(spacing.x() > 0) || !(spacing.y() > 0))
        throw std::invalid_argument("image spacing must be positive");
    if (data.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw std::invalid_argument("image data length does not match dims");
    for (float v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("image data must be finite");
}

Image2D load_image(const std::filesystem::path& path) {
    detail::RawFile file = detail::read_raw_file(path);
    if (file.header.dims[2] != 1)
        throw FormatError("image file must have dims (w, h, 1), got nz = " +
                          std::to_string(file.header.dims[2]));
    Image2D img;
    img.width = file.header.dims[0];
    img.height = file.header.dims[1];
    img.spacing = {file.header.spacing.x(), file.header.spacing.y()};
    img.style = file.header.style ? image_style_from_string(*file.header.style)
                                  : ImageStyle::external;
    img.data = std::move(file.data);
    img.validate();
    return img;
}

void save_image(const Image2D& img, const std::filesystem::path& path) {
    img.validate();
    detail::RawHeader header;
    header.dims = {img.width, img.height, 1};
    header.spacing = {img.spacing.x(), img.spacing.y(), 1.0};
    header.origin = Eigen::Vector3d::Zero();
    header.style = to_string(img.style);
    detail::write_raw_file(path, header, img.data);
}

void save_pgm(const Image2D& img, const std::filesystem::path& path) {
    img.validate();
    const auto [mn_it, mx_it] = std::minmax_element(img.data.begin(), img.data.end());
    const double mn = *mn_it, mx = *mx_it;
    const double scale = mx > mn ? 255.0 / (mx - mn) : 0.0;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u)
            row[static_cast<std::size_t>(u)] =
                static_cast<unsigned char>(std::lround((img.at(u, v) - mn) * scale));
        out.write(reinterpret_cast<const char*>(row.data()), img.width);
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

} // namespace ppcreg
