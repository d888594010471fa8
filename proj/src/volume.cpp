#include "ppcreg/volume.hpp"

#include <algorithm>
#include <stdexcept>

#include "ppcreg/errors.hpp"
#include "raw_format.hpp"

namespace ppcreg {

Volume::Volume(std::array<int, 3> dims, const Eigen::Vector3d& spacing,
               const Eigen::Vector3d& origin, std::vector<float> data)
    : dims_(dims), spacing_(spacing), origin_(origin), data_(std::move(data)) {
    for (int a = 0; a < 3; ++a)
        if (dims_[static_cast<std::size_t>(a)] < 2)
            throw std::invalid_argument("volume dims must all be >= 2");
    if (!(spacing_.minCoeff() > 0.0)) throw std::invalid_argument("voxel spacing must be positive");
    if (!origin_.allFinite()) throw std::invalid_argument("volume origin must be finite");
    const std::size_t expected = static_cast<std::size_t>(dims_[0]) *
                                 static_cast<std::size_t>(dims_[1]) *
                                 static_cast<std::size_t>(dims_[2]);
    if (data_.size() != expected)
        throw std::invalid_argument("volume data length " + std::to_string(data_.size()) +
                                    " does not match dims product " + std::to_string(expected));
    for (float v : data_)
        if (!std::isfinite(v)) throw std::invalid_argument("volume data must be finite");
}

float Volume::max_value() const { return *std::max_element(data_.begin(), data_.end()); }

Volume load_volume(const std::filesystem::path& path) {
    detail::RawFile file = detail::read_raw_file(path);
    return Volume(file.header.dims, file.header.spacing, file.header.origin,
                  std::move(file.data));
}

void save_volume(const Volume& vol, const std::filesystem::path& path) {
    detail::RawHeader header;
    header.dims = vol.dims();
    header.spacing = vol.spacing();
    header.origin = vol.origin();
    detail::write_raw_file(path, header, vol.data());
}

std::uint64_t data_checksum(const std::vector<float>& data) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data.data());
    const std::size_t n = data.size() * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

} // namespace ppcreg
