#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ppcreg {

/// 3D attenuation grid (mm^-1) with physical spacing and origin. Data is
/// stored x-fastest; the center of voxel (i,j,k) sits at
/// origin + (i+0.5, j+0.5, k+0.5) * spacing. Immutable after construction.
class Volume {
public:
    Volume(std::array<int, 3> dims, const Eigen::Vector3d& spacing,
           const Eigen::Vector3d& origin, std::vector<float> data);

    int nx() const { return dims_[0]; }
    int ny() const { return dims_[1]; }
    int nz() const { return dims_[2]; }
    std::array<int, 3> dims() const { return dims_; }
    const Eigen::Vector3d& spacing() const { return spacing_; }
    const Eigen::Vector3d& origin() const { return origin_; }
    std::size_t size() const { return data_.size(); }
    const std::vector<float>& data() const { return data_; }

    float at(int i, int j, int k) const {
        return data_[static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(dims_[0]) *
                         (static_cast<std::size_t>(j) +
                          static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k))];
    }

    Eigen::Vector3d voxel_center(int i, int j, int k) const {
        return origin_ + Eigen::Vector3d((i + 0.5) * spacing_.x(), (j + 0.5) * spacing_.y(),
                                         (k + 0.5) * spacing_.z());
    }

    /// Physical bounding box [origin, origin + dims * spacing).
    Eigen::Vector3d bound_min() const { return origin_; }
    Eigen::Vector3d bound_max() const {
        return origin_ + Eigen::Vector3d(dims_[0] * spacing_.x(), dims_[1] * spacing_.y(),
                                         dims_[2] * spacing_.z());
    }

    float max_value() const;

private:
    std::array<int, 3> dims_;
    Eigen::Vector3d spacing_;
    Eigen::Vector3d origin_;
    std::vector<float> data_;
};

/// Trilinear interpolation at a physical position. Voxels outside the grid
/// contribute 0 (air), so the field fades to zero across the half-voxel band
/// at the boundary and is identically 0 farther out.
inline double sample_trilinear(const Volume& vol, const Eigen::Vector3d& pos) {
    const double fx = (pos.x() - vol.origin().x()) / vol.spacing().x() - 0.5;
    const double fy = (pos.y() - vol.origin().y()) / vol.spacing().y() - 0.5;
    const double fz = (pos.z() - vol.origin().z()) / vol.spacing().z() - 0.5;

    const int nx = vol.nx(), ny = vol.ny(), nz = vol.nz();
    if (fx <= -1.0 || fy <= -1.0 || fz <= -1.0 || fx >= nx || fy >= ny || fz >= nz) return 0.0;

    const double flx = std::floor(fx), fly = std::floor(fy), flz = std::floor(fz);
    const int i0 = static_cast<int>(flx), j0 = static_cast<int>(fly), k0 = static_cast<int>(flz);
    const double tx = fx - flx, ty = fy - fly, tz = fz - flz;

    const float* d = vol.data().data();
    const std::size_t sy = static_cast<std::size_t>(nx),
                      sz = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);

    double c000, c100, c010, c110, c001, c101, c011, c111;
    if (i0 >= 0 && j0 >= 0 && k0 >= 0 && i0 + 1 < nx && j0 + 1 < ny && k0 + 1 < nz) {
        // Interior fast path: unchecked 2x2x2 gather.
        const float* base = d + static_cast<std::size_t>(i0) + static_cast<std::size_t>(j0) * sy +
                            static_cast<std::size_t>(k0) * sz;
        c000 = base[0];
        c100 = base[1];
        c010 = base[sy];
        c110 = base[sy + 1];
        c001 = base[sz];
        c101 = base[sz + 1];
        c011 = base[sz + sy];
        c111 = base[sz + sy + 1];
    } else {
        auto fetch = [&](int i, int j, int k) -> double {
            if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return 0.0;
            return d[static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * sy +
                     static_cast<std::size_t>(k) * sz];
        };
        c000 = fetch(i0, j0, k0);
        c100 = fetch(i0 + 1, j0, k0);
        c010 = fetch(i0, j0 + 1, k0);
        c110 = fetch(i0 + 1, j0 + 1, k0);
        c001 = fetch(i0, j0, k0 + 1);
        c101 = fetch(i0 + 1, j0, k0 + 1);
        c011 = fetch(i0, j0 + 1, k0 + 1);
        c111 = fetch(i0 + 1, j0 + 1, k0 + 1);
    }

    const double c00 = c000 + (c100 - c000) * tx;
    const double c10 = c010 + (c110 - c010) * tx;
    const double c01 = c001 + (c101 - c001) * tx;
    const double c11 = c011 + (c111 - c011) * tx;
    const double c0 = c00 + (c10 - c00) * ty;
    const double c1 = c01 + (c11 - c01) * ty;
    return c0 + (c1 - c0) * tz;
}

/// Header + raw little-endian float32 format (see README). Round-trips
/// dims/spacing/origin/data bit-exactly. Throws FormatError on malformed
/// input, reporting the byte offset.
Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& vol, const std::filesystem::path& path);

/// FNV-1a 64 over the raw float data bytes; the volume identity used by the
/// phantom CLI and the committed reference checksums.
std::uint64_t data_checksum(const std::vector<float>& data);

} // namespace ppcreg
