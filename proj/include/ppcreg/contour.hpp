#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ppcreg/geometry.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

struct ContourPoint {
    Eigen::Vector3d position; // mm, volume frame
    Eigen::Vector3d gradient; // attenuation gradient, mm^-1 per mm
};

/// 3D surface points with gradients, extracted from a volume.
struct ContourPointSet {
    std::vector<ContourPoint> points;
    std::string volume_id;
};

/// 3D Canny edge detection: Gaussian smoothing at physical scale sigma,
/// central-difference gradients, non-maximum suppression along the quantized
/// gradient direction (13 axis/diagonal directions), hysteresis on gradient
/// magnitude. Returns surviving voxel centers with their unsuppressed
/// gradient vectors.
ContourPointSet canny3d(const Volume& vol, double sigma_mm, double low, double high);

/// Keeps points whose world-frame gradient is within angle_tol of
/// perpendicular to the viewing ray through the point, then uniformly
/// subsamples to at most max_points (seeded). Throws
/// InsufficientContourError when fewer than 6 points survive.
ContourPointSet select_apparent_contour(const ContourPointSet& set,
                                        const ProjectionGeometry& geom,
                                        const RigidTransform& pose, double angle_tol_deg,
                                        std::size_t max_points,
                                        std::uint64_t seed = 0x5eedu);

/// CSV (x,y,z,gx,gy,gz) serialization, full precision.
void save_contours_csv(const ContourPointSet& set, const std::filesystem::path& path);
ContourPointSet load_contours_csv(const std::filesystem::path& path);

} // namespace ppcreg
