#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <vector>

#include "ppcreg/contour.hpp"
#include "ppcreg/geometry.hpp"
#include "ppcreg/image.hpp"

namespace ppcreg {

/// 1D NCC search parameters. The search runs along the projected gradient
/// direction only, which is the displacement component the local contour can
/// actually observe.
struct CorrespondenceParams {
    int patch_px = 11;           // odd patch side
    double search_range_px = 30; // candidate offsets in [-range, +range]
    double step_px = 0.5;
    double min_score = 0.3;
    // Repetitive structures (stacked vertebrae) produce near-identical
    // candidate peaks one period apart; a match whose best peak beats every
    // candidate farther than ambiguity_radius_px by less than
    // ambiguity_margin is dropped as ambiguous.
    double ambiguity_margin = 0.05;
    double ambiguity_radius_px = 4.0;

    void validate() const;
};

/// One matched contour point: projected position p in the moving image, the
/// best match p' in the fixed image, and the plane normal used by the motion
/// solver.
struct Correspondence {
    std::size_t point_index = 0;  // into the selected ContourPointSet
    Eigen::Vector2d p;            // px
    Eigen::Vector2d p_prime;      // px
    Eigen::Vector2d dp;           // p' - p, px
    Eigen::Vector3d normal;       // unit, world frame
    double weight = 0;            // clamped NCC score, [0, 1]
    double score = 0;             // raw NCC, [-1, 1]
};

/// Matches each selected contour point of the moving image against the fixed
/// image by zero-normalized cross-correlation along the projected gradient.
/// Points whose patch leaves the image, whose patch has no texture, or whose
/// best score is below min_score are skipped. Throws NoCorrespondenceError
/// when nothing survives.
std::vector<Correspondence> find_correspondences(const Image2D& moving, const Image2D& fixed,
                                                 const ContourPointSet& set,
                                                 const ProjectionGeometry& geom,
                                                 const RigidTransform& pose,
                                                 const CorrespondenceParams& params);

/// Unit normal of the plane through the X-ray source and the detector line
/// at p' = project(pose*w) + dp perpendicular to the projected gradient of g.
/// Sign convention: normal points from the plane toward the current point
/// pose*w (non-negative signed distance). Returns nullopt when the projected
/// gradient degenerates.
std::optional<Eigen::Vector3d> compute_plane_normal(const Eigen::Vector3d& w,
                                                    const Eigen::Vector3d& g,
                                                    const Eigen::Vector2d& dp,
                                                    const ProjectionGeometry& geom,
                                                    const RigidTransform& pose);

/// Debug overlay export: p, p', score per row.
void save_correspondences_csv(const std::vector<Correspondence>& corrs,
                              const std::filesystem::path& path);

} // namespace ppcreg
