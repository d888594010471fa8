#pragma once

#include <Eigen/Dense>
#include <array>

namespace ppcreg {

/// Rigid SE(3) pose mapping volume coordinates into the world/C-arm frame
/// (column-vector convention: x_world = R * x_vol + t).
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }

    Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation * x + translation; }

    /// Row-major 4x4 homogeneous matrix, the manifest serialization form.
    std::array<double, 16> to_matrix4_row_major() const;
    static RigidTransform from_matrix4_row_major(const std::array<double, 16>& m);

    /// Throws std::invalid_argument unless the rotation is orthonormal with
    /// det +1 within 1e-9 and all entries are finite.
    void validate() const;
};

/// 6-dof motion increment: axis-angle rotation (radians) + translation (mm).
struct MotionVector {
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Matrix<double, 6, 1> to_vector() const {
        Eigen::Matrix<double, 6, 1> v;
        v << rotation, translation;
        return v;
    }
    static MotionVector from_vector(const Eigen::Matrix<double, 6, 1>& v) {
        return {v.head<3>(), v.tail<3>()};
    }
};

/// Cone-beam source + detector frame. Pixel (u,v) has its center at
/// detector_origin + u * pixel_spacing.x * row_axis + v * pixel_spacing.y * col_axis,
/// i.e. the detector origin is the center of pixel (0,0).
struct ProjectionGeometry {
    Eigen::Vector3d source = Eigen::Vector3d::Zero();
    Eigen::Vector3d detector_origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d row_axis = Eigen::Vector3d::UnitX();
    Eigen::Vector3d col_axis = Eigen::Vector3d::UnitY();
    Eigen::Vector2d pixel_spacing = Eigen::Vector2d::Ones(); // mm/px
    int width = 0;                                           // px
    int height = 0;                                          // px

    Eigen::Vector3d detector_normal() const { return row_axis.cross(col_axis); }

    /// 3D position of the (continuous) pixel coordinate.
    Eigen::Vector3d detector_point(const Eigen::Vector2d& pixel) const {
        return detector_origin + pixel.x() * pixel_spacing.x() * row_axis +
               pixel.y() * pixel_spacing.y() * col_axis;
    }

    /// Axis unit-length/orthogonality, spacing > 0, source off the detector plane.
    void validate() const;
};

struct Ray {
    Eigen::Vector3d origin;
    Eigen::Vector3d direction; // unit
};

/// Rodrigues exponential of the axis-angle part; the translation part is
/// copied verbatim (no SE(3) V-matrix coupling).
RigidTransform exp_motion(const MotionVector& dv);

/// Inverse of exp_motion. Throws BranchSingularityError for rotation angles
/// within 1e-6 of pi.
MotionVector log_transform(const RigidTransform& t);

/// Matrix product a*b: applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform invert(const RigidTransform& t);

/// The transform t_rel with compose(t_rel, t_j) == t_i.
RigidTransform relative_transform(const RigidTransform& t_i, const RigidTransform& t_j);

/// Continuous pixel coordinates where the line through source and point
/// meets the detector plane. Throws NoIntersectionError when the line is
/// parallel to the plane and std::invalid_argument for a point at the source.
Eigen::Vector2d project(const Eigen::Vector3d& point, const ProjectionGeometry& geom);

/// Ray from the source through the detector point at `pixel`.
Ray backproject_ray(const Eigen::Vector2d& pixel, const ProjectionGeometry& geom);

} // namespace ppcreg
