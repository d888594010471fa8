#include "ppcreg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ppcreg/errors.hpp"

namespace ppcreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

} // namespace

std::array<double, 16> RigidTransform::to_matrix4_row_major() const {
    std::array<double, 16> m{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[static_cast<std::size_t>(4 * r + c)] = rotation(r, c);
        m[static_cast<std::size_t>(4 * r + 3)] = translation(r);
    }
    m[15] = 1.0;
    return m;
}

RigidTransform RigidTransform::from_matrix4_row_major(const std::array<double, 16>& m) {
    RigidTransform t;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) t.rotation(r, c) = m[static_cast<std::size_t>(4 * r + c)];
        t.translation(r) = m[static_cast<std::size_t>(4 * r + 3)];
    }
    t.validate();
    return t;
}

void RigidTransform::validate() const {
    if (!rotation.allFinite() || !translation.allFinite())
        throw std::invalid_argument("rigid transform has non-finite entries");
    const double ortho =
        (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho >= 1e-9)
        throw std::invalid_argument("rotation is not orthonormal (max |R^T R - I| = " +
                                    std::to_string(ortho) + ")");
    if (std::abs(rotation.determinant() - 1.0) >= 1e-9)
        throw std::invalid_argument("rotation determinant is not +1");
}

void ProjectionGeometry::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("detector size must be positive");
    if (!(pixel_spacing.x() > 0) || !(pixel_spacing.y() > 0))
        throw std::invalid_argument("pixel spacing must be positive");
    if (std::abs(row_axis.norm() - 1.0) >= 1e-9 || std::abs(col_axis.norm() - 1.0) >= 1e-9)
        throw std::invalid_argument("detector axes must be unit length");
    if (std::abs(row_axis.dot(col_axis)) >= 1e-9)
        throw std::invalid_argument("detector axes must be orthogonal");
    const double off_plane = (source - detector_origin).dot(detector_normal());
    if (std::abs(off_plane) < 1e-9)
        throw std::invalid_argument("source lies on the detector plane");
}

RigidTransform exp_motion(const MotionVector& dv) {
    if (!dv.rotation.allFinite() || !dv.translation.allFinite())
        throw std::invalid_argument("motion vector has non-finite entries");

    const double theta = dv.rotation.norm();
    const double theta2 = theta * theta;
    // sin(t)/t and (1-cos(t))/t^2 with series fallbacks near zero.
    double a, b;
    if (theta < 1e-8) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    const Eigen::Matrix3d k = skew(dv.rotation);
    RigidTransform t;
    t.rotation = Eigen::Matrix3d::Identity() + a * k + b * (k * k);
    t.translation = dv.translation;
    return t;
}

MotionVector log_transform(const RigidTransform& t) {
    t.validate();
    const double cos_theta =
        std::clamp((t.rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (theta >= kPi - 1e-6)
        throw BranchSingularityError("rotation angle at the pi branch point of the log map");

    MotionVector dv;
    dv.translation = t.translation;
    const Eigen::Vector3d axis_raw(t.rotation(2, 1) - t.rotation(1, 2),
                                   t.rotation(0, 2) - t.rotation(2, 0),
                                   t.rotation(1, 0) - t.rotation(0, 1));
    if (theta < 1e-8) {
        // R - R^T ~ 2 sin(theta) [axis]x, and sin(theta)/theta ~ 1.
        dv.rotation = 0.5 * axis_raw;
    } else {
        dv.rotation = (theta / (2.0 * std::sin(theta))) * axis_raw;
    }
    return dv;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform t;
    t.rotation = a.rotation * b.rotation;
    t.translation = a.rotation * b.translation + a.translation;
    return t;
}

RigidTransform invert(const RigidTransform& t) {
    RigidTransform inv;
    inv.rotation = t.rotation.transpose();
    inv.translation = -(inv.rotation * t.translation);
    return inv;
}

RigidTransform relative_transform(const RigidTransform& t_i, const RigidTransform& t_j) {
    return compose(t_i, invert(t_j));
}

Eigen::Vector2d project(const Eigen::Vector3d& point, const ProjectionGeometry& geom) {
    const Eigen::Vector3d d = point - geom.source;
    const double d_norm = d.norm();
    if (d_norm < 1e-12) throw std::invalid_argument("cannot project a point at the source");

    const Eigen::Vector3d n = geom.detector_normal();
    const double denom = d.dot(n);
    if (std::abs(denom) < 1e-12 * d_norm)
        throw NoIntersectionError("ray is parallel to the detector plane");

    const double tt = (geom.detector_origin - geom.source).dot(n) / denom;
    const Eigen::Vector3d hit = geom.source + tt * d;
    const Eigen::Vector3d rel = hit - geom.detector_origin;
    return {rel.dot(geom.row_axis) / geom.pixel_spacing.x(),
            rel.dot(geom.col_axis) / geom.pixel_spacing.y()};
}

Ray backproject_ray(const Eigen::Vector2d& pixel, const ProjectionGeometry& geom) {
    if (!pixel.allFinite()) throw std::invalid_argument("pixel coordinates must be finite");
    Ray ray;
    ray.origin = geom.source;
    ray.direction = (geom.detector_point(pixel) - geom.source).normalized();
    return ray;
}

} // namespace ppcreg
