#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ppcreg/volume.hpp"

#include <json.hpp>

namespace ppcreg {

/// A single analytic primitive of a synthetic phantom.
struct Primitive {
    enum class Kind { sphere, box, cylinder };

    Kind kind = Kind::sphere;
    Eigen::Vector3d center = Eigen::Vector3d::Zero(); // mm
    double radius = 0;                                // sphere/cylinder, mm
    Eigen::Vector3d size = Eigen::Vector3d::Zero();   // box full edge lengths, mm
    double height = 0;                                // cylinder, mm
    int axis = 2;                                     // cylinder axis: 0=x 1=y 2=z
    double attenuation = 0;                           // mm^-1

    bool contains(const Eigen::Vector3d& p) const;
    Eigen::Vector3d bound_min() const;
    Eigen::Vector3d bound_max() const;
};

/// Recipe for a deterministic synthetic volume.
struct PhantomSpec {
    std::vector<Primitive> primitives;
    double background = 0; // mm^-1
    std::array<int, 3> dims{64, 64, 64};
    Eigen::Vector3d spacing = Eigen::Vector3d::Ones(); // mm
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();  // mm
    double noise_sigma = 0;                            // mm^-1
    std::uint64_t seed = 0;

    static PhantomSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    /// 128^3, 1 mm spacing, centered on the origin: five vertebra-like units,
    /// each a body box plus a posterior cylinder, over a soft-tissue background.
    static PhantomSpec vertebra_stack();

    /// Named presets ("vertebra-stack", ...); throws std::invalid_argument
    /// for unknown names.
    static PhantomSpec preset(const std::string& name);
};

/// Voxel value = background + sum of covering primitive attenuations +
/// seeded Gaussian noise. Deterministic for a fixed spec. Throws
/// std::invalid_argument if a primitive exceeds the volume bounds.
Volume make_phantom(const PhantomSpec& spec);

} // namespace ppcreg
