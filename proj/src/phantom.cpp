#include "ppcreg/phantom.hpp"

#include <cmath>
#include <stdexcept>

#include "ppcreg/rng.hpp"

namespace ppcreg {

bool Primitive::contains(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d d = p - center;
    switch (kind) {
    case Kind::sphere:
        return d.squaredNorm() <= radius * radius;
    case Kind::box:
        return std::abs(d.x()) <= 0.5 * size.x() && std::abs(d.y()) <= 0.5 * size.y() &&
               std::abs(d.z()) <= 0.5 * size.z();
    case Kind::cylinder: {
        const int a = axis, u = (axis + 1) % 3, v = (axis + 2) % 3;
        return std::abs(d[a]) <= 0.5 * height && d[u] * d[u] + d[v] * d[v] <= radius * radius;
    }
    }
    return false;
}

Eigen::Vector3d Primitive::bound_min() const {
    switch (kind) {
    case Kind::sphere:
        return center.array() - radius;
    case Kind::box:
        return center - 0.5 * size;
    case Kind::cylinder: {
        Eigen::Vector3d half(radius, radius, radius);
        half[axis] = 0.5 * height;
        return center - half;
    }
    }
    return center;
}

Eigen::Vector3d Primitive::bound_max() const {
    return center + (center - bound_min());
}

namespace {

Primitive primitive_from_json(const nlohmann::json& j) {
    Primitive p;
    const std::string type = j.at("type").get<std::string>();
    if (type == "sphere")
        p.kind = Primitive::Kind::sphere;
    else if (type == "box")
        p.kind = Primitive::Kind::box;
    else if (type == "cylinder")
        p.kind = Primitive::Kind::cylinder;
    else
        throw std::invalid_argument("unknown primitive type '" + type + "'");

    const auto c = j.at("center");
    p.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    p.attenuation = j.at("attenuation").get<double>();

    if (p.kind == Primitive::Kind::sphere) {
        p.radius = j.at("radius").get<double>();
    } else if (p.kind == Primitive::Kind::box) {
        const auto s = j.at("size");
        p.size = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
    } else {
        p.radius = j.at("radius").get<double>();
        p.height = j.at("height").get<double>();
        const std::string ax = j.value("axis", "z");
        if (ax == "x")
            p.axis = 0;
        else if (ax == "y")
            p.axis = 1;
        else if (ax == "z")
            p.axis = 2;
        else
            throw std::invalid_argument("cylinder axis must be x, y or z");
    }
    return p;
}

nlohmann::json primitive_to_json(const Primitive& p) {
    nlohmann::json j;
    j["center"] = {p.center.x(), p.center.y(), p.center.z()};
    j["attenuation"] = p.attenuation;
    switch (p.kind) {
    case Primitive::Kind::sphere:
        j["type"] = "sphere";
        j["radius"] = p.radius;
        break;
    case Primitive::Kind::box:
        j["type"] = "box";
        j["size"] = {p.size.x(), p.size.y(), p.size.z()};
        break;
    case Primitive::Kind::cylinder:
        j["type"] = "cylinder";
        j["radius"] = p.radius;
        j["height"] = p.height;
        j["axis"] = p.axis == 0 ? "x" : (p.axis == 1 ? "y" : "z");
        break;
    }
    return j;
}

} // namespace

PhantomSpec PhantomSpec::from_json(const nlohmann::json& j) {
    PhantomSpec spec;
    for (const auto& pj : j.at("primitives")) spec.primitives.push_back(primitive_from_json(pj));
    spec.background = j.value("background", 0.0);
    const auto d = j.at("dims");
    spec.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    if (j.contains("spacing")) {
        const auto s = j.at("spacing");
        spec.spacing = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
    }
    if (j.contains("origin")) {
        const auto o = j.at("origin");
        spec.origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    }
    spec.noise_sigma = j.value("noise", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    return spec;
}

nlohmann::json PhantomSpec::to_json() const {
    nlohmann::json j;
    j["dims"] = {dims[0], dims[1], dims[2]};
    j["spacing"] = {spacing.x(), spacing.y(), spacing.z()};
    j["origin"] = {origin.x(), origin.y(), origin.z()};
    j["background"] = background;
    j["noise"] = noise_sigma;
    j["seed"] = seed;
    j["primitives"] = nlohmann::json::array();
    for (const auto& p : primitives) j["primitives"].push_back(primitive_to_json(p));
    return j;
}

PhantomSpec PhantomSpec::vertebra_stack() {
    PhantomSpec spec;
    spec.dims = {128, 128, 128};
    spec.spacing = Eigen::Vector3d::Ones();
    spec.origin = Eigen::Vector3d(-64, -64, -64);
    spec.background = 0.005;
    spec.noise_sigma = 0.0004;
    spec.seed = 42;

    // Five vertebra-like units stacked along z, growing caudally like real
    // vertebrae. Per-level size, spacing and attenuation progressions plus
    // transverse processes keep every level visually unique, so contour
    // matching cannot alias one level onto the next. The bodies drift in x
    // and the posterior elements sit in +y, so AP and LAT silhouettes differ.
    const double z_centers[5] = {-45.0, -24.0, -2.0, 21.0, 45.0};
    for (int k = 0; k < 5; ++k) {
        const double grow = static_cast<double>(k);
        const double xc = -8.0 + 1.5 * grow;
        const double z = z_centers[k];

        Primitive body;
        body.kind = Primitive::Kind::box;
        body.center = {xc, -4.0, z};
        body.size = {30.0 + 3.0 * grow, 22.0 + 2.0 * grow, 14.0 + 1.0 * grow};
        body.attenuation = 0.036 + 0.002 * grow;
        spec.primitives.push_back(body);

        Primitive posterior;
        posterior.kind = Primitive::Kind::cylinder;
        posterior.center = {xc, 13.0 + grow, z};
        posterior.radius = 5.0 + 0.8 * grow;
        posterior.height = 12.0 + grow;
        posterior.axis = 2;
        posterior.attenuation = 0.030;
        spec.primitives.push_back(posterior);

        // Transverse processes: x-axis cylinders poking out of both sides.
        const double half_w = 0.5 * (30.0 + 3.0 * grow);
        for (double side : {-1.0, 1.0}) {
            Primitive process;
            process.kind = Primitive::Kind::cylinder;
            process.center = {xc + side * (half_w + 4.0), 0.0, z};
            process.radius = 2.5 + 0.4 * grow;
            process.height = 16.0 + 2.0 * grow;
            process.axis = 0;
            process.attenuation = 0.034;
            spec.primitives.push_back(process);
        }
    }
    return spec;
}

PhantomSpec PhantomSpec::preset(const std::string& name) {
    if (name == "vertebra-stack") return vertebra_stack();
    throw std::invalid_argument("unknown phantom preset '" + name + "'");
}

Volume make_phantom(const PhantomSpec& spec) {
    for (std::size_t p = 0; p < spec.primitives.size(); ++p) {
        if (spec.primitives[p].attenuation < 0)
            throw std::invalid_argument("primitive " + std::to_string(p) +
                                        " has negative attenuation");
        const Eigen::Vector3d lo = spec.primitives[p].bound_min();
        const Eigen::Vector3d hi = spec.primitives[p].bound_max();
        const Eigen::Vector3d vol_lo = spec.origin;
        const Eigen::Vector3d vol_hi =
            spec.origin + Eigen::Vector3d(spec.dims[0] * spec.spacing.x(),
                                          spec.dims[1] * spec.spacing.y(),
                                          spec.dims[2] * spec.spacing.z());
        if ((lo.array() < vol_lo.array()).any() || (hi.array() > vol_hi.array()).any())
            throw std::invalid_argument("primitive " + std::to_string(p) +
                                        " extends outside the volume bounds");
    }

    const std::size_t count = static_cast<std::size_t>(spec.dims[0]) *
                              static_cast<std::size_t>(spec.dims[1]) *
                              static_cast<std::size_t>(spec.dims[2]);
    std::vector<float> data(count);
    Rng rng(spec.seed);

    std::size_t idx = 0;
    for (int k = 0; k < spec.dims[2]; ++k) {
        for (int j = 0; j < spec.dims[1]; ++j) {
            for (int i = 0; i < spec.dims[0]; ++i, ++idx) {
                const Eigen::Vector3d c =
                    spec.origin + Eigen::Vector3d((i + 0.5) * spec.spacing.x(),
                                                  (j + 0.5) * spec.spacing.y(),
                                                  (k + 0.5) * spec.spacing.z());
                double v = spec.background;
                for (const auto& prim : spec.primitives)
                    if (prim.contains(c)) v += prim.attenuation;
                if (spec.noise_sigma > 0) v += spec.noise_sigma * normal01(rng);
                data[idx] = static_cast<float>(v);
            }
        }
    }
    return Volume(spec.dims, spec.spacing, spec.origin, std::move(data));
}

} // namespace ppcreg
