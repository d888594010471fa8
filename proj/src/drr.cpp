#include "ppcreg/drr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ppcreg/parallel.hpp"

namespace ppcreg {

void RenderStyle::validate() const {
    if (!(step_mm > 0)) throw std::invalid_argument("render step length must be positive");
    if (bone_threshold < 0) throw std::invalid_argument("bone threshold must be >= 0");
}

double default_step(const Volume& vol) { return 0.5 * vol.spacing().minCoeff(); }

namespace {

/// Slab clip of a ray against the volume's physical bounding box.
/// Returns false on a miss.
bool clip_ray(const Volume& vol, const Ray& ray, double& t0, double& t1) {
    const Eigen::Vector3d lo = vol.bound_min();
    const Eigen::Vector3d hi = vol.bound_max();
    t0 = 0.0;
    t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a], d = ray.direction[a];
        if (std::abs(d) < 1e-14) {
            if (o < lo[a] || o > hi[a]) return false;
            continue;
        }
        double ta = (lo[a] - o) / d;
        double tb = (hi[a] - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1) return false;
    }
    return true;
}

} // namespace

double line_integral(const Volume& vol, const Ray& ray, const RenderStyle& style, double t_entry,
                     double t_exit) {
    style.validate();
    if (t_exit < t_entry) throw std::invalid_argument("t_exit must be >= t_entry");
    const double length = t_exit - t_entry;
    if (length <= 0.0) return 0.0;

    const int n = std::max(1, static_cast<int>(std::ceil(length / style.step_mm)));
    const double h = length / n;
    const double threshold = style.bone ? style.bone_threshold : 0.0;

    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double t = t_entry + (k + 0.5) * h;
        double s = sample_trilinear(vol, ray.origin + t * ray.direction);
        if (style.bone && s < threshold) s = 0.0;
        sum += s;
    }
    return sum * h;
}

Image2D render(const Volume& vol, const ProjectionGeometry& geom, const RigidTransform& pose,
               const RenderStyle& style) {
    style.validate();
    geom.validate();
    pose.validate();

    Image2D img = Image2D::zeros(geom.width, geom.height, geom.pixel_spacing);
    img.style = style.bone ? ImageStyle::bone : ImageStyle::realistic;

    // Rays are cast in world coordinates and pulled back into the volume
    // frame, which is equivalent to moving the volume by `pose`.
    const RigidTransform inv = invert(pose);
    const Eigen::Vector3d origin_vol = inv.apply(geom.source);
    const bool exponential = style.intensity == IntensityMap::exponential;

    parallel_for(static_cast<std::size_t>(geom.height), [&](std::size_t v_begin,
                                                            std::size_t v_end) {
        for (std::size_t v = v_begin; v < v_end; ++v) {
            float* row = &img.at(0, static_cast<int>(v));
            for (int u = 0; u < geom.width; ++u) {
                const Eigen::Vector3d pixel =
                    geom.detector_point({static_cast<double>(u), static_cast<double>(v)});
                Ray ray;
                ray.origin = origin_vol;
                ray.direction = (inv.rotation * (pixel - geom.source)).normalized();

                double t0, t1;
                double integral = 0.0;
                if (clip_ray(vol, ray, t0, t1))
                    integral = line_integral(vol, ray, style, t0, t1);
                row[u] = static_cast<float>(exponential ? std::exp(-integral) : integral);
            }
        }
    });
    return img;
}

} // namespace ppcreg
