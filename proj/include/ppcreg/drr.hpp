#pragma once

#include "ppcreg/geometry.hpp"
#include "ppcreg/image.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

enum class IntensityMap { line_integral, exponential };

/// Rendering style: bone projection thresholds the integrand per sample so
/// that only high-attenuation material contributes; realistic integrates
/// everything.
struct RenderStyle {
    bool bone = false;
    double bone_threshold = 0; // mm^-1, samples below are zeroed
    IntensityMap intensity = IntensityMap::line_integral;
    double step_mm = 0; // quadrature step; must be > 0 when rendering

    static RenderStyle bone_style(double threshold, double step) {
        return {true, threshold, IntensityMap::line_integral, step};
    }
    static RenderStyle realistic(double step) {
        return {false, 0.0, IntensityMap::line_integral, step};
    }

    void validate() const;
};

/// 0.5 * min(spacing), the default quadrature step for a volume.
double default_step(const Volume& vol);

/// Composite midpoint quadrature of the (possibly thresholded) attenuation
/// along ray.origin + t * ray.direction over [t_entry, t_exit], in units of
/// optical depth. The ray is expressed in volume coordinates.
double line_integral(const Volume& vol, const Ray& ray, const RenderStyle& style, double t_entry,
                     double t_exit);

/// Casts one ray per detector pixel through the volume posed at T
/// (world = T * volume coordinates). Parallel over rows; output is
/// bit-identical for any thread count.
Image2D render(const Volume& vol, const ProjectionGeometry& geom, const RigidTransform& pose,
               const RenderStyle& style);

} // namespace ppcreg
