#include "ppcreg/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ppcreg/errors.hpp"
#include "ppcreg/parallel.hpp"

namespace ppcreg {

void CorrespondenceParams::validate() const {
    if (patch_px < 3 || patch_px % 2 == 0)
        throw std::invalid_argument("patch size must be odd and >= 3");
    if (!(search_range_px > 0)) throw std::invalid_argument("search range must be positive");
    if (!(step_px > 0)) throw std::invalid_argument("search step must be positive");
    if (min_score < -1 || min_score > 1)
        throw std::invalid_argument("min_score must be within [-1, 1]");
    if (ambiguity_margin < 0) throw std::invalid_argument("ambiguity margin must be >= 0");
    if (!(ambiguity_radius_px > 0))
        throw std::invalid_argument("ambiguity radius must be positive");
}

namespace {

constexpr double kVarEps = 1e-20;

/// Patch of integer-lattice offsets around a continuous center. All samples
/// share one fractional part, so the four bilinear weights are constant.
bool extract_patch(const Image2D& img, double cu, double cv, int patch,
                   std::vector<double>& out) {
    const int half = patch / 2;
    const double u_lo = cu - half, v_lo = cv - half;
    const int u0 = static_cast<int>(std::floor(u_lo));
    const int v0 = static_cast<int>(std::floor(v_lo));
    if (u0 < 0 || v0 < 0 || u0 + patch > img.width - 1 || v0 + patch > img.height - 1)
        return false;

    const double tu = u_lo - u0, tv = v_lo - v0;
    const double w00 = (1 - tu) * (1 - tv), w10 = tu * (1 - tv);
    const double w01 = (1 - tu) * tv, w11 = tu * tv;
    const float* d = img.data.data();
    const std::size_t stride = static_cast<std::size_t>(img.width);

    out.resize(static_cast<std::size_t>(patch) * static_cast<std::size_t>(patch));
    std::size_t o = 0;
    for (int j = 0; j < patch; ++j) {
        const float* base = d + static_cast<std::size_t>(u0) +
                            (static_cast<std::size_t>(v0) + static_cast<std::size_t>(j)) * stride;
        for (int i = 0; i < patch; ++i, ++o)
            out[o] = w00 * base[i] + w10 * base[i + 1] + w01 * base[i + stride] +
                     w11 * base[i + stride + 1];
    }
    return true;
}

struct CenteredPatch {
    std::vector<double> centered; // value - mean
    double norm = 0;              // sqrt(sum of squares)
};

bool center_patch(const std::vector<double>& raw, CenteredPatch& out) {
    const std::size_t n = raw.size();
    double mean = 0;
    for (double v : raw) mean += v;
    mean /= static_cast<double>(n);
    out.centered.resize(n);
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out.centered[i] = raw[i] - mean;
        ss += out.centered[i] * out.centered[i];
    }
    if (ss < kVarEps) return false;
    out.norm = std::sqrt(ss);
    return true;
}

/// NCC of a centered reference patch against a raw candidate patch.
/// Returns false when the candidate has no texture.
bool ncc_score(const CenteredPatch& ref, const std::vector<double>& cand, double& score) {
    const std::size_t n = cand.size();
    double sum = 0;
    for (double v : cand) sum += v;
    const double mean = sum / static_cast<double>(n);
    double cross = 0, ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = cand[i] - mean;
        cross += ref.centered[i] * c;
        ss += c * c;
    }
    if (ss < kVarEps) return false;
    score = cross / (ref.norm * std::sqrt(ss));
    return true;
}

} // namespace

std::optional<Eigen::Vector3d> compute_plane_normal(const Eigen::Vector3d& w,
                                                    const Eigen::Vector3d& g,
                                                    const Eigen::Vector2d& dp,
                                                    const ProjectionGeometry& geom,
                                                    const RigidTransform& pose) {
    const Eigen::Vector3d w_world = pose.apply(w);
    const Eigen::Vector3d g_world = pose.rotation * g;
    const double g_norm = g_world.norm();
    if (g_norm < 1e-12) return std::nullopt;

    Eigen::Vector2d p, p_shift;
    try {
        p = project(w_world, geom);
        p_shift = project(w_world + (0.5 / g_norm) * g_world, geom);
    } catch (const NoIntersectionError&) {
        return std::nullopt;
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }

    const Eigen::Vector2d grad_px = p_shift - p;
    // Physical (mm) direction of the projected gradient on the detector.
    const Eigen::Vector2d grad_mm(grad_px.x() * geom.pixel_spacing.x(),
                                  grad_px.y() * geom.pixel_spacing.y());
    const double grad_mm_norm = grad_mm.norm();
    if (grad_mm_norm < 1e-9) return std::nullopt;

    // Detector tangent line through p': perpendicular to the projected
    // gradient, in the physical detector plane.
    const Eigen::Vector2d tangent_mm(-grad_mm.y() / grad_mm_norm, grad_mm.x() / grad_mm_norm);
    const Eigen::Vector3d t3d = tangent_mm.x() * geom.row_axis + tangent_mm.y() * geom.col_axis;

    const Eigen::Vector2d p_prime = p + dp;
    const Eigen::Vector3d ray_dir = (geom.detector_point(p_prime) - geom.source).normalized();

    Eigen::Vector3d n = ray_dir.cross(t3d);
    const double n_norm = n.norm();
    if (n_norm < 1e-12) return std::nullopt;
    n /= n_norm;
    if (n.dot(w_world - geom.source) < 0) n = -n;
    return n;
}

std::vector<Correspondence> find_correspondences(const Image2D& moving, const Image2D& fixed,
                                                 const ContourPointSet& set,
                                                 const ProjectionGeometry& geom,
                                                 const RigidTransform& pose,
                                                 const CorrespondenceParams& params) {
    params.validate();
    if (moving.width != fixed.width || moving.height != fixed.height)
        throw std::invalid_argument("moving and fixed images must share dimensions");
    pose.validate();

    const int n_steps = static_cast<int>(std::floor(params.search_range_px / params.step_px));
    const std::size_t n_points = set.points.size();
    std::vector<std::optional<Correspondence>> results(n_points);

    parallel_for(n_points, [&](std::size_t begin, std::size_t end) {
        std::vector<double> raw_patch;
        std::vector<double> cand_patch;
        CenteredPatch ref;
        std::vector<double> scores(static_cast<std::size_t>(2 * n_steps + 1));

        for (std::size_t i = begin; i < end; ++i) {
            const auto& pt = set.points[i];
            const Eigen::Vector3d w_world = pose.apply(pt.position);
            const Eigen::Vector3d g_world = pose.rotation * pt.gradient;
            const double g_norm = g_world.norm();
            if (g_norm < 1e-12) continue;

            Eigen::Vector2d p, p_shift;
            try {
                p = project(w_world, geom);
                p_shift = project(w_world + (0.5 / g_norm) * g_world, geom);
            } catch (const NoIntersectionError&) {
                continue;
            } catch (const std::invalid_argument&) {
                continue;
            }
            Eigen::Vector2d dir = p_shift - p;
            const double dir_norm = dir.norm();
            if (dir_norm < 1e-9) continue;
            dir /= dir_norm;

            if (!extract_patch(moving, p.x(), p.y(), params.patch_px, raw_patch)) continue;
            if (!center_patch(raw_patch, ref)) continue; // textureless reference

            int best_k = 0;
            double best_score = -2.0;
            for (int k = -n_steps; k <= n_steps; ++k) {
                const Eigen::Vector2d q = p + (k * params.step_px) * dir;
                double score = -2.0;
                if (extract_patch(fixed, q.x(), q.y(), params.patch_px, cand_patch))
                    if (!ncc_score(ref, cand_patch, score)) score = -2.0;
                scores[static_cast<std::size_t>(k + n_steps)] = score;
                if (score > best_score) {
                    best_score = score;
                    best_k = k;
                }
            }
            if (best_score < params.min_score) continue;

            // Ambiguity rejection: a distant runner-up nearly as good as the
            // best peak means the edge repeats along the search line.
            if (params.ambiguity_margin > 0) {
                double runner_up = -2.0;
                for (int k = -n_steps; k <= n_steps; ++k) {
                    if (std::abs(k - best_k) * params.step_px < params.ambiguity_radius_px)
                        continue;
                    runner_up = std::max(runner_up, scores[static_cast<std::size_t>(k + n_steps)]);
                }
                if (runner_up > -2.0 && best_score - runner_up < params.ambiguity_margin)
                    continue;
            }

            // Parabolic sub-step refinement when both neighbors are valid.
            double offset = static_cast<double>(best_k);
            const std::size_t bi = static_cast<std::size_t>(best_k + n_steps);
            if (best_k > -n_steps && best_k < n_steps && scores[bi - 1] > -2.0 &&
                scores[bi + 1] > -2.0) {
                const double denom = scores[bi - 1] - 2.0 * scores[bi] + scores[bi + 1];
                if (denom < -1e-12) {
                    double delta = 0.5 * (scores[bi - 1] - scores[bi + 1]) / denom;
                    delta = std::clamp(delta, -1.0, 1.0);
                    offset += delta;
                }
            }

            Correspondence c;
            c.point_index = i;
            c.p = p;
            c.p_prime = p + (offset * params.step_px) * dir;
            c.dp = c.p_prime - c.p; // exact by construction

            c.score = best_score;
            c.weight = std::clamp(best_score, 0.0, 1.0);
            const auto normal = compute_plane_normal(pt.position, pt.gradient, c.dp, geom, pose);
            if (!normal) continue;
            c.normal = *normal;
            results[i] = c;
        }
    });

    std::vector<Correspondence> out;
    out.reserve(n_points);
    for (auto& r : results)
        if (r) out.push_back(*r);
    if (out.empty())
        throw NoCorrespondenceError("no contour point produced a usable correspondence");
    return out;
}

void save_correspondences_csv(const std::vector<Correspondence>& corrs,
                              const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << "index,p_u,p_v,pp_u,pp_v,score,weight\n";
    char buf[256];
    for (const auto& c : corrs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", c.point_index,
                      c.p.x(), c.p.y(), c.p_prime.x(), c.p_prime.y(), c.score, c.weight);
        out << buf;
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

} // namespace ppcreg
