#include "ppcreg/ppc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ppcreg/errors.hpp"
#include "ppcreg/rng.hpp"

namespace ppcreg {

PPCSystem assemble(const std::vector<Correspondence>& corrs, const ContourPointSet& set,
                   const RigidTransform& t_current, const ProjectionGeometry& geom) {
    if (corrs.size() < 6)
        throw InsufficientConstraintsError("need at least 6 correspondences, have " +
                                           std::to_string(corrs.size()));

    const Eigen::Index n = static_cast<Eigen::Index>(corrs.size());
    PPCSystem sys;
    sys.A.resize(n, 6);
    sys.b.resize(n);
    sys.weights.resize(n);

    for (Eigen::Index r = 0; r < n; ++r) {
        const Correspondence& c = corrs[static_cast<std::size_t>(r)];
        const Eigen::Vector3d w = t_current.apply(set.points[c.point_index].position);
        const Eigen::Vector3d& nrm = c.normal;
        sys.A.block<1, 3>(r, 0) = nrm.cross(w).transpose();
        sys.A.block<1, 3>(r, 3) = -nrm.transpose();
        // Signed point-to-plane distance; the source lies on every plane.
        sys.b(r) = nrm.dot(w - geom.source);
        sys.weights(r) = c.weight;
    }

    if (!sys.A.allFinite() || !sys.b.allFinite())
        throw std::invalid_argument("constraint system has non-finite entries");
    return sys;
}

SolveResult solve(const PPCSystem& system, double relative_truncation) {
    const Eigen::Index n = system.A.rows();
    if (n < 6) throw InsufficientConstraintsError("system has fewer than 6 rows");
    if ((system.weights.array() < 0).any())
        throw std::invalid_argument("weights must be non-negative");
    if (relative_truncation < 0 || relative_truncation >= 1)
        throw std::invalid_argument("relative_truncation must lie in [0, 1)");

    const Eigen::VectorXd sqw = system.weights.array().sqrt();
    const Eigen::MatrixXd wa = sqw.asDiagonal() * system.A;
    const Eigen::VectorXd wb = sqw.asDiagonal() * system.b;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(wa, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sigma = svd.singularValues();
    const double smax = sigma(0), smin = sigma(5);
    // Condition of A^T W A is the squared condition of W^1/2 A.
    const double condition =
        smin > 0 ? (smax / smin) * (smax / smin) : std::numeric_limits<double>::infinity();
    if (!(condition < 1e12))
        throw SingularSystemError("point-to-plane system is rank deficient or ill conditioned",
                                  condition);

    Eigen::Matrix<double, 6, 1> dv = Eigen::Matrix<double, 6, 1>::Zero();
    for (int k = 0; k < 6; ++k) {
        if (sigma(k) < relative_truncation * smax) break; // sigmas are sorted
        dv += (svd.matrixU().col(k).dot(wb) / sigma(k)) * svd.matrixV().col(k);
    }

    SolveResult result;
    result.dv = MotionVector::from_vector(dv);
    result.residual = (wa * dv - wb).norm();
    result.condition = condition;
    return result;
}

namespace {

template <typename Fn>
auto run_step(std::string_view what, int iteration, Fn&& fn) {
    try {
        return fn();
    } catch (const InsufficientContourError& e) {
        throw InsufficientContourError("iteration " + std::to_string(iteration) + " (" +
                                       std::string(what) + "): " + e.what());
    } catch (const NoCorrespondenceError& e) {
        throw NoCorrespondenceError("iteration " + std::to_string(iteration) + " (" +
                                    std::string(what) + "): " + e.what());
    } catch (const InsufficientConstraintsError& e) {
        throw InsufficientConstraintsError("iteration " + std::to_string(iteration) + " (" +
                                           std::string(what) + "): " + e.what());
    } catch (const SingularSystemError& e) {
        throw SingularSystemError("iteration " + std::to_string(iteration) + " (" +
                                      std::string(what) + "): " + e.what(),
                                  e.condition());
    }
}

} // namespace

RegistrationResult run_registration(const Volume& vol, const ContourPointSet& contours,
                                    const Image2D& fixed, const RigidTransform& t_init,
                                    const ProjectionGeometry& geom,
                                    const RegistrationParams& params) {
    if (params.max_iterations < 1)
        throw std::invalid_argument("max_iterations must be at least 1");
    t_init.validate();
    geom.validate();

    RenderStyle style = params.style;
    if (style.step_mm <= 0) style.step_mm = default_step(vol);

    const auto start = std::chrono::steady_clock::now();
    RegistrationResult result;
    result.final_transform = t_init;

    RigidTransform t = t_init;
    CorrespondenceParams cparams = params.correspondence;
    for (int it = 1; it <= params.max_iterations; ++it) {
        const Image2D moving = render(vol, geom, t, style);
        const ContourPointSet selected = run_step("contour selection", it, [&] {
            return select_apparent_contour(contours, geom, t, params.contour_angle_tol_deg,
                                           params.contour_max_points, params.contour_seed);
        });
        const std::vector<Correspondence> corrs = run_step("correspondence", it, [&] {
            return find_correspondences(moving, fixed, selected, geom, t, cparams);
        });
        double mean_dp = 0;
        for (const auto& c : corrs) mean_dp += c.dp.norm();
        mean_dp /= static_cast<double>(corrs.size());

        // Consensus vote over minimal motion hypotheses: coherent blocks of
        // wrong-edge matches survive scoring and reweighting, but they do
        // not agree with the rigid motion the correct majority implies.
        Eigen::VectorXd consensus_mask;
        if (params.ransac_samples > 0 && corrs.size() >= 12) {
            const PPCSystem base =
                run_step("assembly", it, [&] { return assemble(corrs, selected, t, geom); });
            const Eigen::Index n_rows = base.A.rows();
            Rng rng(derive_seed(params.contour_seed, static_cast<std::uint64_t>(it)));
            Eigen::Index best_count = -1;
            Eigen::VectorXd best_mask;
            Eigen::Matrix<double, 6, 6> a6;
            Eigen::Matrix<double, 6, 1> b6;
            for (int s = 0; s < params.ransac_samples; ++s) {
                for (int r = 0; r < 6; ++r) {
                    const Eigen::Index pick =
                        static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n_rows));
                    a6.row(r) = base.A.row(pick);
                    b6(r) = base.b(pick);
                }
                const Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 6, 6>> qr(a6);
                if (qr.rank() < 6) continue;
                const Eigen::Matrix<double, 6, 1> dv6 = qr.solve(b6);
                if (!dv6.allFinite() || dv6.head<3>().norm() > 1.0) continue;

                const Eigen::VectorXd residual = base.A * dv6 - base.b;
                Eigen::VectorXd mask(n_rows);
                Eigen::Index count = 0;
                for (Eigen::Index r = 0; r < n_rows; ++r) {
                    const bool in = std::abs(residual(r)) < params.ransac_tol_mm;
                    mask(r) = in ? 1.0 : 0.0;
                    if (in) ++count;
                }
                if (count > best_count) {
                    best_count = count;
                    best_mask = mask;
                }
            }
            if (best_count >= 6) consensus_mask = best_mask;
        }

        // Inner Gauss-Newton rounds against the fixed matches: the matched
        // targets and their planes do not move with the pose, so each round
        // re-linearizes toward the same planes.
        RigidTransform t_inner = t;
        Eigen::VectorXd robust_weights;
        double last_residual = 0;
        for (int round = 0; round < std::max(1, params.inner_rounds); ++round) {
            PPCSystem system =
                run_step("assembly", it, [&] { return assemble(corrs, selected, t_inner, geom); });
            const Eigen::VectorXd unmasked = system.weights;
            if (consensus_mask.size() == system.weights.size())
                system.weights = system.weights.cwiseProduct(consensus_mask);
            if (robust_weights.size() == system.weights.size())
                system.weights = robust_weights;
            SolveResult sol = run_step("solve", it, [&] {
                try {
                    return solve(system, params.solver_truncation);
                } catch (const SingularSystemError&) {
                    if (robust_weights.size() == 0 && consensus_mask.size() != 0) {
                        // consensus kept too thin a subset; fall back
                        PPCSystem full = system;
                        full.weights = unmasked;
                        return solve(full, params.solver_truncation);
                    }
                    throw;
                }
            });

            if (round == 0) {
                // M-estimation: silhouette generators slide under out-of-plane
                // motion and edges can lock onto the wrong face, leaving gross
                // outliers that NCC scores cannot flag. Tukey reweighting on
                // the first linearization suppresses them; the weights carry
                // over to the later rounds.
                for (int irls = 0; irls < params.irls_rounds; ++irls) {
                    Eigen::VectorXd residuals = system.A * sol.dv.to_vector() - system.b;
                    Eigen::VectorXd abs_res = residuals.cwiseAbs();
                    std::vector<double> sorted(abs_res.data(), abs_res.data() + abs_res.size());
                    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                                     sorted.end());
                    const double mad = sorted[sorted.size() / 2];
                    const double scale = std::max(4.685 * 1.4826 * mad, 1e-6);
                    PPCSystem reweighted = system;
                    for (Eigen::Index r = 0; r < residuals.size(); ++r) {
                        const double u = residuals(r) / scale;
                        const double w = std::abs(u) < 1.0 ? (1 - u * u) * (1 - u * u) : 0.0;
                        reweighted.weights(r) = system.weights(r) * w;
                    }
                    try {
                        sol = solve(reweighted, params.solver_truncation);
                        robust_weights = reweighted.weights;
                    } catch (const SingularSystemError&) {
                        break; // too few inliers to reweight; keep the previous solve
                    }
                }
            }
            t_inner = compose(exp_motion(sol.dv), t_inner);
            last_residual = sol.residual;
            if (sol.dv.to_vector().norm() < 1e-10) break;
        }

        MotionVector dv = log_transform(compose(t_inner, invert(t)));
        if (params.trust_scale > 0) {
            // Object radius and per-pixel footprint at the contour centroid.
            Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
            for (const auto& pt : selected.points) centroid += t.apply(pt.position);
            centroid /= static_cast<double>(selected.points.size());
            double radius = 0;
            for (const auto& pt : selected.points)
                radius += (t.apply(pt.position) - centroid).norm();
            radius /= static_cast<double>(selected.points.size());

            const Eigen::Vector3d n = geom.detector_normal().normalized();
            const double depth = std::abs((centroid - geom.source).dot(n));
            const double sdd = std::abs((geom.detector_origin - geom.source).dot(n));
            const double mm_per_px =
                0.5 * (geom.pixel_spacing.x() + geom.pixel_spacing.y()) * depth / sdd;

            const double implied = dv.rotation.norm() * radius + dv.translation.norm();
            const double allowed =
                params.trust_scale * std::max(mean_dp, params.stop_tol_px) * mm_per_px;
            if (implied > allowed && implied > 0) {
                const double scale = allowed / implied;
                dv.rotation *= scale;
                dv.translation *= scale;
            }
        }

        t = compose(exp_motion(dv), t);
        result.iterations.push_back({dv, corrs.size(), mean_dp, last_residual});

        if (mean_dp < params.stop_tol_px) {
            result.converged = true;
            break;
        }

        // Tighten the search window as the misalignment shrinks so repeated
        // structures one period away fall out of reach.
        cparams.search_range_px = std::clamp(3.0 * mean_dp, 20.0 * cparams.step_px,
                                             params.correspondence.search_range_px);
    }

    result.final_transform = t;
    result.runtime_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    return result;
}

} // namespace ppcreg
