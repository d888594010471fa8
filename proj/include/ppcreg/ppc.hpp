#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ppcreg/correspondence.hpp"
#include "ppcreg/drr.hpp"

namespace ppcreg {

/// Point-to-plane constraint system A * dv = b with per-row weights.
/// Row i is [n x w, -n] for the current world-frame contour point w and its
/// plane normal n; b_i is the signed distance of w to its target plane.
struct PPCSystem {
    Eigen::MatrixXd A;       // N x 6
    Eigen::VectorXd b;       // N
    Eigen::VectorXd weights; // N, >= 0
};

struct SolveResult {
    MotionVector dv;
    double residual = 0;  // ||W^1/2 (A dv - b)||
    double condition = 0; // condition estimate of A^T W A
};

struct IterationRecord {
    MotionVector dv;
    std::size_t correspondences = 0;
    double mean_abs_dp_px = 0;
    double residual = 0;
};

struct RegistrationResult {
    RigidTransform final_transform;
    std::vector<IterationRecord> iterations;
    bool converged = false;
    double runtime_ms = 0;
};

struct RegistrationParams {
    int max_iterations = 10;
    double stop_tol_px = 0.1; // early stop on mean |dp|
    RenderStyle style;        // step_mm <= 0 resolves to default_step(vol)
    CorrespondenceParams correspondence;
    double contour_angle_tol_deg = 20;
    std::size_t contour_max_points = 1024;
    std::uint64_t contour_seed = 0x5eedu;
    double solver_truncation = 0.01; // see solve(); 0 disables
    // Trust region: cap each update so the object-space displacement it
    // implies stays within trust_scale times the displacement the measured
    // mean |dp| supports. Out-of-plane rotations slide the apparent contour,
    // so a single linearized solve can otherwise overshoot badly. 0 disables.
    double trust_scale = 2.0;
    // Tukey-reweighted refinement rounds per solve (gross-outlier rejection).
    int irls_rounds = 2;
    // Gauss-Newton rounds per rendered iteration: the matched fixed-image
    // targets and their planes do not move with the pose, so re-linearizing
    // against them recovers the full nonlinear correction from one render.
    int inner_rounds = 3;
    // Consensus estimation before the weighted solve: minimal 6-row
    // hypotheses vote for the motion and rows farther than ransac_tol_mm
    // from their plane under the winning hypothesis are dropped. Matching on
    // repetitive structures leaves coherent wrong-edge blocks that plain
    // reweighting cannot separate from the rigid-consistent majority.
    // 0 samples disables.
    int ransac_samples = 600;
    double ransac_tol_mm = 1.5;
};

/// Builds the weighted constraint system from correspondences, with contour
/// points expressed in the current frame t_current * w. Throws
/// InsufficientConstraintsError below 6 rows.
PPCSystem assemble(const std::vector<Correspondence>& corrs, const ContourPointSet& set,
                   const RigidTransform& t_current, const ProjectionGeometry& geom);

/// Weighted least-squares minimizer of ||W^1/2 (A dv - b)|| via SVD, equal to
/// the closed form (A^T W A)^-1 A^T W b. Throws SingularSystemError when the
/// weighted normal matrix condition reaches 1e12.
///
/// relative_truncation > 0 zeroes the contribution of singular directions
/// with sigma < relative_truncation * sigma_max (the minimum-norm solution
/// over the remaining subspace). A single X-ray view observes motion along
/// the viewing ray hundreds of times more weakly than in-plane motion, so
/// the registration driver truncates to keep measurement noise out of the
/// depth axis; pass 0 for the exact minimizer.
SolveResult solve(const PPCSystem& system, double relative_truncation = 0.0);

/// Iterative PPC registration: render the moving DRR at the current pose,
/// select apparent contour points, match, assemble, solve, compose the
/// motion update; stop early once mean |dp| < stop_tol_px. Pipeline errors
/// are rethrown with the failing iteration index prefixed.
RegistrationResult run_registration(const Volume& vol, const ContourPointSet& contours,
                                    const Image2D& fixed, const RigidTransform& t_init,
                                    const ProjectionGeometry& geom,
                                    const RegistrationParams& params);

} // namespace ppcreg
