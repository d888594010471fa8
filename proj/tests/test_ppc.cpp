#include <doctest.h>

#include <cmath>

#include "ppcreg/errors.hpp"
#include "ppcreg/eval.hpp"
#include "ppcreg/phantom.hpp"
#include "ppcreg/ppc.hpp"
#include "ppcreg/rng.hpp"

using namespace ppcreg;

namespace {

constexpr double kPi = 3.14159265358979323846;

ProjectionGeometry test_geometry(int size = 128) {
    ProjectionGeometry geom;
    geom.source = {0, -400, 0};
    geom.row_axis = Eigen::Vector3d::UnitX();
    geom.col_axis = Eigen::Vector3d::UnitZ();
    geom.pixel_spacing = {1.0, 1.0};
    geom.width = size;
    geom.height = size;
    geom.detector_origin = Eigen::Vector3d(0, 250, 0) -
                           0.5 * (size - 1) * geom.row_axis - 0.5 * (size - 1) * geom.col_axis;
    return geom;
}

/// Exact-correspondence system for a known motion: planes contain the moved
/// points and the source, with normals along the perpendicular-to-ray part
/// of a synthetic gradient. Assembled via the production assemble().
struct ExactSystem {
    ContourPointSet set;
    std::vector<Correspondence> corrs;
    PPCSystem system;
};

ExactSystem build_exact_system(Rng& rng, const MotionVector& dv_true,
                               const ProjectionGeometry& geom, std::size_t n_points) {
    const RigidTransform delta = exp_motion(dv_true);

    ExactSystem out;
    for (std::size_t i = 0; i < n_points; ++i) {
        Eigen::Vector3d w(uniform_range(rng, -50, 50), uniform_range(rng, -50, 50),
                          uniform_range(rng, -50, 50));
        Eigen::Vector3d g(normal01(rng), normal01(rng), normal01(rng));
        if (g.norm() < 1e-9) g = Eigen::Vector3d::UnitX();

        const Eigen::Vector3d w_moved = delta.apply(w);
        const Eigen::Vector3d ray = (w_moved - geom.source).normalized();
        Eigen::Vector3d n = g - g.dot(ray) * ray;
        if (n.norm() < 1e-6) continue; // gradient parallel to the ray
        n.normalize();
        if (n.dot(w - geom.source) < 0) n = -n;

        Correspondence c;
        c.point_index = out.set.points.size();
        c.normal = n;
        c.weight = uniform_range(rng, 0.25, 1.0);
        c.score = c.weight;
        // Build b = n.(w - q) through the production path, which uses the
        // source as the plane's foot point; n.source == n.w_moved here.
        out.set.points.push_back({w, g});
        out.corrs.push_back(c);
    }
    out.system = assemble(out.corrs, out.set, RigidTransform::identity(), geom);
    // Replace the source-foot-point right-hand side with the moved-point
    // form; they must agree because both lie on the plane.
    for (Eigen::Index r = 0; r < out.system.b.size(); ++r) {
        const Eigen::Vector3d w = out.set.points[static_cast<std::size_t>(r)].position;
        const Eigen::Vector3d w_moved = delta.apply(w);
        const double b_moved = out.corrs[static_cast<std::size_t>(r)].normal.dot(w - w_moved);
        REQUIRE(std::abs(out.system.b(r) - b_moved) < 1e-9 * (1.0 + w.norm()));
    }
    return out;
}

} // namespace

TEST_CASE("assemble: aligned correspondences give a vanishing right-hand side") {
    Rng rng(31);
    const ExactSystem sys = build_exact_system(rng, MotionVector{}, test_geometry(), 50);
    CHECK(sys.system.b.cwiseAbs().maxCoeff() < 1e-6 * 50.0);
}

TEST_CASE("assemble rows satisfy the instantaneous-velocity identity") {
    Rng rng(37);
    const ProjectionGeometry geom = test_geometry();
    MotionVector dv;
    dv.rotation = {0.0006, -0.0004, 0.0008};
    dv.translation = {0.03, -0.05, 0.02};
    const ExactSystem sys = build_exact_system(rng, MotionVector{}, geom, 30);

    for (Eigen::Index r = 0; r < sys.system.A.rows(); ++r) {
        const Eigen::Vector3d w = sys.set.points[static_cast<std::size_t>(r)].position;
        const Eigen::Vector3d n = sys.corrs[static_cast<std::size_t>(r)].normal;
        const double row_dot = sys.system.A.row(r).dot(dv.to_vector());
        // Analytic identity: [n x w, -n] . dv == -n . (omega x w + t).
        const double velocity = n.dot(dv.rotation.cross(w) + dv.translation);
        CHECK(std::abs(row_dot + velocity) < 1e-12 * (1.0 + std::abs(velocity)));

        // Finite-difference version of the same statement.
        const double eps = 1e-6;
        MotionVector scaled;
        scaled.rotation = dv.rotation * eps;
        scaled.translation = dv.translation * eps;
        const double fd = n.dot(exp_motion(scaled).apply(w) - w) / eps;
        CHECK(std::abs(row_dot + fd) < 1e-6 * (1.0 + std::abs(fd)));
    }
}

TEST_CASE("assemble rejects undersized systems") {
    Rng rng(41);
    ExactSystem sys = build_exact_system(rng, MotionVector{}, test_geometry(), 20);
    sys.corrs.resize(5);
    CHECK_THROWS_AS(assemble(sys.corrs, sys.set, RigidTransform::identity(), test_geometry()),
                    InsufficientConstraintsError);
}

TEST_CASE("solve: zero right-hand side gives zero motion") {
    Rng rng(43);
    ExactSystem sys = build_exact_system(rng, MotionVector{}, test_geometry(), 40);
    sys.system.b.setZero();
    const SolveResult res = solve(sys.system);
    CHECK(res.dv.to_vector().norm() < 1e-12);
}

TEST_CASE("solve recovers a known small motion from exact correspondences") {
    Rng rng(47);
    const ProjectionGeometry geom = test_geometry();
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::Vector3d axis(normal01(rng), normal01(rng), normal01(rng));
        axis.normalize();
        MotionVector dv_true;
        dv_true.rotation = axis * uniform_range(rng, 0.0005, 0.002);
        dv_true.translation = {uniform_range(rng, -0.1, 0.1), uniform_range(rng, -0.1, 0.1),
                               uniform_range(rng, -0.1, 0.1)};

        const ExactSystem sys = build_exact_system(rng, dv_true, geom, 120);
        const SolveResult res = solve(sys.system);
        const double rel = (res.dv.to_vector() - dv_true.to_vector()).norm() /
                           dv_true.to_vector().norm();
        REQUIRE(rel < 0.01);
    }
}

TEST_CASE("solve: duplicated row with halved weights changes nothing") {
    Rng rng(53);
    MotionVector dv_true;
    dv_true.rotation = {0.001, 0.0005, -0.0008};
    dv_true.translation = {0.05, -0.02, 0.04};
    ExactSystem sys = build_exact_system(rng, dv_true, test_geometry(), 40);
    const SolveResult base = solve(sys.system);

    PPCSystem dup;
    const Eigen::Index n = sys.system.A.rows();
    dup.A.resize(n + 1, 6);
    dup.b.resize(n + 1);
    dup.weights.resize(n + 1);
    dup.A.topRows(n) = sys.system.A;
    dup.b.head(n) = sys.system.b;
    dup.weights.head(n) = sys.system.weights;
    dup.A.row(n) = sys.system.A.row(0);
    dup.b(n) = sys.system.b(0);
    dup.weights(n) = 0.5 * sys.system.weights(0);
    dup.weights(0) *= 0.5;

    const SolveResult doubled = solve(dup);
    CHECK((doubled.dv.to_vector() - base.dv.to_vector()).norm() < 1e-9);
}

TEST_CASE("solve: parallel plane normals are singular") {
    Rng rng(59);
    PPCSystem sys;
    const int n = 20;
    sys.A.resize(n, 6);
    sys.b.resize(n);
    sys.weights.resize(n);
    const Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d w(uniform_range(rng, -50, 50), uniform_range(rng, -50, 50),
                                uniform_range(rng, -50, 50));
        sys.A.block<1, 3>(i, 0) = normal.cross(w).transpose();
        sys.A.block<1, 3>(i, 3) = -normal.transpose();
        sys.b(i) = uniform_range(rng, -1, 1);
        sys.weights(i) = 1.0;
    }
    CHECK_THROWS_AS(solve(sys), SingularSystemError);
}

TEST_CASE("solve: perturbing the minimizer never lowers the weighted residual") {
    Rng rng(61);
    const ProjectionGeometry geom = test_geometry();
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Vector3d axis(normal01(rng), normal01(rng), normal01(rng));
        axis.normalize();
        MotionVector dv_true;
        dv_true.rotation = axis * uniform_range(rng, 0.0002, 0.002);
        dv_true.translation = {uniform_range(rng, -0.1, 0.1), uniform_range(rng, -0.1, 0.1),
                               uniform_range(rng, -0.1, 0.1)};
        ExactSystem sys = build_exact_system(rng, dv_true, geom, 30);
        // Perturb b so the system is not exactly consistent.
        for (Eigen::Index r = 0; r < sys.system.b.size(); ++r)
            sys.system.b(r) += uniform_range(rng, -0.01, 0.01);

        const SolveResult res = solve(sys.system);
        const Eigen::VectorXd sqw = sys.system.weights.array().sqrt();
        auto weighted_residual2 = [&](const Eigen::Matrix<double, 6, 1>& dv) {
            return (sqw.asDiagonal() * (sys.system.A * dv - sys.system.b)).squaredNorm();
        };
        const double base = weighted_residual2(res.dv.to_vector());
        for (int coord = 0; coord < 6; ++coord) {
            for (double sign : {-1.0, 1.0}) {
                Eigen::Matrix<double, 6, 1> dv = res.dv.to_vector();
                dv(coord) += sign * 1e-6;
                REQUIRE(weighted_residual2(dv) >= base - 1e-15);
            }
        }
    }
}

TEST_CASE("solve is invariant to a global weight scale") {
    Rng rng(67);
    MotionVector dv_true;
    dv_true.rotation = {0.0015, -0.0005, 0.001};
    dv_true.translation = {0.06, 0.01, -0.08};
    ExactSystem sys = build_exact_system(rng, dv_true, test_geometry(), 40);
    const SolveResult base = solve(sys.system);
    sys.system.weights *= 37.5;
    const SolveResult scaled = solve(sys.system);
    CHECK((scaled.dv.to_vector() - base.dv.to_vector()).norm() < 1e-9);
}

TEST_CASE("run_registration: starting at the fixed pose converges immediately") {
    const Volume vol = [] {
        PhantomSpec spec = PhantomSpec::vertebra_stack();
        spec.dims = {64, 64, 64};
        spec.origin = {-32, -32, -32};
        spec.primitives.clear();
        for (int k = 0; k < 2; ++k) {
            Primitive body;
            body.kind = Primitive::Kind::box;
            body.center = {-4.0, -2.0, -10.0 + 20.0 * k};
            body.size = {24.0, 18.0, 12.0};
            body.attenuation = 0.04;
            spec.primitives.push_back(body);
            Primitive rod;
            rod.kind = Primitive::Kind::cylinder;
            rod.center = {-4.0, 12.0, -10.0 + 20.0 * k};
            rod.radius = 5.0;
            rod.height = 10.0;
            rod.attenuation = 0.03;
            spec.primitives.push_back(rod);
        }
        return make_phantom(spec);
    }();
    const ProjectionGeometry geom = test_geometry(128);
    const ContourPointSet contours = canny3d(vol, 1.5, 0.002, 0.005);
    REQUIRE(contours.points.size() > 100);

    RegistrationParams params;
    params.style = RenderStyle::bone_style(0.02, 0.5);
    const Image2D fixed = render(vol, geom, RigidTransform::identity(), params.style);

    const RegistrationResult result =
        run_registration(vol, contours, fixed, RigidTransform::identity(), geom, params);
    CHECK(result.converged);
    CHECK(result.iterations.size() <= 2);

    std::vector<Eigen::Vector3d> targets;
    for (const auto& p : contours.points) targets.push_back(p.position);
    CHECK(mtre(result.final_transform, RigidTransform::identity(), targets) < 0.1);

    SUBCASE("a perturbed start comes back within the pixel budget") {
        MotionVector dv;
        dv.rotation = Eigen::Vector3d(0.2, 0.3, 0.93).normalized() * (4.0 * kPi / 180.0);
        dv.translation = {6.0, -3.0, 4.0};
        const RigidTransform t_init = exp_motion(dv);
        const RegistrationResult run =
            run_registration(vol, contours, fixed, t_init, geom, params);
        REQUIRE(run.iterations.size() >= 1);
        CHECK(mrpd(run.final_transform, RigidTransform::identity(), targets, geom) < 1.0);

        // Exact-correspondence trend: the mean displacement shrinks.
        CHECK(run.iterations.back().mean_abs_dp_px <
              run.iterations.front().mean_abs_dp_px);
    }

    SUBCASE("a fixed image from the opposite side does not converge") {
        MotionVector flip;
        flip.rotation = {0.0, 0.0, kPi};
        const Image2D opposite = render(vol, geom, exp_motion(flip), params.style);
        const RegistrationResult run = run_registration(vol, contours, opposite,
                                                        RigidTransform::identity(), geom, params);
        CHECK_FALSE(run.converged);
    }
}

TEST_CASE("run_registration propagates pipeline errors with the iteration index") {
    PhantomSpec spec;
    spec.dims = {32, 32, 32};
    spec.origin = {-16, -16, -16};
    Primitive ball;
    ball.kind = Primitive::Kind::sphere;
    ball.center = {0, 0, 0};
    ball.radius = 8;
    ball.attenuation = 0.03;
    spec.primitives.push_back(ball);
    const Volume vol = make_phantom(spec);
    const ProjectionGeometry geom = test_geometry(64);
    const ContourPointSet contours = canny3d(vol, 1.0, 0.002, 0.004);

    RegistrationParams params;
    params.style = RenderStyle::bone_style(0.01, 1.0);
    Image2D flat = Image2D::zeros(64, 64, {1, 1}); // textureless fixed image
    try {
        run_registration(vol, contours, flat, RigidTransform::identity(), geom, params);
        FAIL("expected NoCorrespondenceError");
    } catch (const NoCorrespondenceError& e) {
        CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
    }
}

TEST_CASE("exact-correspondence runs shrink the plane distances monotonically") {
    // Gauss-Newton on a consistent point-to-plane system: the mean |b| (the
    // 3D analog of mean |dp|) must not increase across iterations.
    const ProjectionGeometry geom = test_geometry();
    Rng rng(73);
    std::vector<Eigen::Vector3d> w(100), g(100);
    for (auto& x : w)
        x = {uniform_range(rng, -50, 50), uniform_range(rng, -50, 50),
             uniform_range(rng, -50, 50)};
    for (auto& x : g) {
        x = {normal01(rng), normal01(rng), normal01(rng)};
        x.normalize();
    }
    MotionVector dv0;
    dv0.rotation = Eigen::Vector3d(0.3, -0.5, 0.81).normalized() * 0.12;
    dv0.translation = {8, -11, 5};
    RigidTransform t = exp_motion(dv0);

    double previous = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 8; ++it) {
        std::vector<Eigen::Vector3d> ns, ws;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const Eigen::Vector3d ray = (w[i] - geom.source).normalized();
            Eigen::Vector3d n = g[i] - g[i].dot(ray) * ray;
            if (n.norm() < 1e-6) continue;
            ns.push_back(n.normalized());
            ws.push_back(w[i]);
        }
        PPCSystem sys;
        const Eigen::Index rows = static_cast<Eigen::Index>(ns.size());
        sys.A.resize(rows, 6);
        sys.b.resize(rows);
        sys.weights = Eigen::VectorXd::Ones(rows);
        double mean_b = 0;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto ri = static_cast<std::size_t>(r);
            const Eigen::Vector3d cur = t.apply(ws[ri]);
            sys.A.block<1, 3>(r, 0) = ns[ri].cross(cur).transpose();
            sys.A.block<1, 3>(r, 3) = -ns[ri].transpose();
            sys.b(r) = ns[ri].dot(cur - ws[ri]);
            mean_b += std::abs(sys.b(r));
        }
        mean_b /= static_cast<double>(rows);
        REQUIRE(mean_b <= previous + 1e-12);
        previous = mean_b;
        if (mean_b < 1e-9) break;
        t = compose(exp_motion(solve(sys).dv), t);
    }
    CHECK(previous < 1e-6);
}
