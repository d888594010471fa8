#include <doctest.h>

#include <cmath>
#include <vector>

#include "ppcreg/losses.hpp"
#include "ppcreg/rng.hpp"
#include "oracles.hpp"

using namespace ppcreg;

namespace {

RigidTransform random_rigid(Rng& rng) {
    Eigen::Vector3d axis(normal01(rng), normal01(rng), normal01(rng));
    axis.normalize();
    MotionVector dv;
    dv.rotation = axis * uniform_range(rng, 0.0, 2.0);
    dv.translation = {uniform_range(rng, -40, 40), uniform_range(rng, -40, 40),
                      uniform_range(rng, -40, 40)};
    return exp_motion(dv);
}

std::vector<Eigen::Vector3d> random_points(Rng& rng, std::size_t n) {
    std::vector<Eigen::Vector3d> pts;
    for (std::size_t i = 0; i < n; ++i)
        pts.push_back({uniform_range(rng, -30, 30), uniform_range(rng, -30, 30),
                       uniform_range(rng, -30, 30)});
    return pts;
}

} // namespace

TEST_CASE("registration_loss: identity, translation and brute-force cases") {
    Rng rng(83);
    const auto pts = random_points(rng, 24);

    const RigidTransform t = random_rigid(rng);
    CHECK(registration_loss(t, t, pts) == 0.0);

    RigidTransform shifted;
    shifted.translation = {3, 4, 0};
    CHECK(registration_loss(shifted, RigidTransform::identity(), pts) ==
          doctest::Approx(5.0).epsilon(1e-12));

    for (int trial = 0; trial < 50; ++trial) {
        const RigidTransform a = random_rigid(rng), b = random_rigid(rng);
        const double oracle = oracles::brute_force_mtre(a.rotation, a.translation, b.rotation,
                                                        b.translation, pts);
        CHECK(std::abs(registration_loss(a, b, pts) - oracle) < 1e-9);
    }

    CHECK_THROWS_AS(registration_loss(t, t, std::vector<Eigen::Vector3d>{}),
                    std::invalid_argument);
}

TEST_CASE("registration_loss is invariant under a common rigid pre-compose") {
    Rng rng(89);
    const auto pts = random_points(rng, 16);
    const RigidTransform a = random_rigid(rng), b = random_rigid(rng), pre = random_rigid(rng);
    const double plain = registration_loss(a, b, pts);
    const double moved = registration_loss(compose(pre, a), compose(pre, b), pts);
    CHECK(std::abs(plain - moved) < 1e-9);
}

TEST_CASE("motion_reg_loss is the squared 6-dof norm") {
    CHECK(motion_reg_loss(MotionVector{}) == 0.0);
    MotionVector unit;
    unit.rotation = {1, 0, 0};
    CHECK(motion_reg_loss(unit) == 1.0);
    MotionVector v;
    v.rotation = {1, 2, 3};
    v.translation = {4, 5, 6};
    CHECK(motion_reg_loss(v) == 91.0);
}

TEST_CASE("flow_loss: endpoint error over the valid mask") {
    Rng rng(97);
    const std::size_t n = 200;
    std::vector<Eigen::Vector2d> pred(n), gt(n);
    std::vector<std::uint8_t> valid(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        gt[i] = {uniform_range(rng, -5, 5), uniform_range(rng, -5, 5)};
        pred[i] = gt[i];
    }
    CHECK(flow_loss(pred, gt, valid) == 0.0);

    for (std::size_t i = 0; i < n; ++i) pred[i] = gt[i] + Eigen::Vector2d(3, 4);
    CHECK(flow_loss(pred, gt, valid) == doctest::Approx(5.0).epsilon(1e-12));

    // Random fields against a brute-force loop with half the mask off.
    for (std::size_t i = 0; i < n; ++i) {
        pred[i] = {uniform_range(rng, -5, 5), uniform_range(rng, -5, 5)};
        valid[i] = (i % 2 == 0) ? 1 : 0;
    }
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (valid[i]) {
            sum += std::hypot(pred[i].x() - gt[i].x(), pred[i].y() - gt[i].y());
            ++count;
        }
    CHECK(std::abs(flow_loss(pred, gt, valid) - sum / count) < 1e-9);

    std::fill(valid.begin(), valid.end(), std::uint8_t{0});
    CHECK_THROWS_AS(flow_loss(pred, gt, valid), std::invalid_argument);
}

TEST_CASE("dirn_loss applies the published weights") {
    CHECK(dirn_loss(1, 0, 0) == 1.0);
    CHECK(dirn_loss(0, 2, 0) == 1.0);          // w_flow = 0.5
    CHECK(dirn_loss(1, 2, 1000) == 3.0);       // w_m = 1e-3
    CHECK(dirn_loss(0, 0, 1) == doctest::Approx(1e-3).epsilon(1e-15));
}

TEST_CASE("barlow_twins_loss: identity, sign flip and brute force") {
    // Orthogonal standardized columns: B = 4, D = 2 with exact +-1 entries.
    EmbeddingBatch z1;
    z1.values.resize(4, 2);
    z1.values << 1, 1, 1, -1, -1, 1, -1, -1;
    EmbeddingBatch z2 = z1;
    CHECK(barlow_twins_loss(z1, z2) == doctest::Approx(0.0).epsilon(1e-15));

    EmbeddingBatch z_neg;
    z_neg.values = -z1.values;
    // C = -I: invariance (1-(-1))^2 per column = 4D, redundancy 0.
    CHECK(barlow_twins_loss(z1, z_neg) == doctest::Approx(4.0 * 2).epsilon(1e-12));

    Rng rng(101);
    EmbeddingBatch a, b;
    a.values.resize(8, 4);
    b.values.resize(8, 4);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 4; ++j) {
            a.values(i, j) = uniform_range(rng, -2, 2);
            b.values(i, j) = uniform_range(rng, -2, 2);
        }

    // Brute-force double loop: standardize, correlate, accumulate.
    const auto standardize = [](Eigen::MatrixXd m) {
        for (int j = 0; j < m.cols(); ++j) {
            double mean = 0;
            for (int i = 0; i < m.rows(); ++i) mean += m(i, j);
            mean /= m.rows();
            double var = 0;
            for (int i = 0; i < m.rows(); ++i) var += (m(i, j) - mean) * (m(i, j) - mean);
            var /= m.rows();
            for (int i = 0; i < m.rows(); ++i) m(i, j) = (m(i, j) - mean) / std::sqrt(var);
        }
        return m;
    };
    const Eigen::MatrixXd sa = standardize(a.values), sb = standardize(b.values);
    double invariance = 0, redundancy = 0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            double c = 0;
            for (int r = 0; r < 8; ++r) c += sa(r, i) * sb(r, j);
            c /= 8.0;
            if (i == j)
                invariance += (1 - c) * (1 - c);
            else
                redundancy += c * c;
        }
    }
    const double w_red = 0.005;
    CHECK(std::abs(barlow_twins_loss(a, b, w_red) - (invariance + w_red * redundancy)) < 1e-9);
}

TEST_CASE("barlow_twins_loss is invariant to per-column affine rescaling") {
    Rng rng(103);
    EmbeddingBatch a, b;
    a.values.resize(12, 3);
    b.values.resize(12, 3);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 3; ++j) {
            a.values(i, j) = uniform_range(rng, -1, 1);
            b.values(i, j) = uniform_range(rng, -1, 1);
        }
    const double base = barlow_twins_loss(a, b);

    EmbeddingBatch scaled = a;
    scaled.values.col(0) = 7.0 * a.values.col(0).array() + 3.0;
    scaled.values.col(2) = 0.04 * a.values.col(2).array() - 11.0;
    CHECK(std::abs(barlow_twins_loss(scaled, b) - base) < 1e-8);
}

TEST_CASE("barlow_twins_loss rejects degenerate embeddings") {
    EmbeddingBatch a, b;
    a.values = Eigen::MatrixXd::Ones(4, 2); // zero variance columns
    b.values = Eigen::MatrixXd::Random(4, 2);
    CHECK_THROWS_AS(barlow_twins_loss(a, b), std::invalid_argument);
    a.values.resize(1, 2);
    CHECK_THROWS_AS(barlow_twins_loss(a, b), std::invalid_argument);
}

TEST_CASE("adversarial_feature_loss: chance level, saturation and brute force") {
    const DiscriminatorOutput half(std::vector<double>(10, 0.5), DiscriminatorOutput::Domain::sim);
    const DiscriminatorOutput half_r(std::vector<double>(7, 0.5),
                                     DiscriminatorOutput::Domain::real);
    CHECK(adversarial_feature_loss(half, half_r) ==
          doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));

    const DiscriminatorOutput confident_sim(std::vector<double>(5, 1.0),
                                            DiscriminatorOutput::Domain::sim);
    const DiscriminatorOutput confident_real(std::vector<double>(5, 0.0),
                                             DiscriminatorOutput::Domain::real);
    CHECK(adversarial_feature_loss(confident_sim, confident_real) ==
          doctest::Approx(0.0).epsilon(1e-5)); // clamped at 1e-7 from both sides

    Rng rng(107);
    std::vector<double> ps(33), pr(21);
    for (auto& p : ps) p = uniform_range(rng, 0.01, 0.99);
    for (auto& p : pr) p = uniform_range(rng, 0.01, 0.99);
    double oracle = 0;
    for (double p : ps) oracle += std::log(p) / ps.size();
    for (double p : pr) oracle += std::log(1 - p) / pr.size();
    const double got =
        adversarial_feature_loss(DiscriminatorOutput(ps), DiscriminatorOutput(pr));
    CHECK(std::abs(got - oracle) < 1e-12);
    CHECK(got <= 0.0);
}

TEST_CASE("total_loss applies the published weights") {
    CHECK(total_loss(1, 0, 0) == 1.0);
    CHECK(total_loss(0, 1, 0) == doctest::Approx(0.2).epsilon(1e-15));  // w_afe
    CHECK(total_loss(0, 0, 1) == doctest::Approx(0.05).epsilon(1e-15)); // w_bt
}

TEST_CASE("loss sign bounds") {
    Rng rng(109);
    const auto pts = random_points(rng, 8);
    for (int i = 0; i < 20; ++i) {
        const RigidTransform a = random_rigid(rng), b = random_rigid(rng);
        CHECK(registration_loss(a, b, pts) >= 0.0);
        MotionVector dv;
        dv.rotation = {normal01(rng), normal01(rng), normal01(rng)};
        dv.translation = {normal01(rng), normal01(rng), normal01(rng)};
        CHECK(motion_reg_loss(dv) >= 0.0);
    }
}
