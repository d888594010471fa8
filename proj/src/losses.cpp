#include "ppcreg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppcreg {

void EmbeddingBatch::validate() const {
    if (values.rows() < 2)
        throw std::invalid_argument("embedding batch needs at least 2 samples");
    if (values.cols() < 1) throw std::invalid_argument("embedding batch needs at least 1 column");
    if (!values.allFinite()) throw std::invalid_argument("embedding batch must be finite");
}

DiscriminatorOutput::DiscriminatorOutput(std::vector<double> probabilities, Domain domain)
    : probs_(std::move(probabilities)), domain_(domain) {
    if (probs_.empty()) throw std::invalid_argument("discriminator output must be non-empty");
    for (auto& p : probs_) {
        if (!std::isfinite(p)) throw std::invalid_argument("probabilities must be finite");
        p = std::clamp(p, 1e-7, 1.0 - 1e-7);
    }
}

double registration_loss(const RigidTransform& t, const RigidTransform& t_hat,
                         std::span<const Eigen::Vector3d> points) {
    if (points.empty()) throw std::invalid_argument("registration loss needs at least one point");
    double sum = 0;
    for (const auto& x : points) sum += (t.apply(x) - t_hat.apply(x)).norm();
    return sum / static_cast<double>(points.size());
}

double motion_reg_loss(const MotionVector& dv) { return dv.to_vector().squaredNorm(); }

double flow_loss(std::span<const Eigen::Vector2d> flow_pred,
                 std::span<const Eigen::Vector2d> flow_gt, std::span<const std::uint8_t> valid) {
    if (flow_pred.size() != flow_gt.size() || flow_pred.size() != valid.size())
        throw std::invalid_argument("flow fields and mask must have matching shapes");
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < flow_pred.size(); ++i) {
        if (!valid[i]) continue;
        sum += (flow_pred[i] - flow_gt[i]).norm();
        ++count;
    }
    if (count == 0) throw std::invalid_argument("flow loss mask selects no pixels");
    return sum / static_cast<double>(count);
}

double dirn_loss(double l_reg, double l_flow, double l_m, double w_flow, double w_m) {
    return l_reg + w_flow * l_flow + w_m * l_m;
}

double barlow_twins_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double w_red) {
    z1.validate();
    z2.validate();
    if (z1.values.rows() != z2.values.rows() || z1.values.cols() != z2.values.cols())
        throw std::invalid_argument("embedding batches must share shape");

    const Eigen::Index b = z1.values.rows(), d = z1.values.cols();

    // Standardize each column over the batch (population statistics, so a
    // perfectly correlated pair gives C_ii = 1 exactly).
    auto standardize = [b, d](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out(b, d);
        for (Eigen::Index c = 0; c < d; ++c) {
            const double mean = m.col(c).mean();
            const double var = (m.col(c).array() - mean).square().sum() / static_cast<double>(b);
            if (var <= 0)
                throw std::invalid_argument(
                    "degenerate embedding: column " + std::to_string(c) + " has zero variance");
            out.col(c) = (m.col(c).array() - mean) / std::sqrt(var);
        }
        return out;
    };

    const Eigen::MatrixXd s1 = standardize(z1.values);
    const Eigen::MatrixXd s2 = standardize(z2.values);
    const Eigen::MatrixXd c = (s1.transpose() * s2) / static_cast<double>(b);

    double invariance = 0, redundancy = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        invariance += (1.0 - c(i, i)) * (1.0 - c(i, i));
        for (Eigen::Index j = 0; j < d; ++j)
            if (j != i) redundancy += c(i, j) * c(i, j);
    }
    return invariance + w_red * redundancy;
}

double adversarial_feature_loss(const DiscriminatorOutput& sim_probs,
                                const DiscriminatorOutput& real_probs) {
    double sim_term = 0;
    for (double p : sim_probs.probs()) sim_term += std::log(p);
    sim_term /= static_cast<double>(sim_probs.probs().size());

    double real_term = 0;
    for (double p : real_probs.probs()) real_term += std::log(1.0 - p);
    real_term /= static_cast<double>(real_probs.probs().size());

    return sim_term + real_term;
}

double total_loss(double l_dirn, double l_afe, double l_bt, double w_afe, double w_bt) {
    return l_dirn + w_afe * l_afe + w_bt * l_bt;
}

} // namespace ppcreg
