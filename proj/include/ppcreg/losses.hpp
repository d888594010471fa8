#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "ppcreg/geometry.hpp"

namespace ppcreg {

/// B x D batch of embedding vectors (rows = samples).
struct EmbeddingBatch {
    Eigen::MatrixXd values;

    void validate() const; // B >= 2, finite
};

/// Per-patch discriminator probabilities, clamped into (0, 1) at 1e-7.
struct DiscriminatorOutput {
    enum class Domain { sim, real };

    explicit DiscriminatorOutput(std::vector<double> probabilities,
                                 Domain domain = Domain::sim);

    const std::vector<double>& probs() const { return probs_; }
    Domain domain() const { return domain_; }

private:
    std::vector<double> probs_;
    Domain domain_;
};

/// Mean Euclidean distance between the two transforms' images of the points
/// (mm). The mean reduction keeps the value independent of point count.
double registration_loss(const RigidTransform& t, const RigidTransform& t_hat,
                         std::span<const Eigen::Vector3d> points);

/// Squared Euclidean norm of the 6-dof motion.
double motion_reg_loss(const MotionVector& dv);

/// Mean endpoint error over valid pixels (px). Flow fields are flattened;
/// all three spans must have equal length.
double flow_loss(std::span<const Eigen::Vector2d> flow_pred,
                 std::span<const Eigen::Vector2d> flow_gt, std::span<const std::uint8_t> valid);

double dirn_loss(double l_reg, double l_flow, double l_m, double w_flow = 0.5,
                 double w_m = 1e-3);

/// Invariance + weighted redundancy-reduction terms of the cross-correlation
/// matrix between batch-standardized embeddings.
double barlow_twins_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2,
                         double w_red = 0.005);

/// mean(log p_sim) + mean(log(1 - p_real)): the discriminator objective over
/// simulated-domain and real-domain feature patches.
double adversarial_feature_loss(const DiscriminatorOutput& sim_probs,
                                const DiscriminatorOutput& real_probs);

double total_loss(double l_dirn, double l_afe, double l_bt, double w_afe = 0.2,
                  double w_bt = 0.05);

} // namespace ppcreg
