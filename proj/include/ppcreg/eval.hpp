#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ppcreg/geometry.hpp"

namespace ppcreg {

/// Per-sample evaluation outcome.
struct EvaluationRecord {
    std::string sample_id;
    double mtre_init_mm = 0;
    double mrpd_final_mm = 0;
    bool success = false;
    int iterations = 0;
    double runtime_ms = 0;
};

/// Mean target registration error: mean 3D distance between the two
/// transforms' images of the target points.
double mtre(const RigidTransform& t_a, const RigidTransform& t_b,
            std::span<const Eigen::Vector3d> targets);

/// Mean re-projection distance: mean 3D distance from the ground-truth point
/// t_hat*x to the back-projected ray through project(t_est*x). Targets whose
/// projection degenerates are skipped (count via n_skipped); throws when all
/// are skipped.
double mrpd(const RigidTransform& t_est, const RigidTransform& t_hat,
            std::span<const Eigen::Vector3d> targets, const ProjectionGeometry& geom,
            std::size_t* n_skipped = nullptr);

struct SuccessSummary {
    double ratio = 0;           // fraction with mRPD <= threshold (inclusive)
    double mean_success_mm = 0; // mean mRPD over successful cases only
    double std_success_mm = 0;  // sample std over successful cases only
    std::size_t n = 0;
    std::size_t n_success = 0;
    double threshold_mm = 5.0;
};

SuccessSummary success_ratio(std::span<const EvaluationRecord> records,
                             double threshold_mm = 5.0);

struct ReportPaths {
    std::filesystem::path records_csv;
    std::filesystem::path summary_json;
    std::filesystem::path ecdf_csv;
};

/// Writes the records CSV (fixed column set), a summary JSON and ECDF data
/// points (sorted error vs. cumulative fraction). Regenerating from the same
/// records is byte-identical.
void export_report(std::span<const EvaluationRecord> records, const ReportPaths& paths,
                   double threshold_mm = 5.0, const std::string& targets_kind = "contour");

} // namespace ppcreg
