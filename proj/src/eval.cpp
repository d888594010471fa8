#include "ppcreg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ppcreg/errors.hpp"

namespace ppcreg {

double mtre(const RigidTransform& t_a, const RigidTransform& t_b,
            std::span<const Eigen::Vector3d> targets) {
    if (targets.empty()) throw std::invalid_argument("mTRE needs at least one target");
    double sum = 0;
    for (const auto& x : targets) sum += (t_a.apply(x) - t_b.apply(x)).norm();
    return sum / static_cast<double>(targets.size());
}

double mrpd(const RigidTransform& t_est, const RigidTransform& t_hat,
            std::span<const Eigen::Vector3d> targets, const ProjectionGeometry& geom,
            std::size_t* n_skipped) {
    if (targets.empty()) throw std::invalid_argument("mRPD needs at least one target");

    double sum = 0;
    std::size_t used = 0, skipped = 0;
    for (const auto& x : targets) {
        Eigen::Vector2d pixel;
        try {
            pixel = project(t_est.apply(x), geom);
        } catch (const NoIntersectionError&) {
            ++skipped;
            continue;
        } catch (const std::invalid_argument&) {
            ++skipped;
            continue;
        }
        const Ray ray = backproject_ray(pixel, geom);
        const Eigen::Vector3d rel = t_hat.apply(x) - ray.origin;
        sum += (rel - rel.dot(ray.direction) * ray.direction).norm();
        ++used;
    }
    if (n_skipped) *n_skipped = skipped;
    if (used == 0) throw std::invalid_argument("mRPD: every target projection degenerated");
    return sum / static_cast<double>(used);
}

SuccessSummary success_ratio(std::span<const EvaluationRecord> records, double threshold_mm) {
    if (records.empty()) throw std::invalid_argument("success ratio needs at least one record");

    SuccessSummary s;
    s.n = records.size();
    s.threshold_mm = threshold_mm;

    double sum = 0;
    for (const auto& r : records) {
        if (r.mrpd_final_mm <= threshold_mm) {
            ++s.n_success;
            sum += r.mrpd_final_mm;
        }
    }
    s.ratio = static_cast<double>(s.n_success) / static_cast<double>(s.n);
    if (s.n_success > 0) {
        s.mean_success_mm = sum / static_cast<double>(s.n_success);
        double ss = 0;
        for (const auto& r : records)
            if (r.mrpd_final_mm <= threshold_mm) {
                const double d = r.mrpd_final_mm - s.mean_success_mm;
                ss += d * d;
            }
        s.std_success_mm =
            s.n_success > 1 ? std::sqrt(ss / static_cast<double>(s.n_success - 1)) : 0.0;
    }
    return s;
}

void export_report(std::span<const EvaluationRecord> records, const ReportPaths& paths,
                   double threshold_mm, const std::string& targets_kind) {
    if (records.empty()) throw std::invalid_argument("report needs at least one record");

    {
        std::ofstream csv(paths.records_csv, std::ios::trunc);
        if (!csv) throw FormatError("cannot open '" + paths.records_csv.string() + "'");
        csv << "sample_id,mtre_init_mm,mrpd_mm,success,iterations,runtime_ms\n";
        char buf[256];
        for (const auto& r : records) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%d,%d,%.3f\n", r.sample_id.c_str(),
                          r.mtre_init_mm, r.mrpd_final_mm,
                          r.mrpd_final_mm <= threshold_mm ? 1 : 0, r.iterations, r.runtime_ms);
            csv << buf;
        }
        if (!csv) throw FormatError("write failed for '" + paths.records_csv.string() + "'");
    }

    const SuccessSummary summary = success_ratio(records, threshold_mm);
    {
        nlohmann::ordered_json j;
        j["n_samples"] = summary.n;
        j["threshold_mm"] = summary.threshold_mm;
        j["success_ratio"] = summary.ratio;
        j["n_success"] = summary.n_success;
        j["mrpd_success_mean_mm"] = summary.mean_success_mm;
        j["mrpd_success_std_mm"] = summary.std_success_mm;
        j["mrpd_statistics_over"] = "successful cases only";
        j["targets"] = targets_kind;
        std::ofstream out(paths.summary_json, std::ios::trunc);
        if (!out) throw FormatError("cannot open '" + paths.summary_json.string() + "'");
        out << j.dump(2) << '\n';
        if (!out) throw FormatError("write failed for '" + paths.summary_json.string() + "'");
    }

    {
        std::vector<double> errors;
        errors.reserve(records.size());
        for (const auto& r : records) errors.push_back(r.mrpd_final_mm);
        std::sort(errors.begin(), errors.end());

        std::ofstream ecdf(paths.ecdf_csv, std::ios::trunc);
        if (!ecdf) throw FormatError("cannot open '" + paths.ecdf_csv.string() + "'");
        ecdf << "mrpd_mm,cumulative_fraction\n";
        char buf[128];
        for (std::size_t i = 0; i < errors.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", errors[i],
                          static_cast<double>(i + 1) / static_cast<double>(errors.size()));
            ecdf << buf;
        }
        if (!ecdf) throw FormatError("write failed for '" + paths.ecdf_csv.string() + "'");
    }
}

} // namespace ppcreg
