// ppcreg: DRR rendering, PPC-based 2D/3D registration, self-supervised
// dataset generation and the standardized mRPD/SR evaluation, behind one
// subcommand CLI. Exit codes: 0 success, 1 internal/numeric failure,
// 2 usage/config error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppcreg/augment.hpp"
#include "ppcreg/contour.hpp"
#include "ppcreg/correspondence.hpp"
#include "ppcreg/drr.hpp"
#include "ppcreg/errors.hpp"
#include "ppcreg/eval.hpp"
#include "ppcreg/image.hpp"
#include "ppcreg/losses.hpp"
#include "ppcreg/parallel.hpp"
#include "ppcreg/phantom.hpp"
#include "ppcreg/ppc.hpp"
#include "ppcreg/simlab.hpp"
#include "ppcreg/volume.hpp"

using namespace ppcreg;
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Input/config-phase failures map to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("JSON parse error in '" + path.string() + "': " + e.what());
    }
}

void write_json_file(const ordered_json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& what) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) known = true;
        if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + what);
    }
}

RigidTransform load_pose(const fs::path& path) {
    const json j = load_json_file(path);
    try {
        if (j.is_array()) return transform_from_json(j);
        if (j.contains("transform")) return transform_from_json(j.at("transform"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("bad pose in '" + path.string() + "': " + e.what());
    }
    throw ConfigError("pose file must be a 16-array or {\"transform\": [...]}");
}

/// Geometry flags shared by render and standalone register.
struct GeometryFlags {
    std::string view = "AP";
    GeometryConfig config;

    void attach(CLI::App* cmd) {
        cmd->add_option("--view", view, "view preset: AP or LAT")
            ->check(CLI::IsMember({"AP", "LAT"}));
        cmd->add_option("--sad", config.source_isocenter_mm, "source-isocenter distance [mm]");
        cmd->add_option("--sdd", config.source_detector_mm, "source-detector distance [mm]");
        cmd->add_option("--det-width", config.width, "detector width [px]");
        cmd->add_option("--det-height", config.height, "detector height [px]");
        cmd->add_option(
            "--det-spacing",
            [this](const std::vector<std::string>& vals) {
                const double s = std::stod(vals.at(0));
                config.pixel_spacing = {s, s};
                return true;
            },
            "detector pixel spacing [mm/px]");
    }

    ProjectionGeometry make() const {
        return make_view_geometry(view_label_from_string(view), config);
    }
};

std::string checksum_hex(std::uint64_t checksum) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(checksum));
    return buf;
}

// ---------------------------------------------------------------- phantom --

struct PhantomArgs {
    std::string spec_path;
    std::string preset;
    std::string out;
};

int cmd_phantom(const PhantomArgs& args) {
    PhantomSpec spec;
    if (!args.preset.empty()) {
        try {
            spec = PhantomSpec::preset(args.preset);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else if (!args.spec_path.empty()) {
        const json j = load_json_file(args.spec_path);
        try {
            spec = PhantomSpec::from_json(j);
        } catch (const std::exception& e) {
            throw ConfigError("bad phantom spec: " + std::string(e.what()));
        }
    } else {
        throw ConfigError("phantom needs --spec or --preset");
    }

    Volume vol = [&] {
        try {
            return make_phantom(spec);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();
    save_volume(vol, args.out);

    ordered_json echo;
    echo["command"] = "phantom";
    echo["spec"] = spec.to_json();
    echo["out"] = args.out;
    echo["checksum"] = checksum_hex(data_checksum(vol.data()));
    std::cout << echo.dump(2) << '\n';
    return 0;
}

// ----------------------------------------------------------------- render --

struct RenderArgs {
    std::string volume;
    std::string pose_path;
    GeometryFlags geometry;
    std::string style = "bone";
    double bone_threshold = 0.02;
    double step_mm = 0;
    std::string intensity = "line";
    std::string out;
};

RenderStyle make_style(const std::string& style, double threshold, double step,
                       const std::string& intensity, const Volume& vol) {
    RenderStyle rs = style == "bone" ? RenderStyle::bone_style(threshold, step)
                                     : RenderStyle::realistic(step);
    if (rs.step_mm <= 0) rs.step_mm = default_step(vol);
    rs.intensity = intensity == "exp" ? IntensityMap::exponential : IntensityMap::line_integral;
    return rs;
}

int cmd_render(const RenderArgs& args) {
    const Volume vol = load_volume(args.volume);
    const RigidTransform pose =
        args.pose_path.empty() ? RigidTransform::identity() : load_pose(args.pose_path);
    const ProjectionGeometry geom = args.geometry.make();
    const RenderStyle style =
        make_style(args.style, args.bone_threshold, args.step_mm, args.intensity, vol);

    const Image2D img = render(vol, geom, pose, style);
    const fs::path raw = fs::path(args.out).concat(".raw");
    const fs::path pgm = fs::path(args.out).concat(".pgm");
    save_image(img, raw);
    save_pgm(img, pgm);

    ordered_json echo;
    echo["command"] = "render";
    echo["volume"] = args.volume;
    echo["view"] = args.geometry.view;
    echo["style"] = args.style;
    echo["bone_threshold"] = args.bone_threshold;
    echo["step_mm"] = style.step_mm;
    echo["intensity"] = args.intensity;
    echo["raw"] = raw.string();
    echo["pgm"] = pgm.string();
    echo["checksum"] = checksum_hex(data_checksum(img.data));
    std::cout << echo.dump(2) << '\n';
    return 0;
}

// ------------------------------------------------------------ gen-dataset --

struct GenDatasetArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> volume_specs; // id=path
    std::string preset;
    int n_samples = -1;
    std::int64_t seed = -1;
    std::string views;
    std::vector<double> mtre_range;
    bool no_augment = false;
    double canny_sigma = -1;
    double canny_low = -1;
    double canny_high = -1;
};

int cmd_gen_dataset(const GenDatasetArgs& args) {
    DatasetConfig config;
    if (!args.config_path.empty()) {
        const json j = load_json_file(args.config_path);
        reject_unknown_keys(j,
                            {"n_samples", "views", "augment_fixed", "mtre_range_mm", "seed",
                             "geometry", "isocenter_mm", "canny_sigma_mm", "canny_low",
                             "canny_high", "bone_threshold", "render_step_mm"},
                            "dataset config");
        try {
            config = DatasetConfig::from_json(j);
        } catch (const std::exception& e) {
            throw ConfigError("bad dataset config: " + std::string(e.what()));
        }
    }
    // Flags override the config file.
    if (args.n_samples >= 0) config.n_samples = args.n_samples;
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    if (!args.views.empty()) {
        config.views.clear();
        std::istringstream ss(args.views);
        std::string token;
        while (std::getline(ss, token, ','))
            config.views.push_back(view_label_from_string(token));
    }
    if (!args.mtre_range.empty()) {
        if (args.mtre_range.size() != 2) throw ConfigError("--mtre-range needs lo hi");
        config.mtre_lo_mm = args.mtre_range[0];
        config.mtre_hi_mm = args.mtre_range[1];
    }
    if (args.no_augment) config.augment_fixed = false;
    if (args.canny_sigma > 0) config.canny_sigma_mm = args.canny_sigma;
    if (args.canny_low >= 0) config.canny_low = args.canny_low;
    if (args.canny_high >= 0) config.canny_high = args.canny_high;
    if (!args.out_dir.empty()) config.output_dir = args.out_dir;
    if (config.output_dir.empty()) throw ConfigError("gen-dataset needs --out");
    if (config.n_samples < 1) throw ConfigError("n_samples must be >= 1");

    std::vector<NamedVolume> volumes;
    if (!args.preset.empty()) {
        try {
            volumes.push_back({args.preset, make_phantom(PhantomSpec::preset(args.preset))});
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    for (const auto& spec : args.volume_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("--volume expects id=path");
        volumes.push_back({spec.substr(0, eq), load_volume(spec.substr(eq + 1))});
    }
    if (volumes.empty()) throw ConfigError("gen-dataset needs --preset or --volume");

    const DatasetManifest manifest = generate_dataset(volumes, config);
    std::cout << manifest.config.to_json().dump(2) << '\n';
    std::cout << "manifest: " << (config.output_dir / "manifest.json").string() << '\n';
    std::cout << "samples: " << manifest.samples.size() << '\n';
    return 0;
}

// --------------------------------------------------------------- register --

struct RegisterArgs {
    // Standalone mode.
    std::string volume;
    std::string fixed;
    std::string init_pose;
    GeometryFlags geometry;
    double canny_sigma = 1.0;
    double canny_low = 0.003;
    double canny_high = 0.008;
    // Manifest mode.
    std::string manifest_path;
    std::string sample_id;
    bool all_samples = false;
    std::string results_dir = "results";
    // Shared parameters.
    int iterations = 10;
    double stop_tol_px = 0.1;
    double bone_threshold = 0.02;
    double step_mm = 0;
    int patch_px = 11;
    double search_range_px = 30;
    double search_step_px = 0.5;
    double min_score = 0.3;
    double contour_angle_tol = 20;
    std::size_t contour_max_points = 1024;
    double trust_scale = 2.0;
    int irls_rounds = 2;
    int inner_rounds = 3;
    int ransac_samples = 600;
    std::string out = "result.json";
    std::string overlay;
};

RegistrationParams make_params(const RegisterArgs& args) {
    RegistrationParams params;
    params.max_iterations = args.iterations;
    params.stop_tol_px = args.stop_tol_px;
    params.style = RenderStyle::bone_style(args.bone_threshold, args.step_mm);
    params.correspondence.patch_px = args.patch_px;
    params.correspondence.search_range_px = args.search_range_px;
    params.correspondence.step_px = args.search_step_px;
    params.correspondence.min_score = args.min_score;
    params.contour_angle_tol_deg = args.contour_angle_tol;
    params.contour_max_points = args.contour_max_points;
    params.trust_scale = args.trust_scale;
    params.irls_rounds = args.irls_rounds;
    params.inner_rounds = args.inner_rounds;
    params.ransac_samples = args.ransac_samples;
    return params;
}

ordered_json params_to_json(const RegistrationParams& params) {
    ordered_json j;
    j["max_iterations"] = params.max_iterations;
    j["stop_tol_px"] = params.stop_tol_px;
    j["bone_threshold"] = params.style.bone_threshold;
    j["render_step_mm"] = params.style.step_mm; // 0 means per-volume default
    j["patch_px"] = params.correspondence.patch_px;
    j["search_range_px"] = params.correspondence.search_range_px;
    j["search_step_px"] = params.correspondence.step_px;
    j["min_score"] = params.correspondence.min_score;
    j["contour_angle_tol_deg"] = params.contour_angle_tol_deg;
    j["contour_max_points"] = params.contour_max_points;
    j["trust_scale"] = params.trust_scale;
    j["irls_rounds"] = params.irls_rounds;
    j["inner_rounds"] = params.inner_rounds;
    j["ransac_samples"] = params.ransac_samples;
    j["ransac_tol_mm"] = params.ransac_tol_mm;
    j["solver_truncation"] = params.solver_truncation;
    return j;
}

ordered_json result_to_json(const RegistrationResult& result, const RegistrationParams& params) {
    ordered_json j;
    j["config"] = params_to_json(params);
    j["final_transform"] = transform_to_json(result.final_transform);
    j["converged"] = result.converged;
    j["runtime_ms"] = result.runtime_ms;
    ordered_json iters = ordered_json::array();
    for (const auto& it : result.iterations) {
        ordered_json e;
        const auto dv = it.dv.to_vector();
        e["dv"] = std::vector<double>{dv(0), dv(1), dv(2), dv(3), dv(4), dv(5)};
        e["correspondences"] = it.correspondences;
        e["mean_abs_dp_px"] = it.mean_abs_dp_px;
        e["residual"] = it.residual;
        iters.push_back(e);
    }
    j["iterations"] = iters;
    return j;
}

void write_overlay(const Image2D& fixed, const ContourPointSet& contours,
                   const ProjectionGeometry& geom, const RigidTransform& pose,
                   const fs::path& path) {
    Image2D overlay = fixed;
    const float mark = *std::max_element(fixed.data.begin(), fixed.data.end()) * 1.2f + 1.0f;
    for (const auto& pt : contours.points) {
        try {
            const Eigen::Vector2d px = project(pose.apply(pt.position), geom);
            const int u = static_cast<int>(std::lround(px.x()));
            const int v = static_cast<int>(std::lround(px.y()));
            if (u >= 0 && v >= 0 && u < overlay.width && v < overlay.height)
                overlay.at(u, v) = mark;
        } catch (const std::exception&) {
            continue; // points projecting outside stay invisible
        }
    }
    save_pgm(overlay, path);
}

int register_one(const Volume& vol, const ContourPointSet& contours, const Image2D& fixed,
                 const RigidTransform& t_init, const ProjectionGeometry& geom,
                 const RegistrationParams& params, const fs::path& out,
                 const std::string& overlay_base) {
    const RegistrationResult result =
        run_registration(vol, contours, fixed, t_init, geom, params);
    write_json_file(result_to_json(result, params), out);
    if (!overlay_base.empty()) {
        write_overlay(fixed, contours, geom, t_init, overlay_base + "_before.pgm");
        write_overlay(fixed, contours, geom, result.final_transform, overlay_base + "_after.pgm");
    }
    std::cout << "result: " << out.string() << " converged: " << (result.converged ? "yes" : "no")
              << " iterations: " << result.iterations.size() << '\n';
    return 0;
}

int cmd_register(const RegisterArgs& args) {
    const RegistrationParams params = make_params(args);

    if (!args.manifest_path.empty()) {
        const DatasetManifest manifest = DatasetManifest::load(args.manifest_path);
        const fs::path base = fs::path(args.manifest_path).parent_path();

        std::vector<const SampleRecord*> todo;
        for (const auto& s : manifest.samples)
            if (args.all_samples || s.id == args.sample_id) todo.push_back(&s);
        if (todo.empty())
            throw ConfigError(args.all_samples
                                  ? "manifest has no samples"
                                  : "sample '" + args.sample_id + "' not found in manifest");

        fs::create_directories(args.results_dir);
        // Volumes and contours are shared across samples; load once.
        std::map<std::string, Volume> volumes;
        std::map<std::string, ContourPointSet> contours;
        for (const auto& v : manifest.volumes) {
            volumes.emplace(v.id, load_volume(base / v.volume_file));
            contours.emplace(v.id, load_contours_csv(base / v.contours_file));
        }

        int failures = 0;
        for (const SampleRecord* s : todo) {
            const ProjectionGeometry geom =
                make_view_geometry(s->view, manifest.config.geometry, manifest.config.isocenter);
            const Image2D fixed = load_image(base / s->fixed_image);
            const fs::path out = fs::path(args.results_dir) / (s->id + ".json");
            try {
                register_one(volumes.at(s->volume_id), contours.at(s->volume_id), fixed, s->t_j,
                             geom, params, out, args.overlay);
            } catch (const std::exception& e) {
                // Record the failure so evaluate can count it against SR.
                ordered_json j;
                j["config"] = params_to_json(params);
                j["error"] = e.what();
                write_json_file(j, out);
                std::cerr << "sample " << s->id << " failed: " << e.what() << '\n';
                ++failures;
            }
        }
        if (!args.all_samples && failures > 0) return 1;
        std::cout << "registered " << (todo.size() - static_cast<std::size_t>(failures)) << "/"
                  << todo.size() << " samples\n";
        return 0;
    }

    if (args.volume.empty() || args.fixed.empty())
        throw ConfigError("register needs --manifest or both --volume and --fixed");
    const Volume vol = load_volume(args.volume);
    const Image2D fixed = load_image(args.fixed);
    const RigidTransform t_init =
        args.init_pose.empty() ? RigidTransform::identity() : load_pose(args.init_pose);
    const ProjectionGeometry geom = args.geometry.make();
    const ContourPointSet all = canny3d(vol, args.canny_sigma, args.canny_low, args.canny_high);
    return register_one(vol, all, fixed, t_init, geom, params, args.out, args.overlay);
}

// --------------------------------------------------------------- evaluate --

struct EvaluateArgs {
    std::string manifest_path;
    std::string results_dir;
    std::string out_dir = "report";
    double threshold = 5.0;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const DatasetManifest manifest = DatasetManifest::load(args.manifest_path);
    const fs::path base = fs::path(args.manifest_path).parent_path();
    if (!fs::is_directory(args.results_dir))
        throw ConfigError("results directory '" + args.results_dir + "' does not exist");

    std::map<std::string, std::vector<Eigen::Vector3d>> targets;
    for (const auto& v : manifest.volumes) {
        const ContourPointSet set = load_contours_csv(base / v.contours_file);
        std::vector<Eigen::Vector3d> pts;
        for (const auto& p : set.points) pts.push_back(p.position);
        targets.emplace(v.id, std::move(pts));
    }

    std::vector<EvaluationRecord> records;
    std::size_t found = 0;
    for (const auto& s : manifest.samples) {
        EvaluationRecord rec;
        rec.sample_id = s.id;
        rec.mtre_init_mm = s.mtre_init_mm;
        rec.mrpd_final_mm = std::numeric_limits<double>::infinity();

        const fs::path result_path = fs::path(args.results_dir) / (s.id + ".json");
        if (fs::exists(result_path)) {
            ++found;
            const json j = load_json_file(result_path);
            if (j.contains("final_transform")) {
                const RigidTransform t_final = transform_from_json(j.at("final_transform"));
                const ProjectionGeometry geom = make_view_geometry(
                    s.view, manifest.config.geometry, manifest.config.isocenter);
                rec.mrpd_final_mm = mrpd(t_final, s.t_i, targets.at(s.volume_id), geom);
                rec.iterations = static_cast<int>(j.value("iterations", json::array()).size());
                rec.runtime_ms = j.value("runtime_ms", 0.0);
            }
        } else {
            std::cerr << "missing result for sample " << s.id << ", counted as failure\n";
        }
        rec.success = rec.mrpd_final_mm <= args.threshold;
        records.push_back(rec);
    }
    if (found == 0) throw ConfigError("no result files found in '" + args.results_dir + "'");

    fs::create_directories(args.out_dir);
    const ReportPaths paths{fs::path(args.out_dir) / "records.csv",
                            fs::path(args.out_dir) / "summary.json",
                            fs::path(args.out_dir) / "ecdf.csv"};
    export_report(records, paths, args.threshold);

    const SuccessSummary summary = success_ratio(records, args.threshold);
    ordered_json echo;
    echo["command"] = "evaluate";
    echo["threshold_mm"] = args.threshold;
    echo["n_samples"] = summary.n;
    echo["success_ratio"] = summary.ratio;
    echo["mrpd_success_mean_mm"] = summary.mean_success_mm;
    echo["mrpd_success_std_mm"] = summary.std_success_mm;
    echo["report_dir"] = args.out_dir;
    std::cout << echo.dump(2) << '\n';
    return 0;
}

// ----------------------------------------------------------- loss-selftest --

int cmd_loss_selftest(const std::string& fixtures_path) {
    const json j = load_json_file(fixtures_path);

    const auto points_from = [](const json& arr) {
        std::vector<Eigen::Vector3d> pts;
        for (const auto& p : arr)
            pts.push_back(Eigen::Vector3d(p.at(0).get<double>(), p.at(1).get<double>(),
                                          p.at(2).get<double>()));
        return pts;
    };

    const auto& reg = j.at("registration");
    const double l_reg = registration_loss(transform_from_json(reg.at("T")),
                                           transform_from_json(reg.at("T_hat")),
                                           points_from(reg.at("points")));
    std::printf("registration_loss = %.12f\n", l_reg);

    const auto& m = j.at("motion");
    MotionVector dv;
    dv.rotation = Eigen::Vector3d(m.at(0).get<double>(), m.at(1).get<double>(),
                                  m.at(2).get<double>());
    dv.translation = Eigen::Vector3d(m.at(3).get<double>(), m.at(4).get<double>(),
                                     m.at(5).get<double>());
    const double l_m = motion_reg_loss(dv);
    std::printf("motion_reg_loss = %.12f\n", l_m);

    const auto& flow = j.at("flow");
    std::vector<Eigen::Vector2d> pred, gt;
    std::vector<std::uint8_t> valid;
    for (const auto& p : flow.at("pred"))
        pred.push_back(Eigen::Vector2d(p.at(0).get<double>(), p.at(1).get<double>()));
    for (const auto& p : flow.at("gt"))
        gt.push_back(Eigen::Vector2d(p.at(0).get<double>(), p.at(1).get<double>()));
    for (const auto& v : flow.at("valid")) valid.push_back(v.get<std::uint8_t>());
    const double l_flow = flow_loss(pred, gt, valid);
    std::printf("flow_loss = %.12f\n", l_flow);

    std::printf("dirn_loss = %.12f\n", dirn_loss(l_reg, l_flow, l_m));

    const auto& bt = j.at("barlow_twins");
    const auto matrix_from = [](const json& rows) {
        Eigen::MatrixXd m_(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(rows.at(0).size()));
        for (Eigen::Index r = 0; r < m_.rows(); ++r)
            for (Eigen::Index c = 0; c < m_.cols(); ++c)
                m_(r, c) = rows.at(static_cast<std::size_t>(r))
                               .at(static_cast<std::size_t>(c))
                               .get<double>();
        return m_;
    };
    EmbeddingBatch z1{matrix_from(bt.at("z1"))};
    EmbeddingBatch z2{matrix_from(bt.at("z2"))};
    const double l_bt = barlow_twins_loss(z1, z2, bt.value("w_red", 0.005));
    std::printf("barlow_twins_loss = %.12f\n", l_bt);

    const auto& adv = j.at("adversarial");
    const double l_afe = adversarial_feature_loss(
        DiscriminatorOutput(adv.at("sim").get<std::vector<double>>(),
                            DiscriminatorOutput::Domain::sim),
        DiscriminatorOutput(adv.at("real").get<std::vector<double>>(),
                            DiscriminatorOutput::Domain::real));
    std::printf("adversarial_feature_loss = %.12f\n", l_afe);

    std::printf("total_loss = %.12f\n", total_loss(dirn_loss(l_reg, l_flow, l_m), l_afe, l_bt));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DRR rendering and PPC-based 2D/3D rigid registration toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "cap kernel parallelism (PPCREG_THREADS)");

    PhantomArgs phantom_args;
    CLI::App* phantom = app.add_subcommand("phantom", "generate a synthetic phantom volume");
    phantom->add_option("--spec", phantom_args.spec_path, "phantom spec JSON");
    phantom->add_option("--preset", phantom_args.preset, "built-in preset name");
    phantom->add_option("--out", phantom_args.out, "output volume file")->required();

    RenderArgs render_args;
    CLI::App* render_cmd = app.add_subcommand("render", "render a DRR from a volume");
    render_cmd->add_option("--volume", render_args.volume, "input volume")->required();
    render_cmd->add_option("--pose", render_args.pose_path, "pose JSON (4x4 row-major)");
    render_args.geometry.attach(render_cmd);
    render_cmd->add_option("--style", render_args.style, "bone or realistic")
        ->check(CLI::IsMember({"bone", "realistic"}));
    render_cmd->add_option("--bone-threshold", render_args.bone_threshold,
                           "attenuation threshold for the bone style [mm^-1]");
    render_cmd->add_option("--step", render_args.step_mm,
                           "quadrature step [mm], 0 = half min voxel spacing");
    render_cmd->add_option("--intensity", render_args.intensity, "line or exp")
        ->check(CLI::IsMember({"line", "exp"}));
    render_cmd->add_option("--out", render_args.out, "output base path (.raw/.pgm)")->required();

    GenDatasetArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-dataset", "generate a self-supervised dataset");
    gen->add_option("--config", gen_args.config_path, "dataset config JSON");
    gen->add_option("--out", gen_args.out_dir, "output directory");
    gen->add_option("--volume", gen_args.volume_specs, "volume as id=path (repeatable)");
    gen->add_option("--preset", gen_args.preset, "phantom preset used as the volume");
    gen->add_option("--n", gen_args.n_samples, "number of samples");
    gen->add_option("--seed", gen_args.seed, "master seed");
    gen->add_option("--views", gen_args.views, "comma list: AP,LAT,random");
    gen->add_option("--mtre-range", gen_args.mtre_range, "initial error range lo hi [mm]")
        ->expected(2);
    gen->add_flag("--no-augment", gen_args.no_augment, "disable fixed-image augmentation");
    gen->add_option("--canny-sigma", gen_args.canny_sigma, "contour smoothing scale [mm]");
    gen->add_option("--canny-low", gen_args.canny_low, "hysteresis low threshold");
    gen->add_option("--canny-high", gen_args.canny_high, "hysteresis high threshold");

    RegisterArgs reg_args;
    CLI::App* reg = app.add_subcommand("register", "run iterative PPC registration");
    reg->add_option("--volume", reg_args.volume, "moving volume");
    reg->add_option("--fixed", reg_args.fixed, "fixed image");
    reg->add_option("--init", reg_args.init_pose, "initial pose JSON");
    reg_args.geometry.attach(reg);
    reg->add_option("--canny-sigma", reg_args.canny_sigma, "contour smoothing scale [mm]");
    reg->add_option("--canny-low", reg_args.canny_low, "hysteresis low threshold");
    reg->add_option("--canny-high", reg_args.canny_high, "hysteresis high threshold");
    reg->add_option("--manifest", reg_args.manifest_path, "dataset manifest");
    reg->add_option("--sample", reg_args.sample_id, "sample id within the manifest");
    reg->add_flag("--all", reg_args.all_samples, "register every sample in the manifest");
    reg->add_option("--results-dir", reg_args.results_dir, "per-sample result directory");
    reg->add_option("--iterations", reg_args.iterations, "iteration budget");
    reg->add_option("--stop-tol", reg_args.stop_tol_px, "early-stop mean |dp| [px]");
    reg->add_option("--bone-threshold", reg_args.bone_threshold, "bone style threshold");
    reg->add_option("--step", reg_args.step_mm, "render quadrature step [mm]");
    reg->add_option("--patch", reg_args.patch_px, "NCC patch size [px]");
    reg->add_option("--search-range", reg_args.search_range_px, "NCC search range [px]");
    reg->add_option("--search-step", reg_args.search_step_px, "NCC search step [px]");
    reg->add_option("--min-score", reg_args.min_score, "NCC acceptance threshold");
    reg->add_option("--angle-tol", reg_args.contour_angle_tol,
                    "apparent-contour tolerance [deg]");
    reg->add_option("--max-points", reg_args.contour_max_points, "contour subsample size");
    reg->add_option("--trust-scale", reg_args.trust_scale, "update cap vs measured |dp| (0 off)");
    reg->add_option("--irls-rounds", reg_args.irls_rounds, "robust reweighting rounds");
    reg->add_option("--inner-rounds", reg_args.inner_rounds, "Gauss-Newton rounds per render");
    reg->add_option("--ransac-samples", reg_args.ransac_samples,
                    "consensus hypotheses per iteration (0 off)");
    reg->add_option("--out", reg_args.out, "result JSON path (standalone mode)");
    reg->add_option("--overlay", reg_args.overlay, "overlay PGM base path");

    EvaluateArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate registration results");
    eval_cmd->add_option("--manifest", eval_args.manifest_path, "dataset manifest")->required();
    eval_cmd->add_option("--results", eval_args.results_dir, "directory of result JSONs")
        ->required();
    eval_cmd->add_option("--out", eval_args.out_dir, "report output directory");
    eval_cmd->add_option("--threshold", eval_args.threshold, "success threshold [mm]");

    std::string fixtures_path = "fixtures/loss_fixtures.json";
    CLI::App* selftest = app.add_subcommand("loss-selftest", "print loss kernels on fixtures");
    selftest->add_option("--fixtures", fixtures_path, "fixtures JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads > 0) set_max_threads(threads);

    try {
        if (*phantom) return cmd_phantom(phantom_args);
        if (*render_cmd) return cmd_render(render_args);
        if (*gen) return cmd_gen_dataset(gen_args);
        if (*reg) return cmd_register(reg_args);
        if (*eval_cmd) return cmd_evaluate(eval_args);
        if (*selftest) return cmd_loss_selftest(fixtures_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
