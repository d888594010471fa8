#include "ppcreg/simlab.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ppcreg/drr.hpp"
#include "ppcreg/errors.hpp"
#include "ppcreg/eval.hpp"

namespace ppcreg {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
} // namespace

std::string to_string(ViewLabel v) {
    switch (v) {
    case ViewLabel::ap: return "AP";
    case ViewLabel::lat: return "LAT";
    case ViewLabel::random: return "random";
    }
    return "AP";
}

ViewLabel view_label_from_string(const std::string& s) {
    if (s == "AP" || s == "ap") return ViewLabel::ap;
    if (s == "LAT" || s == "lat") return ViewLabel::lat;
    if (s == "random") return ViewLabel::random;
    throw std::invalid_argument("unknown view label '" + s + "'");
}

nlohmann::ordered_json GeometryConfig::to_json() const {
    nlohmann::ordered_json j;
    j["source_isocenter_mm"] = source_isocenter_mm;
    j["source_detector_mm"] = source_detector_mm;
    j["width"] = width;
    j["height"] = height;
    j["pixel_spacing_mm"] = {pixel_spacing.x(), pixel_spacing.y()};
    return j;
}

GeometryConfig GeometryConfig::from_json(const nlohmann::json& j) {
    GeometryConfig g;
    g.source_isocenter_mm = j.at("source_isocenter_mm").get<double>();
    g.source_detector_mm = j.at("source_detector_mm").get<double>();
    g.width = j.at("width").get<int>();
    g.height = j.at("height").get<int>();
    g.pixel_spacing = {j.at("pixel_spacing_mm").at(0).get<double>(),
                       j.at("pixel_spacing_mm").at(1).get<double>()};
    return g;
}

ProjectionGeometry make_view_geometry(ViewLabel view, const GeometryConfig& cfg,
                                      const Eigen::Vector3d& isocenter) {
    if (!(cfg.source_detector_mm > cfg.source_isocenter_mm) || !(cfg.source_isocenter_mm > 0))
        throw std::invalid_argument("geometry requires 0 < SAD < SDD");

    Eigen::Vector3d dir, row, col;
    if (view == ViewLabel::lat) {
        dir = Eigen::Vector3d::UnitX();
        row = Eigen::Vector3d::UnitY();
        col = Eigen::Vector3d::UnitZ();
    } else { // AP, also the base geometry of random views
        dir = Eigen::Vector3d::UnitY();
        row = Eigen::Vector3d::UnitX();
        col = Eigen::Vector3d::UnitZ();
    }

    ProjectionGeometry geom;
    geom.source = isocenter - cfg.source_isocenter_mm * dir;
    geom.row_axis = row;
    geom.col_axis = col;
    geom.pixel_spacing = cfg.pixel_spacing;
    geom.width = cfg.width;
    geom.height = cfg.height;

    const Eigen::Vector3d center =
        geom.source + cfg.source_detector_mm * dir; // detector center on the principal ray
    geom.detector_origin = center - 0.5 * (cfg.width - 1) * cfg.pixel_spacing.x() * row -
                           0.5 * (cfg.height - 1) * cfg.pixel_spacing.y() * col;
    geom.validate();
    return geom;
}

RigidTransform sample_initial_transform(Rng& rng, const RigidTransform& t_ref,
                                        std::span<const Eigen::Vector3d> targets, double lo_mm,
                                        double hi_mm, const Eigen::Vector3d& isocenter) {
    if (lo_mm < 0 || hi_mm < lo_mm) throw std::invalid_argument("bad mTRE range");
    if (targets.empty()) throw std::invalid_argument("perturbation sampling needs targets");

    const double target = uniform_range(rng, lo_mm, hi_mm);

    // Random 6-dof direction: a rotation axis and a translation direction,
    // mixed at the fixed ratio of 1 degree per 1 mm. At magnitude s the
    // perturbation rotates s degrees about the axis (through the isocenter)
    // and translates s mm.
    Eigen::Vector3d axis(normal01(rng), normal01(rng), normal01(rng));
    if (axis.norm() < 1e-12) axis = Eigen::Vector3d::UnitX();
    axis.normalize();
    Eigen::Vector3d trans_dir(normal01(rng), normal01(rng), normal01(rng));
    if (trans_dir.norm() < 1e-12) trans_dir = Eigen::Vector3d::UnitY();
    trans_dir.normalize();

    if (target <= 1e-9) return t_ref;

    // Rotation saturates at 170 degrees (rigid rotations cannot displace
    // points further and the axis-angle branch sits at 180), so only the
    // translation part keeps growing for very large magnitudes; the error
    // stays monotone in s either way.
    const double angle_cap_deg = 170.0;
    auto perturbed = [&](double s) {
        MotionVector rot_only;
        rot_only.rotation = axis * (std::min(s, angle_cap_deg) * kDegToRad);
        const RigidTransform r = exp_motion(rot_only);
        RigidTransform delta;
        delta.rotation = r.rotation;
        // Rotate about the isocenter, then translate.
        delta.translation = isocenter - r.rotation * isocenter + s * trans_dir;
        return compose(delta, t_ref);
    };
    auto error_at = [&](double s) { return mtre(t_ref, perturbed(s), targets); };

    double s_hi = std::max(1.0, target);
    while (error_at(s_hi) < target) {
        s_hi *= 2.0;
        if (s_hi > 1e7)
            throw SamplingError("cannot bracket the requested mTRE of " +
                                std::to_string(target) + " mm");
    }

    double lo = 0.0, hi = s_hi;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double err = error_at(mid);
        if (std::abs(err - target) <= 0.1) return perturbed(mid);
        (err < target ? lo : hi) = mid;
    }
    throw SamplingError("mTRE bisection failed to converge to " + std::to_string(target) +
                        " mm");
}

nlohmann::ordered_json transform_to_json(const RigidTransform& t) {
    const auto m = t.to_matrix4_row_major();
    return nlohmann::ordered_json(m);
}

RigidTransform transform_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 16)
        throw std::invalid_argument("transform must be a row-major 4x4 array of 16 numbers");
    std::array<double, 16> m{};
    for (std::size_t i = 0; i < 16; ++i) m[i] = j.at(i).get<double>();
    return RigidTransform::from_matrix4_row_major(m);
}

nlohmann::ordered_json augmentation_to_json(const StyleAugmentation& a) {
    nlohmann::ordered_json j;
    j["gamma"] = a.gamma;
    j["brightness"] = a.brightness;
    j["invert"] = a.invert;
    j["noise_sigma"] = a.noise_sigma;
    j["seed"] = a.seed;
    return j;
}

StyleAugmentation augmentation_from_json(const nlohmann::json& j) {
    StyleAugmentation a;
    a.gamma = j.at("gamma").get<double>();
    a.brightness = j.at("brightness").get<double>();
    a.invert = j.at("invert").get<bool>();
    a.noise_sigma = j.at("noise_sigma").get<double>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.validate();
    return a;
}

nlohmann::ordered_json DatasetConfig::to_json() const {
    nlohmann::ordered_json j;
    j["n_samples"] = n_samples;
    nlohmann::ordered_json views_json = nlohmann::ordered_json::array();
    for (auto v : views) views_json.push_back(to_string(v));
    j["views"] = views_json;
    j["augment_fixed"] = augment_fixed;
    j["mtre_range_mm"] = {mtre_lo_mm, mtre_hi_mm};
    j["seed"] = seed;
    j["geometry"] = geometry.to_json();
    j["isocenter_mm"] = {isocenter.x(), isocenter.y(), isocenter.z()};
    j["canny_sigma_mm"] = canny_sigma_mm;
    j["canny_low"] = canny_low;
    j["canny_high"] = canny_high;
    j["bone_threshold"] = bone_threshold;
    j["render_step_mm"] = render_step_mm;
    return j;
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
    DatasetConfig c;
    c.n_samples = j.at("n_samples").get<int>();
    c.views.clear();
    for (const auto& v : j.at("views")) c.views.push_back(view_label_from_string(v.get<std::string>()));
    c.augment_fixed = j.at("augment_fixed").get<bool>();
    c.mtre_lo_mm = j.at("mtre_range_mm").at(0).get<double>();
    c.mtre_hi_mm = j.at("mtre_range_mm").at(1).get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.geometry = GeometryConfig::from_json(j.at("geometry"));
    c.isocenter = {j.at("isocenter_mm").at(0).get<double>(),
                   j.at("isocenter_mm").at(1).get<double>(),
                   j.at("isocenter_mm").at(2).get<double>()};
    c.canny_sigma_mm = j.at("canny_sigma_mm").get<double>();
    c.canny_low = j.at("canny_low").get<double>();
    c.canny_high = j.at("canny_high").get<double>();
    c.bone_threshold = j.at("bone_threshold").get<double>();
    c.render_step_mm = j.at("render_step_mm").get<double>();
    return c;
}

nlohmann::ordered_json DatasetManifest::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = schema_version;
    j["config"] = config.to_json();
    // Perturbations are drawn in the camera/world frame (left-composed onto
    // the reference pose); recorded so downstream users interpret T_j right.
    j["perturbation_frame"] = "camera";

    nlohmann::ordered_json vols = nlohmann::ordered_json::array();
    for (const auto& v : volumes) {
        nlohmann::ordered_json e;
        e["id"] = v.id;
        e["volume_file"] = v.volume_file;
        e["contours_file"] = v.contours_file;
        vols.push_back(e);
    }
    j["volumes"] = vols;

    nlohmann::ordered_json samples_json = nlohmann::ordered_json::array();
    for (const auto& s : samples) {
        nlohmann::ordered_json e;
        e["id"] = s.id;
        e["volume"] = s.volume_id;
        e["view"] = to_string(s.view);
        e["T_i"] = transform_to_json(s.t_i);
        e["T_j"] = transform_to_json(s.t_j);
        e["T_hat"] = transform_to_json(s.t_hat);
        e["mtre_init_mm"] = s.mtre_init_mm;
        e["fixed_style"] = to_string(s.fixed_style);
        e["augmentation"] = s.augmentation ? augmentation_to_json(*s.augmentation)
                                           : nlohmann::ordered_json(nullptr);
        e["moving_style"] = to_string(s.moving_style);
        e["fixed_image"] = s.fixed_image;
        samples_json.push_back(e);
    }
    j["samples"] = samples_json;
    return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != 1)
        throw FormatError("unsupported manifest schema version " +
                          std::to_string(m.schema_version));
    m.config = DatasetConfig::from_json(j.at("config"));
    for (const auto& v : j.at("volumes")) {
        VolumeEntry e;
        e.id = v.at("id").get<std::string>();
        e.volume_file = v.at("volume_file").get<std::string>();
        e.contours_file = v.at("contours_file").get<std::string>();
        m.volumes.push_back(e);
    }
    for (const auto& s : j.at("samples")) {
        SampleRecord r;
        r.id = s.at("id").get<std::string>();
        r.volume_id = s.at("volume").get<std::string>();
        r.view = view_label_from_string(s.at("view").get<std::string>());
        r.t_i = transform_from_json(s.at("T_i"));
        r.t_j = transform_from_json(s.at("T_j"));
        r.t_hat = transform_from_json(s.at("T_hat"));
        r.mtre_init_mm = s.at("mtre_init_mm").get<double>();
        r.fixed_style = image_style_from_string(s.at("fixed_style").get<std::string>());
        if (!s.at("augmentation").is_null())
            r.augmentation = augmentation_from_json(s.at("augmentation"));
        r.moving_style = image_style_from_string(s.at("moving_style").get<std::string>());
        r.fixed_image = s.at("fixed_image").get<std::string>();
        m.samples.push_back(r);
    }
    return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << to_json().dump(2) << '\n';
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest parse error: " + std::string(e.what()));
    }
    return from_json(j);
}

namespace {

/// Reference pose of a sample: identity for AP/LAT (the view lives in the
/// geometry), a random rotation about the isocenter for random views.
RigidTransform base_pose(ViewLabel view, Rng& rng, const Eigen::Vector3d& isocenter) {
    if (view != ViewLabel::random) return RigidTransform::identity();

    Eigen::Vector3d axis(normal01(rng), normal01(rng), normal01(rng));
    if (axis.norm() < 1e-12) axis = Eigen::Vector3d::UnitZ();
    axis.normalize();
    const double angle = uniform_range(rng, 0.0, 150.0 * kDegToRad);

    MotionVector mv;
    mv.rotation = axis * angle;
    RigidTransform t = exp_motion(mv);
    t.translation = isocenter - t.rotation * isocenter;
    return t;
}

std::string sample_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%05d", index);
    return buf;
}

} // namespace

DatasetManifest generate_dataset(const std::vector<NamedVolume>& volumes,
                                 const DatasetConfig& config) {
    if (volumes.empty()) throw std::invalid_argument("dataset generation needs >= 1 volume");
    if (config.n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    if (config.views.empty()) throw std::invalid_argument("dataset needs >= 1 view");
    if (config.output_dir.empty()) throw std::invalid_argument("output directory not set");

    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir / "volumes");
    fs::create_directories(config.output_dir / "contours");
    fs::create_directories(config.output_dir / "images");

    DatasetManifest manifest;
    manifest.config = config;

    // Volumes and their contour targets, written once.
    std::vector<ContourPointSet> contours;
    std::vector<std::vector<Eigen::Vector3d>> targets;
    for (const auto& nv : volumes) {
        VolumeEntry entry;
        entry.id = nv.id;
        entry.volume_file = "volumes/" + nv.id + ".raw";
        entry.contours_file = "contours/" + nv.id + ".csv";
        save_volume(nv.volume, config.output_dir / entry.volume_file);

        ContourPointSet set =
            canny3d(nv.volume, config.canny_sigma_mm, config.canny_low, config.canny_high);
        if (set.points.empty())
            throw std::invalid_argument("volume '" + nv.id +
                                        "' produced no contour points; lower the canny "
                                        "thresholds or check the attenuation scale");
        set.volume_id = nv.id;
        save_contours_csv(set, config.output_dir / entry.contours_file);

        std::vector<Eigen::Vector3d> pts;
        pts.reserve(set.points.size());
        for (const auto& p : set.points) pts.push_back(p.position);
        targets.push_back(std::move(pts));
        contours.push_back(std::move(set));
        manifest.volumes.push_back(entry);
    }

    for (int k = 0; k < config.n_samples; ++k) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(k)));
        const std::size_t vol_idx = static_cast<std::size_t>(k) % volumes.size();
        const NamedVolume& nv = volumes[vol_idx];
        const ViewLabel view = config.views[static_cast<std::size_t>(k) % config.views.size()];
        const ProjectionGeometry geom =
            make_view_geometry(view, config.geometry, config.isocenter);

        SampleRecord rec;
        rec.id = sample_name(k);
        rec.volume_id = nv.id;
        rec.view = view;
        rec.t_i = base_pose(view, rng, config.isocenter);
        rec.t_j = sample_initial_transform(rng, rec.t_i, targets[vol_idx], config.mtre_lo_mm,
                                           config.mtre_hi_mm, config.isocenter);
        rec.t_hat = relative_transform(rec.t_i, rec.t_j);
        rec.mtre_init_mm = mtre(rec.t_i, rec.t_j, targets[vol_idx]);
        rec.moving_style = ImageStyle::bone;

        const double step =
            config.render_step_mm > 0 ? config.render_step_mm : default_step(nv.volume);
        Image2D fixed =
            render(nv.volume, geom, rec.t_i, RenderStyle::bone_style(config.bone_threshold, step));
        if (config.augment_fixed) {
            const StyleAugmentation aug = sample_augmentation(rng());
            fixed = apply_augmentation(fixed, aug);
            rec.augmentation = aug;
            rec.fixed_style = ImageStyle::augmented;
        } else {
            rec.fixed_style = ImageStyle::bone;
        }

        rec.fixed_image = "images/" + rec.id + "_fixed.raw";
        save_image(fixed, config.output_dir / rec.fixed_image);
        manifest.samples.push_back(rec);
    }

    manifest.save(config.output_dir / "manifest.json");
    return manifest;
}

} // namespace ppcreg
