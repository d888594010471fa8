#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppcreg/augment.hpp"
#include "ppcreg/contour.hpp"
#include "ppcreg/geometry.hpp"
#include "ppcreg/rng.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

enum class ViewLabel { ap, lat, random };

std::string to_string(ViewLabel v);
ViewLabel view_label_from_string(const std::string& s);

/// C-arm acquisition parameters shared by all samples of a dataset.
struct GeometryConfig {
    double source_isocenter_mm = 750;
    double source_detector_mm = 1200;
    int width = 256;
    int height = 256;
    Eigen::Vector2d pixel_spacing = Eigen::Vector2d(1.6, 1.6);

    nlohmann::ordered_json to_json() const;
    static GeometryConfig from_json(const nlohmann::json& j);
};

/// AP: detector normal along +y; LAT: along +x. The detector center sits on
/// the source-isocenter line; `random` views reuse the AP geometry and move
/// the volume pose instead.
ProjectionGeometry make_view_geometry(ViewLabel view, const GeometryConfig& cfg,
                                      const Eigen::Vector3d& isocenter = Eigen::Vector3d::Zero());

/// Perturbation of t_ref with a requested mTRE drawn uniformly in
/// [lo_mm, hi_mm]: a random 6-dof direction (1 deg : 1 mm mixing, rotation
/// about the isocenter) scaled by bisection until the recomputed mTRE over
/// the targets matches within 0.1 mm.
RigidTransform sample_initial_transform(Rng& rng, const RigidTransform& t_ref,
                                        std::span<const Eigen::Vector3d> targets, double lo_mm,
                                        double hi_mm,
                                        const Eigen::Vector3d& isocenter = Eigen::Vector3d::Zero());

struct DatasetConfig {
    int n_samples = 2000;
    std::vector<ViewLabel> views = {ViewLabel::ap, ViewLabel::lat};
    bool augment_fixed = true;
    double mtre_lo_mm = 0;
    double mtre_hi_mm = 30;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    GeometryConfig geometry;
    Eigen::Vector3d isocenter = Eigen::Vector3d::Zero();
    double canny_sigma_mm = 1.0;
    double canny_low = 0.003;
    double canny_high = 0.008;
    double bone_threshold = 0.02;
    double render_step_mm = 0; // <= 0: default_step(volume)

    nlohmann::ordered_json to_json() const;
    static DatasetConfig from_json(const nlohmann::json& j);
};

/// One self-supervised training/test sample: fixed image rendered at t_i,
/// moving volume starts at t_j, ground truth registration t_hat maps t_j
/// onto t_i.
struct SampleRecord {
    std::string id;
    std::string volume_id;
    RigidTransform t_i;
    RigidTransform t_j;
    RigidTransform t_hat;
    double mtre_init_mm = 0;
    ImageStyle fixed_style = ImageStyle::bone;
    std::optional<StyleAugmentation> augmentation;
    ImageStyle moving_style = ImageStyle::bone;
    ViewLabel view = ViewLabel::ap;
    std::string fixed_image; // relative path
};

struct VolumeEntry {
    std::string id;
    std::string volume_file;   // relative path
    std::string contours_file; // relative path
};

struct DatasetManifest {
    int schema_version = 1;
    DatasetConfig config;
    std::vector<VolumeEntry> volumes;
    std::vector<SampleRecord> samples;

    nlohmann::ordered_json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);

    void save(const std::filesystem::path& path) const;
    static DatasetManifest load(const std::filesystem::path& path);
};

struct NamedVolume {
    std::string id;
    Volume volume;
};

/// Renders and writes the whole dataset under config.output_dir (volumes/,
/// contours/, images/, manifest.json). Deterministic: per-sample streams are
/// derived from (seed, index), so outputs are byte-identical across runs and
/// thread counts.
DatasetManifest generate_dataset(const std::vector<NamedVolume>& volumes,
                                 const DatasetConfig& config);

/// JSON helpers shared by the manifest and the CLI.
nlohmann::ordered_json transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& j);
nlohmann::ordered_json augmentation_to_json(const StyleAugmentation& a);
StyleAugmentation augmentation_from_json(const nlohmann::json& j);

} // namespace ppcreg
