#include "ppcreg/contour.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ppcreg/errors.hpp"
#include "ppcreg/parallel.hpp"
#include "ppcreg/rng.hpp"

namespace ppcreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> gaussian_kernel(double sigma_vox, int radius) {
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma_vox * sigma_vox));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (auto& w : k) w /= sum;
    return k;
}

/// Separable smoothing pass along one axis. Border handling: the kernel is
/// renormalized over in-grid taps (no implicit zero padding of the volume).
void smooth_axis(std::vector<float>& data, const std::array<int, 3>& dims, int axis,
                 const std::vector<double>& kernel) {
    const int radius = (static_cast<int>(kernel.size()) - 1) / 2;
    const int nx = dims[0], ny = dims[1];
    const std::size_t sx = 1, sy = static_cast<std::size_t>(nx),
                      sz = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    const std::size_t stride = axis == 0 ? sx : (axis == 1 ? sy : sz);
    const int n_axis = dims[static_cast<std::size_t>(axis)];

    std::vector<float> out(data.size());
    // Iterate over lines perpendicular to `axis`; parallel over the slowest
    // remaining dimension.
    const int la = axis == 0 ? 1 : 0;
    const int lb = axis == 2 ? 1 : 2;
    const int na = dims[static_cast<std::size_t>(la)], nb = dims[static_cast<std::size_t>(lb)];
    const std::size_t stride_a = la == 0 ? sx : (la == 1 ? sy : sz);
    const std::size_t stride_b = lb == 0 ? sx : (lb == 1 ? sy : sz);

    parallel_for(static_cast<std::size_t>(nb), [&](std::size_t b_begin, std::size_t b_end) {
        for (std::size_t b = b_begin; b < b_end; ++b) {
            for (int a = 0; a < na; ++a) {
                const std::size_t line = b * stride_b + static_cast<std::size_t>(a) * stride_a;
                for (int i = 0; i < n_axis; ++i) {
                    double acc = 0.0, wsum = 0.0;
                    const int lo = std::max(-radius, -i);
                    const int hi = std::min(radius, n_axis - 1 - i);
                    for (int t = lo; t <= hi; ++t) {
                        const double w = kernel[static_cast<std::size_t>(t + radius)];
                        acc += w * data[line + static_cast<std::size_t>(i + t) * stride];
                        wsum += w;
                    }
                    out[line + static_cast<std::size_t>(i) * stride] =
                        static_cast<float>(acc / wsum);
                }
            }
        }
    });
    data.swap(out);
}

// The 13 direction classes of a 3x3x3 neighborhood (every +/- pair once).
constexpr int kDirections[13][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1},  {1, 1, 0},  {1, -1, 0},
                                    {1, 0, 1}, {1, 0, -1}, {0, 1, 1}, {0, 1, -1}, {1, 1, 1},
                                    {1, -1, 1}, {1, 1, -1}, {-1, 1, 1}};

constexpr double kInvSqrt1 = 1.0;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt3 = 0.57735026918962576451;
constexpr double kDirInvLen[13] = {kInvSqrt1, kInvSqrt1, kInvSqrt1, kInvSqrt2, kInvSqrt2,
                                   kInvSqrt2, kInvSqrt2, kInvSqrt2, kInvSqrt2, kInvSqrt3,
                                   kInvSqrt3, kInvSqrt3, kInvSqrt3};

} // namespace

ContourPointSet canny3d(const Volume& vol, double sigma_mm, double low, double high) {
    if (!(sigma_mm > 0)) throw std::invalid_argument("canny sigma must be positive");
    if (low < 0 || low > high)
        throw std::invalid_argument("canny thresholds must satisfy 0 <= low <= high");

    const auto dims = vol.dims();
    const int nx = dims[0], ny = dims[1], nz = dims[2];
    const std::size_t sy = static_cast<std::size_t>(nx),
                      sz = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);

    // Smooth at physical scale: per-axis kernels in voxel units.
    std::vector<float> smoothed = vol.data();
    for (int axis = 0; axis < 3; ++axis) {
        const double sigma_vox = sigma_mm / vol.spacing()[axis];
        const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_vox)));
        if (2 * radius + 1 > dims[static_cast<std::size_t>(axis)])
            throw std::invalid_argument("canny sigma too large: kernel exceeds volume extent");
        smooth_axis(smoothed, dims, axis, gaussian_kernel(sigma_vox, radius));
    }

    // Central-difference gradient in physical units; border voxels have none.
    std::vector<float> gx(smoothed.size(), 0.0f), gy(smoothed.size(), 0.0f),
        gz(smoothed.size(), 0.0f), mag(smoothed.size(), 0.0f);
    const double inv2sx = 1.0 / (2.0 * vol.spacing().x());
    const double inv2sy = 1.0 / (2.0 * vol.spacing().y());
    const double inv2sz = 1.0 / (2.0 * vol.spacing().z());
    parallel_for(static_cast<std::size_t>(nz - 2), [&](std::size_t kb, std::size_t ke) {
        for (std::size_t kk = kb; kk < ke; ++kk) {
            const int k = static_cast<int>(kk) + 1;
            for (int j = 1; j + 1 < ny; ++j) {
                std::size_t idx = static_cast<std::size_t>(1) + static_cast<std::size_t>(j) * sy +
                                  static_cast<std::size_t>(k) * sz;
                for (int i = 1; i + 1 < nx; ++i, ++idx) {
                    const double dx = (smoothed[idx + 1] - smoothed[idx - 1]) * inv2sx;
                    const double dy = (smoothed[idx + sy] - smoothed[idx - sy]) * inv2sy;
                    const double dz = (smoothed[idx + sz] - smoothed[idx - sz]) * inv2sz;
                    gx[idx] = static_cast<float>(dx);
                    gy[idx] = static_cast<float>(dy);
                    gz[idx] = static_cast<float>(dz);
                    mag[idx] = static_cast<float>(std::sqrt(dx * dx + dy * dy + dz * dz));
                }
            }
        }
    });

    // Non-maximum suppression along the quantized gradient direction.
    std::vector<std::uint8_t> keep(smoothed.size(), 0);
    parallel_for(static_cast<std::size_t>(nz - 2), [&](std::size_t kb, std::size_t ke) {
        for (std::size_t kk = kb; kk < ke; ++kk) {
            const int k = static_cast<int>(kk) + 1;
            for (int j = 1; j + 1 < ny; ++j) {
                for (int i = 1; i + 1 < nx; ++i) {
                    const std::size_t idx = static_cast<std::size_t>(i) +
                                            static_cast<std::size_t>(j) * sy +
                                            static_cast<std::size_t>(k) * sz;
                    const double m = mag[idx];
                    if (m <= 0.0) continue;

                    int best = 0;
                    double best_dot = -1.0;
                    for (int d = 0; d < 13; ++d) {
                        const double dot = std::abs(gx[idx] * kDirections[d][0] +
                                                    gy[idx] * kDirections[d][1] +
                                                    gz[idx] * kDirections[d][2]) *
                                           kDirInvLen[d];
                        if (dot > best_dot) {
                            best_dot = dot;
                            best = d;
                        }
                    }
                    const long off = kDirections[best][0] +
                                     kDirections[best][1] * static_cast<long>(sy) +
                                     kDirections[best][2] * static_cast<long>(sz);
                    const float m_fwd = mag[idx + static_cast<std::size_t>(off)];
                    const float m_bwd = mag[idx - static_cast<std::size_t>(off)];
                    if (m >= m_fwd && m >= m_bwd) keep[idx] = 1;
                }
            }
        }
    });

    // Hysteresis: flood from strong edges through weak ones (26-connected).
    std::vector<std::uint8_t> state(smoothed.size(), 0); // 1 = weak, 2 = accepted
    std::deque<std::size_t> frontier;
    for (std::size_t idx = 0; idx < smoothed.size(); ++idx) {
        if (!keep[idx]) continue;
        if (mag[idx] >= high) {
            state[idx] = 2;
            frontier.push_back(idx);
        } else if (mag[idx] >= low) {
            state[idx] = 1;
        }
    }
    while (!frontier.empty()) {
        const std::size_t idx = frontier.front();
        frontier.pop_front();
        const int i = static_cast<int>(idx % sy);
        const int j = static_cast<int>((idx / sy) % static_cast<std::size_t>(ny));
        const int k = static_cast<int>(idx / sz);
        for (int dk = -1; dk <= 1; ++dk) {
            for (int dj = -1; dj <= 1; ++dj) {
                for (int di = -1; di <= 1; ++di) {
                    if (di == 0 && dj == 0 && dk == 0) continue;
                    const int ii = i + di, jj = j + dj, kk = k + dk;
                    if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz) continue;
                    const std::size_t nidx = static_cast<std::size_t>(ii) +
                                             static_cast<std::size_t>(jj) * sy +
                                             static_cast<std::size_t>(kk) * sz;
                    if (state[nidx] == 1) {
                        state[nidx] = 2;
                        frontier.push_back(nidx);
                    }
                }
            }
        }
    }

    ContourPointSet set;
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const std::size_t idx = static_cast<std::size_t>(i) +
                                        static_cast<std::size_t>(j) * sy +
                                        static_cast<std::size_t>(k) * sz;
                if (state[idx] != 2) continue;
                if (mag[idx] <= 0.0f) continue;
                set.points.push_back(
                    {vol.voxel_center(i, j, k), Eigen::Vector3d(gx[idx], gy[idx], gz[idx])});
            }
        }
    }
    return set;
}

ContourPointSet select_apparent_contour(const ContourPointSet& set,
                                        const ProjectionGeometry& geom,
                                        const RigidTransform& pose, double angle_tol_deg,
                                        std::size_t max_points, std::uint64_t seed) {
    if (!(angle_tol_deg > 0) || !(angle_tol_deg <= 90))
        throw std::invalid_argument("angle tolerance must be in (0, 90] degrees");
    if (max_points < 6) throw std::invalid_argument("max_points must be >= 6");

    const double sin_tol = std::sin(angle_tol_deg * kPi / 180.0);

    std::vector<std::size_t> surviving;
    for (std::size_t i = 0; i < set.points.size(); ++i) {
        const auto& pt = set.points[i];
        const Eigen::Vector3d w_world = pose.apply(pt.position);
        const Eigen::Vector3d g_world = pose.rotation * pt.gradient;
        const double g_norm = g_world.norm();
        if (g_norm <= 0.0) continue;
        const Eigen::Vector3d ray = (w_world - geom.source).normalized();
        // Perpendicular gradient <=> |cos(angle)| <= sin(tol).
        if (std::abs(g_world.dot(ray)) / g_norm <= sin_tol) surviving.push_back(i);
    }

    if (surviving.size() < 6)
        throw InsufficientContourError("apparent contour has " +
                                       std::to_string(surviving.size()) +
                                       " points, need at least 6");

    if (surviving.size() > max_points) {
        // Seeded partial Fisher-Yates, then restore input order.
        Rng rng(seed);
        for (std::size_t i = 0; i < max_points; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng() % (surviving.size() - i));
            std::swap(surviving[i], surviving[j]);
        }
        surviving.resize(max_points);
        std::sort(surviving.begin(), surviving.end());
    }

    ContourPointSet out;
    out.volume_id = set.volume_id;
    out.points.reserve(surviving.size());
    for (std::size_t i : surviving) out.points.push_back(set.points[i]);
    return out;
}

void save_contours_csv(const ContourPointSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << "x,y,z,gx,gy,gz\n";
    char buf[256];
    for (const auto& pt : set.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", pt.position.x(),
                      pt.position.y(), pt.position.z(), pt.gradient.x(), pt.gradient.y(),
                      pt.gradient.z());
        out << buf;
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

ContourPointSet load_contours_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != "x,y,z,gx,gy,gz")
        throw FormatError("bad contour CSV header in '" + path.string() + "'");
    ContourPointSet set;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        double v[6];
        char comma;
        ss >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3] >> comma >> v[4] >> comma >>
            v[5];
        if (!ss) throw FormatError("bad contour CSV row '" + line + "'");
        set.points.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
    }
    return set;
}

} // namespace ppcreg
