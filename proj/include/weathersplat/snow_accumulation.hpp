// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file snow_accumulation.hpp
/// @brief Snow cover: seed on upward-facing Gaussians, fill local plane disks,
///        drop outliers, and append flat bright Gaussians to the scene.

#pragma once

#include "weathersplat/kdtree.hpp"
#include "weathersplat/parallel.hpp"
#include "weathersplat/scene.hpp"

namespace weathersplat {

struct SnowCoverParams {
    Vec3 gravity{0.0, 0.0, -1.0};
    double seed_dot_min = 0.70710678118654752; ///< cos(pi/4)
    double plane_angle_max = kPi / 6.0;
    std::size_t k_neighbors = 8;
    double fill_density = 50.0; ///< points per unit area
    double snow_scale = 0.03;
    double snow_opacity = 0.95;
    Rgb snow_color{0.95, 0.95, 0.97};
    std::size_t outlier_k = 8;
    double outlier_factor = 2.0;
    std::uint64_t rng_seed = 0;
    int threads = 0;

    void validate() const {
        if (!(std::abs(gravity.norm() - 1.0) < 1e-6)) throw ArgumentError("snow gravity must be a unit vector");
        if (!(seed_dot_min > 0.0 && seed_dot_min <= 1.0)) throw ArgumentError("seed_dot_min must be in (0,1]");
        if (!(plane_angle_max > 0.0 && plane_angle_max < kPi / 2.0)) {
            throw ArgumentError("plane_angle_max must be in (0, pi/2)");
        }
        if (k_neighbors < 3) throw ArgumentError("k_neighbors must be at least 3");
        if (!(fill_density >= 0.0)) throw ArgumentError("fill_density must be non-negative");
        if (!(snow_scale > 0.0)) throw ArgumentError("snow_scale must be positive");
        if (!(snow_opacity >= 0.0 && snow_opacity <= 1.0)) throw ArgumentError("snow_opacity must be in [0,1]");
        if (outlier_k < 1) throw ArgumentError("outlier_k must be at least 1");
        if (!(outlier_factor >= 0.0)) throw ArgumentError("outlier_factor must be non-negative");
    }
};

struct SnowSeed {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    std::vector<double> neighbor_distances;
    std::size_t source = 0;   ///< index of the seeding Gaussian in the scene
    double thickness = 0.0;   ///< shortest-axis scale of the seeding Gaussian
};

struct SnowPoint {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
};

/// Non-sky Gaussians whose shortest-axis normal (oriented against gravity)
/// satisfies n . (-g) >= seed_dot_min, each with its k nearest seed distances.
inline std::vector<SnowSeed> init_snow_seeds(const GaussianScene &scene, const SnowCoverParams &params) {
    params.validate();
    if (scene.empty()) throw ArgumentError("init_snow_seeds: scene is empty");
    const Vec3 up = -params.gravity;
    std::vector<SnowSeed> seeds;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Gaussian &g = scene[i];
        if (g.is_sky) continue;
        const Vec3 n = shortest_axis_normal(g, up);
        if (n.dot(up) >= params.seed_dot_min) seeds.push_back({g.mean, n, {}, i, g.scale.minCoeff()});
    }
    std::vector<Vec3> pts(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) pts[i] = seeds[i].position;
    const KdTree tree(std::move(pts));
    parallel_for(seeds.size(), params.threads, [&](std::size_t i) {
        for (const Neighbor &nb : tree.knn(seeds[i].position, params.k_neighbors, i)) {
            seeds[i].neighbor_distances.push_back(nb.distance);
        }
    });
    return seeds;
}

/// median(R) / (1 + 2 sigma), sigma the population standard deviation of R.
inline double plane_radius(std::span<const double> distances) {
    if (distances.empty()) throw ArgumentError("plane_radius: no neighbor distances");
    std::vector<double> d(distances.begin(), distances.end());
    std::sort(d.begin(), d.end());
    const std::size_t n = d.size();
    const double median = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    double offset = 0.0;
    for (double v : d) offset += v - d[0];
    const double mean = d[0] + offset / static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    return median / (1.0 + 2.0 * sigma);
}

inline double angle_between(const Vec3 &a, const Vec3 &b) {
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

/// ceil(fill_density * pi * r^2) points uniform on the seed's plane disk, or
/// nothing when the normal is pi/6 or more away from -g. `stream` selects the
/// random stream (normally the seed's position in the seed list).
inline std::vector<Vec3> densify_plane(const SnowSeed &seed, const SnowCoverParams &params, std::uint64_t stream = 0) {
    if (angle_between(seed.normal, -params.gravity) >= params.plane_angle_max) return {};
    if (params.fill_density <= 0.0 || seed.neighbor_distances.empty()) return {};
    const double r = plane_radius(seed.neighbor_distances);
    const auto count = static_cast<std::size_t>(std::ceil(params.fill_density * kPi * r * r));
    const Mat3 frame = rotation_from_z(seed.normal).toRotationMatrix();
    const Vec3 u = frame.col(0), v = frame.col(1);
    Rng rng(derive_seed(params.rng_seed, stream));
    std::vector<Vec3> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double rho = r * std::sqrt(rng.uniform());
        const double theta = 2.0 * kPi * rng.uniform();
        out.push_back(seed.position + rho * (std::cos(theta) * u + std::sin(theta) * v));
    }
    return out;
}

/// Indices of points kept by the statistical outlier filter: a point is
/// dropped when the mean distance to its k nearest neighbors exceeds
/// mean + factor * std of that statistic over all points.
inline std::vector<std::size_t> outlier_inliers(const std::vector<Vec3> &points, std::size_t k, double factor,
                                                int threads = 0) {
    std::vector<std::size_t> keep(points.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    if (points.size() < k + 1 || k == 0) return keep;
    const KdTree tree(points);
    std::vector<double> stat(points.size());
    parallel_for(points.size(), threads, [&](std::size_t i) {
        double s = 0.0;
        for (const Neighbor &nb : tree.knn(points[i], k, i)) s += nb.distance;
        stat[i] = s / static_cast<double>(k);
    });
    double mean = 0.0;
    for (double s : stat) mean += s;
    mean /= static_cast<double>(stat.size());
    double ss = 0.0;
    for (double s : stat) ss += (s - mean) * (s - mean);
    const double limit = mean + factor * std::sqrt(ss / static_cast<double>(stat.size()));
    const double slack = 1e-12 * std::abs(mean);
    keep.clear();
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (stat[i] <= limit + slack) keep.push_back(i);
    }
    return keep;
}

inline std::vector<Vec3> filter_outliers(const std::vector<Vec3> &points, std::size_t k, double factor) {
    std::vector<Vec3> out;
    for (std::size_t i : outlier_inliers(points, k, factor)) out.push_back(points[i]);
    return out;
}

/// One flat Gaussian per point, shortest axis along the point normal.
inline std::vector<Gaussian> snowify(std::span<const SnowPoint> points, const SnowCoverParams &params) {
    std::vector<Gaussian> out;
    out.reserve(points.size());
    const auto sh = sh::from_color(params.snow_color, 0);
    for (const SnowPoint &p : points) {
        Gaussian g;
        g.mean = p.position;
        g.scale = Vec3(params.snow_scale, params.snow_scale, params.snow_scale / 4.0);
        g.rotation = rotation_from_z(p.normal);
        g.opacity = params.snow_opacity;
        g.sh = sh;
        out.push_back(std::move(g));
    }
    return out;
}

struct SnowCoverResult {
    GaussianScene scene;
    std::vector<Gaussian> snow; ///< SH degree 0
    std::size_t seed_count = 0;
    std::size_t candidate_count = 0; ///< points before outlier filtering
};

/// Seeds, per-seed disk fill, outlier filter, snowify, append. Seeds that pass
/// the plane-angle gate are snow points themselves. Snow is lifted along the
/// seed normal by the seed's thickness plus the snow half-thickness so it lies
/// on top of the surface instead of inside it.
inline SnowCoverResult build_snow_cover_detailed(const GaussianScene &scene, const SnowCoverParams &params) {
    const std::vector<SnowSeed> seeds = init_snow_seeds(scene, params);
    std::vector<std::vector<SnowPoint>> per_seed(seeds.size());
    parallel_for(seeds.size(), params.threads, [&](std::size_t i) {
        const SnowSeed &s = seeds[i];
        if (angle_between(s.normal, -params.gravity) >= params.plane_angle_max) return;
        const Vec3 lift = (s.thickness + params.snow_scale / 4.0) * s.normal;
        per_seed[i].push_back({s.position + lift, s.normal});
        for (const Vec3 &p : densify_plane(s, params, i)) per_seed[i].push_back({p + lift, s.normal});
    });
    std::vector<SnowPoint> points;
    for (auto &v : per_seed) points.insert(points.end(), v.begin(), v.end());

    std::vector<Vec3> positions(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) positions[i] = points[i].position;
    std::vector<SnowPoint> kept;
    for (std::size_t i : outlier_inliers(positions, params.outlier_k, params.outlier_factor, params.threads)) {
        kept.push_back(points[i]);
    }
    SnowCoverResult result{scene, snowify(kept, params), seeds.size(), points.size()};
    result.scene = scene.with_appended(result.snow);
    return result;
}

inline GaussianScene build_snow_cover(const GaussianScene &scene, const SnowCoverParams &params) {
    return build_snow_cover_detailed(scene, params).scene;
}

} // namespace weathersplat
