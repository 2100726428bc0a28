// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file rasterizer.hpp
/// @brief Tile-based CPU splatting: EWA projection of 3D Gaussians and sorted
///        front-to-back alpha compositing of color, depth, normal, alpha and
///        sky-mask buffers.
///
/// Pixel (x, y) is sampled at continuous image coordinate (x, y); a point
/// projecting to (cx, cy) lands exactly on the principal-point pixel when
/// cx, cy are integers.

#pragma once

#include "weathersplat/camera.hpp"
#include "weathersplat/parallel.hpp"
#include "weathersplat/scene.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

namespace weathersplat {

inline constexpr int kTileSize = 16;

enum class DepthMode {
    /// Depth is blended exactly like color, with d_max as the background.
    composite,
    /// Blended depth divided by accumulated weight; d_max where nothing is hit.
    /// Used for particle layers, whose background carries no depth.
    normalized,
};

struct RasterOptions {
    Rgb background = Rgb::Zero();
    double dilation = 0.3;                 ///< px^2 added to the 2D covariance diagonal
    double alpha_max = 0.99;
    double alpha_min = 1.0 / 255.0;        ///< splats below this alpha are skipped
    double transmittance_min = 1e-4;       ///< early termination; 0 disables it
    DepthMode depth_mode = DepthMode::composite;
    double guard_band = 1.3;               ///< Jacobian x/z, y/z clamp, in half fields of view
    int threads = 0;                       ///< 0 = hardware concurrency
};

struct Projected2D {
    std::size_t index = 0;  ///< position in the source Gaussian list
    Vec2 pixel_center = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 0.0;     ///< camera-space z
    Rgb color = Rgb::Zero();
    double opacity = 0.0;
    Vec3 normal_cam = Vec3::UnitZ();
    double radius = 0.0;    ///< half-width of the square footprint, px
    bool is_sky = false;
};

struct RenderTargets {
    RgbImage rgb;
    ScalarMap depth_abs;
    ScalarMap depth_ref;
    NormalMap normal;
    ScalarMap alpha;
    Mask sky_mask;
    double d_max = 1.0;
};

/// Elementwise min(1, depth / d_max).
inline ScalarMap normalize_depth(const ScalarMap &depth_abs, double d_max) {
    if (!(d_max > 0.0)) throw ArgumentError("normalize_depth: d_max must be positive");
    ScalarMap out(depth_abs.width(), depth_abs.height());
    for (std::size_t i = 0; i < depth_abs.pixel_count(); ++i) out.at(i) = std::min(1.0, depth_abs.at(i) / d_max);
    return out;
}

namespace raster_detail {

/// Camera-space mean, 2D covariance (before dilation) and Jacobian.
struct CameraSpace {
    Vec3 p;
    Mat2 cov;
};

/// The Jacobian is evaluated at the mean with x/z and y/z clamped to
/// `guard_band` half fields of view, so Gaussians near the camera plane far
/// off-axis keep a bounded footprint.
inline CameraSpace to_screen_covariance(const Gaussian &g, const Camera &cam, double guard_band = 1.3) {
    const Vec3 p = cam.to_camera(g.mean);
    const double z = p.z();
    const double lim_x = guard_band * 0.5 * cam.width / cam.fx;
    const double lim_y = guard_band * 0.5 * cam.height / cam.fy;
    const double tx = std::clamp(p.x() / z, -lim_x, lim_x);
    const double ty = std::clamp(p.y() / z, -lim_y, lim_y);
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / z, 0.0, -cam.fx * tx / z, 0.0, cam.fy / z, -cam.fy * ty / z;
    const Mat3 w = cam.world_to_camera.linear();
    const Eigen::Matrix<double, 2, 3> jw = j * w;
    Mat2 cov = jw * covariance_3d(g) * jw.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    return {p, cov};
}

} // namespace raster_detail

/// Projects one Gaussian. Returns nullopt when it is outside (near, far), can
/// never reach `alpha_min`, or its footprint misses the viewport.
///
/// The footprint radius is the distance beyond which alpha provably drops
/// under `alpha_min`: r^2 = 2 ln(opacity / alpha_min) * lambda_max(cov2d).
inline std::optional<Projected2D> project_gaussian(const Gaussian &g, const Camera &cam, int sh_degree,
                                                   const RasterOptions &opt = {}, bool cull_viewport = true) {
    const Vec3 pc = cam.to_camera(g.mean);
    if (!(pc.z() > cam.near && pc.z() < cam.far)) return std::nullopt;
    if (g.opacity < opt.alpha_min) return std::nullopt;

    const auto cs = raster_detail::to_screen_covariance(g, cam, opt.guard_band);
    Projected2D s;
    s.pixel_center = Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
    s.cov2d = cs.cov + opt.dilation * Mat2::Identity();
    if (!(s.cov2d.determinant() > 0.0)) return std::nullopt;
    s.depth = pc.z();
    s.opacity = g.opacity;
    s.is_sky = g.is_sky;

    const double mid = 0.5 * (s.cov2d(0, 0) + s.cov2d(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - s.cov2d.determinant()));
    s.radius = std::sqrt(2.0 * std::log(std::max(1.0, g.opacity / opt.alpha_min)) * lambda_max) * (1.0 + 1e-9) + 1e-9;

    if (cull_viewport) {
        if (s.pixel_center.x() + s.radius < 0.0 || s.pixel_center.x() - s.radius > cam.width - 1 ||
            s.pixel_center.y() + s.radius < 0.0 || s.pixel_center.y() - s.radius > cam.height - 1) {
            return std::nullopt;
        }
    }

    const Vec3 eye = cam.position();
    s.color = eval_sh_color(g.sh, (g.mean - eye).normalized(), sh_degree);
    s.normal_cam = cam.world_to_camera.linear() * shortest_axis_normal(g, eye - g.mean);
    return s;
}

namespace raster_detail {

/// Per-splat data laid out for the inner loop.
struct Splat {
    double u, v;
    double conic_a, conic_b, conic_c;  // inverse 2D covariance
    double opacity;
    double r, g, b;
    double depth;
    double nx, ny, nz;
    double sky;
};

inline Splat pack(const Projected2D &p, double d_max) {
    const Mat2 inv = p.cov2d.inverse();
    return {p.pixel_center.x(), p.pixel_center.y(), inv(0, 0), 0.5 * (inv(0, 1) + inv(1, 0)), inv(1, 1),
            p.opacity, p.color.x(), p.color.y(), p.color.z(), p.is_sky ? d_max : p.depth,
            p.normal_cam.x(), p.normal_cam.y(), p.normal_cam.z(), p.is_sky ? 1.0 : 0.0};
}

} // namespace raster_detail

/// Renders all buffers for one view. Sky Gaussians contribute d_max to the
/// depth blend.
inline RenderTargets rasterize(std::span<const Gaussian> gaussians, int sh_degree, const Camera &cam, double d_max,
                               const RasterOptions &opt = {}) {
    using raster_detail::Splat;
    if (!(d_max > 0.0)) throw ArgumentError("rasterize: d_max must be positive");
    cam.validate();

    const int w = cam.width, h = cam.height;
    RenderTargets t;
    t.d_max = d_max;
    t.rgb = RgbImage(w, h);
    t.depth_abs = ScalarMap(w, h);
    t.normal = NormalMap(w, h);
    t.alpha = ScalarMap(w, h);
    t.sky_mask = Mask(w, h);

    std::vector<std::optional<Projected2D>> projected(gaussians.size());
    parallel_for((gaussians.size() + 1023) / 1024, opt.threads, [&](std::size_t chunk) {
        const std::size_t end = std::min(gaussians.size(), (chunk + 1) * 1024);
        for (std::size_t i = chunk * 1024; i < end; ++i) {
            projected[i] = project_gaussian(gaussians[i], cam, sh_degree, opt);
            if (projected[i]) projected[i]->index = i;
        }
    });

    std::vector<std::size_t> order;
    order.reserve(gaussians.size());
    for (std::size_t i = 0; i < projected.size(); ++i) {
        if (projected[i]) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return projected[a]->depth < projected[b]->depth; });

    std::vector<Splat> splats;
    splats.reserve(order.size());
    for (std::size_t i : order) splats.push_back(raster_detail::pack(*projected[i], d_max));

    const int tiles_x = (w + kTileSize - 1) / kTileSize;
    const int tiles_y = (h + kTileSize - 1) / kTileSize;
    std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
    for (std::size_t s = 0; s < order.size(); ++s) {
        const Projected2D &p = *projected[order[s]];
        auto tile_of = [](double coord, int limit) {
            return static_cast<int>(std::clamp(std::floor(coord), 0.0, static_cast<double>(limit - 1))) / kTileSize;
        };
        const int x0 = tile_of(p.pixel_center.x() - p.radius, w), x1 = tile_of(p.pixel_center.x() + p.radius, w);
        const int y0 = tile_of(p.pixel_center.y() - p.radius, h), y1 = tile_of(p.pixel_center.y() + p.radius, h);
        for (int ty = y0; ty <= y1; ++ty) {
            for (int tx = x0; tx <= x1; ++tx) bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(static_cast<std::uint32_t>(s));
        }
    }

    parallel_for(bins.size(), opt.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile % tiles_x), ty = static_cast<int>(tile / tiles_x);
        const auto &bin = bins[tile];
        for (int y = ty * kTileSize; y < std::min(h, (ty + 1) * kTileSize); ++y) {
            for (int x = tx * kTileSize; x < std::min(w, (tx + 1) * kTileSize); ++x) {
                double trans = 1.0, weight = 0.0;
                double cr = 0, cg = 0, cb = 0, depth = 0, nx = 0, ny = 0, nz = 0, sky = 0;
                for (std::uint32_t si : bin) {
                    const Splat &s = splats[si];
                    const double dx = x - s.u, dy = y - s.v;
                    const double power = -0.5 * (s.conic_a * dx * dx + 2.0 * s.conic_b * dx * dy + s.conic_c * dy * dy);
                    const double alpha = std::min(opt.alpha_max, s.opacity * std::exp(power));
                    if (alpha < opt.alpha_min) continue;
                    const double wgt = alpha * trans;
                    cr += s.r * wgt;
                    cg += s.g * wgt;
                    cb += s.b * wgt;
                    depth += s.depth * wgt;
                    nx += s.nx * wgt;
                    ny += s.ny * wgt;
                    nz += s.nz * wgt;
                    sky += s.sky * wgt;
                    weight += wgt;
                    trans *= 1.0 - alpha;
                    if (trans < opt.transmittance_min) break;
                }
                t.rgb(x, y, 0) = cr + trans * opt.background.x();
                t.rgb(x, y, 1) = cg + trans * opt.background.y();
                t.rgb(x, y, 2) = cb + trans * opt.background.z();
                if (opt.depth_mode == DepthMode::composite) {
                    t.depth_abs(x, y) = depth + trans * d_max;
                } else {
                    t.depth_abs(x, y) = weight > 0.0 ? depth / weight : d_max;
                }
                t.normal(x, y, 0) = nx;
                t.normal(x, y, 1) = ny;
                t.normal(x, y, 2) = nz;
                t.alpha(x, y) = 1.0 - trans;
                t.sky_mask(x, y) = sky > 0.5 ? 1 : 0;
            }
        }
    });

    t.depth_ref = normalize_depth(t.depth_abs, d_max);
    return t;
}

inline RenderTargets rasterize(const GaussianScene &scene, const Camera &cam, double d_max,
                               const RasterOptions &opt = {}) {
    return rasterize(scene.gaussians(), scene.sh_degree(), cam, d_max, opt);
}

struct PixelSample {
    Rgb rgb = Rgb::Zero();
    double depth_abs = 0.0;
    double alpha = 0.0;
};

/// Reference compositor for a single pixel: every Gaussian is projected, all
/// are sorted by depth (stable on index) and blended with no tiling, no
/// footprint culling and no early termination.
inline PixelSample brute_force_pixel(const GaussianScene &scene, const Camera &cam, const Vec2 &pixel, double d_max,
                                     const RasterOptions &opt = {}) {
    if (!(d_max > 0.0)) throw ArgumentError("brute_force_pixel: d_max must be positive");
    std::vector<Projected2D> all;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (auto p = project_gaussian(scene[i], cam, scene.sh_degree(), opt, /*cull_viewport=*/false)) {
            p->index = i;
            all.push_back(*p);
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Projected2D &a, const Projected2D &b) { return a.depth < b.depth; });

    PixelSample out;
    double trans = 1.0, depth = 0.0, weight = 0.0;
    Rgb color = Rgb::Zero();
    for (const Projected2D &p : all) {
        const Vec2 d = pixel - p.pixel_center;
        const double alpha = std::min(opt.alpha_max, p.opacity * std::exp(-0.5 * d.dot(p.cov2d.inverse() * d)));
        if (alpha < opt.alpha_min) continue;
        color += alpha * trans * p.color;
        depth += alpha * trans * (p.is_sky ? d_max : p.depth);
        weight += alpha * trans;
        trans *= 1.0 - alpha;
    }
    out.rgb = color + trans * opt.background;
    out.depth_abs = opt.depth_mode == DepthMode::composite ? depth + trans * d_max
                                                           : (weight > 0.0 ? depth / weight : d_max);
    out.alpha = 1.0 - trans;
    return out;
}

} // namespace weathersplat
