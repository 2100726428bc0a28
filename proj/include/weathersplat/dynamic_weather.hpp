// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file dynamic_weather.hpp
/// @brief Rain and snowfall: particle Gaussians rendered as separate noise
///        sublayers and added onto the scene render with a luminance factor
///        and a depth/color occlusion mask.
///
/// A raindrop is one Gaussian stretched along its velocity. A snowflake is
/// three Gaussians sharing a center whose long axes lie in one randomly
/// oriented plane at 60 degrees from each other. Particles move on straight
/// lines and wrap periodically inside their spawn box, so positions are a
/// closed-form function of elapsed time.

#pragma once

#include "weathersplat/camera.hpp"
#include "weathersplat/parallel.hpp"
#include "weathersplat/rasterizer.hpp"
#include "weathersplat/scene.hpp"
#include "weathersplat/static_weather.hpp"

#include <optional>
#include <string>

namespace weathersplat {

enum class ParticleKind { rain, snow };

inline const char *to_string(ParticleKind k) { return k == ParticleKind::rain ? "rain" : "snow"; }

struct ParticleParams {
    ParticleKind kind = ParticleKind::rain;
    std::size_t count = 2000;
    Aabb spawn_bounds{Vec3(-10.0, -10.0, 0.0), Vec3(10.0, 10.0, 10.0)};
    double size = 0.05;       ///< long-axis scale (standard deviation), world units
    double elongation = 8.0;  ///< long axis / short axes
    Rgb base_color{0.7, 0.7, 0.72};
    double opacity = 0.6;
    Vec3 velocity{0.0, 0.0, -10.0};
    std::size_t max_per_layer = 500;
    double t_min = 0.0;
    double t_max = 0.7;
    double t_d = 0.8;
    double t_c = 0.05;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (max_per_layer < 1) throw ArgumentError("max_per_layer must be at least 1");
        if (!(t_min <= t_max)) {
            throw ArgumentError("t_min (" + std::to_string(t_min) + ") must not exceed t_max (" + std::to_string(t_max) + ")");
        }
        if (!(size > 0.0)) throw ArgumentError("particle size must be positive");
        if (!(elongation >= 1.0)) throw ArgumentError("particle elongation must be at least 1");
        if (!(opacity >= 0.0 && opacity <= 1.0)) throw ArgumentError("particle opacity must be in [0,1]");
        if (!(t_c >= 0.0 && t_c <= 1.0)) throw ArgumentError("t_C must be in [0,1]");
        if (!velocity.allFinite()) throw ArgumentError("particle velocity must be finite");
        if (spawn_bounds.empty()) throw ArgumentError("spawn_bounds is empty");
    }
};

inline ParticleParams rain_preset() { return {}; }

inline ParticleParams snow_preset() {
    ParticleParams p;
    p.kind = ParticleKind::snow;
    p.count = 1500;
    p.size = 0.04;
    p.elongation = 4.0;
    p.base_color = Rgb(0.85, 0.85, 0.88);
    p.opacity = 0.9;
    p.velocity = Vec3(0.3, 0.2, -1.2);
    p.t_min = -0.1;
    p.t_max = 0.8;
    return p;
}

inline ParticleParams particle_preset(ParticleKind k) { return k == ParticleKind::rain ? rain_preset() : snow_preset(); }

/// A sublayer of particles. `origins[i]` is the spawn-time center of
/// gaussians[i]; means are recomputed from it as wrap(origin + velocity * time).
struct ParticleLayer {
    std::vector<Gaussian> gaussians;
    std::vector<std::size_t> particle_index;
    Vec3 velocity = Vec3::Zero();
    Aabb bounds;
    std::vector<Vec3> origins;
    double time = 0.0;

    std::size_t particle_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < particle_index.size(); ++i) {
            if (i == 0 || particle_index[i] != particle_index[i - 1]) ++n;
        }
        return n;
    }
};

/// Periodic wrap of p into [lo, hi) on every axis with positive extent.
inline Vec3 wrap_into(const Vec3 &p, const Aabb &box) {
    Vec3 out = p;
    for (int a = 0; a < 3; ++a) {
        const double extent = box.max[a] - box.min[a];
        if (extent <= 0.0) continue;
        double r = std::fmod(p[a] - box.min[a], extent);
        if (r < 0.0) r += extent;
        if (r >= extent) r = 0.0;
        out[a] = box.min[a] + r;
    }
    return out;
}

/// Gaussians of one particle centered at `center`. `orientation` is the random
/// rotation: rain only spins around its fall axis, snow uses it for the plane
/// of its three arms.
inline std::vector<Gaussian> make_particle(const ParticleParams &params, const Vec3 &center, const Quat &orientation) {
    Gaussian g;
    g.mean = center;
    g.scale = Vec3(params.size / params.elongation, params.size / params.elongation, params.size);
    g.opacity = params.opacity;
    g.sh = sh::from_color(params.base_color, 0);
    if (params.kind == ParticleKind::rain) {
        const double speed = params.velocity.norm();
        const Vec3 dir = speed > 0.0 ? Vec3(params.velocity / speed) : Vec3(0.0, 0.0, -1.0);
        // The spin about the long axis is irrelevant for equal short axes.
        g.rotation = rotation_from_z(dir);
        return {g};
    }
    std::vector<Gaussian> arms(3, g);
    for (int k = 0; k < 3; ++k) {
        arms[k].rotation = (orientation * Eigen::AngleAxisd(k * kPi / 3.0, Vec3::UnitX())).normalized();
    }
    return arms;
}

/// Long (local z) axis of a Gaussian in world space.
inline Vec3 long_axis(const Gaussian &g) { return g.rotation.normalized() * Vec3::UnitZ(); }

/// Splits particles (each a group of Gaussians) into consecutive sublayers of
/// at most max_per_layer particles.
inline std::vector<ParticleLayer> partition_layers(const std::vector<std::vector<Gaussian>> &particles,
                                                   const ParticleParams &params) {
    if (params.max_per_layer < 1) throw ArgumentError("max_per_layer must be at least 1");
    std::vector<ParticleLayer> layers;
    for (std::size_t start = 0; start < particles.size(); start += params.max_per_layer) {
        ParticleLayer layer;
        layer.velocity = params.velocity;
        layer.bounds = params.spawn_bounds;
        const std::size_t end = std::min(particles.size(), start + params.max_per_layer);
        for (std::size_t p = start; p < end; ++p) {
            for (const Gaussian &g : particles[p]) {
                layer.gaussians.push_back(g);
                layer.particle_index.push_back(p);
                layer.origins.push_back(g.mean);
            }
        }
        layers.push_back(std::move(layer));
    }
    return layers;
}

/// Uniform positions in spawn_bounds, deterministic in rng_seed.
inline std::vector<ParticleLayer> spawn_particles(const ParticleParams &params) {
    params.validate();
    if (params.count == 0) return {};
    Rng rng(params.rng_seed);
    std::vector<std::vector<Gaussian>> particles;
    particles.reserve(params.count);
    const Aabb &b = params.spawn_bounds;
    for (std::size_t i = 0; i < params.count; ++i) {
        const Vec3 c(rng.uniform(b.min.x(), b.max.x()), rng.uniform(b.min.y(), b.max.y()),
                     rng.uniform(b.min.z(), b.max.z()));
        particles.push_back(make_particle(params, c, rng.unit_quaternion()));
    }
    return partition_layers(particles, params);
}

/// Places every particle at wrap(origin + velocity * t).
inline void set_time_in_place(ParticleLayer &layer, double t) {
    if (!(t >= 0.0)) throw ArgumentError("set_time: t must be non-negative");
    layer.time = t;
    for (std::size_t i = 0; i < layer.gaussians.size(); ++i) {
        layer.gaussians[i].mean = wrap_into(layer.origins[i] + layer.velocity * layer.time, layer.bounds);
    }
}

inline void advance_in_place(ParticleLayer &layer, double dt) {
    if (!(dt >= 0.0)) throw ArgumentError("advance: dt must be non-negative");
    set_time_in_place(layer, layer.time + dt);
}

inline std::vector<ParticleLayer> advance(std::vector<ParticleLayer> layers, double dt) {
    for (auto &l : layers) advance_in_place(l, dt);
    return layers;
}

// ---------------------------------------------------------------------------
// Compositing

inline ScalarMap luminance_map(const RgbImage &rgb) {
    ScalarMap l(rgb.width(), rgb.height());
    for (std::size_t i = 0; i < l.pixel_count(); ++i) l.at(i) = (rgb.at(i, 0) + rgb.at(i, 1) + rgb.at(i, 2)) / 3.0;
    return l;
}

struct SkyLuminance {
    double value = 0.0;
    bool fallback = false; ///< no sky pixel: value is the global mean
};

inline SkyLuminance sky_luminance(const ScalarMap &luminance, const Mask &sky_mask) {
    require_same_size(luminance, sky_mask, "sky_luminance");
    double sky = 0.0, all = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < luminance.pixel_count(); ++i) {
        all += luminance.at(i);
        if (sky_mask.at(i)) sky += luminance.at(i), ++n;
    }
    if (n > 0) return {sky / static_cast<double>(n), false};
    return {luminance.empty() ? 0.0 : all / static_cast<double>(luminance.pixel_count()), true};
}

/// f = exp(clamp(L_sky - L, t_min, t_max)) - 1.
inline double luminance_factor(double l_sky, double l, double t_min, double t_max) {
    return std::exp(std::clamp(l_sky - l, t_min, t_max)) - 1.0;
}

inline ScalarMap luminance_factor(double l_sky, const ScalarMap &luminance, double t_min, double t_max) {
    if (!(t_min <= t_max)) throw ArgumentError("luminance_factor: t_min must not exceed t_max");
    ScalarMap f(luminance.width(), luminance.height());
    for (std::size_t i = 0; i < f.pixel_count(); ++i) f.at(i) = luminance_factor(l_sky, luminance.at(i), t_min, t_max);
    return f;
}

/// (noise depth < scene depth) and (noise depth < t_D) and (max channel > t_C).
inline Mask occlusion_mask(const ScalarMap &noise_depth_ref, const ScalarMap &scene_depth_ref, double t_d,
                           const RgbImage &noise_rgb, double t_c) {
    require_same_size(noise_depth_ref, scene_depth_ref, "occlusion_mask");
    require_same_size(noise_depth_ref, noise_rgb, "occlusion_mask");
    Mask m(noise_rgb.width(), noise_rgb.height());
    for (std::size_t i = 0; i < m.pixel_count(); ++i) {
        const double d = noise_depth_ref.at(i);
        const double c = std::max({noise_rgb.at(i, 0), noise_rgb.at(i, 1), noise_rgb.at(i, 2)});
        m.at(i) = (d < scene_depth_ref.at(i) && d < t_d && c > t_c) ? 1 : 0;
    }
    return m;
}

/// A rendered sublayer.
struct NoiseLayer {
    RgbImage rgb;
    ScalarMap depth_ref;
};

/// Options used for particle sublayers: black background, no early
/// termination, depth averaged over particle coverage only.
inline RasterOptions noise_raster_options(int threads = 0) {
    RasterOptions opt;
    opt.background = Rgb::Zero();
    opt.depth_mode = DepthMode::normalized;
    opt.threads = threads;
    return opt;
}

inline NoiseLayer render_noise_layer(const ParticleLayer &layer, const Camera &cam, double d_max, int threads = 0) {
    RenderTargets t = rasterize(layer.gaussians, 0, cam, d_max, noise_raster_options(threads));
    return {std::move(t.rgb), std::move(t.depth_ref)};
}

/// C_render + sum_i f * (C_noise_i where m_i), clamped to [0,1]. The factor f
/// is derived from the luminance of `scene_rgb` and is the same for every
/// sublayer.
inline RgbImage composite_fall(const RgbImage &scene_rgb, const ScalarMap &scene_depth_ref, const Mask &sky_mask,
                               std::span<const NoiseLayer> layers, const ParticleParams &params) {
    require_same_size(scene_rgb, scene_depth_ref, "composite_fall");
    require_same_size(scene_rgb, sky_mask, "composite_fall");
    RgbImage out = scene_rgb;
    if (layers.empty()) return out;
    const ScalarMap lum = luminance_map(scene_rgb);
    const double l_sky = sky_luminance(lum, sky_mask).value;
    const ScalarMap f = luminance_factor(l_sky, lum, params.t_min, params.t_max);
    for (const NoiseLayer &layer : layers) {
        require_same_size(scene_rgb, layer.rgb, "composite_fall");
        const Mask m = occlusion_mask(layer.depth_ref, scene_depth_ref, params.t_d, layer.rgb, params.t_c);
        for (std::size_t i = 0; i < m.pixel_count(); ++i) {
            if (!m.at(i)) continue;
            for (int c = 0; c < 3; ++c) out.at(i, c) += f.at(i) * layer.rgb.at(i, c);
        }
    }
    for (double &v : out.data()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

/// Renders every sublayer for `cam` and composites them onto `current`, using
/// the depth and sky mask of the already rendered scene.
inline RgbImage apply_fall(const RgbImage &current, const RenderTargets &scene, const Camera &cam,
                           std::span<const ParticleLayer> layers, const ParticleParams &params, int threads = 0) {
    std::vector<NoiseLayer> noise(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) noise[i] = render_noise_layer(layers[i], cam, scene.d_max, threads);
    return composite_fall(current, scene.depth_ref, scene.sky_mask, noise, params);
}

/// Full dynamic-weather frame: scene render, sublayer composite, then the
/// optional light haze of heavy precipitation.
inline RgbImage render_fall_frame(const GaussianScene &scene, const Camera &cam, std::span<const ParticleLayer> layers,
                                  const ParticleParams &params, const std::optional<StaticWeatherParams> &haze,
                                  double d_max, const RasterOptions &scene_options = {}) {
    params.validate();
    const RenderTargets t = rasterize(scene, cam, d_max, scene_options);
    RgbImage out = apply_fall(t.rgb, t, cam, layers, params, scene_options.threads);
    if (haze) out = apply_static(out, t.depth_ref, *haze);
    return out;
}

} // namespace weathersplat
