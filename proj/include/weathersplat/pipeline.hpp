// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file pipeline.hpp
/// @brief Job execution: scene preparation, per-frame rendering through the
///        weather stack, image output, and the run manifest.

#pragma once

#include "weathersplat/config.hpp"
#include "weathersplat/image_io.hpp"
#include "weathersplat/ply.hpp"
#include "weathersplat/rasterizer.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>

#ifndef WEATHERSPLAT_VERSION
#define WEATHERSPLAT_VERSION "0.0.0"
#endif

namespace weathersplat {

inline constexpr const char *kVersion = WEATHERSPLAT_VERSION;

struct FrameRecord {
    int index = 0;
    std::string image;
    std::string depth; ///< empty unless depth output is enabled
    double ms = 0.0;
};

struct RunManifest {
    nlohmann::json config;
    std::vector<FrameRecord> frames;
    std::size_t scene_gaussians = 0; ///< after snow and sky cover
    std::size_t sky_gaussians = 0;
    std::size_t snow_gaussians = 0;
    std::size_t particle_gaussians = 0;
    std::string version = kVersion;

    nlohmann::json to_json() const {
        nlohmann::json frames_json = nlohmann::json::array();
        for (const auto &f : frames) {
            nlohmann::json j{{"index", f.index}, {"image", f.image}, {"ms", f.ms}};
            if (!f.depth.empty()) j["depth"] = f.depth;
            frames_json.push_back(std::move(j));
        }
        return {{"version", version},
                {"config", config},
                {"counts",
                 {{"scene", scene_gaussians},
                  {"sky", sky_gaussians},
                  {"snow", snow_gaussians},
                  {"particles", particle_gaussians}}},
                {"frame_count", frames.size()},
                {"frames", frames_json}};
    }
};

namespace pipeline_detail {

inline nlohmann::json vec(const Vec3 &v) { return {v.x(), v.y(), v.z()}; }

inline nlohmann::json fog_json(const StaticWeatherParams &p) {
    return {{"fog_color", vec(p.fog_color)}, {"intensity", p.intensity}};
}

inline Aabb non_sky_bounds(const GaussianScene &scene) {
    Aabb box;
    for (const Gaussian &g : scene.gaussians()) {
        if (!g.is_sky) box.extend(g.mean);
    }
    return box;
}

/// Scene bounds grown by 10% of the largest extent on every side.
inline Aabb padded(const Aabb &box) {
    const double pad = 0.1 * std::max(box.extent().maxCoeff(), 1.0);
    return Aabb{box.min - Vec3::Constant(pad), box.max + Vec3::Constant(pad)};
}

inline std::string frame_name(const char *prefix, int index, const char *ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", prefix, index, ext);
    return buf;
}

inline const char *extension(ImageFormat f) {
    switch (f) {
    case ImageFormat::png: return "png";
    case ImageFormat::ppm: return "ppm";
    case ImageFormat::raw_float: return "f32";
    }
    return "png";
}

inline void ensure_writable(const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    const auto probe = dir / ".weathersplat_probe";
    {
        std::ofstream out(probe, std::ios::binary);
        if (!out || !(out << "ok") || !out.flush()) {
            throw IoError("output directory '" + dir.string() + "' is not writable");
        }
    }
    std::filesystem::remove(probe, ec);
}

} // namespace pipeline_detail

/// Serializes the resolved configuration for the manifest.
inline nlohmann::json config_to_json(const JobConfig &cfg) {
    using pipeline_detail::vec;
    const auto &in = cfg.camera_path.intrinsics;
    nlohmann::json keys = nlohmann::json::array();
    const auto kf = cfg.camera_path.keyframe_times();
    for (std::size_t i = 0; i < cfg.camera_path.keyframes.size(); ++i) {
        const auto &k = cfg.camera_path.keyframes[i];
        const Quat q = k.orientation.normalized();
        keys.push_back({{"frame", kf[i]}, {"position", vec(k.position)}, {"rotation", {q.w(), q.x(), q.y(), q.z()}}});
    }
    nlohmann::json weather = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.weather.size(); ++i) {
        const EffectConfig &e = cfg.weather[i];
        nlohmann::json j{{"type", to_string(e.type)}};
        if (e.seed) j["seed"] = *e.seed;
        switch (e.type) {
        case EffectType::static_weather:
            if (!e.preset.empty()) j["preset"] = e.preset;
            j.update(pipeline_detail::fog_json(e.fog));
            break;
        case EffectType::rainfall:
        case EffectType::snowfall: {
            const ParticleParams &p = e.particles;
            j.update({{"count", p.count},
                      {"size", p.size},
                      {"elongation", p.elongation},
                      {"color", vec(p.base_color)},
                      {"opacity", p.opacity},
                      {"velocity", vec(p.velocity)},
                      {"max_per_layer", p.max_per_layer},
                      {"t_min", p.t_min},
                      {"t_max", p.t_max},
                      {"t_d", p.t_d},
                      {"t_c", p.t_c}});
            if (e.spawn_bounds_set) j["bounds"] = {{"min", vec(p.spawn_bounds.min)}, {"max", vec(p.spawn_bounds.max)}};
            if (e.haze) j["haze"] = pipeline_detail::fog_json(*e.haze);
            break;
        }
        case EffectType::snow_cover: {
            const SnowCoverParams &s = e.snow;
            j.update({{"gravity", vec(s.gravity)},
                      {"seed_dot_min", s.seed_dot_min},
                      {"plane_angle_max", s.plane_angle_max},
                      {"k_neighbors", s.k_neighbors},
                      {"fill_density", s.fill_density},
                      {"snow_scale", s.snow_scale},
                      {"snow_opacity", s.snow_opacity},
                      {"snow_color", vec(s.snow_color)},
                      {"outlier_k", s.outlier_k},
                      {"outlier_factor", s.outlier_factor}});
            if (e.export_ply) j["export_ply"] = e.export_ply->string();
            break;
        }
        }
        weather.push_back(std::move(j));
    }
    nlohmann::json camera{{"width", in.width},
                          {"height", in.height},
                          {"fx", in.fx},
                          {"fy", in.fy},
                          {"frames", cfg.camera_path.frames},
                          {"fps", cfg.camera_path.fps},
                          {"keyframes", keys}};
    if (in.cx) camera["cx"] = *in.cx;
    if (in.cy) camera["cy"] = *in.cy;
    nlohmann::json out{{"scene", cfg.scene_path.string()},
                       {"sh_degree", cfg.sh_degree},
                       {"d_max", cfg.d_max},
                       {"camera_path", camera},
                       {"weather", weather},
                       {"output",
                        {{"dir", cfg.output.dir.string()}, {"format", to_string(cfg.output.format)}, {"depth", cfg.output.depth}}},
                       {"seed", cfg.seed},
                       {"threads", cfg.threads},
                       {"background", vec(cfg.background)}};
    if (cfg.sky_cover) {
        const auto &s = cfg.sky_cover->params;
        out["sky_cover"] = {{"center", vec(s.center)},
                            {"radius", s.radius},
                            {"point_count", s.point_count},
                            {"color", vec(s.color)},
                            {"opacity", s.opacity}};
    }
    return out;
}

/// Seed of weather effect `index`: its own seed when given, else derived from
/// the job seed.
inline std::uint64_t effect_seed(const JobConfig &cfg, std::size_t index) {
    const auto &e = cfg.weather.at(index);
    return e.seed ? *e.seed : derive_seed(cfg.seed, index);
}

/// A loaded job ready to render frames in order. Frame k shows particles at
/// time k / fps, set directly so long sequences do not drift.
class JobRunner {
  public:
    explicit JobRunner(JobConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.camera_path.validate();
        if (!(cfg_.d_max > 0.0)) throw ConfigError("d_max must be positive");
        set_scene(load_scene(cfg_.scene_path, cfg_.sh_degree));
    }

    JobRunner(JobConfig cfg, GaussianScene scene) : cfg_(std::move(cfg)) {
        cfg_.camera_path.validate();
        if (!(cfg_.d_max > 0.0)) throw ConfigError("d_max must be positive");
        set_scene(std::move(scene));
    }

    const JobConfig &config() const { return cfg_; }
    const GaussianScene &scene() const { return scene_; }
    std::size_t snow_count() const { return snow_count_; }
    std::size_t sky_count() const { return sky_count_; }

    std::size_t particle_count() const {
        std::size_t n = 0;
        for (const auto &layers : particles_) {
            for (const auto &l : layers) n += l.gaussians.size();
        }
        return n;
    }

    /// Particle sublayers of weather effect `index` (empty for other types).
    const std::vector<ParticleLayer> &particles(std::size_t index) const { return particles_.at(index); }

    RasterOptions scene_options() const {
        RasterOptions opt;
        opt.background = cfg_.background;
        opt.threads = cfg_.threads;
        return opt;
    }

    int next_frame() const { return next_frame_; }

    /// Renders the next frame of the sequence.
    RgbImage render_next(ScalarMap *depth_ref = nullptr) {
        const int k = next_frame_;
        if (k >= cfg_.camera_path.frames) throw ArgumentError("render_next: sequence already complete");
        if (k > 0) {
            const double t = static_cast<double>(k) / cfg_.camera_path.fps;
            for (auto &layers : particles_) {
                for (auto &l : layers) set_time_in_place(l, t);
            }
        }
        const Camera cam = interpolate_camera(cfg_.camera_path, k);
        const RenderTargets t = rasterize(scene_, cam, cfg_.d_max, scene_options());
        RgbImage out = t.rgb;
        for (std::size_t i = 0; i < cfg_.weather.size(); ++i) {
            const EffectConfig &e = cfg_.weather[i];
            switch (e.type) {
            case EffectType::static_weather: out = apply_static(out, t.depth_ref, e.fog); break;
            case EffectType::rainfall:
            case EffectType::snowfall:
                out = apply_fall(out, t, cam, particles_[i], resolved_particles_[i], cfg_.threads);
                if (e.haze) out = apply_static(out, t.depth_ref, *e.haze);
                break;
            case EffectType::snow_cover: break;
            }
        }
        if (depth_ref) *depth_ref = t.depth_ref;
        ++next_frame_;
        return out;
    }

  private:
    void set_scene(GaussianScene scene) {
        const std::size_t n = cfg_.weather.size();
        particles_.assign(n, {});
        resolved_particles_.assign(n, {});
        std::size_t before = scene.size();
        for (std::size_t i = 0; i < n; ++i) {
            const EffectConfig &e = cfg_.weather[i];
            if (e.type != EffectType::snow_cover) continue;
            SnowCoverParams p = e.snow;
            p.rng_seed = effect_seed(cfg_, i);
            p.threads = cfg_.threads;
            SnowCoverResult r = build_snow_cover_detailed(scene, p);
            if (e.export_ply) {
                GaussianScene only(r.snow, 0);
                save_scene(only, e.export_ply->is_relative() ? cfg_.output.dir / *e.export_ply : *e.export_ply);
            }
            scene = std::move(r.scene);
        }
        snow_count_ = scene.size() - before;
        const Aabb content = pipeline_detail::non_sky_bounds(scene);
        if (cfg_.sky_cover) {
            SkyCoverParams sky = cfg_.sky_cover->params;
            if (!cfg_.sky_cover->center_set && !content.empty()) sky.center = content.center();
            before = scene.size();
            scene = add_sky_hemisphere(scene, sky, cfg_.seed);
            sky_count_ = scene.size() - before;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const EffectConfig &e = cfg_.weather[i];
            if (e.type != EffectType::rainfall && e.type != EffectType::snowfall) continue;
            ParticleParams p = e.particles;
            if (!e.spawn_bounds_set) {
                if (content.empty()) throw DataError("cannot derive particle bounds from a scene without geometry");
                p.spawn_bounds = pipeline_detail::padded(content);
            }
            p.rng_seed = effect_seed(cfg_, i);
            resolved_particles_[i] = p;
            particles_[i] = spawn_particles(p);
        }
        scene_ = std::move(scene);
    }

    JobConfig cfg_;
    GaussianScene scene_;
    std::vector<std::vector<ParticleLayer>> particles_;
    std::vector<ParticleParams> resolved_particles_;
    std::size_t snow_count_ = 0;
    std::size_t sky_count_ = 0;
    int next_frame_ = 0;
};

inline void write_frame(const std::filesystem::path &path, const RgbImage &img, ImageFormat format) {
    switch (format) {
    case ImageFormat::png: write_png_rgb(path, img); break;
    case ImageFormat::ppm: write_ppm(path, img); break;
    case ImageFormat::raw_float: write_raw_float(path, img); break;
    }
}

/// Renders every frame of `cfg` into cfg.output.dir and writes manifest.json
/// last. The output directory is checked and the scene loaded before any
/// frame is written.
inline RunManifest run_job(const JobConfig &cfg) {
    pipeline_detail::ensure_writable(cfg.output.dir);
    JobRunner runner(cfg);
    RunManifest manifest;
    manifest.config = config_to_json(cfg);
    manifest.scene_gaussians = runner.scene().size();
    manifest.sky_gaussians = runner.sky_count();
    manifest.snow_gaussians = runner.snow_count();
    manifest.particle_gaussians = runner.particle_count();
    const char *ext = pipeline_detail::extension(cfg.output.format);
    for (int k = 0; k < cfg.camera_path.frames; ++k) {
        const auto start = std::chrono::steady_clock::now();
        ScalarMap depth;
        const RgbImage img = runner.render_next(cfg.output.depth ? &depth : nullptr);
        FrameRecord rec;
        rec.index = k;
        rec.image = pipeline_detail::frame_name("frame", k, ext);
        write_frame(cfg.output.dir / rec.image, img, cfg.output.format);
        if (cfg.output.depth) {
            rec.depth = pipeline_detail::frame_name("depth", k, "png");
            write_png_gray16(cfg.output.dir / rec.depth, depth);
        }
        rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        manifest.frames.push_back(std::move(rec));
    }
    const auto path = cfg.output.dir / "manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << manifest.to_json().dump(2) << "\n";
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
    return manifest;
}

} // namespace weathersplat
