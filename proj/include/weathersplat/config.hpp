// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file config.hpp
/// @brief YAML job configuration: scene, camera path, weather stack, output.
///
/// Every mapping is checked against its allowed keys. Errors carry the key
/// path (e.g. `weather[1].t_min`) and the 1-based line of the offending node.
///
/// @code{.yaml}
/// scene: garden.ply
/// d_max: 40
/// camera_path:
///   width: 320
///   height: 240
///   fx: 260
///   frames: 48
///   fps: 24
///   keyframes:
///     - {position: [0, -8, 2], look_at: [0, 0, 0.5]}
///     - {position: [3, -7, 2], look_at: [0, 0, 0.5]}
/// weather:
///   - {type: snow_cover, fill_density: 60}
///   - {type: snowfall, count: 3000}
///   - {type: static, preset: fog, intensity: 1.5}
/// output: {dir: out, format: png}
/// seed: 7
/// @endcode

#pragma once

#include "weathersplat/camera_path.hpp"
#include "weathersplat/dynamic_weather.hpp"
#include "weathersplat/scene.hpp"
#include "weathersplat/snow_accumulation.hpp"
#include "weathersplat/static_weather.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace weathersplat {

enum class ImageFormat { png, ppm, raw_float };

inline const char *to_string(ImageFormat f) {
    switch (f) {
    case ImageFormat::png: return "png";
    case ImageFormat::ppm: return "ppm";
    case ImageFormat::raw_float: return "raw-float";
    }
    return "png";
}

enum class EffectType { static_weather, rainfall, snowfall, snow_cover };

inline const char *to_string(EffectType t) {
    switch (t) {
    case EffectType::static_weather: return "static";
    case EffectType::rainfall: return "rainfall";
    case EffectType::snowfall: return "snowfall";
    case EffectType::snow_cover: return "snow_cover";
    }
    return "static";
}

struct EffectConfig {
    EffectType type = EffectType::static_weather;
    std::string preset;
    StaticWeatherParams fog;                  ///< static
    ParticleParams particles;                 ///< rainfall / snowfall
    bool spawn_bounds_set = false;            ///< otherwise derived from the scene
    std::optional<StaticWeatherParams> haze;  ///< light fog after rainfall / snowfall
    SnowCoverParams snow;                     ///< snow_cover
    std::optional<std::filesystem::path> export_ply;
    std::optional<std::uint64_t> seed;        ///< otherwise derived from the job seed
};

struct SkyCoverConfig {
    SkyCoverParams params;
    bool center_set = false; ///< otherwise the center of the scene bounds
};

struct OutputConfig {
    std::filesystem::path dir = "out";
    ImageFormat format = ImageFormat::png;
    bool depth = false; ///< also write 16-bit normalized depth PNGs
};

struct JobConfig {
    std::filesystem::path scene_path;
    int sh_degree = 0;
    double d_max = 100.0;
    CameraPath camera_path;
    std::optional<SkyCoverConfig> sky_cover;
    std::vector<EffectConfig> weather;
    OutputConfig output;
    std::uint64_t seed = 0;
    int threads = 0;
    Rgb background = Rgb::Zero();
};

namespace config_detail {

class Reader {
  public:
    [[noreturn]] static void fail(const YAML::Node &n, const std::string &path, const std::string &msg) {
        std::string where = path.empty() ? "<root>" : path;
        if (n.Mark().line >= 0) where += " (line " + std::to_string(n.Mark().line + 1) + ")";
        throw ConfigError(where + ": " + msg);
    }

    static std::string join(const std::string &path, const std::string &key) {
        return path.empty() ? key : path + "." + key;
    }

    static void require_map(const YAML::Node &n, const std::string &path) {
        if (!n.IsMap()) fail(n, path, "expected a mapping");
    }

    static void check_keys(const YAML::Node &n, const std::string &path, std::initializer_list<const char *> allowed) {
        require_map(n, path);
        const std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto &kv : n) {
            const auto key = kv.first.as<std::string>();
            if (!ok.count(key)) fail(kv.first, join(path, key), "unknown key '" + key + "'");
        }
    }

    template <typename T>
    static T scalar(const YAML::Node &n, const std::string &path, const char *what) {
        if (!n.IsScalar()) fail(n, path, std::string("expected ") + what);
        try {
            return n.as<T>();
        } catch (const YAML::Exception &) {
            fail(n, path, std::string("expected ") + what + ", got '" + n.Scalar() + "'");
        }
    }

    static double number(const YAML::Node &n, const std::string &path) {
        const double v = scalar<double>(n, path, "a number");
        if (!std::isfinite(v)) fail(n, path, "value must be finite");
        return v;
    }

    static Vec3 vec3(const YAML::Node &n, const std::string &path) {
        if (!n.IsSequence() || n.size() != 3) fail(n, path, "expected a list of 3 numbers");
        return Vec3(number(n[0], path + "[0]"), number(n[1], path + "[1]"), number(n[2], path + "[2]"));
    }

    static Rgb color(const YAML::Node &n, const std::string &path) {
        const Vec3 c = vec3(n, path);
        if ((c.array() < 0.0).any() || (c.array() > 1.0).any()) fail(n, path, "color components must be in [0,1]");
        return c;
    }

    /// Reads n[key] into out when present.
    template <typename Fn>
    static void opt(const YAML::Node &n, const std::string &path, const char *key, Fn &&fn) {
        if (const YAML::Node v = n[key]) fn(v, join(path, key));
    }

    static void get(const YAML::Node &n, const std::string &path, const char *key, double &out) {
        opt(n, path, key, [&](const YAML::Node &v, const std::string &p) { out = number(v, p); });
    }
    static void get(const YAML::Node &n, const std::string &path, const char *key, int &out) {
        opt(n, path, key, [&](const YAML::Node &v, const std::string &p) { out = scalar<int>(v, p, "an integer"); });
    }
    static void get(const YAML::Node &n, const std::string &path, const char *key, std::size_t &out) {
        opt(n, path, key, [&](const YAML::Node &v, const std::string &p) {
            const auto x = scalar<long long>(v, p, "an integer");
            if (x < 0) fail(v, p, "must be non-negative");
            out = static_cast<std::size_t>(x);
        });
    }
    static void get_seed(const YAML::Node &n, const std::string &path, const char *key, std::uint64_t &out) {
        opt(n, path, key, [&](const YAML::Node &v, const std::string &p) {
            out = scalar<std::uint64_t>(v, p, "a non-negative integer");
        });
    }
    static void get(const YAML::Node &n, const std::string &path, const char *key, bool &out) {
        opt(n, path, key, [&](const YAML::Node &v, const std::string &p) { out = scalar<bool>(v, p, "true or false"); });
    }
    static void get(const YAML::Node &n, const std::string &path, const char *key, Vec3 &out) {
        opt(n, path, key, [&](const YAML::Node &v, const std::string &p) { out = vec3(v, p); });
    }
    static void get_color(const YAML::Node &n, const std::string &path, const char *key, Rgb &out) {
        opt(n, path, key, [&](const YAML::Node &v, const std::string &p) { out = color(v, p); });
    }

    /// Runs a library validate() and rethrows its message against `n`.
    template <typename Fn>
    static void validated(const YAML::Node &n, const std::string &path, Fn &&fn) {
        try {
            fn();
        } catch (const ArgumentError &e) {
            fail(n, path, e.what());
        }
    }
};

inline StaticWeatherParams parse_fog(const YAML::Node &n, const std::string &path, StaticWeatherParams p) {
    Reader::get_color(n, path, "fog_color", p.fog_color);
    Reader::get(n, path, "intensity", p.intensity);
    if (!(p.intensity >= 0.0)) Reader::fail(n["intensity"], Reader::join(path, "intensity"), "must be non-negative");
    return p;
}

inline CameraPath parse_camera_path(const YAML::Node &n, const std::string &path) {
    Reader::check_keys(n, path, {"width", "height", "fx", "fy", "focal", "cx", "cy", "frames", "fps", "keyframes"});
    CameraPath cp;
    Reader::get(n, path, "width", cp.intrinsics.width);
    Reader::get(n, path, "height", cp.intrinsics.height);
    if (n["focal"]) {
        Reader::get(n, path, "focal", cp.intrinsics.fx);
        cp.intrinsics.fy = cp.intrinsics.fx;
    }
    Reader::get(n, path, "fx", cp.intrinsics.fx);
    if (n["fx"] && !n["fy"]) cp.intrinsics.fy = cp.intrinsics.fx;
    Reader::get(n, path, "fy", cp.intrinsics.fy);
    Reader::opt(n, path, "cx", [&](const YAML::Node &v, const std::string &p) { cp.intrinsics.cx = Reader::number(v, p); });
    Reader::opt(n, path, "cy", [&](const YAML::Node &v, const std::string &p) { cp.intrinsics.cy = Reader::number(v, p); });
    Reader::get(n, path, "frames", cp.frames);
    Reader::get(n, path, "fps", cp.fps);
    if (cp.intrinsics.width < 1 || cp.intrinsics.height < 1) Reader::fail(n, path, "width and height must be >= 1");
    if (!(cp.intrinsics.fx > 0.0 && cp.intrinsics.fy > 0.0)) Reader::fail(n, path, "focal lengths must be positive");

    const std::string kpath = Reader::join(path, "keyframes");
    const YAML::Node keys = n["keyframes"];
    if (!keys) Reader::fail(n, kpath, "missing required key");
    if (!keys.IsSequence() || keys.size() == 0) Reader::fail(keys, kpath, "expected a non-empty list");
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const YAML::Node k = keys[i];
        const std::string p = kpath + "[" + std::to_string(i) + "]";
        Reader::check_keys(k, p, {"position", "rotation", "look_at", "up", "frame"});
        Keyframe kf;
        if (!k["position"]) Reader::fail(k, Reader::join(p, "position"), "missing required key");
        kf.position = Reader::vec3(k["position"], Reader::join(p, "position"));
        if (k["rotation"] && k["look_at"]) Reader::fail(k, p, "give either rotation or look_at, not both");
        if (const YAML::Node r = k["rotation"]) {
            const std::string rp = Reader::join(p, "rotation");
            if (!r.IsSequence() || r.size() != 4) Reader::fail(r, rp, "expected [w, x, y, z]");
            kf.orientation = Quat(Reader::number(r[0], rp), Reader::number(r[1], rp), Reader::number(r[2], rp),
                                  Reader::number(r[3], rp));
            if (!(kf.orientation.norm() > 1e-12)) Reader::fail(r, rp, "quaternion must be nonzero");
            kf.orientation.normalize();
        } else if (const YAML::Node t = k["look_at"]) {
            Vec3 up = Vec3::UnitZ();
            Reader::get(k, p, "up", up);
            const Vec3 target = Reader::vec3(t, Reader::join(p, "look_at"));
            if ((target - kf.position).norm() < 1e-12) Reader::fail(t, Reader::join(p, "look_at"), "coincides with position");
            kf.orientation = look_at_rotation(kf.position, target, up);
        } else {
            Reader::fail(k, p, "missing rotation or look_at");
        }
        if (k["up"] && !k["look_at"]) Reader::fail(k["up"], Reader::join(p, "up"), "only valid together with look_at");
        Reader::opt(k, p, "frame", [&](const YAML::Node &v, const std::string &fp) {
            kf.frame = Reader::scalar<int>(v, fp, "an integer");
        });
        cp.keyframes.push_back(kf);
    }
    Reader::validated(n, path, [&] { cp.validate(); });
    return cp;
}

inline void parse_particles(const YAML::Node &n, const std::string &path, EffectConfig &e) {
    Reader::check_keys(n, path,
                       {"type", "count", "bounds", "size", "elongation", "color", "opacity", "velocity", "max_per_layer",
                        "t_min", "t_max", "t_d", "t_c", "seed", "haze"});
    ParticleParams &p = e.particles;
    p = particle_preset(e.type == EffectType::rainfall ? ParticleKind::rain : ParticleKind::snow);
    Reader::get(n, path, "count", p.count);
    Reader::opt(n, path, "bounds", [&](const YAML::Node &v, const std::string &bp) {
        Reader::check_keys(v, bp, {"min", "max"});
        if (!v["min"] || !v["max"]) Reader::fail(v, bp, "requires min and max");
        p.spawn_bounds = Aabb{Reader::vec3(v["min"], Reader::join(bp, "min")), Reader::vec3(v["max"], Reader::join(bp, "max"))};
        if (p.spawn_bounds.empty()) Reader::fail(v, bp, "min must not exceed max");
        e.spawn_bounds_set = true;
    });
    Reader::get(n, path, "size", p.size);
    Reader::get(n, path, "elongation", p.elongation);
    Reader::get_color(n, path, "color", p.base_color);
    Reader::get(n, path, "opacity", p.opacity);
    Reader::get(n, path, "velocity", p.velocity);
    Reader::get(n, path, "max_per_layer", p.max_per_layer);
    Reader::get(n, path, "t_min", p.t_min);
    Reader::get(n, path, "t_max", p.t_max);
    Reader::get(n, path, "t_d", p.t_d);
    Reader::get(n, path, "t_c", p.t_c);
    Reader::opt(n, path, "seed", [&](const YAML::Node &v, const std::string &sp) {
        e.seed = Reader::scalar<std::uint64_t>(v, sp, "a non-negative integer");
    });
    Reader::opt(n, path, "haze", [&](const YAML::Node &v, const std::string &hp) {
        Reader::check_keys(v, hp, {"fog_color", "intensity"});
        e.haze = parse_fog(v, hp, StaticWeatherParams{Rgb(0.8, 0.8, 0.82), 0.5});
    });
    if (!(p.t_min <= p.t_max)) {
        const YAML::Node at = n["t_min"] ? n["t_min"] : n["t_max"];
        Reader::fail(at, path, Reader::join(path, "t_min") + " (" + std::to_string(p.t_min) + ") must not exceed " +
                                   Reader::join(path, "t_max") + " (" + std::to_string(p.t_max) + ")");
    }
    Reader::validated(n, path, [&] { p.validate(); });
}

inline void parse_snow_cover(const YAML::Node &n, const std::string &path, EffectConfig &e) {
    Reader::check_keys(n, path,
                       {"type", "gravity", "seed_dot_min", "plane_angle_max", "k_neighbors", "fill_density", "snow_scale",
                        "snow_opacity", "snow_color", "outlier_k", "outlier_factor", "seed", "export_ply"});
    SnowCoverParams &s = e.snow;
    Reader::get(n, path, "gravity", s.gravity);
    if (n["gravity"]) {
        if (!(s.gravity.norm() > 1e-12)) Reader::fail(n["gravity"], Reader::join(path, "gravity"), "must be nonzero");
        s.gravity.normalize();
    }
    Reader::get(n, path, "seed_dot_min", s.seed_dot_min);
    Reader::get(n, path, "plane_angle_max", s.plane_angle_max);
    Reader::get(n, path, "k_neighbors", s.k_neighbors);
    Reader::get(n, path, "fill_density", s.fill_density);
    Reader::get(n, path, "snow_scale", s.snow_scale);
    Reader::get(n, path, "snow_opacity", s.snow_opacity);
    Reader::get_color(n, path, "snow_color", s.snow_color);
    Reader::get(n, path, "outlier_k", s.outlier_k);
    Reader::get(n, path, "outlier_factor", s.outlier_factor);
    Reader::opt(n, path, "seed", [&](const YAML::Node &v, const std::string &sp) {
        e.seed = Reader::scalar<std::uint64_t>(v, sp, "a non-negative integer");
    });
    Reader::opt(n, path, "export_ply", [&](const YAML::Node &v, const std::string &ep) {
        e.export_ply = Reader::scalar<std::string>(v, ep, "a file name");
    });
    Reader::validated(n, path, [&] { s.validate(); });
}

inline EffectConfig parse_effect(const YAML::Node &n, const std::string &path) {
    Reader::require_map(n, path);
    const YAML::Node t = n["type"];
    if (!t) Reader::fail(n, Reader::join(path, "type"), "missing required key");
    const auto type = Reader::scalar<std::string>(t, Reader::join(path, "type"), "an effect type");
    EffectConfig e;
    if (type == "static") {
        e.type = EffectType::static_weather;
        Reader::check_keys(n, path, {"type", "preset", "fog_color", "intensity"});
        StaticWeatherParams base;
        if (const YAML::Node p = n["preset"]) {
            e.preset = Reader::scalar<std::string>(p, Reader::join(path, "preset"), "a preset name");
            const auto found = static_preset(e.preset);
            if (!found) Reader::fail(p, Reader::join(path, "preset"), "unknown preset '" + e.preset + "' (fog, haze, smog)");
            base = *found;
        }
        e.fog = parse_fog(n, path, base);
    } else if (type == "rainfall" || type == "snowfall") {
        e.type = type == "rainfall" ? EffectType::rainfall : EffectType::snowfall;
        parse_particles(n, path, e);
    } else if (type == "snow_cover") {
        e.type = EffectType::snow_cover;
        parse_snow_cover(n, path, e);
    } else {
        Reader::fail(t, Reader::join(path, "type"), "unknown effect type '" + type + "' (static, rainfall, snowfall, snow_cover)");
    }
    return e;
}

inline SkyCoverConfig parse_sky(const YAML::Node &n, const std::string &path) {
    Reader::check_keys(n, path, {"center", "radius", "point_count", "color", "opacity"});
    SkyCoverConfig s;
    if (n["center"]) {
        Reader::get(n, path, "center", s.params.center);
        s.center_set = true;
    }
    Reader::get(n, path, "radius", s.params.radius);
    Reader::get(n, path, "point_count", s.params.point_count);
    Reader::get_color(n, path, "color", s.params.color);
    Reader::get(n, path, "opacity", s.params.opacity);
    if (!(s.params.radius > 0.0)) Reader::fail(n, Reader::join(path, "radius"), "must be positive");
    if (s.params.point_count < 0) Reader::fail(n, Reader::join(path, "point_count"), "must be >= 0");
    if (!(s.params.opacity >= 0.0 && s.params.opacity <= 1.0)) {
        Reader::fail(n, Reader::join(path, "opacity"), "must be in [0,1]");
    }
    return s;
}

} // namespace config_detail

/// Parses a job from YAML text. Relative paths (scene, output dir) are
/// resolved against `base_dir`.
inline JobConfig parse_config_string(const std::string &text, const std::filesystem::path &base_dir = {}) {
    using config_detail::Reader;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception &e) {
        throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root || root.IsNull()) throw ConfigError("<root>: empty configuration");
    Reader::check_keys(root, "",
                       {"scene", "sh_degree", "d_max", "camera_path", "sky_cover", "weather", "output", "seed", "threads",
                        "background"});
    JobConfig cfg;
    if (!root["scene"]) Reader::fail(root, "scene", "missing required key");
    cfg.scene_path = Reader::scalar<std::string>(root["scene"], "scene", "a file path");
    if (cfg.scene_path.is_relative() && !base_dir.empty()) cfg.scene_path = base_dir / cfg.scene_path;
    Reader::get(root, "", "sh_degree", cfg.sh_degree);
    if (cfg.sh_degree < 0 || cfg.sh_degree > 3) Reader::fail(root["sh_degree"], "sh_degree", "must be in 0..3");
    Reader::get(root, "", "d_max", cfg.d_max);
    if (!(cfg.d_max > 0.0)) Reader::fail(root["d_max"], "d_max", "must be positive");
    if (!root["camera_path"]) Reader::fail(root, "camera_path", "missing required key");
    cfg.camera_path = config_detail::parse_camera_path(root["camera_path"], "camera_path");
    if (const YAML::Node s = root["sky_cover"]) cfg.sky_cover = config_detail::parse_sky(s, "sky_cover");
    if (const YAML::Node w = root["weather"]) {
        if (!w.IsSequence()) Reader::fail(w, "weather", "expected a list of effects");
        for (std::size_t i = 0; i < w.size(); ++i) {
            cfg.weather.push_back(config_detail::parse_effect(w[i], "weather[" + std::to_string(i) + "]"));
        }
    }
    if (const YAML::Node o = root["output"]) {
        Reader::check_keys(o, "output", {"dir", "format", "depth"});
        if (o["dir"]) cfg.output.dir = Reader::scalar<std::string>(o["dir"], "output.dir", "a directory");
        if (const YAML::Node f = o["format"]) {
            const auto name = Reader::scalar<std::string>(f, "output.format", "an image format");
            if (name == "png") cfg.output.format = ImageFormat::png;
            else if (name == "ppm") cfg.output.format = ImageFormat::ppm;
            else if (name == "raw-float") cfg.output.format = ImageFormat::raw_float;
            else Reader::fail(f, "output.format", "unknown format '" + name + "' (png, ppm, raw-float)");
        }
        Reader::get(o, "output", "depth", cfg.output.depth);
    }
    if (cfg.output.dir.is_relative() && !base_dir.empty()) cfg.output.dir = base_dir / cfg.output.dir;
    Reader::get_seed(root, "", "seed", cfg.seed);
    Reader::get(root, "", "threads", cfg.threads);
    if (cfg.threads < 0) Reader::fail(root["threads"], "threads", "must be >= 0");
    Reader::opt(root, "", "background", [&](const YAML::Node &v, const std::string &p) { cfg.background = Reader::color(v, p); });
    return cfg;
}

inline JobConfig parse_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_string(ss.str(), path.parent_path());
    } catch (const ConfigError &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace weathersplat
