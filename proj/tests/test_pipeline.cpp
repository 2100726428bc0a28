// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

#include "weathersplat/pipeline.hpp"

#include "support/fixtures.hpp"

#include <gtest/gtest.h>

using namespace weathersplat;
namespace fs = std::filesystem;
namespace fx = weathersplat::testing;

namespace {

/// Flat ground grid plus a few bright boxes, written once as a PLY.
GaussianScene ground_scene() {
    std::vector<Gaussian> gs;
    for (int i = -6; i <= 6; ++i) {
        for (int j = -6; j <= 6; ++j) {
            Gaussian g = fx::colored(Vec3(i * 0.8, j * 0.8, 0.0), 0.4, 0.9, Rgb(0.25, 0.35 + 0.02 * j, 0.2));
            g.scale = Vec3(0.45, 0.45, 0.02);
            gs.push_back(g);
        }
    }
    gs.push_back(fx::colored(Vec3(0.5, 1.0, 0.6), 0.5, 0.95, Rgb(0.8, 0.3, 0.2)));
    gs.push_back(fx::colored(Vec3(-1.5, 2.0, 0.8), 0.6, 0.95, Rgb(0.2, 0.3, 0.8)));
    return GaussianScene(std::move(gs), 0);
}

fs::path tmp_dir(const std::string &name) {
    const fs::path dir = fs::path(WEATHERSPLAT_TEST_TMP) / "pipeline" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path scene_file() {
    static const fs::path path = [] {
        const fs::path p = fs::path(WEATHERSPLAT_TEST_TMP) / "pipeline_ground.ply";
        save_scene(ground_scene(), p);
        return p;
    }();
    return path;
}

std::string job_yaml(const std::string &weather, int frames, const std::string &extra = "") {
    return "scene: " + scene_file().string() + R"(
d_max: 30
camera_path:
  width: 48
  height: 36
  fx: 40
  frames: )" + std::to_string(frames) +
           R"(
  fps: 10
  keyframes:
    - {position: [0, -8, 3], look_at: [0, 0, 0]}
    - {position: [2, -7, 3], look_at: [0, 0, 0]}
weather: )" + weather + "\n" + extra;
}

JobConfig job(const std::string &weather, int frames, const fs::path &out, const std::string &extra = "") {
    JobConfig cfg = parse_config_string(job_yaml(weather, frames, extra));
    cfg.output.dir = out;
    return cfg;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> frame_files(const fs::path &dir) {
    std::vector<std::string> out;
    for (const auto &e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("frame_", 0) == 0) out.push_back(name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

double max_abs_diff(const RgbImage &a, const RgbImage &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace

TEST(Pipeline, ClearSingleFrameEqualsDirectRasterize) {
    const fs::path out = tmp_dir("clear");
    JobConfig cfg = job("[]", 1, out);
    cfg.output.format = ImageFormat::raw_float;
    const RunManifest m = run_job(cfg);
    ASSERT_EQ(m.frames.size(), 1u);

    const GaussianScene scene = load_scene(scene_file());
    const Camera cam = interpolate_camera(cfg.camera_path, 0);
    const RenderTargets direct = rasterize(scene, cam, cfg.d_max, RasterOptions{});
    const RgbImage written = read_raw_float<3>(out / m.frames[0].image, 48, 36);
    for (std::size_t i = 0; i < written.data().size(); ++i) {
        ASSERT_EQ(written.data()[i], static_cast<double>(static_cast<float>(direct.rgb.data()[i])));
    }
    JobRunner runner(cfg, scene);
    EXPECT_EQ(runner.render_next(), direct.rgb);
}

TEST(Pipeline, SnowfallRunsAreByteIdentical) {
    const fs::path a = tmp_dir("det_a"), b = tmp_dir("det_b");
    const std::string weather = "[{type: snowfall, count: 400, max_per_layer: 150}]";
    run_job(job(weather, 10, a, "seed: 3\n"));
    run_job(job(weather, 10, b, "seed: 3\n"));
    const auto fa = frame_files(a), fb = frame_files(b);
    ASSERT_EQ(fa.size(), 10u);
    ASSERT_EQ(fa, fb);
    for (const auto &f : fa) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_NE(slurp(a / fa[0]), slurp(a / fa[9]));
}

TEST(Pipeline, SeedChangesParticles) {
    const std::string weather = "[{type: rainfall, count: 300}]";
    JobRunner r0(job(weather, 1, tmp_dir("seed0"), "seed: 1\n"));
    JobRunner r1(job(weather, 1, tmp_dir("seed1"), "seed: 2\n"));
    EXPECT_NE(r0.render_next(), r1.render_next());
}

TEST(Pipeline, ParticlesAdvanceOneFrameInterval) {
    JobRunner runner(job("[{type: rainfall, count: 50}]", 5, tmp_dir("advance")));
    const std::vector<ParticleLayer> start = runner.particles(0);
    for (int k = 0; k < 4; ++k) runner.render_next();
    const ParticleLayer &now = runner.particles(0)[0];
    EXPECT_EQ(now.time, 3.0 / 10.0);
    for (std::size_t i = 0; i < now.gaussians.size(); ++i) {
        const Vec3 expect = wrap_into(start[0].origins[i] + now.velocity * now.time, now.bounds);
        EXPECT_EQ(now.gaussians[i].mean, expect);
    }
}

TEST(Pipeline, DefaultSpawnBoundsCoverScene) {
    JobRunner runner(job("[{type: snowfall, count: 100}]", 1, tmp_dir("bounds")));
    const Aabb &b = runner.particles(0)[0].bounds;
    EXPECT_TRUE(b.contains(Vec3(-4.8, -4.8, 0.0)));
    EXPECT_TRUE(b.contains(Vec3(4.8, 4.8, 0.8)));
    EXPECT_LT(b.max.x(), 6.5);
}

TEST(Pipeline, FallThenFogOrdering) {
    // Particles composited first are attenuated by the fog; the reverse
    // order would leave them at full brightness over the fogged frame.
    const std::string weather = "[{type: snowfall, count: 600, max_per_layer: 200, t_min: 0.3, t_max: 0.3},"
                                " {type: static, intensity: 2.5}]";
    JobConfig cfg = job(weather, 1, tmp_dir("order"));
    JobRunner runner(cfg);
    const RgbImage piped = runner.render_next();

    const Camera cam = interpolate_camera(cfg.camera_path, 0);
    const RenderTargets t = rasterize(runner.scene(), cam, cfg.d_max, runner.scene_options());
    ParticleParams p = cfg.weather[0].particles;
    const std::vector<ParticleLayer> &layers = runner.particles(0);
    const RgbImage fall_first = apply_static(apply_fall(t.rgb, t, cam, layers, p), t.depth_ref, cfg.weather[1].fog);
    const RgbImage fog_first = apply_fall(apply_static(t.rgb, t.depth_ref, cfg.weather[1].fog), t, cam, layers, p);

    EXPECT_EQ(piped, fall_first);
    EXPECT_GT(max_abs_diff(fall_first, fog_first), 0.05);

    // Flake contribution is scaled by the fog transmittance 1 - alpha.
    const RgbImage fog_only = apply_static(t.rgb, t.depth_ref, cfg.weather[1].fog);
    const RgbImage fall_only = apply_fall(t.rgb, t, cam, layers, p);
    const ScalarMap alpha = fog_alpha(t.depth_ref, cfg.weather[1].fog.intensity);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < alpha.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const double added = fall_only.at(i, c) - t.rgb.at(i, c);
            if (added <= 1e-9) continue;
            EXPECT_NEAR(fall_first.at(i, c) - fog_only.at(i, c), (1.0 - alpha.at(i)) * added, 1e-12);
            ++checked;
        }
    }
    EXPECT_GT(checked, 10u);
}

TEST(Pipeline, EffectsApplyInDeclaredOrder) {
    JobConfig cfg = job("[{type: static, preset: smog}, {type: static, preset: fog, intensity: 0.5}]", 1,
                        tmp_dir("declared"));
    JobRunner runner(cfg);
    const Camera cam = interpolate_camera(cfg.camera_path, 0);
    const RenderTargets t = rasterize(runner.scene(), cam, cfg.d_max, runner.scene_options());
    const RgbImage expect =
        apply_static(apply_static(t.rgb, t.depth_ref, cfg.weather[0].fog), t.depth_ref, cfg.weather[1].fog);
    EXPECT_EQ(runner.render_next(), expect);
}

TEST(Pipeline, ManifestMatchesFiles) {
    const fs::path out = tmp_dir("manifest");
    JobConfig cfg = job("[{type: snow_cover, fill_density: 8}, {type: rainfall, count: 100}]", 4, out,
                        "sky_cover: {radius: 25, point_count: 200}\noutput: {depth: true}\n");
    cfg.output.dir = out;
    const RunManifest m = run_job(cfg);
    const auto files = frame_files(out);
    ASSERT_EQ(files.size(), 4u);
    ASSERT_EQ(m.frames.size(), files.size());

    const auto j = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(j["frame_count"].get<std::size_t>(), files.size());
    EXPECT_EQ(j["frames"].size(), files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
        EXPECT_EQ(j["frames"][i]["image"].get<std::string>(), files[i]);
        EXPECT_TRUE(fs::exists(out / j["frames"][i]["depth"].get<std::string>()));
        EXPECT_GE(j["frames"][i]["ms"].get<double>(), 0.0);
    }
    EXPECT_EQ(j["version"].get<std::string>(), kVersion);
    EXPECT_EQ(j["counts"]["sky"].get<std::size_t>(), 200u);
    EXPECT_GT(j["counts"]["snow"].get<std::size_t>(), 0u);
    EXPECT_EQ(j["counts"]["scene"].get<std::size_t>(), ground_scene().size() + 200 + m.snow_gaussians);
    EXPECT_EQ(j["counts"]["particles"].get<std::size_t>(), 100u);
    EXPECT_EQ(j["config"]["weather"][1]["type"].get<std::string>(), "rainfall");
    EXPECT_EQ(j["config"]["camera_path"]["frames"].get<int>(), 4);
}

TEST(Pipeline, SnowCoverPreservesOriginalScene) {
    JobRunner runner(job("[{type: snow_cover, fill_density: 8}]", 1, tmp_dir("snow")));
    const GaussianScene original = load_scene(scene_file());
    ASSERT_GT(runner.snow_count(), 0u);
    ASSERT_EQ(runner.scene().size(), original.size() + runner.snow_count());
    for (std::size_t i = 0; i < original.size(); ++i) {
        EXPECT_EQ(runner.scene()[i].mean, original[i].mean);
        EXPECT_EQ(runner.scene()[i].sh, original[i].sh);
    }
}

TEST(Pipeline, UnwritableOutputAbortsBeforeFrames) {
    const fs::path dir = tmp_dir("unwritable");
    { std::ofstream(dir / "blocker") << "x"; }
    JobConfig cfg = job("[]", 2, dir / "blocker" / "out");
    EXPECT_THROW(run_job(cfg), IoError);
    EXPECT_FALSE(fs::exists(dir / "blocker" / "out"));
}

TEST(Pipeline, MissingSceneAbortsBeforeFrames) {
    const fs::path out = tmp_dir("noscene");
    JobConfig cfg = job("[]", 2, out);
    cfg.scene_path = out / "absent.ply";
    EXPECT_THROW(run_job(cfg), IoError);
    EXPECT_TRUE(frame_files(out).empty());
    EXPECT_FALSE(fs::exists(out / "manifest.json"));
}

TEST(Pipeline, OutputFormats) {
    for (const auto &[format, ext] : {std::pair{ImageFormat::png, ".png"}, std::pair{ImageFormat::ppm, ".ppm"}}) {
        const fs::path out = tmp_dir(std::string("format") + ext);
        JobConfig cfg = job("[]", 1, out);
        cfg.output.format = format;
        const RunManifest m = run_job(cfg);
        EXPECT_EQ(fs::path(m.frames[0].image).extension(), ext);
        const std::string bytes = slurp(out / m.frames[0].image);
        if (format == ImageFormat::png) {
            EXPECT_EQ(bytes.substr(1, 3), "PNG");
        } else {
            EXPECT_EQ(bytes.size(), std::string("P6\n48 36\n255\n").size() + 48u * 36u * 3u);
        }
    }
}
