// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

#include "weathersplat/config.hpp"

#include <gtest/gtest.h>

using namespace weathersplat;

namespace {

const char *kMinimal = R"(
scene: scene.ply
camera_path:
  keyframes:
    - {position: [0, -5, 1], look_at: [0, 0, 0]}
)";

std::string message_of(const std::string &text) {
    try {
        parse_config_string(text);
    } catch (const ConfigError &e) {
        return e.what();
    }
    return "";
}

CameraPath two_keys(const Quat &a, const Quat &b, const Vec3 &pa, const Vec3 &pb, int frames) {
    CameraPath p;
    p.intrinsics.width = 32;
    p.intrinsics.height = 24;
    p.frames = frames;
    p.keyframes = {Keyframe{pa, a, {}}, Keyframe{pb, b, {}}};
    return p;
}

} // namespace

TEST(Config, MinimalAppliesDefaults) {
    const JobConfig cfg = parse_config_string(kMinimal, "/data/jobs");
    EXPECT_EQ(cfg.scene_path, std::filesystem::path("/data/jobs/scene.ply"));
    EXPECT_TRUE(cfg.weather.empty());
    EXPECT_EQ(cfg.output.format, ImageFormat::png);
    EXPECT_EQ(cfg.seed, 0u);
    EXPECT_EQ(cfg.camera_path.frames, 1);
    EXPECT_EQ(cfg.camera_path.keyframes.size(), 1u);
    EXPECT_FALSE(cfg.sky_cover.has_value());
    EXPECT_EQ(cfg.output.dir, std::filesystem::path("/data/jobs/out"));
}

TEST(Config, AbsoluteScenePathKept) {
    const JobConfig cfg = parse_config_string(R"(
scene: /abs/garden.ply
camera_path: {keyframes: [{position: [0, 0, 0], rotation: [1, 0, 0, 0]}]}
)",
                                              "/elsewhere");
    EXPECT_EQ(cfg.scene_path, std::filesystem::path("/abs/garden.ply"));
}

TEST(Config, FullJobParses) {
    const JobConfig cfg = parse_config_string(R"(
scene: s.ply
d_max: 40
camera_path:
  width: 320
  height: 240
  fx: 260
  frames: 48
  fps: 12
  keyframes:
    - {position: [0, -8, 2], look_at: [0, 0, 0.5]}
    - {position: [3, -7, 2], look_at: [0, 0, 0.5], frame: 47}
sky_cover: {radius: 60, point_count: 500}
weather:
  - {type: snow_cover, fill_density: 60}
  - {type: snowfall, count: 300, max_per_layer: 100, haze: {intensity: 0.3}}
  - {type: static, preset: haze, intensity: 1.5}
output: {dir: frames, format: raw-float, depth: true}
seed: 7
threads: 2
)");
    EXPECT_DOUBLE_EQ(cfg.d_max, 40.0);
    EXPECT_EQ(cfg.camera_path.intrinsics.width, 320);
    EXPECT_DOUBLE_EQ(cfg.camera_path.intrinsics.fy, 260.0);
    EXPECT_EQ(cfg.camera_path.frames, 48);
    ASSERT_EQ(cfg.weather.size(), 3u);
    EXPECT_EQ(cfg.weather[0].type, EffectType::snow_cover);
    EXPECT_DOUBLE_EQ(cfg.weather[0].snow.fill_density, 60.0);
    EXPECT_EQ(cfg.weather[1].type, EffectType::snowfall);
    EXPECT_EQ(cfg.weather[1].particles.count, 300u);
    EXPECT_DOUBLE_EQ(cfg.weather[1].particles.t_min, snow_preset().t_min);
    ASSERT_TRUE(cfg.weather[1].haze.has_value());
    EXPECT_DOUBLE_EQ(cfg.weather[1].haze->intensity, 0.3);
    EXPECT_EQ(cfg.weather[2].type, EffectType::static_weather);
    EXPECT_TRUE(cfg.weather[2].fog.fog_color.isApprox(static_preset("haze")->fog_color));
    EXPECT_DOUBLE_EQ(cfg.weather[2].fog.intensity, 1.5);
    EXPECT_EQ(cfg.output.format, ImageFormat::raw_float);
    EXPECT_TRUE(cfg.output.depth);
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_EQ(cfg.threads, 2);
    ASSERT_TRUE(cfg.sky_cover.has_value());
    EXPECT_FALSE(cfg.sky_cover->center_set);
    EXPECT_EQ(cfg.camera_path.keyframe_times(), (std::vector<double>{0.0, 47.0}));
}

TEST(Config, TMinAboveTMaxNamesBothKeys) {
    const std::string msg = message_of(R"(
scene: s.ply
camera_path: {keyframes: [{position: [0, 0, 0], rotation: [1, 0, 0, 0]}]}
weather:
  - {type: static}
  - type: snowfall
    t_min: 0.5
    t_max: 0.1
)");
    EXPECT_NE(msg.find("weather[1].t_min"), std::string::npos) << msg;
    EXPECT_NE(msg.find("weather[1].t_max"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
}

TEST(Config, DuplicateEffectsKeptInOrder) {
    const JobConfig cfg = parse_config_string(R"(
scene: s.ply
camera_path: {keyframes: [{position: [0, 0, 0], rotation: [1, 0, 0, 0]}]}
weather:
  - {type: static, intensity: 1}
  - {type: static, intensity: 2}
)");
    ASSERT_EQ(cfg.weather.size(), 2u);
    EXPECT_DOUBLE_EQ(cfg.weather[0].fog.intensity, 1.0);
    EXPECT_DOUBLE_EQ(cfg.weather[1].fog.intensity, 2.0);
}

TEST(Config, UnknownKeyReportsPathAndLine) {
    const std::string msg = message_of(R"(
scene: s.ply
camera_path:
  frames: 3
  keyframes:
    - {position: [0, 0, 0], rotation: [1, 0, 0, 0]}
weather:
  - type: rainfall
    cuont: 10
)");
    EXPECT_NE(msg.find("weather[0].cuont"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 9"), std::string::npos) << msg;
}

TEST(Config, UnknownTopLevelKey) {
    EXPECT_NE(message_of(std::string(kMinimal) + "colour: red\n").find("colour"), std::string::npos);
}

TEST(Config, TypeErrorReportsPath) {
    const std::string msg = message_of(std::string(kMinimal) + "d_max: far\n");
    EXPECT_NE(msg.find("d_max"), std::string::npos) << msg;
    EXPECT_NE(msg.find("far"), std::string::npos) << msg;
}

TEST(Config, ConstraintViolations) {
    EXPECT_THROW(parse_config_string(std::string(kMinimal) + "d_max: -1\n"), ConfigError);
    EXPECT_THROW(parse_config_string(std::string(kMinimal) + "output: {format: gif}\n"), ConfigError);
    EXPECT_THROW(parse_config_string(std::string(kMinimal) + "weather: [{type: hail}]\n"), ConfigError);
    EXPECT_THROW(parse_config_string(std::string(kMinimal) + "weather: [{type: static, preset: mist}]\n"), ConfigError);
    EXPECT_THROW(parse_config_string(std::string(kMinimal) + "weather: [{type: static, intensity: -1}]\n"), ConfigError);
    EXPECT_THROW(parse_config_string(std::string(kMinimal) + "weather: [{type: rainfall, opacity: 2}]\n"), ConfigError);
    EXPECT_THROW(parse_config_string(std::string(kMinimal) + "weather: [{type: snow_cover, k_neighbors: 1}]\n"),
                 ConfigError);
    EXPECT_THROW(parse_config_string("scene: s.ply\n"), ConfigError);
    EXPECT_THROW(parse_config_string("camera_path: {keyframes: [{position: [0,0,0], rotation: [1,0,0,0]}]}\n"),
                 ConfigError);
    EXPECT_THROW(parse_config_string(""), ConfigError);
    EXPECT_THROW(parse_config_string("scene: [unclosed\n"), ConfigError);
}

TEST(Config, CameraPathConstraints) {
    const std::string head = "scene: s.ply\ncamera_path:\n";
    EXPECT_THROW(parse_config_string(head + "  frames: 0\n  keyframes: [{position: [0,0,0], rotation: [1,0,0,0]}]\n"),
                 ConfigError);
    EXPECT_THROW(parse_config_string(head + "  keyframes: []\n"), ConfigError);
    EXPECT_THROW(parse_config_string(head + "  keyframes: [{position: [0,0,0]}]\n"), ConfigError);
    EXPECT_THROW(parse_config_string(head + "  keyframes: [{position: [0,0,0], look_at: [0,0,0]}]\n"), ConfigError);
    EXPECT_THROW(parse_config_string(head + "  frames: 4\n  keyframes:\n"
                                            "    - {position: [0,0,0], rotation: [1,0,0,0], frame: 2}\n"
                                            "    - {position: [1,0,0], rotation: [1,0,0,0], frame: 1}\n"),
                 ConfigError);
}

TEST(Config, ExplicitEffectSeed) {
    const JobConfig cfg =
        parse_config_string(std::string(kMinimal) + "weather: [{type: rainfall, seed: 99}, {type: rainfall}]\n");
    ASSERT_TRUE(cfg.weather[0].seed.has_value());
    EXPECT_EQ(*cfg.weather[0].seed, 99u);
    EXPECT_FALSE(cfg.weather[1].seed.has_value());
}

TEST(Config, ReadsFromFile) {
    const std::filesystem::path dir = std::filesystem::path(WEATHERSPLAT_TEST_TMP) / "config_file";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "job.yaml");
        out << kMinimal;
    }
    const JobConfig cfg = parse_config(dir / "job.yaml");
    EXPECT_EQ(cfg.scene_path, dir / "scene.ply");
    EXPECT_THROW(parse_config(dir / "missing.yaml"), IoError);
}

TEST(CameraPath, KeyframeFrameReturnsExactPose) {
    const Quat a = look_at_rotation(Vec3(0, -5, 1), Vec3::Zero());
    const Quat b = look_at_rotation(Vec3(4, -3, 2), Vec3::Zero());
    const CameraPath path = two_keys(a, b, Vec3(0, -5, 1), Vec3(4, -3, 2), 11);
    const Camera c0 = interpolate_camera(path, 0);
    const Camera c10 = interpolate_camera(path, 10);
    EXPECT_TRUE(c0.world_to_camera.matrix() == camera_from_pose(path.intrinsics, Vec3(0, -5, 1), a).world_to_camera.matrix());
    EXPECT_TRUE(c10.world_to_camera.matrix() == camera_from_pose(path.intrinsics, Vec3(4, -3, 2), b).world_to_camera.matrix());
}

TEST(CameraPath, TranslationMidpointIsHalfOffset) {
    const Vec3 t(2.0, -1.0, 0.5);
    const CameraPath path = two_keys(Quat::Identity(), Quat::Identity(), Vec3::Zero(), t, 3);
    const Camera mid = interpolate_camera(path, 1);
    EXPECT_LT((mid.position() - t / 2.0).norm(), 1e-12);
    EXPECT_TRUE(mid.world_to_camera.linear().isApprox(Mat3::Identity(), 1e-12));
    EXPECT_EQ(mid.width, 32);
    EXPECT_EQ(mid.height, 24);
}

TEST(CameraPath, RotationMidpointIsHalfAngle) {
    const Quat b(Eigen::AngleAxisd(kPi / 2.0, Vec3::UnitY()));
    const CameraPath path = two_keys(Quat::Identity(), b, Vec3::Zero(), Vec3::Zero(), 3);
    const Camera mid = interpolate_camera(path, 1);
    const Mat3 r = mid.world_to_camera.linear().transpose();
    const Eigen::AngleAxisd aa(r);
    EXPECT_NEAR(aa.angle(), kPi / 4.0, 1e-12);
    EXPECT_LT((aa.axis() - Vec3::UnitY()).norm(), 1e-12);
}

TEST(CameraPath, SingleFrameShowsFirstKeyframe) {
    const Quat b(Eigen::AngleAxisd(1.0, Vec3::UnitZ()));
    const CameraPath path = two_keys(Quat::Identity(), b, Vec3::Zero(), Vec3(3, 0, 0), 1);
    EXPECT_EQ(interpolate_camera(path, 0).position(), Vec3::Zero());
}

TEST(CameraPath, HoldsOutsideKeyframeRange) {
    CameraPath path = two_keys(Quat::Identity(), Quat::Identity(), Vec3::Zero(), Vec3(1, 0, 0), 10);
    path.keyframes[0].frame = 2;
    path.keyframes[1].frame = 6;
    EXPECT_LT((interpolate_camera(path, 0).position() - Vec3::Zero()).norm(), 1e-15);
    EXPECT_LT((interpolate_camera(path, 4).position() - Vec3(0.5, 0, 0)).norm(), 1e-12);
    EXPECT_LT((interpolate_camera(path, 9).position() - Vec3(1, 0, 0)).norm(), 1e-15);
}

TEST(CameraPath, EvenlySpacedKeyframes) {
    CameraPath path;
    path.frames = 9;
    path.keyframes.resize(3);
    EXPECT_EQ(path.keyframe_times(), (std::vector<double>{0.0, 4.0, 8.0}));
    path.frames = 2;
    EXPECT_EQ(path.keyframe_times(), (std::vector<double>{0.0, 0.5, 1.0}));
    EXPECT_NO_THROW(path.validate());
    path.keyframes[1].frame = 1;
    EXPECT_THROW(path.validate(), ArgumentError);
}
