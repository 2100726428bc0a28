// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "weathersplat/static_weather.hpp"

namespace weathersplat {
namespace {

RgbImage random_rgb(Rng &rng, int w, int h) {
    RgbImage img(w, h);
    for (double &v : img.data()) v = rng.uniform();
    return img;
}

ScalarMap random_depth(Rng &rng, int w, int h) {
    ScalarMap d(w, h);
    for (double &v : d.data()) v = rng.uniform();
    return d;
}

TEST(FogAlpha, ZeroIntensityOrZeroDepthIsClear) {
    EXPECT_EQ(fog_alpha(0.7, 0.0), 0.0);
    EXPECT_EQ(fog_alpha(0.0, 5.0), 0.0);
    Rng rng(1);
    const ScalarMap a = fog_alpha(random_depth(rng, 8, 8), 0.0);
    for (double v : a.data()) EXPECT_EQ(v, 0.0);
}

TEST(FogAlpha, HalfAtLn2) {
    EXPECT_NEAR(fog_alpha(0.5, 2.0 * std::log(2.0)), 0.5, 1e-12);
    EXPECT_NEAR(fog_alpha(1.0, std::log(2.0)), 0.5, 1e-12);
}

TEST(FogAlpha, NegativeIntensityRejected) { EXPECT_THROW(fog_alpha(ScalarMap(2, 2), -0.1), ArgumentError); }

TEST(ApplyStatic, ZeroIntensityIsBitExactIdentity) {
    Rng rng(2);
    const RgbImage rgb = random_rgb(rng, 13, 7);
    EXPECT_EQ(apply_static(rgb, random_depth(rng, 13, 7), {Rgb(0.9, 0.9, 0.9), 0.0}), rgb);
}

TEST(ApplyStatic, SaturatedDepthGivesFogColor) {
    Rng rng(3);
    const RgbImage rgb = random_rgb(rng, 5, 5);
    const StaticWeatherParams p{Rgb(0.7, 0.65, 0.5), 40.0};
    const RgbImage out = apply_static(rgb, ScalarMap(5, 5, 1.0), p);
    for (std::size_t i = 0; i < out.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(i, c), p.fog_color[c], 1e-12);
}

TEST(ApplyStatic, BlendMidpoint) {
    const RgbImage black(1, 1, 0.0);
    const ScalarMap d(1, 1, 1.0);
    const RgbImage out = apply_static(black, d, {Rgb::Ones(), std::log(2.0)});
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out(0, 0, c), 0.5, 1e-12);
}

TEST(ApplyStatic, DimensionMismatch) {
    EXPECT_THROW(apply_static(RgbImage(3, 3), ScalarMap(3, 2), {}), ArgumentError);
}

TEST(ApplyStatic, OutputStaysInUnitRangeAndMovesTowardFog) {
    Rng rng(4);
    const RgbImage rgb = random_rgb(rng, 40, 25);
    const ScalarMap depth = random_depth(rng, 40, 25);
    for (const char *name : {"fog", "haze", "smog"}) {
        StaticWeatherParams p = *static_preset(name);
        RgbImage previous = rgb;
        for (double intensity : {0.0, 0.3, 1.0, 2.5, 7.0, 30.0}) {
            p.intensity = intensity;
            const RgbImage out = apply_static(rgb, depth, p);
            for (std::size_t i = 0; i < out.pixel_count(); ++i) {
                for (int c = 0; c < 3; ++c) {
                    EXPECT_GE(out.at(i, c), 0.0);
                    EXPECT_LE(out.at(i, c), 1.0);
                    EXPECT_LE(std::abs(out.at(i, c) - p.fog_color[c]),
                              std::abs(previous.at(i, c) - p.fog_color[c]) + 1e-15);
                }
            }
            previous = out;
        }
    }
}

TEST(FogAlpha, DeeperPixelsAreFoggier) {
    double last = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double a = fog_alpha(i / 100.0, 2.2);
        EXPECT_GE(a, last);
        last = a;
    }
}

TEST(StaticPreset, UnknownNameIsEmpty) {
    EXPECT_FALSE(static_preset("blizzard"));
    EXPECT_TRUE(static_preset("haze"));
}

} // namespace
} // namespace weathersplat
