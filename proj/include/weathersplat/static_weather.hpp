// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file static_weather.hpp
/// @brief Depth-driven fog, haze and smog as an image-space post-process.
///
/// All three are the same operator: a per-pixel blend toward a fog color with
/// weight alpha = min(1, 1 - exp(-intensity * depth_ref)). Blending happens in
/// linear RGB.

#pragma once

#include "weathersplat/core.hpp"

#include <optional>
#include <string_view>

namespace weathersplat {

struct StaticWeatherParams {
    Rgb fog_color{0.86, 0.87, 0.88};
    double intensity = 3.0;
};

/// Named (color, intensity) presets. They are conveniences only.
inline std::optional<StaticWeatherParams> static_preset(std::string_view name) {
    if (name == "fog") return StaticWeatherParams{Rgb(0.86, 0.87, 0.88), 3.0};
    if (name == "haze") return StaticWeatherParams{Rgb(0.74, 0.76, 0.80), 1.0};
    if (name == "smog") return StaticWeatherParams{Rgb(0.62, 0.58, 0.45), 2.0};
    return std::nullopt;
}

inline double fog_alpha(double depth_ref, double intensity) {
    return std::min(1.0, -std::expm1(-intensity * depth_ref));
}

inline ScalarMap fog_alpha(const ScalarMap &depth_ref, double intensity) {
    if (!(intensity >= 0.0)) throw ArgumentError("fog_alpha: intensity must be non-negative");
    ScalarMap a(depth_ref.width(), depth_ref.height());
    for (std::size_t i = 0; i < a.pixel_count(); ++i) a.at(i) = fog_alpha(depth_ref.at(i), intensity);
    return a;
}

/// C_fog * alpha + C_render * (1 - alpha), per pixel.
inline RgbImage apply_static(const RgbImage &rgb, const ScalarMap &depth_ref, const StaticWeatherParams &params) {
    require_same_size(rgb, depth_ref, "apply_static");
    const ScalarMap alpha = fog_alpha(depth_ref, params.intensity);
    RgbImage out(rgb.width(), rgb.height());
    for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
        const double a = alpha.at(i);
        for (int c = 0; c < 3; ++c) out.at(i, c) = params.fog_color[c] * a + rgb.at(i, c) * (1.0 - a);
    }
    return out;
}

} // namespace weathersplat
