// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file camera_path.hpp
/// @brief Keyframed camera trajectories: lerp on position, slerp on
///        orientation, fixed intrinsics.

#pragma once

#include "weathersplat/camera.hpp"

#include <optional>

namespace weathersplat {

struct Intrinsics {
    int width = 640;
    int height = 480;
    double fx = 500.0;
    double fy = 500.0;
    std::optional<double> cx; ///< defaults to (width - 1) / 2
    std::optional<double> cy;
};

struct Keyframe {
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity(); ///< camera-to-world
    std::optional<int> frame;            ///< evenly spaced when absent
};

struct CameraPath {
    Intrinsics intrinsics;
    std::vector<Keyframe> keyframes;
    int frames = 1;
    double fps = 24.0;

    /// Frame position of every keyframe. Unset positions are spread evenly
    /// over [0, frames - 1].
    std::vector<double> keyframe_times() const {
        std::vector<double> out(keyframes.size());
        const auto n = keyframes.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (keyframes[i].frame) {
                out[i] = *keyframes[i].frame;
            } else {
                out[i] = n == 1 ? 0.0 : static_cast<double>(i) * (frames - 1) / static_cast<double>(n - 1);
            }
        }
        return out;
    }

    /// A single-frame path shows the first keyframe, so its keyframes may
    /// share frame 0.
    void validate() const {
        if (frames < 1) throw ArgumentError("camera path: frames must be >= 1");
        if (!(fps > 0.0)) throw ArgumentError("camera path: fps must be positive");
        if (keyframes.empty()) throw ArgumentError("camera path: at least one keyframe is required");
        const auto f = keyframe_times();
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (f[i] < 0 || f[i] > frames - 1) throw ArgumentError("camera path: keyframe frame index out of range");
            if (frames > 1 && i > 0 && f[i] <= f[i - 1]) {
                throw ArgumentError("camera path: keyframe frames must be strictly increasing");
            }
        }
        for (const auto &k : keyframes) {
            if (!k.position.allFinite() || !(k.orientation.norm() > 0.0)) {
                throw ArgumentError("camera path: keyframe pose is not finite");
            }
        }
    }
};

inline Camera camera_from_pose(const Intrinsics &in, const Vec3 &position, const Quat &orientation) {
    Camera cam;
    cam.width = in.width;
    cam.height = in.height;
    cam.fx = in.fx;
    cam.fy = in.fy;
    cam.cx = in.cx.value_or(0.5 * (in.width - 1));
    cam.cy = in.cy.value_or(0.5 * (in.height - 1));
    cam.set_pose(position, orientation);
    cam.validate();
    return cam;
}

/// Camera for `frame`. Frames before the first or after the last keyframe hold
/// that keyframe's pose.
inline Camera interpolate_camera(const CameraPath &path, int frame) {
    path.validate();
    const auto f = path.keyframe_times();
    const auto &k = path.keyframes;
    if (frame <= f.front() || path.frames == 1) return camera_from_pose(path.intrinsics, k.front().position, k.front().orientation);
    if (frame >= f.back()) return camera_from_pose(path.intrinsics, k.back().position, k.back().orientation);
    std::size_t i = 0;
    while (f[i + 1] <= frame) ++i;
    if (frame == f[i]) return camera_from_pose(path.intrinsics, k[i].position, k[i].orientation);
    const double t = (frame - f[i]) / (f[i + 1] - f[i]);
    const Vec3 p = (1.0 - t) * k[i].position + t * k[i + 1].position;
    const Quat q = k[i].orientation.normalized().slerp(t, k[i + 1].orientation.normalized());
    return camera_from_pose(path.intrinsics, p, q);
}

} // namespace weathersplat
