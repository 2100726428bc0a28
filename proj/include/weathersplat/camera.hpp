// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file camera.hpp
/// @brief Pinhole camera. Camera frame: +x right, +y down, +z forward.

#pragma once

#include "weathersplat/core.hpp"

#include <string>

namespace weathersplat {

struct Camera {
    int width = 64;
    int height = 64;
    double fx = 64.0;
    double fy = 64.0;
    double cx = 32.0;
    double cy = 32.0;
    Eigen::Isometry3d world_to_camera = Eigen::Isometry3d::Identity();
    double near = 0.01;
    double far = 1000.0;

    /// Camera center in world coordinates.
    Vec3 position() const { return world_to_camera.inverse().translation(); }

    /// Camera-to-world rotation.
    Mat3 orientation() const { return world_to_camera.linear().transpose(); }

    Vec3 to_camera(const Vec3 &world) const { return world_to_camera * world; }

    void validate() const {
        if (width < 1 || height < 1) throw ArgumentError("camera: width and height must be >= 1");
        if (!(fx > 0.0 && fy > 0.0)) throw ArgumentError("camera: focal lengths must be positive");
        if (!(near > 0.0 && near < far)) throw ArgumentError("camera: require 0 < near < far");
    }

    /// Sets the pose from a camera center and camera-to-world rotation.
    void set_pose(const Vec3 &center, const Quat &camera_to_world) {
        const Mat3 r = camera_to_world.normalized().toRotationMatrix().transpose();
        world_to_camera = Eigen::Isometry3d::Identity();
        world_to_camera.linear() = r;
        world_to_camera.translation() = -r * center;
    }
};

/// Camera-to-world rotation for a camera at `eye` looking at `target`, with
/// image "up" as close as possible to `up`.
inline Quat look_at_rotation(const Vec3 &eye, const Vec3 &target, const Vec3 &up = Vec3::UnitZ()) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitX().cross(forward).norm() > 1e-6 ? Vec3::UnitX() : Vec3::UnitY());
    right.normalize();
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = forward;
    return Quat(r);
}

/// Pinhole camera with principal point at the image center, positioned at
/// `eye` looking at `target`.
inline Camera make_camera(int width, int height, double focal, const Vec3 &eye, const Vec3 &target,
                          const Vec3 &up = Vec3::UnitZ()) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.set_pose(eye, look_at_rotation(eye, target, up));
    return cam;
}

} // namespace weathersplat
