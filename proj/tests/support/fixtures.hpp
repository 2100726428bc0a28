// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "weathersplat/camera.hpp"
#include "weathersplat/scene.hpp"

namespace weathersplat::testing {

/// Camera at the origin looking down world +z (identity pose).
inline Camera axis_camera(int w = 64, int h = 64, double f = 64.0) {
    Camera cam;
    cam.width = w;
    cam.height = h;
    cam.fx = cam.fy = f;
    cam.cx = 0.5 * (w - 1);
    cam.cy = 0.5 * (h - 1);
    return cam;
}

inline Gaussian colored(const Vec3 &mean, double sigma, double opacity, const Rgb &color) {
    Gaussian g;
    g.mean = mean;
    g.scale = Vec3::Constant(sigma);
    g.opacity = opacity;
    g.sh = sh::from_color(color);
    return g;
}

/// Random Gaussians in the frustum of axis_camera().
inline GaussianScene random_scene(Rng &rng, std::size_t count, double z_lo = 2.0, double z_hi = 8.0) {
    std::vector<Gaussian> gs(count);
    for (auto &g : gs) {
        const double z = rng.uniform(z_lo, z_hi);
        g.mean = Vec3(rng.uniform(-0.55, 0.55) * z, rng.uniform(-0.55, 0.55) * z, z);
        g.scale = Vec3(rng.uniform(0.02, 0.4), rng.uniform(0.02, 0.4), rng.uniform(0.02, 0.4));
        g.rotation = rng.unit_quaternion();
        g.opacity = rng.uniform(0.05, 1.0);
        g.sh = sh::from_color(Rgb(rng.uniform(), rng.uniform(), rng.uniform()));
    }
    return GaussianScene(std::move(gs), 0);
}

} // namespace weathersplat::testing
