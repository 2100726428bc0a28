// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file scene.hpp
/// @brief Gaussian primitives, scenes, covariance construction, spherical
///        harmonic color and the synthetic sky dome.

#pragma once

#include "weathersplat/core.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace weathersplat {

/// Number of SH basis functions per color channel for a given degree.
constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// One splatting primitive.
///
/// `sh` stores 3 * sh_basis_count(degree) values, basis-major:
/// sh[3 * k + channel] is coefficient k of channel (R, G, B).
struct Gaussian {
    Vec3 mean = Vec3::Zero();
    Vec3 scale = Vec3::Ones();
    Quat rotation = Quat::Identity();
    double opacity = 1.0;
    std::vector<double> sh = std::vector<double>(3, 0.0);
    bool is_sky = false;

    friend bool operator==(const Gaussian &a, const Gaussian &b) {
        return a.mean == b.mean && a.scale == b.scale && a.rotation.coeffs() == b.rotation.coeffs() &&
               a.opacity == b.opacity && a.sh == b.sh && a.is_sky == b.is_sky;
    }
};

namespace sh {
inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr std::array<double, 5> kC2 = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                              -1.0925484305920792, 0.5462742152960396};
inline constexpr std::array<double, 7> kC3 = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                              0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                              -0.5900435899266435};

/// Real SH basis values for `dir` up to `degree` (graphics sign convention).
inline std::vector<double> basis(const Vec3 &dir, int degree) {
    std::vector<double> y;
    y.reserve(sh_basis_count(degree));
    y.push_back(kC0);
    if (degree < 1) return y;
    const double x = dir.x(), yy = dir.y(), z = dir.z();
    y.push_back(-kC1 * yy);
    y.push_back(kC1 * z);
    y.push_back(-kC1 * x);
    if (degree < 2) return y;
    const double xx = x * x, y2 = yy * yy, zz = z * z, xy = x * yy, yz = yy * z, xz = x * z;
    y.push_back(kC2[0] * xy);
    y.push_back(kC2[1] * yz);
    y.push_back(kC2[2] * (2.0 * zz - xx - y2));
    y.push_back(kC2[3] * xz);
    y.push_back(kC2[4] * (xx - y2));
    if (degree < 3) return y;
    y.push_back(kC3[0] * yy * (3.0 * xx - y2));
    y.push_back(kC3[1] * xy * z);
    y.push_back(kC3[2] * yy * (4.0 * zz - xx - y2));
    y.push_back(kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * y2));
    y.push_back(kC3[4] * x * (4.0 * zz - xx - y2));
    y.push_back(kC3[5] * z * (xx - y2));
    y.push_back(kC3[6] * x * (xx - 3.0 * y2));
    return y;
}

/// DC-only coefficient vector that evaluates to `color`, zero-padded to `degree`.
inline std::vector<double> from_color(const Rgb &color, int degree = 0) {
    std::vector<double> c(3 * sh_basis_count(degree), 0.0);
    for (int ch = 0; ch < 3; ++ch) c[ch] = (color[ch] - 0.5) / kC0;
    return c;
}
} // namespace sh

/// Evaluates view-dependent color: sum_k c_k Y_k(dir) + 0.5, clamped to [0, 1].
inline Rgb eval_sh_color(std::span<const double> coeffs, const Vec3 &view_dir, int degree) {
    if (degree < 0 || degree > 3) throw ArgumentError("SH degree must be in [0, 3]");
    const int count = sh_basis_count(degree);
    if (coeffs.size() < static_cast<std::size_t>(3 * count)) {
        throw ArgumentError("SH coefficient array shorter than requested degree");
    }
    const std::vector<double> y = sh::basis(view_dir, degree);
    Rgb c = Rgb::Zero();
    for (int k = 0; k < count; ++k) {
        for (int ch = 0; ch < 3; ++ch) c[ch] += y[k] * coeffs[3 * k + ch];
    }
    return (c.array() + 0.5).cwiseMax(0.0).cwiseMin(1.0);
}

/// Sigma = R S S^T R^T.
inline Mat3 covariance_3d(const Vec3 &scale, const Quat &rotation) {
    if (!(scale.array() > 0.0).all()) throw ArgumentError("covariance_3d: scale components must be positive");
    const Mat3 m = rotation.normalized().toRotationMatrix() * scale.asDiagonal();
    const Mat3 sigma = m * m.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

inline Mat3 covariance_3d(const Gaussian &g) { return covariance_3d(g.scale, g.rotation); }

/// Index of the smallest scale component; ties go to the lowest index.
inline int shortest_axis_index(const Vec3 &scale) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
        if (scale[i] < scale[best]) best = i;
    }
    return best;
}

/// Unit normal of a Gaussian: its shortest rotated axis, flipped so that
/// n . facing >= 0. Exact ties (n . facing == 0) keep the first nonzero
/// component positive.
inline Vec3 shortest_axis_normal(const Gaussian &g, const Vec3 &facing) {
    const Mat3 r = g.rotation.normalized().toRotationMatrix();
    Vec3 n = r.col(shortest_axis_index(g.scale)).normalized();
    const double d = n.dot(facing);
    if (d < 0.0) {
        n = -n;
    } else if (d == 0.0) {
        for (int i = 2; i >= 0; --i) {
            if (n[i] != 0.0) {
                if (n[i] < 0.0) n = -n;
                break;
            }
        }
    }
    return n;
}

/// Normal in the +z hemisphere.
inline Vec3 shortest_axis_normal(const Gaussian &g) { return shortest_axis_normal(g, Vec3::UnitZ()); }

/// Throws ArgumentError unless `g` satisfies the primitive invariants.
inline void validate_gaussian(const Gaussian &g, int sh_degree, std::size_t index = 0) {
    const std::string where = "gaussian " + std::to_string(index) + ": ";
    if (!(g.scale.array() > 0.0).all()) throw ArgumentError(where + "scale components must be positive");
    if (std::abs(g.rotation.norm() - 1.0) > 1e-6) throw ArgumentError(where + "rotation must be a unit quaternion");
    if (!(g.opacity >= 0.0 && g.opacity <= 1.0)) throw ArgumentError(where + "opacity outside [0, 1]");
    if (g.sh.size() != static_cast<std::size_t>(3 * sh_basis_count(sh_degree))) {
        throw ArgumentError(where + "SH coefficient count does not match scene degree");
    }
}

/// Immutable collection of Gaussians. Editing operations return new scenes.
class GaussianScene {
public:
    GaussianScene() = default;

    explicit GaussianScene(std::vector<Gaussian> gaussians, int sh_degree = 0)
        : gaussians_(std::move(gaussians)), sh_degree_(sh_degree) {
        if (sh_degree < 0 || sh_degree > 3) throw ArgumentError("SH degree must be in [0, 3]");
        for (std::size_t i = 0; i < gaussians_.size(); ++i) {
            validate_gaussian(gaussians_[i], sh_degree_, i);
            bounds_.extend(gaussians_[i].mean);
        }
    }

    std::span<const Gaussian> gaussians() const { return gaussians_; }
    const Gaussian &operator[](std::size_t i) const { return gaussians_[i]; }
    std::size_t size() const { return gaussians_.size(); }
    bool empty() const { return gaussians_.empty(); }
    int sh_degree() const { return sh_degree_; }
    const Aabb &bounds() const { return bounds_; }

    std::size_t sky_count() const {
        return static_cast<std::size_t>(std::count_if(gaussians_.begin(), gaussians_.end(),
                                                      [](const Gaussian &g) { return g.is_sky; }));
    }

    /// New scene with `extra` appended. SH arrays of lower degree are
    /// zero-padded to this scene's degree.
    GaussianScene with_appended(std::vector<Gaussian> extra) const {
        std::vector<Gaussian> all = gaussians_;
        all.reserve(all.size() + extra.size());
        const std::size_t want = 3 * sh_basis_count(sh_degree_);
        for (auto &g : extra) {
            if (g.sh.size() < want) g.sh.resize(want, 0.0);
            all.push_back(std::move(g));
        }
        return GaussianScene(std::move(all), sh_degree_);
    }

    friend bool operator==(const GaussianScene &a, const GaussianScene &b) {
        return a.sh_degree_ == b.sh_degree_ && a.gaussians_ == b.gaussians_;
    }

private:
    std::vector<Gaussian> gaussians_;
    int sh_degree_ = 0;
    Aabb bounds_;
};

// ---------------------------------------------------------------------------
// Sky dome
// ---------------------------------------------------------------------------

struct SkyCoverParams {
    Vec3 center = Vec3::Zero();
    double radius = 100.0;
    int point_count = 2000;
    Rgb color{0.62, 0.74, 0.90};
    double opacity = 0.9;
};

/// Ratio between a dome Gaussian's standard deviation and the mean point
/// spacing radius / sqrt(point_count).
inline constexpr double kSkyScaleFactor = 1.25;

inline void validate(const SkyCoverParams &p, const GaussianScene &scene) {
    if (!(p.radius > 0.0)) throw ArgumentError("sky cover radius must be positive");
    if (p.point_count < 0) throw ArgumentError("sky cover point_count must be non-negative");
    if (!(p.opacity >= 0.0 && p.opacity <= 1.0)) throw ArgumentError("sky cover opacity outside [0, 1]");
    for (const Gaussian &g : scene.gaussians()) {
        if (!g.is_sky && (g.mean - p.center).norm() >= p.radius) {
            throw ArgumentError("sky cover radius must exceed the distance from its center to every scene Gaussian");
        }
    }
}

/// Appends `point_count` sky-flagged Gaussians uniformly distributed on the
/// upper hemisphere (z >= center.z) of the given radius.
inline GaussianScene add_sky_hemisphere(const GaussianScene &scene, const SkyCoverParams &params,
                                        std::uint64_t rng_seed) {
    validate(params, scene);
    if (params.point_count == 0) return scene;

    Rng rng(derive_seed(rng_seed, 0x5c7));
    const double sigma = kSkyScaleFactor * params.radius / std::sqrt(static_cast<double>(params.point_count));
    std::vector<Gaussian> dome;
    dome.reserve(params.point_count);
    for (int i = 0; i < params.point_count; ++i) {
        // Uniform z on [0, 1] gives uniform area density on the sphere.
        const double z = rng.uniform();
        const double phi = 2.0 * kPi * rng.uniform();
        const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
        Gaussian g;
        g.mean = params.center + params.radius * Vec3(rxy * std::cos(phi), rxy * std::sin(phi), z);
        g.scale = Vec3::Constant(sigma);
        g.rotation = Quat::Identity();
        g.opacity = params.opacity;
        g.sh = sh::from_color(params.color, scene.sh_degree());
        g.is_sky = true;
        dome.push_back(std::move(g));
    }
    return scene.with_appended(std::move(dome));
}

} // namespace weathersplat
