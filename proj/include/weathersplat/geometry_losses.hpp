// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file geometry_losses.hpp
/// @brief Training-time regularizers evaluated on rendered buffers: global/local
///        normalized depth loss, pseudo-normal consistency, SSIM and the gated
///        total loss, plus a finite-difference toy refiner.
///
/// The hard (detached opacity) and soft (detached position) depth terms only
/// differ under automatic differentiation. Here both are the same evaluator,
/// loss_hard_soft(), applied to whichever render the caller provides.

#pragma once

#include "weathersplat/camera.hpp"
#include "weathersplat/image_io.hpp"
#include "weathersplat/parallel.hpp"
#include "weathersplat/rasterizer.hpp"
#include "weathersplat/scene.hpp"

#include <array>
#include <filesystem>
#include <optional>

namespace weathersplat {

inline constexpr double kStdFloor = 1e-6;

/// Relative depth used as pseudo ground truth. `sky_mask` may be empty, which
/// means "no sky".
struct ReferenceDepthMap {
    ScalarMap values;
    Mask sky_mask;
};

struct GeometryLossConfig {
    double gamma = 1.0;
    double lambda_ssim = 0.2;
    double lambda_normal = 0.1;
    long it_n = 6000;
    int patch_size = 8;
    double d_max = 100.0;

    void validate() const {
        if (!(gamma >= 0.0) || !(lambda_ssim >= 0.0) || !(lambda_normal >= 0.0)) {
            throw ArgumentError("geometry loss weights must be non-negative");
        }
        if (patch_size < 2) throw ArgumentError("patch_size must be at least 2");
        if (it_n < 0) throw ArgumentError("it_N must be non-negative");
        if (!(d_max > 0.0)) throw ArgumentError("d_max must be positive");
    }
};

namespace loss_detail {

inline bool valid_at(const Mask *sky, std::size_t i) { return !sky || sky->empty() || sky->at(i) == 0; }

/// Standardizes the valid pixels of `map` inside [x0,x1) x [y0,y1) into `out`.
inline void standardize(const ScalarMap &map, const Mask *sky, int x0, int y0, int x1, int y1, ScalarMap &out) {
    // Offsets from a pivot sample keep constant regions exactly zero.
    double pivot = 0.0, sum = 0.0;
    std::size_t n = 0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * map.width() + x;
            if (!valid_at(sky, i)) continue;
            if (n++ == 0) pivot = map.at(i);
            sum += map.at(i) - pivot;
        }
    }
    if (n == 0) return;
    const double mean = pivot + sum / static_cast<double>(n);
    double ss = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * map.width() + x;
            if (valid_at(sky, i)) ss += (map.at(i) - mean) * (map.at(i) - mean);
        }
    }
    const double sd = std::max(std::sqrt(ss / static_cast<double>(n)), kStdFloor);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * map.width() + x;
            out.at(i) = valid_at(sky, i) ? (map.at(i) - mean) / sd : 0.0;
        }
    }
}

} // namespace loss_detail

/// (d - mean) / max(std, 1e-6) over the whole map (population std). Pixels set
/// in `sky` are excluded from the statistics and come out as 0.
inline ScalarMap normalize_global(const ScalarMap &map, const Mask *sky = nullptr) {
    if (map.empty()) throw ArgumentError("normalize_global: empty map");
    if (sky && !sky->empty()) require_same_size(map, *sky, "normalize_global");
    ScalarMap out(map.width(), map.height());
    loss_detail::standardize(map, sky, 0, 0, map.width(), map.height(), out);
    return out;
}

/// Per-patch standardization on a patch_size grid anchored at (0,0); patches on
/// the right and bottom edges may be smaller.
inline ScalarMap normalize_local(const ScalarMap &map, int patch_size, const Mask *sky = nullptr) {
    if (map.empty()) throw ArgumentError("normalize_local: empty map");
    if (patch_size < 1) throw ArgumentError("normalize_local: patch_size must be positive");
    if (sky && !sky->empty()) require_same_size(map, *sky, "normalize_local");
    ScalarMap out(map.width(), map.height());
    for (int y0 = 0; y0 < map.height(); y0 += patch_size) {
        for (int x0 = 0; x0 < map.width(); x0 += patch_size) {
            loss_detail::standardize(map, sky, x0, y0, std::min(x0 + patch_size, map.width()),
                                     std::min(y0 + patch_size, map.height()), out);
        }
    }
    return out;
}

/// mean|GN(a) - GN(b)| + gamma * mean|LN(a) - LN(b)| over non-sky pixels.
inline double loss_hard_soft(const ScalarMap &rendered, const ReferenceDepthMap &reference,
                             const GeometryLossConfig &cfg = {}) {
    require_same_size(rendered, reference.values, "loss_hard_soft");
    const Mask *sky = reference.sky_mask.empty() ? nullptr : &reference.sky_mask;
    if (sky) require_same_size(rendered, *sky, "loss_hard_soft");
    const ScalarMap ga = normalize_global(rendered, sky), gb = normalize_global(reference.values, sky);
    const ScalarMap la = normalize_local(rendered, cfg.patch_size, sky);
    const ScalarMap lb = normalize_local(reference.values, cfg.patch_size, sky);
    double global = 0.0, local = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < rendered.pixel_count(); ++i) {
        if (!loss_detail::valid_at(sky, i)) continue;
        global += std::abs(ga.at(i) - gb.at(i));
        local += std::abs(la.at(i) - lb.at(i));
        ++n;
    }
    if (n == 0) return 0.0;
    return (global + cfg.gamma * local) / static_cast<double>(n);
}

inline double loss_hard_soft(const ScalarMap &rendered, const ScalarMap &reference, const GeometryLossConfig &cfg = {}) {
    return loss_hard_soft(rendered, ReferenceDepthMap{reference, {}}, cfg);
}

inline double loss_depth(double hard, double soft) { return hard + soft; }

/// Backprojects `reference` through the camera intrinsics, crosses central
/// differences along x and y, and orients the result toward the camera
/// (n . P < 0). Degenerate pixels get (0,0,-1), the camera-facing normal of a
/// fronto-parallel plane. Output is in the camera frame.
inline NormalMap pseudo_normals_from_depth(const ReferenceDepthMap &reference, const Camera &cam) {
    cam.validate();
    const ScalarMap &d = reference.values;
    if (!d.same_size(cam.width, cam.height)) throw ArgumentError("pseudo_normals_from_depth: size mismatch with camera");
    const int w = d.width(), h = d.height();
    auto point = [&](int x, int y) {
        const double z = d(x, y);
        return Vec3(z * (x - cam.cx) / cam.fx, z * (y - cam.cy) / cam.fy, z);
    };
    NormalMap out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
            const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
            Vec3 n = Vec3(0.0, 0.0, -1.0);
            if (xr > xl && yd > yu) {
                const Vec3 dx = (point(xr, y) - point(xl, y)) / (xr - xl);
                const Vec3 dy = (point(x, yd) - point(x, yu)) / (yd - yu);
                const Vec3 c = dx.cross(dy);
                const double len = c.norm();
                if (len > 1e-12 && std::isfinite(len)) {
                    n = c / len;
                    if (n.dot(point(x, y)) > 0.0) n = -n;
                }
            }
            out.set_pixel(x, y, n);
        }
    }
    return out;
}

/// Mean per-pixel Euclidean norm of the difference.
inline double loss_normal(const NormalMap &rendered, const NormalMap &pseudo) {
    require_same_size(rendered, pseudo, "loss_normal");
    if (rendered.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.pixel_count(); ++i) {
        const double dx = rendered.at(i, 0) - pseudo.at(i, 0);
        const double dy = rendered.at(i, 1) - pseudo.at(i, 1);
        const double dz = rendered.at(i, 2) - pseudo.at(i, 2);
        sum += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return sum / static_cast<double>(rendered.pixel_count());
}

template <int C>
double loss_l1(const Image<double, C> &a, const Image<double, C> &b) {
    require_same_size(a, b, "loss_l1");
    if (a.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) sum += std::abs(a.data()[i] - b.data()[i]);
    return sum / static_cast<double>(a.data().size());
}

namespace loss_detail {

inline constexpr int kSsimRadius = 5;
inline constexpr double kSsimSigma = 1.5;

inline std::array<double, 2 * kSsimRadius + 1> ssim_kernel() {
    std::array<double, 2 * kSsimRadius + 1> k{};
    for (int i = -kSsimRadius; i <= kSsimRadius; ++i) k[i + kSsimRadius] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
    return k;
}

/// Separable Gaussian blur; taps falling outside the image are dropped and the
/// remaining weights renormalized.
inline std::vector<double> blur(const std::vector<double> &src, int w, int h) {
    static const auto k = ssim_kernel();
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0, ws = 0.0;
            for (int t = std::max(-kSsimRadius, -x); t <= std::min(kSsimRadius, w - 1 - x); ++t) {
                s += k[t + kSsimRadius] * src[static_cast<std::size_t>(y) * w + x + t];
                ws += k[t + kSsimRadius];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = s / ws;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0, ws = 0.0;
            for (int t = std::max(-kSsimRadius, -y); t <= std::min(kSsimRadius, h - 1 - y); ++t) {
                s += k[t + kSsimRadius] * tmp[static_cast<std::size_t>(y + t) * w + x];
                ws += k[t + kSsimRadius];
            }
            out[static_cast<std::size_t>(y) * w + x] = s / ws;
        }
    }
    return out;
}

} // namespace loss_detail

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), k1 = 0.01,
/// k2 = 0.03, dynamic range 1. Multi-channel images average the per-channel
/// means.
template <int C>
double ssim(const Image<double, C> &a, const Image<double, C> &b) {
    require_same_size(a, b, "ssim");
    if (a.empty()) throw ArgumentError("ssim: empty image");
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const int w = a.width(), h = a.height();
    const std::size_t n = a.pixel_count();
    double total = 0.0;
    for (int c = 0; c < C; ++c) {
        std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
        for (std::size_t i = 0; i < n; ++i) {
            pa[i] = a.at(i, c);
            pb[i] = b.at(i, c);
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const auto ma = loss_detail::blur(pa, w, h), mb = loss_detail::blur(pb, w, h);
        const auto saa = loss_detail::blur(aa, w, h), sbb = loss_detail::blur(bb, w, h);
        const auto sab = loss_detail::blur(ab, w, h);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double va = saa[i] - ma[i] * ma[i];
            const double vb = sbb[i] - mb[i] * mb[i];
            const double cov = sab[i] - ma[i] * mb[i];
            sum += ((2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2)) /
                   ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
        }
        total += sum / static_cast<double>(n);
    }
    return total / C;
}

template <int C>
double loss_ssim(const Image<double, C> &a, const Image<double, C> &b) {
    return 1.0 - ssim(a, b);
}

/// L1 + L_depth + lambda_ssim * L_ssim, plus lambda_normal * L_normal once
/// iteration >= it_N.
inline double loss_total(double l1, double l_depth, double l_ssim, double l_normal, long iteration,
                         const GeometryLossConfig &cfg = {}) {
    if (iteration < 0) throw ArgumentError("loss_total: iteration must be non-negative");
    const double base = l1 + l_depth + cfg.lambda_ssim * l_ssim;
    return iteration >= cfg.it_n ? base + cfg.lambda_normal * l_normal : base;
}

// ---------------------------------------------------------------------------
// Reference ingestion

/// 16-bit (or 8-bit) grayscale PNG depth, optional binary sky-mask PNG.
inline ReferenceDepthMap load_reference_png(const std::filesystem::path &depth,
                                            const std::optional<std::filesystem::path> &sky_mask = {}) {
    ReferenceDepthMap ref{read_png_gray(depth), {}};
    if (sky_mask) {
        ref.sky_mask = read_png_mask(*sky_mask);
        require_same_size(ref.values, ref.sky_mask, "reference sky mask");
    }
    return ref;
}

/// Headerless little-endian float32 depth of the given size.
inline ReferenceDepthMap load_reference_raw(const std::filesystem::path &depth, int width, int height,
                                            const std::optional<std::filesystem::path> &sky_mask = {}) {
    ReferenceDepthMap ref{read_raw_float<1>(depth, width, height), {}};
    for (std::size_t i = 0; i < ref.values.pixel_count(); ++i) {
        if (!std::isfinite(ref.values.at(i)) || ref.values.at(i) < 0.0) {
            throw DataError("reference depth '" + depth.string() + "' has a negative or non-finite value at pixel " +
                            std::to_string(i));
        }
    }
    if (sky_mask) {
        ref.sky_mask = read_png_mask(*sky_mask);
        require_same_size(ref.values, ref.sky_mask, "reference sky mask");
    }
    return ref;
}

// ---------------------------------------------------------------------------
// Toy refinement

/// One supervised view: camera, target color and reference depth.
struct RefinementView {
    Camera camera;
    RgbImage rgb;
    ReferenceDepthMap depth;
};

struct RefineOptions {
    double fd_step = 1e-4;        ///< central-difference step
    double initial_rate = 1e-2;   ///< first line-search step length
    long start_iteration = 0;     ///< iteration index of step 0 (drives the it_N gate)
    int threads = 0;
};

struct RefineResult {
    GaussianScene scene;
    std::vector<double> loss_trace; ///< loss before step 0, then after every step
    bool aborted = false;           ///< true when the loss became NaN
};

/// Total loss of `gaussians` summed over views at the given iteration.
inline double evaluate_views(std::span<const Gaussian> gaussians, int sh_degree, std::span<const RefinementView> views,
                             const GeometryLossConfig &cfg, long iteration) {
    RasterOptions opt;
    opt.threads = 1;
    opt.transmittance_min = 0.0;
    double total = 0.0;
    for (const auto &v : views) {
        const RenderTargets t = rasterize(gaussians, sh_degree, v.camera, cfg.d_max, opt);
        const double hs = loss_hard_soft(t.depth_ref, v.depth, cfg);
        const double l_normal =
            iteration >= cfg.it_n ? loss_normal(t.normal, pseudo_normals_from_depth(v.depth, v.camera)) : 0.0;
        total += loss_total(loss_l1(t.rgb, v.rgb), loss_depth(hs, hs), loss_ssim(t.rgb, v.rgb), l_normal, iteration, cfg);
    }
    return total;
}

/// Gradient descent on means and opacities with central finite differences and
/// a backtracking step (doubled on success, halved on failure).
inline RefineResult refine_toy(const GaussianScene &scene, std::span<const RefinementView> views,
                               const GeometryLossConfig &cfg, int steps, const RefineOptions &opts = {}) {
    cfg.validate();
    if (steps < 0) throw ArgumentError("refine_toy: steps must be non-negative");
    for (const auto &v : views) {
        v.camera.validate();
        if (!v.rgb.same_size(v.camera.width, v.camera.height) ||
            !v.depth.values.same_size(v.camera.width, v.camera.height)) {
            throw ArgumentError("refine_toy: reference size does not match camera");
        }
    }
    constexpr double kOpacityLo = 1e-3, kOpacityHi = 1.0;
    const int degree = scene.sh_degree();
    std::vector<Gaussian> gs(scene.gaussians().begin(), scene.gaussians().end());
    const std::size_t n_params = gs.size() * 4;

    auto get = [&](const std::vector<Gaussian> &g, std::size_t p) {
        return p % 4 == 3 ? g[p / 4].opacity : g[p / 4].mean[static_cast<int>(p % 4)];
    };
    auto set = [&](std::vector<Gaussian> &g, std::size_t p, double v) {
        if (p % 4 == 3) g[p / 4].opacity = std::clamp(v, kOpacityLo, kOpacityHi);
        else g[p / 4].mean[static_cast<int>(p % 4)] = v;
    };

    RefineResult result{scene, {}, false};
    double loss = evaluate_views(gs, degree, views, cfg, opts.start_iteration);
    result.loss_trace.push_back(loss);
    if (!std::isfinite(loss)) {
        result.aborted = true;
        return result;
    }
    double rate = opts.initial_rate;
    std::vector<double> grad(n_params);
    for (int step = 0; step < steps; ++step) {
        const long it = opts.start_iteration + step;
        if (step > 0 && it == cfg.it_n) loss = evaluate_views(gs, degree, views, cfg, it);
        parallel_for(n_params, opts.threads, [&](std::size_t p) {
            std::vector<Gaussian> probe = gs;
            const double x = get(gs, p);
            set(probe, p, x + opts.fd_step);
            const double hi = get(probe, p);
            const double up = evaluate_views(probe, degree, views, cfg, it);
            set(probe, p, x - opts.fd_step);
            const double lo = get(probe, p);
            const double down = evaluate_views(probe, degree, views, cfg, it);
            grad[p] = hi > lo ? (up - down) / (hi - lo) : 0.0;
        });
        bool moved = false;
        for (int attempt = 0; attempt < 30 && !moved; ++attempt) {
            std::vector<Gaussian> trial = gs;
            for (std::size_t p = 0; p < n_params; ++p) set(trial, p, get(gs, p) - rate * grad[p]);
            const double trial_loss = evaluate_views(trial, degree, views, cfg, it);
            if (std::isnan(trial_loss)) {
                result.aborted = true;
                break;
            }
            if (trial_loss < loss) {
                gs = std::move(trial);
                loss = trial_loss;
                rate *= 2.0;
                moved = true;
            } else {
                rate *= 0.5;
            }
        }
        result.loss_trace.push_back(loss);
        if (result.aborted) break;
        if (!moved) rate = opts.initial_rate;
    }
    result.scene = GaussianScene(std::move(gs), degree);
    return result;
}

} // namespace weathersplat
