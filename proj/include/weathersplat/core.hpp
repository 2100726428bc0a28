// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file core.hpp
/// @brief Shared vocabulary: error types, vector aliases, image buffers and
///        the seeded random source used by every stochastic operation.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace weathersplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Rgb = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class of every error raised by the library. `category()` is the short
/// tag the CLI prints in front of the message.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char *category() const noexcept { return "error"; }
};

/// Invalid argument passed to an operation (violated precondition).
class ArgumentError : public Error {
public:
    using Error::Error;
    const char *category() const noexcept override { return "argument"; }
};

/// Malformed file structure, e.g. a PLY header missing a required property.
class FormatError : public Error {
public:
    using Error::Error;
    const char *category() const noexcept override { return "format"; }
};

/// Well-formed file carrying unusable values (NaN, infinities).
class DataError : public Error {
public:
    using Error::Error;
    const char *category() const noexcept override { return "data"; }
};

/// Job configuration rejected during parsing or validation.
class ConfigError : public Error {
public:
    using Error::Error;
    const char *category() const noexcept override { return "config"; }
};

/// Filesystem failure (unreadable input, unwritable output).
class IoError : public Error {
public:
    using Error::Error;
    const char *category() const noexcept override { return "io"; }
};

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    bool empty() const { return (min.array() > max.array()).any(); }
    void extend(const Vec3 &p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    bool contains(const Vec3 &p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
};

/// Rotation taking the local +z axis onto `dir` (unit). The roll about `dir`
/// is fixed so the result is deterministic.
inline Quat rotation_from_z(const Vec3 &dir) {
    return Quat::FromTwoVectors(Vec3::UnitZ(), dir.normalized());
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// Row-major, channel-interleaved image buffer.
template <typename T, int Channels = 1>
class Image {
public:
    static_assert(Channels >= 1);
    static constexpr int channels = Channels;
    using value_type = T;

    Image() = default;
    Image(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) * Channels, fill) {
        if (width < 0 || height < 0) throw ArgumentError("image dimensions must be non-negative");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }

    T &operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    const T &operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    /// Flat access by pixel index (row-major) and channel.
    T &at(std::size_t pixel, int c = 0) { return data_[pixel * Channels + c]; }
    const T &at(std::size_t pixel, int c = 0) const { return data_[pixel * Channels + c]; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }

    template <int C = Channels>
        requires(C == 3)
    Eigen::Matrix<T, 3, 1> pixel(int x, int y) const {
        const std::size_t i = index(x, y, 0);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }

    template <int C = Channels>
        requires(C == 3)
    void set_pixel(int x, int y, const Eigen::Matrix<T, 3, 1> &v) {
        const std::size_t i = index(x, y, 0);
        data_[i] = v[0];
        data_[i + 1] = v[1];
        data_[i + 2] = v[2];
    }

    bool same_size(int w, int h) const { return w == width_ && h == height_; }
    template <typename U, int C>
    bool same_size(const Image<U, C> &o) const { return o.width() == width_ && o.height() == height_; }

    friend bool operator==(const Image &a, const Image &b) = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using RgbImage = Image<double, 3>;
using ScalarMap = Image<double, 1>;
using NormalMap = Image<double, 3>;
using Mask = Image<std::uint8_t, 1>;

template <typename A, int CA, typename B, int CB>
void require_same_size(const Image<A, CA> &a, const Image<B, CB> &b, const char *what) {
    if (!a.same_size(b)) {
        throw ArgumentError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                            std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                            std::to_string(b.height()) + ")");
    }
}

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combine a base seed with a stream id so independent consumers draw from
/// uncorrelated sequences.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x5851f42d4c957f2dULL));
}

/// Seeded random source. The engine is std::mt19937_64; the mapping to doubles
/// is written out here (instead of <random> distributions) so streams are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniformly distributed unit quaternion (Shoemake).
    Quat unit_quaternion() {
        const double u1 = uniform(), u2 = uniform(), u3 = uniform();
        const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
        return Quat(b * std::cos(2 * kPi * u3), a * std::sin(2 * kPi * u2), a * std::cos(2 * kPi * u2),
                    b * std::sin(2 * kPi * u3));
    }

private:
    std::mt19937_64 engine_;
};

} // namespace weathersplat
