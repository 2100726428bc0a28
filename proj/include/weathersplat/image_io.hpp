// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file image_io.hpp
/// @brief Buffer export/import: 8-bit sRGB PNG and PPM for color, 16-bit
///        grayscale PNG for normalized depth, headerless little-endian
///        float32 dumps for exact values.

#pragma once

#include "weathersplat/core.hpp"

#include <png.h>

#include <bit>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

namespace weathersplat {

/// Linear [0,1] -> sRGB transfer curve.
inline double srgb_encode(double linear) {
    const double v = std::clamp(linear, 0.0, 1.0);
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

/// Quantizes linear RGB to 8-bit sRGB, row-major interleaved.
inline std::vector<std::uint8_t> encode_rgb8(const RgbImage &img) {
    std::vector<std::uint8_t> bytes(img.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_u8(srgb_encode(img.data()[i]));
    return bytes;
}

inline void write_png_rgb(const std::filesystem::path &path, const RgbImage &img) {
    const auto bytes = encode_rgb8(img);
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
        throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
    }
}

/// Writes values in [0,1] as 16-bit grayscale (v * 65535, rounded).
inline void write_png_gray16(const std::filesystem::path &path, const ScalarMap &map) {
    std::vector<std::uint16_t> px(map.pixel_count());
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<std::uint16_t>(std::lround(std::clamp(map.at(i), 0.0, 1.0) * 65535.0));
    }
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(map.width());
    image.height = static_cast<png_uint_32>(map.height());
    image.format = PNG_FORMAT_LINEAR_Y;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, px.data(), 0, nullptr)) {
        throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
    }
}

/// Reads an 8- or 16-bit grayscale PNG as raw sample values scaled to [0,1].
inline ScalarMap read_png_gray(const std::filesystem::path &path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE *)> fp(std::fopen(path.string().c_str(), "rb"), &std::fclose);
    if (!fp) throw IoError("cannot open PNG '" + path.string() + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialization failed");
    }
    ScalarMap out;
    std::string failure;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    const auto w = static_cast<int>(png_get_image_width(png, info));
    const auto h = static_cast<int>(png_get_image_height(png, info));
    if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
        failure = "PNG '" + path.string() + "' must be 8- or 16-bit grayscale";
    } else {
        if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
        png_read_update_info(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        std::vector<png_byte> rows(stride * h);
        std::vector<png_bytep> ptrs(h);
        for (int y = 0; y < h; ++y) ptrs[y] = rows.data() + y * stride;
        png_read_image(png, ptrs.data());
        out = ScalarMap(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (depth == 16) {
                    std::uint16_t v;
                    std::memcpy(&v, ptrs[y] + 2 * x, 2);
                    out(x, y) = v / 65535.0;
                } else {
                    out(x, y) = ptrs[y][x] / 255.0;
                }
            }
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (!failure.empty()) throw FormatError(failure);
    return out;
}

/// Nonzero grayscale samples become 1.
inline Mask read_png_mask(const std::filesystem::path &path) {
    const ScalarMap gray = read_png_gray(path);
    Mask m(gray.width(), gray.height());
    for (std::size_t i = 0; i < m.pixel_count(); ++i) m.at(i) = gray.at(i) > 0.0 ? 1 : 0;
    return m;
}

/// Binary PPM (P6), 8-bit sRGB.
inline void write_ppm(const std::filesystem::path &path, const RgbImage &img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    const auto bytes = encode_rgb8(img);
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

/// Headerless little-endian float32, row-major, channels interleaved.
template <int C>
void write_raw_float(const std::filesystem::path &path, const Image<double, C> &img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (double v : img.data()) {
        const float f = static_cast<float>(v);
        char buf[4];
        std::memcpy(buf, &f, 4);
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + 4);
        out.write(buf, 4);
    }
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

template <int C>
Image<double, C> read_raw_float(const std::filesystem::path &path, int width, int height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    Image<double, C> img(width, height);
    const auto expected = static_cast<std::uintmax_t>(img.data().size()) * 4;
    std::error_code ec;
    if (std::filesystem::file_size(path, ec) != expected) {
        throw FormatError("raw float file '" + path.string() + "' size does not match " + std::to_string(width) +
                          "x" + std::to_string(height) + "x" + std::to_string(C));
    }
    for (double &v : img.data()) {
        char buf[4];
        in.read(buf, 4);
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + 4);
        float f;
        std::memcpy(&f, buf, 4);
        v = f;
    }
    return img;
}

} // namespace weathersplat
