// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "weathersplat/image_io.hpp"

namespace weathersplat {
namespace {

namespace fs = std::filesystem;
fs::path tmp(const std::string &name) { return fs::path(WEATHERSPLAT_TEST_TMP) / name; }

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Srgb, TransferCurveEndpointsAndMidpoint) {
    EXPECT_EQ(srgb_encode(0.0), 0.0);
    EXPECT_NEAR(srgb_encode(1.0), 1.0, 1e-12);
    EXPECT_NEAR(srgb_encode(0.5), 0.735356983, 1e-8);
    EXPECT_NEAR(srgb_encode(0.002), 0.02584, 1e-12);
    EXPECT_EQ(srgb_encode(-1.0), 0.0);
}

TEST(Png, Gray16RoundTrip) {
    ScalarMap m(7, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) m(x, y) = (x + 7 * y) / 34.0;
    write_png_gray16(tmp("depth.png"), m);
    const ScalarMap back = read_png_gray(tmp("depth.png"));
    ASSERT_TRUE(back.same_size(m));
    for (std::size_t i = 0; i < m.pixel_count(); ++i) EXPECT_NEAR(back.at(i), m.at(i), 0.5 / 65535.0 + 1e-12);
}

TEST(Png, RgbWriteIsDeterministic) {
    RgbImage img(9, 4, 0.25);
    img(3, 2, 1) = 1.0;
    write_png_rgb(tmp("a.png"), img);
    write_png_rgb(tmp("b.png"), img);
    EXPECT_EQ(slurp(tmp("a.png")), slurp(tmp("b.png")));
    EXPECT_EQ(slurp(tmp("a.png")).substr(1, 3), "PNG");
}

TEST(Png, MaskFromGray) {
    ScalarMap m(4, 1, 0.0);
    m(2, 0) = 1.0;
    write_png_gray16(tmp("mask.png"), m);
    const Mask mask = read_png_mask(tmp("mask.png"));
    EXPECT_EQ(mask(0, 0), 0);
    EXPECT_EQ(mask(2, 0), 1);
}

TEST(Png, RejectsColorImagesAsGray) {
    write_png_rgb(tmp("color.png"), RgbImage(2, 2, 0.5));
    EXPECT_THROW(read_png_gray(tmp("color.png")), FormatError);
    EXPECT_THROW(read_png_gray(tmp("nope.png")), IoError);
}

TEST(Ppm, HeaderAndPayload) {
    RgbImage img(2, 1, 0.0);
    img(1, 0, 0) = 1.0;
    write_ppm(tmp("x.ppm"), img);
    const std::string bytes = slurp(tmp("x.ppm"));
    const std::string header = "P6\n2 1\n255\n";
    ASSERT_EQ(bytes.size(), header.size() + 6);
    EXPECT_EQ(bytes.substr(0, header.size()), header);
    EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 3]), 255);
    EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 4]), 0);
}

TEST(RawFloat, RoundTripAndSizeCheck) {
    RgbImage img(3, 2);
    for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = 0.125 * static_cast<double>(i);
    write_raw_float(tmp("img.f32"), img);
    EXPECT_EQ(fs::file_size(tmp("img.f32")), 3u * 2u * 3u * 4u);
    EXPECT_EQ(read_raw_float<3>(tmp("img.f32"), 3, 2), img);
    EXPECT_THROW(read_raw_float<1>(tmp("img.f32"), 3, 2), FormatError);
}

} // namespace
} // namespace weathersplat
