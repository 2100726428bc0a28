// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file ply.hpp
/// @brief Reader/writer for the splat PLY layout produced by common Gaussian
///        splatting trainers: x/y/z, f_dc_*, f_rest_*, opacity (logit),
///        scale_* (log), rot_0..3 (w, x, y, z, unnormalized).
///
/// Binary little-endian and ASCII bodies are accepted. Files are always
/// written binary little-endian with float32 properties.

#pragma once

#include "weathersplat/scene.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace weathersplat {

namespace ply_detail {

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::optional<Scalar> parse_scalar(const std::string &t) {
    static const std::map<std::string, Scalar> names = {
        {"char", Scalar::i8},    {"int8", Scalar::i8},     {"uchar", Scalar::u8},   {"uint8", Scalar::u8},
        {"short", Scalar::i16},  {"int16", Scalar::i16},   {"ushort", Scalar::u16}, {"uint16", Scalar::u16},
        {"int", Scalar::i32},    {"int32", Scalar::i32},   {"uint", Scalar::u32},   {"uint32", Scalar::u32},
        {"float", Scalar::f32},  {"float32", Scalar::f32}, {"double", Scalar::f64}, {"float64", Scalar::f64}};
    auto it = names.find(t);
    if (it == names.end()) return std::nullopt;
    return it->second;
}

struct Property {
    std::string name;
    Scalar type = Scalar::f32;
    bool is_list = false;
    Scalar count_type = Scalar::u8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

struct Header {
    bool binary = true;
    std::vector<Element> elements;
};

template <typename T>
T read_le(std::istream &in) {
    T v{};
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    if (!in) throw FormatError("PLY: unexpected end of file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

inline double read_binary(std::istream &in, Scalar s) {
    switch (s) {
    case Scalar::i8: return read_le<std::int8_t>(in);
    case Scalar::u8: return read_le<std::uint8_t>(in);
    case Scalar::i16: return read_le<std::int16_t>(in);
    case Scalar::u16: return read_le<std::uint16_t>(in);
    case Scalar::i32: return read_le<std::int32_t>(in);
    case Scalar::u32: return read_le<std::uint32_t>(in);
    case Scalar::f32: return read_le<float>(in);
    case Scalar::f64: return read_le<double>(in);
    }
    return 0.0;
}

inline double read_ascii(std::istream &in) {
    std::string tok;
    if (!(in >> tok)) throw FormatError("PLY: unexpected end of file");
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw FormatError("PLY: malformed number '" + tok + "'");
        return v;
    } catch (const std::out_of_range &) {
        return tok.front() == '-' ? -std::numeric_limits<double>::infinity()
                                  : std::numeric_limits<double>::infinity();
    } catch (const std::invalid_argument &) {
        // stod handles "nan"/"inf"; anything else is malformed.
        throw FormatError("PLY: malformed number '" + tok + "'");
    }
}

inline Header read_header(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply") throw FormatError("PLY: missing 'ply' magic");
    Header h;
    bool have_format = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "end_header") {
            if (!have_format) throw FormatError("PLY: missing format line");
            return h;
        }
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") {
                h.binary = true;
            } else if (fmt == "ascii") {
                h.binary = false;
            } else {
                throw FormatError("PLY: unsupported format '" + fmt + "'");
            }
            have_format = true;
        } else if (kw == "element") {
            Element e;
            ls >> e.name >> e.count;
            if (!ls) throw FormatError("PLY: malformed element line '" + line + "'");
            h.elements.push_back(std::move(e));
        } else if (kw == "property") {
            if (h.elements.empty()) throw FormatError("PLY: property before any element");
            Property p;
            std::string type;
            ls >> type;
            if (type == "list") {
                std::string ct, it;
                ls >> ct >> it >> p.name;
                auto c = parse_scalar(ct), i = parse_scalar(it);
                if (!c || !i) throw FormatError("PLY: unknown list type in '" + line + "'");
                p.is_list = true;
                p.count_type = *c;
                p.type = *i;
            } else {
                auto t = parse_scalar(type);
                if (!t) throw FormatError("PLY: unknown property type '" + type + "'");
                p.type = *t;
                ls >> p.name;
            }
            if (p.name.empty()) throw FormatError("PLY: malformed property line '" + line + "'");
            h.elements.back().properties.push_back(std::move(p));
        } else {
            throw FormatError("PLY: unexpected header keyword '" + kw + "'");
        }
    }
    throw FormatError("PLY: missing end_header");
}

/// Reads one element's rows; list properties are consumed and discarded.
inline std::vector<std::vector<double>> read_rows(std::istream &in, const Header &h, const Element &e) {
    std::vector<std::vector<double>> rows(e.count);
    for (auto &row : rows) {
        row.reserve(e.properties.size());
        for (const Property &p : e.properties) {
            if (p.is_list) {
                const auto n = static_cast<std::size_t>(h.binary ? read_binary(in, p.count_type) : read_ascii(in));
                for (std::size_t i = 0; i < n; ++i) h.binary ? read_binary(in, p.type) : read_ascii(in);
                row.push_back(static_cast<double>(n));
            } else {
                row.push_back(h.binary ? read_binary(in, p.type) : read_ascii(in));
            }
        }
    }
    return rows;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return std::log(p / (1.0 - p));
}

} // namespace ply_detail

/// Loads a splat PLY. Opacity logits go through a sigmoid, log-scales are
/// exponentiated and quaternions normalized. Only the first `sh_degree`
/// bands of f_rest are kept; the file must provide at least that many.
inline GaussianScene load_scene(const std::filesystem::path &path, int sh_degree = 0) {
    using namespace ply_detail;
    if (sh_degree < 0 || sh_degree > 3) throw ArgumentError("SH degree must be in [0, 3]");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scene file '" + path.string() + "'");

    const Header header = read_header(in);
    const Element *vertex = nullptr;
    std::vector<std::vector<double>> rows;
    for (const Element &e : header.elements) {
        auto r = read_rows(in, header, e);
        if (e.name == "vertex") {
            vertex = &e;
            rows = std::move(r);
            break;
        }
    }
    if (!vertex) throw FormatError("PLY: no 'vertex' element");

    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < vertex->properties.size(); ++i) column[vertex->properties[i].name] = i;
    auto require = [&](const std::string &name) {
        auto it = column.find(name);
        if (it == column.end()) throw FormatError("PLY: missing required property '" + name + "'");
        return it->second;
    };

    const std::size_t ix = require("x"), iy = require("y"), iz = require("z");
    const std::size_t iop = require("opacity");
    std::array<std::size_t, 3> idc{}, iscale{};
    std::array<std::size_t, 4> irot{};
    for (int c = 0; c < 3; ++c) {
        idc[c] = require("f_dc_" + std::to_string(c));
        iscale[c] = require("scale_" + std::to_string(c));
    }
    for (int c = 0; c < 4; ++c) irot[c] = require("rot_" + std::to_string(c));

    std::size_t file_rest = 0;
    while (column.count("f_rest_" + std::to_string(file_rest))) ++file_rest;
    const std::size_t file_rest_per_channel = file_rest / 3;
    const int bands = sh_basis_count(sh_degree);
    std::vector<std::size_t> irest;
    for (int c = 0; c < 3; ++c) {
        for (int k = 1; k < bands; ++k) {
            const std::size_t file_index = c * file_rest_per_channel + (k - 1);
            if (static_cast<std::size_t>(k - 1) >= file_rest_per_channel) {
                throw FormatError("PLY: missing required property 'f_rest_" + std::to_string(file_rest) +
                                  "' for SH degree " + std::to_string(sh_degree));
            }
            irest.push_back(require("f_rest_" + std::to_string(file_index)));
        }
    }
    const auto isky = column.find("is_sky");

    std::vector<Gaussian> gaussians;
    gaussians.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto &row = rows[i];
        for (double v : row) {
            if (!std::isfinite(v)) throw DataError("PLY: non-finite value in vertex " + std::to_string(i));
        }
        Gaussian g;
        g.mean = Vec3(row[ix], row[iy], row[iz]);
        g.opacity = sigmoid(row[iop]);
        g.scale = Vec3(std::exp(row[iscale[0]]), std::exp(row[iscale[1]]), std::exp(row[iscale[2]]));
        if (!(g.scale.array() > 0.0).all() || !g.scale.allFinite()) {
            throw DataError("PLY: scale underflow/overflow in vertex " + std::to_string(i));
        }
        Quat q(row[irot[0]], row[irot[1]], row[irot[2]], row[irot[3]]);
        if (q.norm() == 0.0) throw DataError("PLY: zero quaternion in vertex " + std::to_string(i));
        g.rotation = q.normalized();
        g.sh.assign(3 * bands, 0.0);
        for (int c = 0; c < 3; ++c) {
            g.sh[c] = row[idc[c]];
            for (int k = 1; k < bands; ++k) g.sh[3 * k + c] = row[irest[c * (bands - 1) + (k - 1)]];
        }
        g.is_sky = isky != column.end() && row[isky->second] != 0.0;
        gaussians.push_back(std::move(g));
    }
    return GaussianScene(std::move(gaussians), sh_degree);
}

/// Writes `scene` as binary little-endian float32 splat PLY. Normals are
/// written as zeros for compatibility; an `is_sky` uchar column is added only
/// when the scene contains sky Gaussians.
inline void save_scene(const GaussianScene &scene, const std::filesystem::path &path) {
    using namespace ply_detail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write scene file '" + path.string() + "'");

    const int bands = sh_basis_count(scene.sh_degree());
    const int rest = 3 * (bands - 1);
    const bool with_sky = scene.sky_count() > 0;

    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << scene.size() << "\n";
    for (const char *n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        out << "property float " << n << "\n";
    }
    for (int i = 0; i < rest; ++i) out << "property float f_rest_" << i << "\n";
    for (const char *n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        out << "property float " << n << "\n";
    }
    if (with_sky) out << "property uchar is_sky\n";
    out << "end_header\n";

    auto put = [&](double v) {
        float f = static_cast<float>(v);
        char buf[4];
        std::memcpy(buf, &f, 4);
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + 4);
        out.write(buf, 4);
    };
    for (const Gaussian &g : scene.gaussians()) {
        put(g.mean.x());
        put(g.mean.y());
        put(g.mean.z());
        put(0.0);
        put(0.0);
        put(0.0);
        for (int c = 0; c < 3; ++c) put(g.sh[c]);
        for (int c = 0; c < 3; ++c) {
            for (int k = 1; k < bands; ++k) put(g.sh[3 * k + c]);
        }
        put(logit(g.opacity));
        for (int c = 0; c < 3; ++c) put(std::log(g.scale[c]));
        put(g.rotation.w());
        put(g.rotation.x());
        put(g.rotation.y());
        put(g.rotation.z());
        if (with_sky) {
            const char flag = g.is_sky ? 1 : 0;
            out.write(&flag, 1);
        }
    }
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

} // namespace weathersplat
