#pragma once

// Raw little-endian float32 rasters, plane-major, with a JSON sidecar at
// "<data path>.json". Feature stacks use {classes, height, width}; tangent
// fields use {planes: 2, components: ["tx", "ty"], height, width}.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "esp/grid.hpp"
#include "esp/io/json.hpp"
#include "esp/stack.hpp"

namespace esp::io {

inline std::string sidecar_path(const std::string& data_path) { return data_path + ".json"; }

inline void write_f32_planes(const std::string& path, const std::vector<const ScalarField*>& planes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    std::vector<char> buf;
    for (const ScalarField* f : planes) {
        buf.resize(f->size() * 4);
        for (std::size_t p = 0; p < f->size(); ++p) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>((*f)[p]));
            for (int b = 0; b < 4; ++b) buf[p * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<ScalarField> read_f32_planes(const std::string& path, std::size_t planes, std::size_t height,
                                                std::size_t width) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    const std::size_t expected = planes * height * width * 4;
    if (bytes != expected) {
        throw IoError(path + ": expected " + std::to_string(expected) + " bytes, found " + std::to_string(bytes));
    }
    in.seekg(0);
    std::vector<unsigned char> buf(bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("read failed: " + path);
    std::vector<ScalarField> out;
    std::size_t off = 0;
    for (std::size_t k = 0; k < planes; ++k) {
        ScalarField f(height, width);
        for (std::size_t p = 0; p < f.size(); ++p, off += 4) {
            const std::uint32_t bits = static_cast<std::uint32_t>(buf[off]) | (static_cast<std::uint32_t>(buf[off + 1]) << 8) |
                                       (static_cast<std::uint32_t>(buf[off + 2]) << 16) |
                                       (static_cast<std::uint32_t>(buf[off + 3]) << 24);
            const float v = std::bit_cast<float>(bits);
            if (!std::isfinite(v)) throw InvalidArgument(path + ": non-finite sample");
            f[p] = v;
        }
        out.push_back(std::move(f));
    }
    return out;
}

namespace detail {

inline std::size_t sidecar_count(const json& j, const char* key, const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer() || it->get<long long>() <= 0) {
        throw InvalidArgument(path + ": sidecar needs a positive integer '" + key + "'");
    }
    return it->get<std::size_t>();
}

} // namespace detail

inline void write_feature_raster(const std::string& path, const FeatureStack& o) {
    std::vector<const ScalarField*> planes;
    for (const auto& f : o) planes.push_back(&f);
    write_f32_planes(path, planes);
    write_json_file(sidecar_path(path), json{{"classes", o.classes()}, {"height", o.height()}, {"width", o.width()}});
}

inline FeatureStack read_feature_raster(const std::string& path) {
    const json side = read_json_file(sidecar_path(path));
    const std::string sp = sidecar_path(path);
    const std::size_t classes = detail::sidecar_count(side, "classes", sp);
    const std::size_t h = detail::sidecar_count(side, "height", sp);
    const std::size_t w = detail::sidecar_count(side, "width", sp);
    return FeatureStack(read_f32_planes(path, classes, h, w));
}

inline void write_tangent_raster(const std::string& path, const VectorField2& t) {
    write_f32_planes(path, {&t.x(), &t.y()});
    write_json_file(sidecar_path(path), json{{"planes", 2},
                                             {"components", json::array({"tx", "ty"})},
                                             {"height", t.height()},
                                             {"width", t.width()}});
}

inline VectorField2 read_tangent_raster(const std::string& path) {
    const json side = read_json_file(sidecar_path(path));
    const std::string sp = sidecar_path(path);
    if (detail::sidecar_count(side, "planes", sp) != 2) throw InvalidArgument(sp + ": tangent raster needs 2 planes");
    auto planes = read_f32_planes(path, 2, detail::sidecar_count(side, "height", sp), detail::sidecar_count(side, "width", sp));
    return VectorField2(std::move(planes[0]), std::move(planes[1]));
}

} // namespace esp::io
