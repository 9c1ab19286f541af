#pragma once

// Image files: binary PGM/PPM (P5/P6, 8 or 16 bit) and PNG (gray, gray+alpha,
// RGB, RGBA, palette; 8 or 16 bit). Loaded samples are normalized to [0, 1];
// alpha is dropped. Writing produces 8-bit gray or RGB.
//
// PNG support needs libpng at link time.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "esp/error.hpp"
#include "esp/grid.hpp"
#include "esp/metrics.hpp"
#include "esp/similarity.hpp"

namespace esp::io {

/// 8-bit interleaved raster with 1 (gray) or 3 (RGB) channels.
struct Image8 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> data;

    Image8() = default;
    Image8(std::size_t h, std::size_t w, std::size_t ch, std::uint8_t fill = 0)
        : height(h), width(w), channels(ch), data(h * w * ch, fill) {}

    std::uint8_t& at(std::size_t r, std::size_t c, std::size_t ch) { return data[(r * width + c) * channels + ch]; }
};

namespace detail {

inline std::string lower_extension(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return {};
    std::string ext = path.substr(dot + 1);
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void skip_pnm_space(std::istream& in) {
    while (true) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

inline Channels read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    std::size_t nch = 0;
    if (magic == "P5") nch = 1;
    else if (magic == "P6") nch = 3;
    else throw IoError(path + ": not a binary PGM/PPM file");
    std::size_t w = 0, h = 0, maxval = 0;
    skip_pnm_space(in);
    in >> w;
    skip_pnm_space(in);
    in >> h;
    skip_pnm_space(in);
    in >> maxval;
    if (!in || w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw IoError(path + ": bad PNM header");
    in.get();
    const std::size_t bps = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(w * h * nch * bps);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw IoError(path + ": truncated pixel data");
    Channels out(nch, ScalarField(h, w));
    const auto scale = static_cast<double>(maxval);
    for (std::size_t p = 0; p < w * h; ++p) {
        for (std::size_t ch = 0; ch < nch; ++ch) {
            const std::size_t i = (p * nch + ch) * bps;
            const unsigned v = bps == 2 ? (static_cast<unsigned>(buf[i]) << 8) | buf[i + 1] : buf[i];
            out[ch][p] = std::min(1.0, static_cast<double>(v) / scale);
        }
    }
    return out;
}

inline void write_pnm(const std::string& path, const Image8& img) {
    if (img.channels != 1 && img.channels != 3) throw InvalidArgument("pnm: 1 or 3 channels required");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!out) throw IoError("write failed: " + path);
}

inline Channels read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw IoError(path + ": not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng: cannot create info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": corrupt PNG data");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_PACKING, nullptr);

    const std::size_t w = png_get_image_width(png, info);
    const std::size_t h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const std::size_t nch = png_get_channels(png, info);
    png_bytepp rows = png_get_rows(png, info);

    Channels out(nch, ScalarField(h, w));
    const double scale = depth == 16 ? 65535.0 : 255.0;
    for (std::size_t r = 0; r < h; ++r) {
        const png_bytep row = rows[r];
        for (std::size_t c = 0; c < w; ++c) {
            for (std::size_t ch = 0; ch < nch; ++ch) {
                const std::size_t i = c * nch + ch;
                const unsigned v = depth == 16 ? (static_cast<unsigned>(row[2 * i]) << 8) | row[2 * i + 1] : row[i];
                out[ch](r, c) = static_cast<double>(v) / scale;
            }
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

inline void write_png(const std::string& path, const Image8& img) {
    if (img.channels != 1 && img.channels != 3) throw InvalidArgument("png: 1 or 3 channels required");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: cannot create info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_bytep> rows(img.height);
    for (std::size_t r = 0; r < img.height; ++r)
        rows[r] = const_cast<png_bytep>(img.data.data() + r * img.width * img.channels);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace detail

/// Loads an image as channels normalized to [0, 1]. Format is chosen by extension.
inline Channels load_image(const std::string& path) {
    const std::string ext = detail::lower_extension(path);
    if (ext == "png") return detail::read_png(path);
    if (ext == "pgm" || ext == "ppm" || ext == "pnm") return detail::read_pnm(path);
    throw IoError(path + ": unsupported image extension (png, pgm, ppm)");
}

inline void save_image(const std::string& path, const Image8& img) {
    const std::string ext = detail::lower_extension(path);
    if (ext == "png") return detail::write_png(path, img);
    if (ext == "pgm" || ext == "ppm" || ext == "pnm") return detail::write_pnm(path, img);
    throw IoError(path + ": unsupported image extension (png, pgm, ppm)");
}

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline Image8 to_gray8(const ScalarField& f) {
    Image8 img(f.height(), f.width(), 1);
    for (std::size_t p = 0; p < f.size(); ++p) img.data[p] = to_byte(f[p]);
    return img;
}

inline Image8 mask_to_image(const BinaryMask& m) {
    Image8 img(m.height(), m.width(), 1);
    for (std::size_t p = 0; p < m.size(); ++p) img.data[p] = m[p] ? 255 : 0;
    return img;
}

/// Gray inputs are replicated to RGB; other channel counts use the first three (or first) channels.
inline Image8 to_rgb8(const Channels& ch) {
    if (ch.empty()) throw InvalidArgument("to_rgb8: no channels");
    Image8 img(ch.front().height(), ch.front().width(), 3);
    for (std::size_t p = 0; p < ch.front().size(); ++p)
        for (std::size_t k = 0; k < 3; ++k) img.data[p * 3 + k] = to_byte(ch[ch.size() >= 3 ? k : 0][p]);
    return img;
}

/// Foreground where the channel mean exceeds one half (0/255 masks map exactly).
inline BinaryMask load_mask(const std::string& path) {
    const Channels ch = load_image(path);
    ScalarField mean(ch.front().height(), ch.front().width());
    for (const auto& c : ch)
        for (std::size_t p = 0; p < c.size(); ++p) mean[p] += c[p] / static_cast<double>(ch.size());
    return BinaryMask::threshold(mean, 0.5);
}

} // namespace esp::io
