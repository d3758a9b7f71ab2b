#pragma once

// Minimal 8-bit grayscale PNG encoder for slice previews.

#include "vertegrow/error.hpp"

#include <zlib.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vertegrow {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

inline void put_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

} // namespace detail

/// Encodes `pixels` (row-major, width*height bytes) as a grayscale PNG.
[[nodiscard]] inline std::string encode_png_gray8(std::span<const std::uint8_t> pixels, std::size_t width,
                                                  std::size_t height) {
    if (pixels.size() != width * height || width == 0 || height == 0) {
        throw InvalidArgument("PNG pixel buffer does not match its dimensions");
    }
    std::string raw;
    raw.reserve(height * (width + 1));
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        raw.append(reinterpret_cast<const char*>(pixels.data() + y * width), width);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::string z(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &bound, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK) {
        throw Error("zlib compression failed");
    }
    z.resize(bound);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    detail::put_u32(ihdr, static_cast<std::uint32_t>(width));
    detail::put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // depth 8, gray, deflate, no filter, no interlace
    detail::put_chunk(out, "IHDR", ihdr);
    detail::put_chunk(out, "IDAT", z);
    detail::put_chunk(out, "IEND", {});
    return out;
}

} // namespace vertegrow
