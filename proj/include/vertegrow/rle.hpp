#pragma once

// Run-length encoding of binary slice overlays: a list of [start, length]
// pairs over the row-major pixel index (i * cols + j) of one slice.

#include "vertegrow/error.hpp"
#include "vertegrow/grid.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace vertegrow {

using Run = std::pair<std::size_t, std::size_t>;

[[nodiscard]] inline std::vector<Run> encode_rle(std::span<const std::uint8_t> pixels) {
    std::vector<Run> runs;
    std::size_t n = 0;
    while (n < pixels.size()) {
        if (pixels[n] == 0) {
            ++n;
            continue;
        }
        const std::size_t start = n;
        while (n < pixels.size() && pixels[n] != 0) ++n;
        runs.emplace_back(start, n - start);
    }
    return runs;
}

[[nodiscard]] inline std::vector<std::uint8_t> decode_rle(const std::vector<Run>& runs, std::size_t length) {
    std::vector<std::uint8_t> out(length, 0);
    for (const auto& [start, len] : runs) {
        if (len == 0 || start + len > length) throw InvalidArgument("RLE run outside the slice");
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(start), len, std::uint8_t{1});
    }
    return out;
}

/// Overlay runs for slice `z` of a mask.
[[nodiscard]] inline std::vector<Run> encode_slice(const Mask& m, std::size_t z) {
    if (z >= m.dims().slices) throw InvalidArgument("slice out of range");
    return encode_rle(m.slice(z));
}

} // namespace vertegrow
