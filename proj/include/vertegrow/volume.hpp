#pragma once

#include "vertegrow/error.hpp"
#include "vertegrow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace vertegrow {

// ---------------------------------------------------------------------------
// Element types
// ---------------------------------------------------------------------------

enum class ElementType : std::uint8_t { u8, u16, f32, i8, i16 };

[[nodiscard]] constexpr std::size_t element_size(ElementType t) noexcept {
    switch (t) {
        case ElementType::u8:  return 1;
        case ElementType::i8:  return 1;
        case ElementType::u16: return 2;
        case ElementType::i16: return 2;
        case ElementType::f32: return 4;
    }
    return 0;
}

[[nodiscard]] constexpr std::string_view dtype_name(ElementType t) noexcept {
    switch (t) {
        case ElementType::u8:  return "u8";
        case ElementType::u16: return "u16";
        case ElementType::f32: return "f32";
        case ElementType::i8:  return "i8";
        case ElementType::i16: return "i16";
    }
    return "";
}

[[nodiscard]] inline ElementType parse_dtype(std::string_view s) {
    if (s == "u8") return ElementType::u8;
    if (s == "u16") return ElementType::u16;
    if (s == "f32") return ElementType::f32;
    if (s == "i8") return ElementType::i8;
    if (s == "i16") return ElementType::i16;
    throw FormatError("unsupported element type '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Volume
// ---------------------------------------------------------------------------

/// Physical voxel size in millimeters. dx runs along columns, dy along rows,
/// dz across slices.
struct Spacing {
    double dx = 1.0;
    double dy = 1.0;
    double dz = 1.0;

    [[nodiscard]] bool valid() const noexcept { return dx > 0 && dy > 0 && dz > 0; }
    friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

/// A scanned exam. Intensities are held as float in memory; `dtype` records
/// the on-disk element type (u8/u16 values are exact in float).
struct Volume {
    Grid<float> intensities;
    Spacing spacing;
    ElementType dtype = ElementType::u16;
    std::string orientation_note = "sagittal slices along z";

    Volume() = default;
    Volume(Grid<float> data, Spacing sp, ElementType type = ElementType::u16)
        : intensities(std::move(data)), spacing(sp), dtype(type) {
        validate();
    }

    [[nodiscard]] const Dims& dims() const noexcept { return intensities.dims(); }

    void validate() const {
        if (!dims().valid()) throw DimensionError("volume dimensions must all be >= 1");
        if (!spacing.valid()) throw FormatError("volume spacing must be positive");
        if (dtype != ElementType::u8 && dtype != ElementType::u16 && dtype != ElementType::f32) {
            throw FormatError("unsupported volume element type " + std::string(dtype_name(dtype)));
        }
        for (float v : intensities.values()) {
            if (!(v >= 0.0f) || !std::isfinite(v)) {
                throw FormatError("volume intensities must be finite and non-negative");
            }
        }
    }

    [[nodiscard]] float max_intensity() const noexcept {
        const auto v = intensities.values();
        return v.empty() ? 0.0f : *std::max_element(v.begin(), v.end());
    }
    [[nodiscard]] float min_intensity() const noexcept {
        const auto v = intensities.values();
        return v.empty() ? 0.0f : *std::min_element(v.begin(), v.end());
    }

    friend bool operator==(const Volume& a, const Volume& b) {
        return a.intensities == b.intensities && a.spacing == b.spacing && a.dtype == b.dtype;
    }
};

// ---------------------------------------------------------------------------
// Cropping
// ---------------------------------------------------------------------------

/// Inclusive axis-aligned box in voxel indices.
struct CropRegion {
    VoxelIndex lo;
    VoxelIndex hi;

    [[nodiscard]] Dims dims() const noexcept {
        return {hi.i - lo.i + 1, hi.j - lo.j + 1, hi.z - lo.z + 1};
    }
    [[nodiscard]] bool contains(const VoxelIndex& v) const noexcept {
        return v.i >= lo.i && v.i <= hi.i && v.j >= lo.j && v.j <= hi.j && v.z >= lo.z &&
               v.z <= hi.z;
    }
    friend constexpr bool operator==(const CropRegion&, const CropRegion&) = default;
};

inline constexpr std::size_t kDefaultCropMargin = 2;

/// Bounding box of every nonzero label, grown by `margin` and clipped to the grid.
[[nodiscard]] inline CropRegion seed_bounding_box(const LabelField& labels, std::size_t margin) {
    const Dims& d = labels.dims();
    bool any = false;
    VoxelIndex lo{d.rows, d.cols, d.slices};
    VoxelIndex hi{0, 0, 0};
    for (std::size_t z = 0; z < d.slices; ++z) {
        for (std::size_t i = 0; i < d.rows; ++i) {
            for (std::size_t j = 0; j < d.cols; ++j) {
                if (labels.at(i, j, z) == kUnlabeled) continue;
                any = true;
                lo = {std::min(lo.i, i), std::min(lo.j, j), std::min(lo.z, z)};
                hi = {std::max(hi.i, i), std::max(hi.j, j), std::max(hi.z, z)};
            }
        }
    }
    if (!any) throw SeedError("no seeds present");
    auto grow_lo = [margin](std::size_t v) { return v > margin ? v - margin : 0; };
    auto grow_hi = [margin](std::size_t v, std::size_t n) { return std::min(v + margin, n - 1); };
    return {{grow_lo(lo.i), grow_lo(lo.j), grow_lo(lo.z)},
            {grow_hi(hi.i, d.rows), grow_hi(hi.j, d.cols), grow_hi(hi.z, d.slices)}};
}

template <class T>
[[nodiscard]] Grid<T> extract(const Grid<T>& src, const CropRegion& r) {
    const Dims& d = src.dims();
    if (r.hi.i >= d.rows || r.hi.j >= d.cols || r.hi.z >= d.slices || r.lo.i > r.hi.i ||
        r.lo.j > r.hi.j || r.lo.z > r.hi.z) {
        throw DimensionError("crop region outside grid " + to_string(d));
    }
    Grid<T> out(r.dims());
    for (std::size_t z = r.lo.z; z <= r.hi.z; ++z) {
        for (std::size_t i = r.lo.i; i <= r.hi.i; ++i) {
            const T* row = &src.at(i, r.lo.j, z);
            std::copy(row, row + out.dims().cols, &out.at(i - r.lo.i, 0, z - r.lo.z));
        }
    }
    return out;
}

/// Places a cropped grid back at its original offset; everything outside the
/// region is `fill`.
template <class T>
[[nodiscard]] Grid<T> paste(const Grid<T>& cropped, const CropRegion& r, const Dims& full,
                            T fill = T{}) {
    require_same_dims(cropped.dims(), r.dims(), "paste");
    if (r.hi.i >= full.rows || r.hi.j >= full.cols || r.hi.z >= full.slices) {
        throw DimensionError("crop region outside grid " + to_string(full));
    }
    Grid<T> out(full, fill);
    const Dims& cd = cropped.dims();
    for (std::size_t z = 0; z < cd.slices; ++z) {
        for (std::size_t i = 0; i < cd.rows; ++i) {
            const T* row = &cropped.at(i, 0, z);
            std::copy(row, row + cd.cols, &out.at(i + r.lo.i, r.lo.j, z + r.lo.z));
        }
    }
    return out;
}

struct CroppedExam {
    Volume volume;
    LabelField labels;
    CropRegion region;
};

/// Restricts an exam to the seed bounding box (plus margin) before growth.
[[nodiscard]] inline CroppedExam crop_to_seeds(const Volume& vol, const LabelField& labels,
                                               std::size_t margin = kDefaultCropMargin) {
    require_same_dims(vol.dims(), labels.dims(), "crop_to_seeds");
    CropRegion region = seed_bounding_box(labels, margin);
    Volume sub;
    sub.intensities = extract(vol.intensities, region);
    sub.spacing = vol.spacing;
    sub.dtype = vol.dtype;
    sub.orientation_note = vol.orientation_note;
    return {std::move(sub), extract(labels, region), region};
}

} // namespace vertegrow
