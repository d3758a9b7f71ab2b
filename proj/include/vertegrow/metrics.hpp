#pragma once

#include "vertegrow/error.hpp"
#include "vertegrow/grid.hpp"
#include "vertegrow/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace vertegrow {

struct MetricReport {
    std::string id;
    std::string algorithm;
    double dsc = 0.0;
    double jac = 0.0;
    double hd = 0.0;
    double elapsed_segmentation = 0.0;
    double annotation_seconds = 0.0;
};

namespace detail {

struct OverlapCounts {
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t both = 0;
};

inline OverlapCounts overlap(const Mask& a, const Mask& b, const char* what) {
    require_same_dims(a.dims(), b.dims(), what);
    OverlapCounts c;
    for (std::size_t n = 0; n < a.size(); ++n) {
        const bool x = a[n] != 0, y = b[n] != 0;
        c.a += x;
        c.b += y;
        c.both += x && y;
    }
    return c;
}

} // namespace detail

/// 2|a∩b| / (|a|+|b|); 1 when both are empty.
[[nodiscard]] inline double dice(const Mask& a, const Mask& b) {
    const auto c = detail::overlap(a, b, "dice");
    if (c.a + c.b == 0) return 1.0;
    return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

/// |a∩b| / |a∪b|; 1 when both are empty.
[[nodiscard]] inline double jaccard(const Mask& a, const Mask& b) {
    const auto c = detail::overlap(a, b, "jaccard");
    const std::size_t uni = c.a + c.b - c.both;
    if (uni == 0) return 1.0;
    return static_cast<double>(c.both) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Distance transform
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line.
/// `f` holds squared distances (inf where unknown); `scale` is the physical
/// size of one step. Writes the transformed line into `d`.
inline void edt_line(const std::vector<double>& f, double scale, std::vector<double>& d,
                     std::vector<long>& v, std::vector<double>& zb) {
    const long n = static_cast<long>(f.size());
    const double s2 = scale * scale;
    long k = -1;
    for (long q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        const double fq = f[q] + s2 * static_cast<double>(q * q);
        while (k >= 0) {
            const long p = v[k];
            const double fp = f[p] + s2 * static_cast<double>(p * p);
            const double s = (fq - fp) / (2.0 * s2 * static_cast<double>(q - p));
            if (s <= zb[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        if (k == 0) {
            zb[k] = -kInf;
        } else {
            const long p = v[k - 1];
            const double fp = f[p] + s2 * static_cast<double>(p * p);
            zb[k] = (fq - fp) / (2.0 * s2 * static_cast<double>(q - p));
        }
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), kInf);
        return;
    }
    long m = 0;
    for (long q = 0; q < n; ++q) {
        while (m < k && zb[m + 1] < static_cast<double>(q)) ++m;
        const double delta = scale * static_cast<double>(q - v[m]);
        d[q] = delta * delta + f[v[m]];
    }
}

} // namespace detail

/// Squared Euclidean distance from every voxel to the nearest voxel of `m`,
/// with per-axis step sizes (dx along cols, dy along rows, dz across slices).
/// All-infinite when `m` is empty.
[[nodiscard]] inline Grid<double> squared_distance_transform(const Mask& m, const Spacing& step = {}) {
    const Dims& dims = m.dims();
    Grid<double> dt(dims, detail::kInf);
    for (std::size_t n = 0; n < m.size(); ++n) {
        if (m[n] != 0) dt[n] = 0.0;
    }
    const std::size_t longest = std::max({dims.rows, dims.cols, dims.slices});
    std::vector<double> f(longest), d(longest), zb(longest + 1);
    std::vector<long> v(longest);

    auto pass = [&](std::size_t len, double scale, auto&& index_of, std::size_t outer_a,
                    std::size_t outer_b) {
        f.resize(len);
        d.resize(len);
        for (std::size_t a = 0; a < outer_a; ++a) {
            for (std::size_t b = 0; b < outer_b; ++b) {
                for (std::size_t q = 0; q < len; ++q) f[q] = dt[index_of(a, b, q)];
                detail::edt_line(f, scale, d, v, zb);
                for (std::size_t q = 0; q < len; ++q) dt[index_of(a, b, q)] = d[q];
            }
        }
    };
    // Along j (cols), then i (rows), then z (slices).
    pass(dims.cols, step.dx,
         [&](std::size_t z, std::size_t i, std::size_t q) { return linear_index(dims, i, q, z); },
         dims.slices, dims.rows);
    pass(dims.rows, step.dy,
         [&](std::size_t z, std::size_t j, std::size_t q) { return linear_index(dims, q, j, z); },
         dims.slices, dims.cols);
    pass(dims.slices, step.dz,
         [&](std::size_t i, std::size_t j, std::size_t q) { return linear_index(dims, i, j, q); },
         dims.rows, dims.cols);
    return dt;
}

/// Symmetric Hausdorff distance between two voxel sets, in voxel units by
/// default (pass a Spacing for millimeters). Both sets must be nonempty.
[[nodiscard]] inline double hausdorff(const Mask& a, const Mask& b, const Spacing& step = {}) {
    require_same_dims(a.dims(), b.dims(), "hausdorff");
    if (count(a) == 0 || count(b) == 0) {
        throw InvalidArgument("hausdorff distance is undefined for an empty set");
    }
    auto directed = [](const Mask& from, const Grid<double>& to_dt) {
        double worst = 0.0;
        for (std::size_t n = 0; n < from.size(); ++n) {
            if (from[n] != 0) worst = std::max(worst, to_dt[n]);
        }
        return worst;
    };
    const double h_ab = directed(a, squared_distance_transform(b, step));
    const double h_ba = directed(b, squared_distance_transform(a, step));
    return std::sqrt(std::max(h_ab, h_ba));
}

/// Scores a segmentation against ground truth.
[[nodiscard]] inline MetricReport evaluate(const Mask& segmentation, const Mask& ground_truth) {
    MetricReport r;
    r.dsc = dice(segmentation, ground_truth);
    r.jac = jaccard(segmentation, ground_truth);
    r.hd = hausdorff(segmentation, ground_truth);
    return r;
}

} // namespace vertegrow
