#pragma once

// Cellular-automaton growth kernels.
//
// Every labeled voxel p "attacks" each in-bounds neighbor q with strength
//
//     s = W(p) * (1 - |I(p) - I(q)| / max I)
//
// and wins when s > W(q). Balanced growth (bgrowth) then sets
// W(q) = (W(q) + s) / 2; GrowCut sets W(q) = s. In both cases L(q) = L(p).
//
// Sweeps are in place and in ascending raster order (z, then i, then j);
// neighbor offsets are enumerated with dz, then di, then dj ascending. A
// voxel relabeled earlier in a sweep attacks with its new label and weight
// when its turn comes.

#include "vertegrow/error.hpp"
#include "vertegrow/grid.hpp"
#include "vertegrow/volume.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vertegrow {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Algorithm : std::uint8_t { bgrowth3d, bgrowth2d, growcut };

[[nodiscard]] constexpr std::string_view algorithm_name(Algorithm a) noexcept {
    switch (a) {
        case Algorithm::bgrowth3d: return "bgrowth3d";
        case Algorithm::bgrowth2d: return "bgrowth2d";
        case Algorithm::growcut:   return "growcut";
    }
    return "";
}

[[nodiscard]] inline Algorithm parse_algorithm(std::string_view s) {
    if (s == "bgrowth3d") return Algorithm::bgrowth3d;
    if (s == "bgrowth2d") return Algorithm::bgrowth2d;
    if (s == "growcut") return Algorithm::growcut;
    throw InvalidArgument("unknown algorithm '" + std::string(s) +
                          "' (expected bgrowth3d, bgrowth2d or growcut)");
}

[[nodiscard]] constexpr bool is_planar(Algorithm a) noexcept { return a == Algorithm::bgrowth2d; }

struct EngineConfig {
    Algorithm algorithm = Algorithm::bgrowth3d;
    int max_iterations = 50;
    /// 26 or 6 for volumetric kernels, 8 or 4 for bgrowth2d; 0 picks 26 / 8.
    int neighborhood = 0;

    [[nodiscard]] int resolved_neighborhood() const noexcept {
        if (neighborhood != 0) return neighborhood;
        return is_planar(algorithm) ? 8 : 26;
    }

    void validate() const {
        if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
        const int n = resolved_neighborhood();
        if (is_planar(algorithm) ? (n != 8 && n != 4) : (n != 26 && n != 6)) {
            throw InvalidArgument("neighborhood " + std::to_string(n) + " is not valid for " +
                                  std::string(algorithm_name(algorithm)));
        }
    }
};

struct SegmentationResult {
    LabelField labels;
    WeightField weights;
    int iterations_run = 0;
    bool converged = false;
    double elapsed_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Neighborhoods
// ---------------------------------------------------------------------------

struct Offset {
    int dz = 0;
    int di = 0;
    int dj = 0;
};

/// Offsets for a 26/6 (volumetric) or 8/4 (in-slice) neighborhood, in
/// ascending (dz, di, dj) order.
[[nodiscard]] inline std::vector<Offset> neighbor_offsets(int neighborhood) {
    std::vector<Offset> out;
    const bool planar = neighborhood == 8 || neighborhood == 4;
    const bool face_only = neighborhood == 6 || neighborhood == 4;
    if (!planar && neighborhood != 26 && neighborhood != 6) {
        throw InvalidArgument("unsupported neighborhood " + std::to_string(neighborhood));
    }
    for (int dz = -1; dz <= 1; ++dz) {
        if (planar && dz != 0) continue;
        for (int di = -1; di <= 1; ++di) {
            for (int dj = -1; dj <= 1; ++dj) {
                const int nonzero = (dz != 0) + (di != 0) + (dj != 0);
                if (nonzero == 0) continue;
                if (face_only && nonzero != 1) continue;
                out.push_back({dz, di, dj});
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Strength
// ---------------------------------------------------------------------------

/// Attack strength of a voxel with weight `w_attacker` and intensity
/// `i_attacker` against a neighbor of intensity `i_defender`. A zero
/// `max_intensity` (uniform black image) means no contrast.
[[nodiscard]] constexpr double strength(double w_attacker, double i_attacker, double i_defender,
                                        double max_intensity) noexcept {
    if (max_intensity <= 0.0) return w_attacker;
    const double diff = i_attacker > i_defender ? i_attacker - i_defender : i_defender - i_attacker;
    return w_attacker * (1.0 - diff / max_intensity);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct BalancedUpdate {
    [[nodiscard]] static constexpr double apply(double defender, double s) noexcept {
        return (defender + s) / 2.0;
    }
};

struct GrowCutUpdate {
    [[nodiscard]] static constexpr double apply(double /*defender*/, double s) noexcept { return s; }
};

namespace detail {

template <class Update>
std::size_t sweep(const Grid<float>& image, LabelField& labels, WeightField& weights,
                  const std::vector<Offset>& offsets, double max_intensity) {
    const Dims& d = image.dims();
    require_same_dims(d, labels.dims(), "sweep");
    require_same_dims(d, weights.dims(), "sweep");

    const auto rows = static_cast<long>(d.rows);
    const auto cols = static_cast<long>(d.cols);
    const auto slices = static_cast<long>(d.slices);
    const long plane = rows * cols;

    struct Step {
        Offset o;
        long delta;
    };
    std::vector<Step> steps;
    steps.reserve(offsets.size());
    bool uses_z = false;
    for (const auto& o : offsets) {
        steps.push_back({o, o.dz * plane + o.di * cols + o.dj});
        uses_z = uses_z || o.dz != 0;
    }

    const float* img = image.values().data();
    Label* lab = labels.values().data();
    double* w = weights.values().data();
    std::size_t changes = 0;

    auto attack = [&](long p, long q) {
        const double s = strength(w[p], img[p], img[q], max_intensity);
        if (s > w[q]) {
            w[q] = Update::apply(w[q], s);
            if (lab[q] != lab[p]) {
                lab[q] = lab[p];
                ++changes;
            }
        }
    };

    for (long z = 0; z < slices; ++z) {
        const bool z_inner = !uses_z || (z > 0 && z < slices - 1);
        for (long i = 0; i < rows; ++i) {
            const bool row_inner = z_inner && i > 0 && i < rows - 1;
            long p = (z * rows + i) * cols;
            for (long j = 0; j < cols; ++j, ++p) {
                if (lab[p] == kUnlabeled || w[p] <= 0.0) continue;
                if (row_inner && j > 0 && j < cols - 1) {
                    for (const auto& st : steps) attack(p, p + st.delta);
                } else {
                    for (const auto& st : steps) {
                        const long zn = z + st.o.dz, in = i + st.o.di, jn = j + st.o.dj;
                        if (zn < 0 || zn >= slices || in < 0 || in >= rows || jn < 0 || jn >= cols) {
                            continue;
                        }
                        attack(p, p + st.delta);
                    }
                }
            }
        }
    }
    return changes;
}

} // namespace detail

/// One in-place balanced-growth sweep. Returns the number of voxels whose
/// label changed.
inline std::size_t sweep_bgrowth(const Grid<float>& image, LabelField& labels, WeightField& weights,
                                 int neighborhood, double max_intensity) {
    return detail::sweep<BalancedUpdate>(image, labels, weights, neighbor_offsets(neighborhood),
                                         max_intensity);
}

inline std::size_t sweep_bgrowth(const Volume& vol, LabelField& labels, WeightField& weights,
                                 int neighborhood = 26) {
    return sweep_bgrowth(vol.intensities, labels, weights, neighborhood, vol.max_intensity());
}

/// One in-place GrowCut sweep (weight assignment instead of averaging).
inline std::size_t sweep_growcut(const Grid<float>& image, LabelField& labels, WeightField& weights,
                                 int neighborhood, double max_intensity) {
    return detail::sweep<GrowCutUpdate>(image, labels, weights, neighbor_offsets(neighborhood),
                                        max_intensity);
}

inline std::size_t sweep_growcut(const Volume& vol, LabelField& labels, WeightField& weights,
                                 int neighborhood = 26) {
    return sweep_growcut(vol.intensities, labels, weights, neighborhood, vol.max_intensity());
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

/// Weight 1 on every seed, 0 elsewhere.
[[nodiscard]] inline WeightField initial_weights(const LabelField& seeds) {
    WeightField w(seeds.dims(), 0.0);
    for (std::size_t n = 0; n < seeds.size(); ++n) {
        if (seeds[n] != kUnlabeled) w[n] = 1.0;
    }
    return w;
}

inline void require_both_polarities(const LabelField& seeds) {
    bool fg = false, bg = false;
    for (Label v : seeds.values()) {
        if (v < kBackground) throw SeedError("invalid label value " + std::to_string(v));
        fg = fg || v >= kForeground;
        bg = bg || v == kBackground;
    }
    if (!fg) throw SeedError("missing foreground seeds");
    if (!bg) throw SeedError("missing background seeds");
}

/// Grows `seeds` over `vol` until a sweep changes no label or the iteration
/// cap is hit. The normalizing maximum is taken over `vol` once.
[[nodiscard]] inline SegmentationResult segment(const Volume& vol, const LabelField& seeds,
                                                const EngineConfig& cfg = {}) {
    cfg.validate();
    require_same_dims(vol.dims(), seeds.dims(), "segment");
    require_both_polarities(seeds);

    const auto start = std::chrono::steady_clock::now();
    SegmentationResult r{seeds, initial_weights(seeds), 0, false, 0.0};
    const auto offsets = neighbor_offsets(cfg.resolved_neighborhood());
    const double max_i = vol.max_intensity();

    while (r.iterations_run < cfg.max_iterations) {
        const std::size_t changed =
            cfg.algorithm == Algorithm::growcut
                ? detail::sweep<GrowCutUpdate>(vol.intensities, r.labels, r.weights, offsets, max_i)
                : detail::sweep<BalancedUpdate>(vol.intensities, r.labels, r.weights, offsets, max_i);
        ++r.iterations_run;
        if (changed == 0) {
            r.converged = true;
            break;
        }
    }
    r.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Binary mask of voxels carrying label `k`.
[[nodiscard]] inline Mask mask(const LabelField& labels, Label k = kForeground) {
    Mask m(labels.dims(), 0);
    for (std::size_t n = 0; n < labels.size(); ++n) m[n] = labels[n] == k ? 1 : 0;
    return m;
}

[[nodiscard]] inline Mask mask(const SegmentationResult& result, Label k = kForeground) {
    return mask(result.labels, k);
}

} // namespace vertegrow
