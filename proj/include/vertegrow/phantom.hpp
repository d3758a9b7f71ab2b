#pragma once

// Synthetic exams with exactly known ground truth.

#include "vertegrow/error.hpp"
#include "vertegrow/grid.hpp"
#include "vertegrow/seeds.hpp"
#include "vertegrow/volume.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace vertegrow {

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct EllipsoidBody {
    double center_i = 0, center_j = 0, center_z = 0;
    double radius_i = 1, radius_j = 1, radius_z = 1;
};

/// Inclusive voxel box.
struct BoxBody {
    VoxelIndex lo;
    VoxelIndex hi;
};

/// A column of vertebral bodies stacked along the rows (i) axis, separated
/// by background gaps. Each body spans `height` rows and has an elliptical
/// (j, z) cross-section, so in a sagittal slice it shows up as a rectangle
/// whose width shrinks towards the lateral slices.
struct StackedVertebrae {
    std::size_t count = 3;
    std::size_t first_row = 5;
    std::size_t height = 12;
    std::size_t gap = 5;
    double center_j = 20, center_z = 6;
    double radius_j = 12, radius_z = 5;
};

using PhantomBody = std::variant<EllipsoidBody, BoxBody, StackedVertebrae>;

struct PhantomSpec {
    Dims dims{56, 40, 13};
    PhantomBody body = StackedVertebrae{};
    double fg_intensity = 200.0;
    double bg_intensity = 40.0;
    double noise_sigma = 0.0;
    std::uint64_t rng_seed = 1;
    Spacing spacing{1.0, 1.0, 3.5};
    ElementType dtype = ElementType::u16;
};

struct Phantom {
    Volume volume;
    Mask ground_truth;
    /// 1..K per body (stacked vertebrae), 1 for single bodies, 0 outside.
    LabelField bodies;
};

namespace detail {

inline void check_fits(bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("phantom geometry out of bounds: ") + what);
}

inline LabelField draw_body(const Dims& d, const PhantomBody& body) {
    LabelField out(d, 0);
    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, EllipsoidBody>) {
                check_fits(b.radius_i > 0 && b.radius_j > 0 && b.radius_z > 0, "ellipsoid radii");
                check_fits(b.center_i - b.radius_i >= 0 && b.center_i + b.radius_i <= double(d.rows - 1) &&
                               b.center_j - b.radius_j >= 0 && b.center_j + b.radius_j <= double(d.cols - 1) &&
                               b.center_z - b.radius_z >= 0 && b.center_z + b.radius_z <= double(d.slices - 1),
                           "ellipsoid");
                for (std::size_t z = 0; z < d.slices; ++z)
                    for (std::size_t i = 0; i < d.rows; ++i)
                        for (std::size_t j = 0; j < d.cols; ++j) {
                            const double u = (double(i) - b.center_i) / b.radius_i;
                            const double v = (double(j) - b.center_j) / b.radius_j;
                            const double w = (double(z) - b.center_z) / b.radius_z;
                            if (u * u + v * v + w * w <= 1.0) out.at(i, j, z) = 1;
                        }
            } else if constexpr (std::is_same_v<T, BoxBody>) {
                check_fits(b.lo.i <= b.hi.i && b.lo.j <= b.hi.j && b.lo.z <= b.hi.z, "box corners");
                check_fits(contains(d, b.hi), "box");
                for (std::size_t z = b.lo.z; z <= b.hi.z; ++z)
                    for (std::size_t i = b.lo.i; i <= b.hi.i; ++i)
                        for (std::size_t j = b.lo.j; j <= b.hi.j; ++j) out.at(i, j, z) = 1;
            } else {
                check_fits(b.count >= 1 && b.height >= 1 && b.radius_j > 0 && b.radius_z > 0,
                           "vertebra parameters");
                const std::size_t last_row = b.first_row + b.count * b.height + (b.count - 1) * b.gap;
                check_fits(last_row <= d.rows, "vertebra stack rows");
                check_fits(b.center_j - b.radius_j >= 0 && b.center_j + b.radius_j <= double(d.cols - 1) &&
                               b.center_z - b.radius_z >= 0 &&
                               b.center_z + b.radius_z <= double(d.slices - 1),
                           "vertebra cross-section");
                for (std::size_t k = 0; k < b.count; ++k) {
                    const std::size_t top = b.first_row + k * (b.height + b.gap);
                    for (std::size_t z = 0; z < d.slices; ++z)
                        for (std::size_t j = 0; j < d.cols; ++j) {
                            const double v = (double(j) - b.center_j) / b.radius_j;
                            const double w = (double(z) - b.center_z) / b.radius_z;
                            if (v * v + w * w > 1.0) continue;
                            for (std::size_t i = top; i < top + b.height; ++i) {
                                out.at(i, j, z) = static_cast<Label>(k + 1);
                            }
                        }
                }
            }
        },
        body);
    return out;
}

} // namespace detail

/// Renders the phantom. Deterministic for a fixed `rng_seed`.
[[nodiscard]] inline Phantom generate(const PhantomSpec& spec) {
    if (!spec.dims.valid()) throw InvalidArgument("phantom dims must all be >= 1");
    if (spec.fg_intensity == spec.bg_intensity) {
        throw InvalidArgument("foreground and background intensities must differ");
    }
    if (spec.fg_intensity < 0 || spec.bg_intensity < 0 || !(spec.noise_sigma >= 0)) {
        throw InvalidArgument("phantom intensities and noise must be non-negative");
    }
    Phantom ph;
    ph.bodies = detail::draw_body(spec.dims, spec.body);
    ph.ground_truth = Mask(spec.dims, 0);
    Grid<float> img(spec.dims, 0.0f);

    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);
    const double top = spec.dtype == ElementType::u8 ? 255.0 : spec.dtype == ElementType::u16 ? 65535.0 : 1e30;
    for (std::size_t n = 0; n < img.size(); ++n) {
        const bool inside = ph.bodies[n] != 0;
        ph.ground_truth[n] = inside ? 1 : 0;
        double v = inside ? spec.fg_intensity : spec.bg_intensity;
        if (spec.noise_sigma > 0) v += noise(rng);
        v = std::clamp(v, 0.0, top);
        if (spec.dtype != ElementType::f32) v = std::round(v);
        img[n] = static_cast<float>(v);
    }
    ph.volume = Volume(std::move(img), spec.spacing, spec.dtype);
    return ph;
}

/// Noise level of the standard noisy suite, as a fraction of the contrast.
inline constexpr double kStandardNoiseFraction = 0.15;

/// A randomized lumbar-like stack: 2-4 bodies, 7-13 content slices, with
/// geometry drawn from `seed`. `noise_fraction` scales Gaussian noise by the
/// foreground/background contrast.
[[nodiscard]] inline PhantomSpec vertebra_phantom_spec(std::uint64_t seed, double noise_fraction) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto pick = [&rng](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    StackedVertebrae v;
    v.count = pick(2, 4);
    v.height = pick(10, 14);
    v.gap = pick(4, 6);
    v.radius_j = static_cast<double>(pick(9, 13));
    // 2*floor(r)+1 content slices: 7..13.
    v.radius_z = static_cast<double>(pick(3, 6)) + 0.5;
    v.first_row = 6;
    v.center_j = v.radius_j + 6;
    v.center_z = std::floor(v.radius_z) + 1;

    PhantomSpec spec;
    spec.dims = {v.first_row + v.count * v.height + (v.count - 1) * v.gap + 6,
                 static_cast<std::size_t>(2 * v.radius_j) + 13,
                 static_cast<std::size_t>(2 * std::floor(v.radius_z)) + 3};
    spec.body = v;
    spec.fg_intensity = 200.0;
    spec.bg_intensity = 40.0;
    spec.noise_sigma = noise_fraction * (spec.fg_intensity - spec.bg_intensity);
    spec.rng_seed = seed;
    return spec;
}

// ---------------------------------------------------------------------------
// Automatic "sloppy" seeding
// ---------------------------------------------------------------------------

enum class SeedStyle : std::uint8_t {
    /// Horizontal line through each component's centroid, rectangle outside.
    sloppy_rect,
    /// Vertical line through each component's centroid, rectangle outside.
    skeleton_line,
};

/// Slices on which `m` has at least one voxel.
[[nodiscard]] inline std::vector<std::size_t> content_slices(const Mask& m) {
    std::vector<std::size_t> out;
    for (std::size_t z = 0; z < m.dims().slices; ++z) {
        const auto s = m.slice(z);
        if (std::any_of(s.begin(), s.end(), [](std::uint8_t v) { return v != 0; })) out.push_back(z);
    }
    return out;
}

namespace detail {

/// 4-connected components of one slice, as pixel lists.
inline std::vector<std::vector<PixelIndex>> slice_components(const Mask& gt, std::size_t z) {
    const Dims& d = gt.dims();
    std::vector<std::uint8_t> seen(d.slice_size(), 0);
    std::vector<std::vector<PixelIndex>> comps;
    for (std::size_t i = 0; i < d.rows; ++i) {
        for (std::size_t j = 0; j < d.cols; ++j) {
            if (!gt.at(i, j, z) || seen[i * d.cols + j]) continue;
            auto& comp = comps.emplace_back();
            std::deque<PixelIndex> queue{{i, j}};
            seen[i * d.cols + j] = 1;
            while (!queue.empty()) {
                const auto p = queue.front();
                queue.pop_front();
                comp.push_back(p);
                const long di[] = {-1, 1, 0, 0}, dj[] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const long ni = long(p.i) + di[k], nj = long(p.j) + dj[k];
                    if (ni < 0 || nj < 0 || ni >= long(d.rows) || nj >= long(d.cols)) continue;
                    const auto ui = std::size_t(ni), uj = std::size_t(nj);
                    if (!gt.at(ui, uj, z) || seen[ui * d.cols + uj]) continue;
                    seen[ui * d.cols + uj] = 1;
                    queue.push_back({ui, uj});
                }
            }
        }
    }
    return comps;
}

/// Interior stroke for one component: the run through its centroid along
/// rows (vertical) or columns (horizontal), shortened by one pixel at each
/// end when long enough.
inline Stroke interior_stroke(const Mask& gt, std::size_t z, const std::vector<PixelIndex>& comp,
                              bool vertical) {
    double si = 0, sj = 0;
    for (const auto& p : comp) {
        si += double(p.i);
        sj += double(p.j);
    }
    const double ci = si / double(comp.size()), cj = sj / double(comp.size());
    // Pixel of the component nearest to the centroid.
    PixelIndex anchor = comp.front();
    double best = 1e300;
    for (const auto& p : comp) {
        const double d2 = (double(p.i) - ci) * (double(p.i) - ci) + (double(p.j) - cj) * (double(p.j) - cj);
        if (d2 < best) {
            best = d2;
            anchor = p;
        }
    }
    const Dims& d = gt.dims();
    PixelIndex a = anchor, b = anchor;
    if (vertical) {
        while (a.i > 0 && gt.at(a.i - 1, a.j, z)) --a.i;
        while (b.i + 1 < d.rows && gt.at(b.i + 1, b.j, z)) ++b.i;
        if (b.i - a.i >= 2) {
            ++a.i;
            --b.i;
        }
    } else {
        while (a.j > 0 && gt.at(a.i, a.j - 1, z)) --a.j;
        while (b.j + 1 < d.cols && gt.at(b.i, b.j + 1, z)) ++b.j;
        if (b.j - a.j >= 2) {
            ++a.j;
            --b.j;
        }
    }
    return {kForeground, z, {a, b}, 0.0};
}

} // namespace detail

inline constexpr std::size_t kExteriorDilation = 3;

/// Synthesizes the rough interior/exterior annotation a specialist would
/// draw on each slice of `slice_set`: interior lines inside every
/// ground-truth component and a rectangle outline around the slice's
/// ground truth, dilated by three voxels. Each slice is timed at 6.5 s.
[[nodiscard]] inline AnnotationSession auto_seed(const Mask& gt, SeedStyle style,
                                                 const std::vector<std::size_t>& slice_set,
                                                 std::string exam_id = "phantom") {
    const Dims& d = gt.dims();
    AnnotationSession session;
    session.exam_id = std::move(exam_id);
    for (std::size_t z : slice_set) {
        if (z >= d.slices) throw InvalidArgument("slice " + std::to_string(z) + " out of bounds");
        const auto comps = detail::slice_components(gt, z);
        if (comps.empty()) throw SeedError("slice " + std::to_string(z) + " has no foreground");

        std::size_t lo_i = d.rows, lo_j = d.cols, hi_i = 0, hi_j = 0;
        for (const auto& c : comps)
            for (const auto& p : c) {
                lo_i = std::min(lo_i, p.i);
                lo_j = std::min(lo_j, p.j);
                hi_i = std::max(hi_i, p.i);
                hi_j = std::max(hi_j, p.j);
            }
        const std::size_t k = kExteriorDilation;
        lo_i = lo_i > k ? lo_i - k : 0;
        lo_j = lo_j > k ? lo_j - k : 0;
        hi_i = std::min(hi_i + k, d.rows - 1);
        hi_j = std::min(hi_j + k, d.cols - 1);
        Stroke rect{kBackground, z, {{lo_i, lo_j}, {lo_i, hi_j}, {hi_i, hi_j}, {hi_i, lo_j}, {lo_i, lo_j}}, 0.0};

        LabelField probe(Dims{d.rows, d.cols, d.slices}, 0);
        rasterize_stroke(rect, probe);
        for (std::size_t i = 0; i < d.rows; ++i)
            for (std::size_t j = 0; j < d.cols; ++j)
                if (probe.at(i, j, z) != 0 && gt.at(i, j, z)) {
                    throw SeedError("ground truth too close to the border of slice " +
                                    std::to_string(z) + " for an exterior rectangle");
                }
        session.strokes.push_back(std::move(rect));
        for (const auto& c : comps) {
            session.strokes.push_back(
                detail::interior_stroke(gt, z, c, style == SeedStyle::skeleton_line));
        }
        session.per_slice_time[z] = kSecondsPerSlice;
    }
    return session;
}

[[nodiscard]] inline AnnotationSession auto_seed(const Mask& gt, SeedStyle style = SeedStyle::sloppy_rect) {
    return auto_seed(gt, style, content_slices(gt));
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const PhantomSpec& s) {
    j["dims"] = {s.dims.rows, s.dims.cols, s.dims.slices};
    j["spacing"] = {s.spacing.dx, s.spacing.dy, s.spacing.dz};
    j["fg_intensity"] = s.fg_intensity;
    j["bg_intensity"] = s.bg_intensity;
    j["noise_sigma"] = s.noise_sigma;
    j["rng_seed"] = s.rng_seed;
    j["dtype"] = dtype_name(s.dtype);
    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, EllipsoidBody>) {
                j["body"] = {{"type", "ellipsoid"},
                             {"center", {b.center_i, b.center_j, b.center_z}},
                             {"radii", {b.radius_i, b.radius_j, b.radius_z}}};
            } else if constexpr (std::is_same_v<T, BoxBody>) {
                j["body"] = {{"type", "box"},
                             {"lo", {b.lo.i, b.lo.j, b.lo.z}},
                             {"hi", {b.hi.i, b.hi.j, b.hi.z}}};
            } else {
                j["body"] = {{"type", "stacked-vertebrae"}, {"count", b.count},
                             {"first_row", b.first_row},   {"height", b.height},
                             {"gap", b.gap},               {"center_j", b.center_j},
                             {"center_z", b.center_z},     {"radius_j", b.radius_j},
                             {"radius_z", b.radius_z}};
            }
        },
        s.body);
}

inline void from_json(const nlohmann::json& j, PhantomSpec& s) {
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) throw InvalidArgument("phantom dims must have 3 entries");
    s.dims = {dims[0], dims[1], dims[2]};
    if (j.contains("spacing")) {
        const auto sp = j.at("spacing").get<std::vector<double>>();
        if (sp.size() != 3) throw InvalidArgument("phantom spacing must have 3 entries");
        s.spacing = {sp[0], sp[1], sp[2]};
    }
    s.fg_intensity = j.value("fg_intensity", s.fg_intensity);
    s.bg_intensity = j.value("bg_intensity", s.bg_intensity);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
    s.dtype = parse_dtype(j.value("dtype", std::string("u16")));
    const auto& b = j.at("body");
    const auto type = b.at("type").get<std::string>();
    if (type == "ellipsoid") {
        const auto c = b.at("center").get<std::vector<double>>();
        const auto r = b.at("radii").get<std::vector<double>>();
        if (c.size() != 3 || r.size() != 3) throw InvalidArgument("ellipsoid needs 3 center and radii values");
        s.body = EllipsoidBody{c[0], c[1], c[2], r[0], r[1], r[2]};
    } else if (type == "box") {
        const auto lo = b.at("lo").get<std::vector<std::size_t>>();
        const auto hi = b.at("hi").get<std::vector<std::size_t>>();
        if (lo.size() != 3 || hi.size() != 3) throw InvalidArgument("box needs 3 lo and hi values");
        s.body = BoxBody{{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    } else if (type == "stacked-vertebrae") {
        StackedVertebrae v;
        v.count = b.value("count", v.count);
        v.first_row = b.value("first_row", v.first_row);
        v.height = b.value("height", v.height);
        v.gap = b.value("gap", v.gap);
        v.center_j = b.value("center_j", v.center_j);
        v.center_z = b.value("center_z", v.center_z);
        v.radius_j = b.value("radius_j", v.radius_j);
        v.radius_z = b.value("radius_z", v.radius_z);
        s.body = v;
    } else {
        throw InvalidArgument("unknown phantom body type '" + type + "'");
    }
}

} // namespace vertegrow
