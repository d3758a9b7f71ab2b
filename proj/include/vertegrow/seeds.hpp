#pragma once

#include "vertegrow/error.hpp"
#include "vertegrow/grid.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace vertegrow {

// ---------------------------------------------------------------------------
// Annotation types
// ---------------------------------------------------------------------------

/// In-slice pixel coordinate.
struct PixelIndex {
    std::size_t i = 0;
    std::size_t j = 0;
    friend constexpr bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// One freehand brush stroke on a single slice.
struct Stroke {
    Label label = kForeground;
    std::size_t slice_z = 0;
    std::vector<PixelIndex> points;
    double brush_radius = 0.0;

    friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct AnnotationSession {
    std::string exam_id;
    std::vector<Stroke> strokes;
    /// Seconds spent annotating each slice.
    std::map<std::size_t, double> per_slice_time;

    friend bool operator==(const AnnotationSession&, const AnnotationSession&) = default;
};

inline constexpr double kSecondsPerSlice = 6.5;

/// Checks a stroke against slice bounds. Throws InvalidArgument.
inline void validate_stroke(const Stroke& s, const Dims& dims) {
    if (s.label == kUnlabeled) throw InvalidArgument("stroke label must be nonzero");
    if (s.label < kBackground) throw InvalidArgument("stroke label must be -1 or >= 1");
    if (s.points.empty()) throw InvalidArgument("stroke has no points");
    if (!(s.brush_radius >= 0.0) || !std::isfinite(s.brush_radius)) {
        throw InvalidArgument("brush radius must be a finite value >= 0");
    }
    if (s.slice_z >= dims.slices) {
        throw InvalidArgument("stroke slice " + std::to_string(s.slice_z) + " out of bounds");
    }
    for (const auto& p : s.points) {
        if (p.i >= dims.rows || p.j >= dims.cols) {
            throw InvalidArgument("stroke point (" + std::to_string(p.i) + "," +
                                  std::to_string(p.j) + ") out of bounds for " + to_string(dims));
        }
    }
}

inline void validate_session(const AnnotationSession& session, const Dims& dims) {
    for (const auto& s : session.strokes) {
        validate_stroke(s, dims);
        if (!session.per_slice_time.contains(s.slice_z)) {
            throw InvalidArgument("stroke on slice " + std::to_string(s.slice_z) +
                                  " has no timing entry");
        }
    }
    for (const auto& [z, t] : session.per_slice_time) {
        if (!(t >= 0.0)) throw InvalidArgument("negative annotation time on slice " + std::to_string(z));
    }
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

namespace detail {

inline void paint_disc(LabelField& out, std::size_t z, long ci, long cj, double radius, Label label) {
    const Dims& d = out.dims();
    const long r = static_cast<long>(std::floor(radius));
    const double r2 = radius * radius;
    for (long di = -r; di <= r; ++di) {
        for (long dj = -r; dj <= r; ++dj) {
            if (static_cast<double>(di * di + dj * dj) > r2) continue;
            const long i = ci + di, j = cj + dj;
            if (i < 0 || j < 0 || i >= static_cast<long>(d.rows) || j >= static_cast<long>(d.cols)) {
                continue;
            }
            out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), z) = label;
        }
    }
}

/// Bresenham line from a to b, inclusive of both ends.
template <class Visit>
void bresenham(long i0, long j0, long i1, long j1, Visit&& visit) {
    const long di = std::abs(i1 - i0), dj = std::abs(j1 - j0);
    const long si = i0 < i1 ? 1 : -1, sj = j0 < j1 ? 1 : -1;
    long err = dj - di;
    for (;;) {
        visit(i0, j0);
        if (i0 == i1 && j0 == j1) break;
        const long e2 = 2 * err;
        if (e2 > -di) {
            err -= di;
            j0 += sj;
        }
        if (e2 < dj) {
            err += dj;
            i0 += si;
        }
    }
}

} // namespace detail

/// Paints one stroke into `out`. Later strokes overwrite earlier ones.
inline void rasterize_stroke(const Stroke& s, LabelField& out) {
    validate_stroke(s, out.dims());
    auto paint = [&](long i, long j) { detail::paint_disc(out, s.slice_z, i, j, s.brush_radius, s.label); };
    if (s.points.size() == 1) {
        paint(static_cast<long>(s.points[0].i), static_cast<long>(s.points[0].j));
        return;
    }
    for (std::size_t n = 1; n < s.points.size(); ++n) {
        const auto& a = s.points[n - 1];
        const auto& b = s.points[n];
        detail::bresenham(static_cast<long>(a.i), static_cast<long>(a.j), static_cast<long>(b.i),
                          static_cast<long>(b.j), paint);
    }
}

[[nodiscard]] inline LabelField rasterize(const AnnotationSession& session, const Dims& dims) {
    LabelField out(dims, kUnlabeled);
    for (const auto& s : session.strokes) rasterize_stroke(s, out);
    return out;
}

// ---------------------------------------------------------------------------
// Slice subsampling
// ---------------------------------------------------------------------------

/// Sorted indices of slices that carry at least one nonzero label.
[[nodiscard]] inline std::vector<std::size_t> annotated_slices(const LabelField& labels) {
    std::vector<std::size_t> out;
    for (std::size_t z = 0; z < labels.dims().slices; ++z) {
        const auto s = labels.slice(z);
        if (std::any_of(s.begin(), s.end(), [](Label v) { return v != kUnlabeled; })) out.push_back(z);
    }
    return out;
}

/// Keeps every (d+1)-th annotated slice starting from the first, plus the last
/// annotated slice so both extremes stay anchored.
[[nodiscard]] inline std::vector<std::size_t> kept_slices(const std::vector<std::size_t>& annotated,
                                                          std::size_t slice_distance) {
    std::vector<std::size_t> kept;
    if (annotated.empty()) return kept;
    const std::size_t step = slice_distance + 1;
    for (std::size_t n = 0; n < annotated.size(); n += step) kept.push_back(annotated[n]);
    if (kept.back() != annotated.back()) kept.push_back(annotated.back());
    return kept;
}

[[nodiscard]] inline LabelField subsample_slices(const LabelField& labels, std::size_t slice_distance) {
    const auto kept = kept_slices(annotated_slices(labels), slice_distance);
    const std::set<std::size_t> keep(kept.begin(), kept.end());
    LabelField out = labels;
    const Dims& d = labels.dims();
    for (std::size_t z = 0; z < d.slices; ++z) {
        if (keep.contains(z)) continue;
        std::fill_n(&out.at(0, 0, z), d.slice_size(), kUnlabeled);
    }
    return out;
}

/// Total annotation seconds over the kept slices.
[[nodiscard]] inline double annotation_time(const AnnotationSession& session,
                                            const std::vector<std::size_t>& kept) {
    double total = 0.0;
    for (std::size_t z : kept) {
        const auto it = session.per_slice_time.find(z);
        if (it == session.per_slice_time.end()) {
            throw InvalidArgument("no annotation time recorded for slice " + std::to_string(z));
        }
        total += it->second;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Session JSON
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const Stroke& s) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : s.points) pts.push_back({p.i, p.j});
    j = {{"label", s.label}, {"slice_z", s.slice_z}, {"points", pts}, {"brush_radius", s.brush_radius}};
}

inline void from_json(const nlohmann::json& j, Stroke& s) {
    s.label = j.at("label").get<Label>();
    const auto z = j.at("slice_z").get<long long>();
    if (z < 0) throw InvalidArgument("stroke slice must be >= 0");
    s.slice_z = static_cast<std::size_t>(z);
    s.brush_radius = j.value("brush_radius", 0.0);
    s.points.clear();
    for (const auto& p : j.at("points")) {
        if (!p.is_array() || p.size() != 2) throw InvalidArgument("stroke point must be [i, j]");
        const auto i = p[0].get<long long>(), jj = p[1].get<long long>();
        if (i < 0 || jj < 0) throw InvalidArgument("stroke point coordinates must be >= 0");
        s.points.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(jj)});
    }
}

inline void to_json(nlohmann::json& j, const AnnotationSession& s) {
    nlohmann::json times = nlohmann::json::object();
    for (const auto& [z, t] : s.per_slice_time) times[std::to_string(z)] = t;
    j = {{"exam_id", s.exam_id}, {"strokes", s.strokes}, {"per_slice_time", times}};
}

inline void from_json(const nlohmann::json& j, AnnotationSession& s) {
    s.exam_id = j.value("exam_id", std::string{});
    s.strokes = j.value("strokes", std::vector<Stroke>{});
    s.per_slice_time.clear();
    if (j.contains("per_slice_time")) {
        for (const auto& [key, value] : j.at("per_slice_time").items()) {
            std::size_t pos = 0;
            const auto z = std::stoull(key, &pos);
            if (pos != key.size()) throw InvalidArgument("bad slice key '" + key + "'");
            s.per_slice_time[static_cast<std::size_t>(z)] = value.get<double>();
        }
    }
}

[[nodiscard]] inline AnnotationSession load_session(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open session '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in).get<AnnotationSession>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed session '" + path.string() + "': " + e.what());
    } catch (const std::logic_error& e) {
        throw FormatError("malformed session '" + path.string() + "': " + e.what());
    }
}

inline void save_session(const AnnotationSession& session, const std::filesystem::path& path) {
    if (path.empty()) throw IoError("empty session path");
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write session '" + path.string() + "'");
        out << nlohmann::json(session).dump(2) << "\n";
        if (!out) throw IoError("failed writing session '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace vertegrow
