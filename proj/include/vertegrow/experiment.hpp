#pragma once

#include "vertegrow/engine.hpp"
#include "vertegrow/error.hpp"
#include "vertegrow/metrics.hpp"
#include "vertegrow/pipeline.hpp"
#include "vertegrow/seeds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

namespace vertegrow {

// ---------------------------------------------------------------------------
// Slope coefficient
// ---------------------------------------------------------------------------

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Rate of change between two points.
[[nodiscard]] inline double slope(Point2 p1, Point2 p2) {
    if (p2.x == p1.x) throw InvalidArgument("slope undefined for equal x coordinates");
    return (p2.y - p1.y) / (p2.x - p1.x);
}

struct SweepPoint {
    std::size_t slice_distance = 0;
    double annotation_seconds = 0.0;
    double runtime_seconds = 0.0;
    double dsc = 0.0;
    double jac = 0.0;
    std::size_t kept_slices = 0;
    int iterations = 0;
};

struct SlopeSegment {
    std::size_t from_distance = 0;
    std::size_t to_distance = 0;
    double slope = 0.0;
};

struct SlopeSeries {
    std::vector<SweepPoint> points;
    std::vector<SlopeSegment> slopes;
};

/// Sorts points by distance and computes annotation-time slopes between
/// consecutive ones.
[[nodiscard]] inline SlopeSeries make_series(std::vector<SweepPoint> points) {
    std::sort(points.begin(), points.end(),
              [](const SweepPoint& a, const SweepPoint& b) { return a.slice_distance < b.slice_distance; });
    for (std::size_t n = 1; n < points.size(); ++n) {
        if (points[n].slice_distance == points[n - 1].slice_distance) {
            throw InvalidArgument("duplicate slice distance " + std::to_string(points[n].slice_distance));
        }
    }
    SlopeSeries s;
    s.points = std::move(points);
    for (std::size_t n = 1; n < s.points.size(); ++n) {
        const auto& a = s.points[n - 1];
        const auto& b = s.points[n];
        s.slopes.push_back({a.slice_distance, b.slice_distance,
                            slope({static_cast<double>(a.slice_distance), a.annotation_seconds},
                                  {static_cast<double>(b.slice_distance), b.annotation_seconds})});
    }
    return s;
}

/// Smallest distance whose outgoing annotation-time slope exceeds
/// `threshold`, i.e. where further skipping stops paying off. Falls back to
/// the largest distance.
[[nodiscard]] inline std::size_t select_distance(const SlopeSeries& series, double threshold = -1.0) {
    if (series.points.size() < 2) {
        throw InvalidArgument("select_distance needs at least two sweep points");
    }
    for (const auto& seg : series.slopes) {
        if (seg.slope > threshold) return seg.from_distance;
    }
    return series.points.back().slice_distance;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Segments the exam once per slice distance and scores each run against
/// `ground_truth`.
[[nodiscard]] inline SlopeSeries run_sweep(const Volume& vol, const AnnotationSession& session,
                                           const Mask& ground_truth,
                                           const std::vector<std::size_t>& distances,
                                           const EngineConfig& cfg = {},
                                           std::size_t crop_margin = kDefaultCropMargin) {
    require_same_dims(vol.dims(), ground_truth.dims(), "run_sweep");
    const LabelField seeds = rasterize(session, vol.dims());
    const auto annotated = annotated_slices(seeds);
    if (annotated.size() < 2) throw SeedError("a sweep needs at least two annotated slices");

    std::vector<SweepPoint> points;
    points.reserve(distances.size());
    for (std::size_t d : distances) {
        PipelineOptions opts{cfg, d, crop_margin};
        const auto run = segment_seeds(vol, seeds, opts);
        const Mask seg = mask(run.result);
        SweepPoint p;
        p.slice_distance = d;
        p.kept_slices = run.kept_slices.size();
        p.annotation_seconds = annotation_time(session, run.kept_slices);
        p.runtime_seconds = run.result.elapsed_seconds;
        p.dsc = dice(seg, ground_truth);
        p.jac = jaccard(seg, ground_truth);
        p.iterations = run.result.iterations_run;
        points.push_back(p);
    }
    return make_series(std::move(points));
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.empty()) throw IoError("empty output path");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation; 0 for fewer than two values.
inline double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

} // namespace detail

/// Report CSV: one row per (id, algorithm) sorted by id then algorithm,
/// followed by a mean and a stddev row per algorithm.
[[nodiscard]] inline std::string format_report(std::vector<MetricReport> rows) {
    if (rows.empty()) throw InvalidArgument("report needs at least one row");
    std::stable_sort(rows.begin(), rows.end(), [](const MetricReport& a, const MetricReport& b) {
        return std::tie(a.id, a.algorithm) < std::tie(b.id, b.algorithm);
    });
    std::ostringstream out;
    out << "id,algorithm,dsc,jac,hd,runtime_s,annotation_s\n";
    auto line = [&out](const std::string& id, const std::string& alg, double dsc, double jac,
                       double hd, double rt, double ann) {
        out << id << ',' << alg << ',' << detail::fmt_real(dsc) << ',' << detail::fmt_real(jac) << ','
            << detail::fmt_real(hd) << ',' << detail::fmt_real(rt) << ',' << detail::fmt_real(ann)
            << '\n';
    };
    std::map<std::string, std::vector<const MetricReport*>> by_algorithm;
    for (const auto& r : rows) {
        line(r.id, r.algorithm, r.dsc, r.jac, r.hd, r.elapsed_segmentation, r.annotation_seconds);
        by_algorithm[r.algorithm].push_back(&r);
    }
    for (const auto& [alg, group] : by_algorithm) {
        std::vector<std::vector<double>> cols(5);
        for (const auto* r : group) {
            cols[0].push_back(r->dsc);
            cols[1].push_back(r->jac);
            cols[2].push_back(r->hd);
            cols[3].push_back(r->elapsed_segmentation);
            cols[4].push_back(r->annotation_seconds);
        }
        line("mean", alg, detail::mean(cols[0]), detail::mean(cols[1]), detail::mean(cols[2]),
             detail::mean(cols[3]), detail::mean(cols[4]));
        line("stddev", alg, detail::stddev(cols[0]), detail::stddev(cols[1]), detail::stddev(cols[2]),
             detail::stddev(cols[3]), detail::stddev(cols[4]));
    }
    return out.str();
}

inline void emit_report(const std::vector<MetricReport>& rows, const std::filesystem::path& path) {
    detail::write_text(path, format_report(rows));
}

/// Sweep CSV: one row per (algorithm, slice distance).
[[nodiscard]] inline std::string format_sweep(
    const std::vector<std::pair<std::string, SlopeSeries>>& runs) {
    std::ostringstream out;
    out << "algorithm,slice_distance,kept_slices,annotation_s,runtime_s,iterations,dsc,jac\n";
    for (const auto& [alg, series] : runs) {
        for (const auto& p : series.points) {
            out << alg << ',' << p.slice_distance << ',' << p.kept_slices << ','
                << detail::fmt_real(p.annotation_seconds) << ',' << detail::fmt_real(p.runtime_seconds)
                << ',' << p.iterations << ',' << detail::fmt_real(p.dsc) << ','
                << detail::fmt_real(p.jac) << '\n';
        }
    }
    return out.str();
}

} // namespace vertegrow
