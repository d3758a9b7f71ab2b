// vertegrow: batch front end for the segmentation engine.
//
//   vertegrow segment VOLUME (--seeds LABELS | --session JSON) [--out MASK]
//   vertegrow sweep VOLUME --session JSON --gt MASK [--distances 0..7] [--out CSV]
//   vertegrow metrics MASK_A MASK_B
//   vertegrow phantom --out PREFIX [--spec JSON]
//   vertegrow serve --exams DIR [--port N]
//
// Machine-readable results go to stdout as JSON, diagnostics to stderr.
// Exit codes: 0 ok, 2 usage, 3 data error, 4 internal error.

#include "vertegrow/engine.hpp"
#include "vertegrow/error.hpp"
#include "vertegrow/experiment.hpp"
#include "vertegrow/io.hpp"
#include "vertegrow/metrics.hpp"
#include "vertegrow/phantom.hpp"
#include "vertegrow/pipeline.hpp"
#include "vertegrow/seeds.hpp"
#include "vertegrow/service.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
namespace vg = vertegrow;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string algorithm = "bgrowth3d";
    int max_iters = 50;
    std::size_t margin = vg::kDefaultCropMargin;
    std::string format;
};

vg::EngineConfig engine_config(const CommonOptions& o) {
    vg::EngineConfig cfg;
    cfg.algorithm = vg::parse_algorithm(o.algorithm);
    cfg.max_iterations = o.max_iters;
    cfg.validate();
    return cfg;
}

vg::FileFormat output_format(const CommonOptions& o, const fs::path& out) {
    if (!o.format.empty()) return vg::parse_format(o.format);
    return out.extension() == ".raw" ? vg::FileFormat::raw_sidecar : vg::FileFormat::metaimage;
}

fs::path with_format_extension(fs::path p, vg::FileFormat f) {
    p.replace_extension(f == vg::FileFormat::raw_sidecar ? ".raw" : ".mhd");
    return p;
}

/// Parses "a..b" (inclusive) or a comma separated list.
std::vector<std::size_t> parse_distances(const std::string& s) {
    std::vector<std::size_t> out;
    auto num = [&s](const std::string& t) -> std::size_t {
        std::size_t pos = 0;
        long long v = -1;
        try {
            v = std::stoll(t, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != t.size() || v < 0) throw UsageError("bad --distances value '" + s + "'");
        return static_cast<std::size_t>(v);
    };
    if (auto dots = s.find(".."); dots != std::string::npos) {
        const std::size_t a = num(s.substr(0, dots)), b = num(s.substr(dots + 2));
        if (b < a) throw UsageError("--distances range is empty: '" + s + "'");
        for (std::size_t d = a; d <= b; ++d) out.push_back(d);
        return out;
    }
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) out.push_back(num(tok));
    if (out.empty()) throw UsageError("--distances is empty");
    return out;
}

void write_json_file(const fs::path& p, const json& j) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw vg::IoError("cannot open '" + p.string() + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw vg::IoError("failed writing '" + p.string() + "'");
}

json metrics_json(const vg::Mask& seg, const vg::Mask& gt) {
    const auto r = vg::evaluate(seg, gt);
    return {{"dsc", r.dsc}, {"jac", r.jac}, {"hd", r.hd}};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct SegmentArgs {
    CommonOptions common;
    std::string volume, seeds, session, gt, out, report;
    std::optional<std::size_t> slice_distance;
};

int cmd_segment(const SegmentArgs& a) {
    if (a.seeds.empty() == a.session.empty()) throw UsageError("give exactly one of --seeds or --session");
    const auto cfg = engine_config(a.common);
    const vg::Volume vol = vg::load_volume(a.volume);

    vg::LabelField seeds;
    std::optional<vg::AnnotationSession> session;
    if (!a.seeds.empty()) {
        seeds = vg::load_labels(a.seeds);
    } else {
        session = vg::load_session(a.session);
        vg::validate_session(*session, vol.dims());
        seeds = vg::rasterize(*session, vol.dims());
    }

    vg::PipelineOptions opts{cfg, a.slice_distance, a.common.margin};
    const auto run = vg::segment_seeds(vol, seeds, opts);
    const vg::Mask seg = vg::mask(run.result);

    fs::path out = a.out;
    if (out.empty()) {
        out = fs::path(a.volume).parent_path() / (fs::path(a.volume).stem().string() + ".mask.mhd");
    }
    const auto fmt = output_format(a.common, out);
    out = with_format_extension(out, fmt);
    vg::save_mask(seg, out, fmt, vol.spacing);

    json summary = {{"algorithm", std::string(vg::algorithm_name(cfg.algorithm))},
                    {"iterations", run.result.iterations_run},
                    {"converged", run.result.converged},
                    {"elapsed_s", run.result.elapsed_seconds},
                    {"kept_slices", run.kept_slices},
                    {"voxels", vg::count(seg)}};
    if (!a.gt.empty()) {
        const vg::Mask gt = vg::load_mask(a.gt);
        summary["metrics"] = metrics_json(seg, gt);
        if (!a.report.empty()) {
            auto r = vg::evaluate(seg, gt);
            r.id = fs::path(a.volume).stem().string();
            r.algorithm = std::string(vg::algorithm_name(cfg.algorithm));
            r.elapsed_segmentation = run.result.elapsed_seconds;
            r.annotation_seconds = session ? vg::annotation_time(*session, run.kept_slices) : 0.0;
            vg::emit_report({r}, a.report);
        }
    } else if (!a.report.empty()) {
        throw UsageError("--report needs --gt");
    }
    auto summary_path = out;
    summary_path.replace_extension(".summary.json");
    write_json_file(summary_path, summary);

    std::cerr << "segmented " << a.volume << " with " << vg::algorithm_name(cfg.algorithm) << ": "
              << run.result.iterations_run << " iterations, " << vg::count(seg) << " foreground voxels -> "
              << out.string() << "\n";
    std::cout << summary.dump() << "\n";
    return kExitOk;
}

struct SweepArgs {
    CommonOptions common;
    std::string volume, session, gt, out, distances = "0..7";
    double threshold = -1.0;
};

int cmd_sweep(const SweepArgs& a) {
    const auto distances = parse_distances(a.distances);
    if (distances.size() < 2) throw UsageError("a sweep needs at least two distances");
    const vg::Volume vol = vg::load_volume(a.volume);
    const auto session = vg::load_session(a.session);
    vg::validate_session(session, vol.dims());
    const vg::Mask gt = vg::load_mask(a.gt);

    vg::EngineConfig cfg;
    cfg.max_iterations = a.common.max_iters;
    std::vector<std::pair<std::string, vg::SlopeSeries>> runs;
    for (auto alg : {vg::Algorithm::bgrowth3d, vg::Algorithm::growcut}) {
        cfg.algorithm = alg;
        cfg.validate();
        runs.emplace_back(std::string(vg::algorithm_name(alg)),
                          vg::run_sweep(vol, session, gt, distances, cfg, a.common.margin));
    }
    const std::string csv = vg::format_sweep(runs);
    if (a.out.empty()) {
        std::cerr << csv;
    } else {
        vg::detail::write_text(a.out, csv);
    }
    const std::size_t selected = vg::select_distance(runs.front().second, a.threshold);
    json slopes = json::array();
    for (const auto& s : runs.front().second.slopes) {
        slopes.push_back({{"from", s.from_distance}, {"to", s.to_distance}, {"slope", s.slope}});
    }
    std::cout << json{{"selected_distance", selected}, {"threshold", a.threshold}, {"slopes", slopes}}.dump()
              << "\n";
    return kExitOk;
}

int cmd_metrics(const std::string& a, const std::string& b) {
    const vg::Mask ma = vg::load_mask(a);
    const vg::Mask mb = vg::load_mask(b);
    std::cout << metrics_json(ma, mb).dump() << "\n";
    return kExitOk;
}

struct PhantomArgs {
    CommonOptions common;
    std::string spec, out;
    std::optional<std::uint64_t> seed;
    double noise = vg::kStandardNoiseFraction;
    std::string style = "sloppy";
};

int cmd_phantom(const PhantomArgs& a) {
    std::optional<std::uint64_t> seed = a.seed;
    if (const char* env = std::getenv("VERTEGROW_SEED"); env && *env) {
        try {
            seed = std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("VERTEGROW_SEED is not an integer: '") + env + "'");
        }
    }
    vg::PhantomSpec spec;
    if (!a.spec.empty()) {
        std::ifstream in(a.spec);
        if (!in) throw vg::IoError("cannot open phantom spec '" + a.spec + "'");
        try {
            spec = json::parse(in).get<vg::PhantomSpec>();
        } catch (const json::exception& e) {
            throw vg::FormatError("malformed phantom spec '" + a.spec + "': " + e.what());
        }
        if (seed) spec.rng_seed = *seed;
    } else {
        spec = vg::vertebra_phantom_spec(seed.value_or(1), a.noise);
    }
    vg::SeedStyle style;
    if (a.style == "sloppy") {
        style = vg::SeedStyle::sloppy_rect;
    } else if (a.style == "skeleton") {
        style = vg::SeedStyle::skeleton_line;
    } else {
        throw UsageError("unknown --seed-style '" + a.style + "'");
    }

    const auto ph = vg::generate(spec);
    const fs::path prefix = a.out;
    const auto fmt = a.common.format.empty() ? vg::FileFormat::metaimage : vg::parse_format(a.common.format);
    const std::string ext = fmt == vg::FileFormat::raw_sidecar ? ".raw" : ".mhd";
    const fs::path vol_path = prefix.string() + ext;
    const fs::path gt_path = prefix.string() + ".gt" + ext;
    const fs::path session_path = prefix.string() + ".session.json";
    vg::save_volume(ph.volume, vol_path, fmt);
    vg::save_mask(ph.ground_truth, gt_path, fmt, spec.spacing);
    vg::save_session(vg::auto_seed(ph.ground_truth, style), session_path);
    write_json_file(prefix.string() + ".spec.json", json(spec));

    std::cerr << "phantom " << vg::to_string(spec.dims) << " (" << vg::count(ph.ground_truth)
              << " foreground voxels) -> " << vol_path.string() << "\n";
    std::cout << json{{"volume", vol_path.string()},
                      {"ground_truth", gt_path.string()},
                      {"session", session_path.string()},
                      {"rng_seed", spec.rng_seed}}
                     .dump()
              << "\n";
    return kExitOk;
}

int cmd_serve(const std::string& dir, const std::string& host, int port) {
    vg::AnnotationService service{fs::path(dir)};
    httplib::Server server;
    service.bind(server);
    std::cerr << "serving " << service.exam_count() << " exams on http://" << host << ":" << port << "\n";
    if (!server.listen(host, port)) throw vg::IoError("cannot listen on " + host + ":" + std::to_string(port));
    return kExitOk;
}

void add_engine_flags(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--algorithm", o.algorithm, "bgrowth3d | bgrowth2d | growcut")
        ->check(CLI::IsMember({"bgrowth3d", "bgrowth2d", "growcut"}));
    cmd->add_option("--max-iters", o.max_iters, "sweep cap")->check(CLI::PositiveNumber);
    cmd->add_option("--margin", o.margin, "crop margin around the seeds, in voxels");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Seeded 3D segmentation with balanced growth"};
    app.require_subcommand(1);

    SegmentArgs seg;
    auto* c_seg = app.add_subcommand("segment", "segment one exam");
    c_seg->add_option("volume", seg.volume, "input volume (.mhd or .raw)")->required();
    c_seg->add_option("--seeds", seg.seeds, "seed label volume (-1 background, 1 foreground)");
    c_seg->add_option("--session", seg.session, "annotation session JSON");
    c_seg->add_option("--slice-distance", seg.slice_distance, "unannotated slices between kept ones");
    c_seg->add_option("--gt", seg.gt, "ground-truth mask; adds metrics to the summary");
    c_seg->add_option("--report", seg.report, "report CSV (needs --gt)");
    c_seg->add_option("--out", seg.out, "output mask path");
    c_seg->add_option("--format", seg.common.format)->check(CLI::IsMember({"mhd", "raw"}));
    add_engine_flags(c_seg, seg.common);

    SweepArgs sw;
    auto* c_sw = app.add_subcommand("sweep", "segment at several slice distances with both algorithms");
    c_sw->add_option("volume", sw.volume)->required();
    c_sw->add_option("--session", sw.session)->required();
    c_sw->add_option("--gt", sw.gt)->required();
    c_sw->add_option("--distances", sw.distances, "a..b or a,b,c");
    c_sw->add_option("--threshold", sw.threshold, "slope threshold for distance selection");
    c_sw->add_option("--out", sw.out, "CSV path (stderr when omitted)");
    c_sw->add_option("--max-iters", sw.common.max_iters)->check(CLI::PositiveNumber);
    c_sw->add_option("--margin", sw.common.margin);

    std::string mask_a, mask_b;
    auto* c_met = app.add_subcommand("metrics", "compare two masks");
    c_met->add_option("mask_a", mask_a)->required();
    c_met->add_option("mask_b", mask_b)->required();

    PhantomArgs ph;
    auto* c_ph = app.add_subcommand("phantom", "write a synthetic exam with ground truth and seeds");
    c_ph->add_option("--out", ph.out, "output prefix")->required();
    c_ph->add_option("--spec", ph.spec, "phantom spec JSON (default: randomized vertebra stack)");
    c_ph->add_option("--seed", ph.seed, "rng seed (VERTEGROW_SEED overrides)");
    c_ph->add_option("--noise", ph.noise, "noise sigma as a fraction of contrast (randomized stack only)");
    c_ph->add_option("--seed-style", ph.style)->check(CLI::IsMember({"sloppy", "skeleton"}));
    c_ph->add_option("--format", ph.common.format)->check(CLI::IsMember({"mhd", "raw"}));

    std::string exams_dir, host = "127.0.0.1";
    int port = 8080;
    auto* c_srv = app.add_subcommand("serve", "HTTP API for the annotation UI");
    c_srv->add_option("--exams", exams_dir, "directory of exams")->required();
    c_srv->add_option("--host", host);
    c_srv->add_option("--port", port)->check(CLI::Range(1, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*c_seg) return cmd_segment(seg);
        if (*c_sw) return cmd_sweep(sw);
        if (*c_met) return cmd_metrics(mask_a, mask_b);
        if (*c_ph) return cmd_phantom(ph);
        if (*c_srv) return cmd_serve(exams_dir, host, port);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const vg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
