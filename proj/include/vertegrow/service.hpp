#pragma once

// HTTP API behind the annotation UI. Handlers are plain member functions
// returning an HttpReply so they can be exercised without a socket; bind()
// wires them into a cpp-httplib server. Endpoints are documented in
// docs/api.md.

#include "vertegrow/engine.hpp"
#include "vertegrow/error.hpp"
#include "vertegrow/io.hpp"
#include "vertegrow/metrics.hpp"
#include "vertegrow/pipeline.hpp"
#include "vertegrow/png.hpp"
#include "vertegrow/rle.hpp"
#include "vertegrow/seeds.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace vertegrow {

struct HttpReply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::map<std::string, std::string> headers;

    static HttpReply json(int status, const nlohmann::json& j) { return {status, j.dump(), "application/json", {}}; }
    static HttpReply error(int status, const std::string& message) {
        return json(status, {{"error", message}});
    }
};

struct ExamHandle {
    std::string exam_id;
    Volume volume;
    std::optional<Mask> ground_truth;
    AnnotationSession session;
    std::optional<SegmentationResult> last_result;
    /// Where the session is persisted after every mutation (empty: in memory only).
    std::filesystem::path session_path;

    // Undo data for strokes posted through the API: elapsed seconds and the
    // slice's timing entry before the post.
    struct StrokeUndo {
        double elapsed_seconds = 0.0;
        std::optional<double> previous_time;
    };
    std::vector<StrokeUndo> undo;
    bool segmenting = false;
    int results_issued = 0;
    std::mutex mutex;
};

class AnnotationService {
public:
    AnnotationService() = default;

    /// Loads every `<id>.mhd` in `dir` (skipping `*.gt.mhd` and `*.mask.mhd`),
    /// with optional `<id>.gt.mhd` ground truth and `<id>.session.json`.
    explicit AnnotationService(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) throw IoError("exam directory '" + dir.string() + "' not found");
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& p : files) {
            const std::string name = p.filename().string();
            if (p.extension() != ".mhd" || name.ends_with(".gt.mhd") || name.ends_with(".mask.mhd")) continue;
            const std::string id = p.stem().string();
            std::optional<Mask> gt;
            const auto gt_path = dir / (id + ".gt.mhd");
            if (std::filesystem::exists(gt_path)) gt = load_mask(gt_path);
            add_exam(id, load_volume(p), std::move(gt), dir / (id + ".session.json"));
        }
    }

    void add_exam(const std::string& id, Volume volume, std::optional<Mask> gt = std::nullopt,
                  std::filesystem::path session_path = {}) {
        if (exams_.contains(id)) throw InvalidArgument("duplicate exam id '" + id + "'");
        if (gt) require_same_dims(volume.dims(), gt->dims(), "ground truth");
        auto h = std::make_unique<ExamHandle>();
        h->exam_id = id;
        h->volume = std::move(volume);
        h->ground_truth = std::move(gt);
        h->session_path = std::move(session_path);
        h->session.exam_id = id;
        if (!h->session_path.empty() && std::filesystem::exists(h->session_path)) {
            h->session = load_session(h->session_path);
            h->session.exam_id = id;
            validate_session(h->session, h->volume.dims());
        }
        exams_.emplace(id, std::move(h));
    }

    [[nodiscard]] std::size_t exam_count() const noexcept { return exams_.size(); }

    /// Snapshot of an exam's session (for tests and export).
    [[nodiscard]] AnnotationSession session(const std::string& id) {
        auto* h = find(id);
        if (!h) throw InvalidArgument("unknown exam '" + id + "'");
        std::lock_guard lock(h->mutex);
        return h->session;
    }

    // -----------------------------------------------------------------------
    // Handlers
    // -----------------------------------------------------------------------

    HttpReply list_exams() {
        nlohmann::json out = nlohmann::json::array();
        for (auto& [id, h] : exams_) out.push_back(describe(*h));
        return HttpReply::json(200, out);
    }

    HttpReply get_exam(const std::string& id) {
        auto* h = find(id);
        if (!h) return HttpReply::error(404, "unknown exam '" + id + "'");
        return HttpReply::json(200, describe(*h));
    }

    /// 8-bit grayscale PNG of slice z, scaled by the volume's min/max.
    HttpReply get_slice(const std::string& id, long long z) {
        auto* h = find(id);
        if (!h) return HttpReply::error(404, "unknown exam '" + id + "'");
        const Dims& d = h->volume.dims();
        if (z < 0 || static_cast<std::size_t>(z) >= d.slices) return HttpReply::error(404, "slice out of range");
        const double lo = h->volume.min_intensity(), hi = h->volume.max_intensity();
        const auto src = h->volume.intensities.slice(static_cast<std::size_t>(z));
        std::vector<std::uint8_t> px(src.size(), 0);
        if (hi > lo) {
            for (std::size_t n = 0; n < src.size(); ++n) {
                px[n] = static_cast<std::uint8_t>(std::lround(255.0 * (src[n] - lo) / (hi - lo)));
            }
        }
        HttpReply r{200, encode_png_gray8(px, d.cols, d.rows), "image/png", {}};
        r.headers["X-Intensity-Min"] = std::to_string(lo);
        r.headers["X-Intensity-Max"] = std::to_string(hi);
        r.headers["X-Slice"] = std::to_string(z);
        return r;
    }

    HttpReply get_session(const std::string& id) {
        auto* h = find(id);
        if (!h) return HttpReply::error(404, "unknown exam '" + id + "'");
        std::lock_guard lock(h->mutex);
        return HttpReply::json(200, nlohmann::json(h->session));
    }

    /// Body: Stroke fields plus `elapsed_ms`.
    HttpReply post_stroke(const std::string& id, const std::string& body) {
        auto* h = find(id);
        if (!h) return HttpReply::error(404, "unknown exam '" + id + "'");
        Stroke stroke;
        double elapsed_ms = 0.0;
        try {
            const auto j = nlohmann::json::parse(body);
            stroke = j.get<Stroke>();
            elapsed_ms = j.value("elapsed_ms", 0.0);
        } catch (const nlohmann::json::exception& e) {
            return HttpReply::error(400, std::string("malformed stroke: ") + e.what());
        } catch (const Error& e) {
            return HttpReply::error(422, e.what());
        }
        if (!(elapsed_ms >= 0.0) || !std::isfinite(elapsed_ms)) {
            return HttpReply::error(422, "elapsed_ms must be a finite value >= 0");
        }
        try {
            validate_stroke(stroke, h->volume.dims());
        } catch (const Error& e) {
            return HttpReply::error(422, e.what());
        }

        std::lock_guard lock(h->mutex);
        if (h->segmenting) return HttpReply::error(409, "busy: segmentation in progress");
        ExamHandle::StrokeUndo undo;
        undo.elapsed_seconds = elapsed_ms / 1000.0;
        if (auto it = h->session.per_slice_time.find(stroke.slice_z); it != h->session.per_slice_time.end()) {
            undo.previous_time = it->second;
        }
        h->session.per_slice_time[stroke.slice_z] += undo.elapsed_seconds;
        h->session.strokes.push_back(std::move(stroke));
        h->undo.push_back(undo);
        persist(*h);
        return HttpReply::json(200, session_state(*h));
    }

    HttpReply delete_last_stroke(const std::string& id) {
        auto* h = find(id);
        if (!h) return HttpReply::error(404, "unknown exam '" + id + "'");
        std::lock_guard lock(h->mutex);
        if (h->segmenting) return HttpReply::error(409, "busy: segmentation in progress");
        if (h->session.strokes.empty()) return HttpReply::error(404, "no strokes to remove");
        const std::size_t z = h->session.strokes.back().slice_z;
        h->session.strokes.pop_back();
        if (!h->undo.empty()) {
            const auto undo = h->undo.back();
            h->undo.pop_back();
            if (undo.previous_time) {
                h->session.per_slice_time[z] = *undo.previous_time;
            } else {
                h->session.per_slice_time.erase(z);
            }
        }
        persist(*h);
        return HttpReply::json(200, session_state(*h));
    }

    /// Body: {algorithm, max_iters, slice_distance}; all optional.
    HttpReply segment(const std::string& id, const std::string& body) {
        auto* h = find(id);
        if (!h) return HttpReply::error(404, "unknown exam '" + id + "'");
        PipelineOptions opts;
        try {
            const auto j = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
            opts.engine.algorithm = parse_algorithm(j.value("algorithm", std::string("bgrowth3d")));
            opts.engine.max_iterations = j.value("max_iters", 50);
            if (j.contains("neighborhood")) opts.engine.neighborhood = j.at("neighborhood").get<int>();
            if (j.contains("slice_distance") && !j.at("slice_distance").is_null()) {
                const auto d = j.at("slice_distance").get<long long>();
                if (d < 0) return HttpReply::error(422, "slice_distance must be >= 0");
                opts.slice_distance = static_cast<std::size_t>(d);
            }
            opts.engine.validate();
        } catch (const nlohmann::json::exception& e) {
            return HttpReply::error(422, std::string("bad parameters: ") + e.what());
        } catch (const Error& e) {
            return HttpReply::error(422, e.what());
        }

        AnnotationSession snapshot;
        {
            std::lock_guard lock(h->mutex);
            if (h->segmenting) return HttpReply::error(409, "busy: segmentation in progress");
            h->segmenting = true;
            snapshot = h->session;
        }
        struct Release {
            ExamHandle* h;
            ~Release() {
                std::lock_guard lock(h->mutex);
                h->segmenting = false;
            }
        } release{h};

        PipelineResult run;
        try {
            run = segment_session(h->volume, snapshot, opts);
        } catch (const SeedError& e) {
            return HttpReply::error(409, e.what());
        } catch (const Error& e) {
            return HttpReply::error(422, e.what());
        }

        nlohmann::json out;
        out["iterations"] = run.result.iterations_run;
        out["converged"] = run.result.converged;
        out["elapsed_s"] = run.result.elapsed_seconds;
        out["kept_slices"] = run.kept_slices;
        if (h->ground_truth) {
            const Mask seg = mask(run.result);
            nlohmann::json m = {{"dsc", dice(seg, *h->ground_truth)}, {"jac", jaccard(seg, *h->ground_truth)}};
            m["hd"] = count(seg) > 0 && count(*h->ground_truth) > 0 ? nlohmann::json(hausdorff(seg, *h->ground_truth))
                                                                    : nlohmann::json(nullptr);
            out["metrics"] = m;
        }
        std::lock_guard lock(h->mutex);
        out["result_id"] = id + "-" + std::to_string(++h->results_issued);
        h->last_result = std::move(run.result);
        return HttpReply::json(200, out);
    }

    /// Foreground overlay of the latest result on slice z, run-length encoded.
    HttpReply get_mask(const std::string& id, long long z) {
        auto* h = find(id);
        if (!h) return HttpReply::error(404, "unknown exam '" + id + "'");
        std::lock_guard lock(h->mutex);
        if (!h->last_result) return HttpReply::error(404, "no segmentation result yet");
        const Dims& d = h->volume.dims();
        if (z < 0 || static_cast<std::size_t>(z) >= d.slices) return HttpReply::error(404, "slice out of range");
        const auto runs = encode_slice(mask(*h->last_result), static_cast<std::size_t>(z));
        nlohmann::json jr = nlohmann::json::array();
        for (const auto& [start, len] : runs) jr.push_back({start, len});
        return HttpReply::json(200, {{"z", z}, {"rows", d.rows}, {"cols", d.cols}, {"label", kForeground}, {"runs", jr}});
    }

    // -----------------------------------------------------------------------
    // Routing
    // -----------------------------------------------------------------------

    void bind(httplib::Server& server) {
        auto send = [](httplib::Response& res, const HttpReply& r) {
            res.status = r.status;
            for (const auto& [k, v] : r.headers) res.set_header(k, v);
            res.set_content(r.body, r.content_type);
        };
        auto z_of = [](const std::string& s) -> long long {
            try {
                std::size_t pos = 0;
                const long long v = std::stoll(s, &pos);
                return pos == s.size() ? v : -1;
            } catch (const std::exception&) {
                return -1;
            }
        };
        server.Get("/exams", [this, send](const httplib::Request&, httplib::Response& res) { send(res, list_exams()); });
        server.Get(R"(/exams/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_exam(req.matches[1]));
        });
        server.Get(R"(/exams/([^/]+)/slice/([^/]+))", [this, send, z_of](const httplib::Request& req, httplib::Response& res) {
            send(res, get_slice(req.matches[1], z_of(req.matches[2])));
        });
        server.Get(R"(/exams/([^/]+)/session)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_session(req.matches[1]));
        });
        server.Post(R"(/exams/([^/]+)/strokes)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, post_stroke(req.matches[1], req.body));
        });
        server.Delete(R"(/exams/([^/]+)/strokes/last)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, delete_last_stroke(req.matches[1]));
        });
        server.Post(R"(/exams/([^/]+)/segment)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, segment(req.matches[1], req.body));
        });
        server.Get(R"(/exams/([^/]+)/mask/([^/]+))", [this, send, z_of](const httplib::Request& req, httplib::Response& res) {
            send(res, get_mask(req.matches[1], z_of(req.matches[2])));
        });
    }

private:
    ExamHandle* find(const std::string& id) {
        auto it = exams_.find(id);
        return it == exams_.end() ? nullptr : it->second.get();
    }

    static nlohmann::json describe(ExamHandle& h) {
        const Dims& d = h.volume.dims();
        std::lock_guard lock(h.mutex);
        return {{"id", h.exam_id},
                {"dims", {d.rows, d.cols, d.slices}},
                {"spacing", {h.volume.spacing.dx, h.volume.spacing.dy, h.volume.spacing.dz}},
                {"intensity_min", h.volume.min_intensity()},
                {"intensity_max", h.volume.max_intensity()},
                {"has_ground_truth", h.ground_truth.has_value()},
                {"stroke_count", h.session.strokes.size()}};
    }

    static nlohmann::json session_state(const ExamHandle& h) {
        std::map<std::size_t, std::size_t> per_slice;
        for (const auto& s : h.session.strokes) ++per_slice[s.slice_z];
        nlohmann::json counts = nlohmann::json::object();
        for (const auto& [z, n] : per_slice) counts[std::to_string(z)] = n;
        nlohmann::json times = nlohmann::json::object();
        for (const auto& [z, t] : h.session.per_slice_time) times[std::to_string(z)] = t;
        return {{"stroke_count", h.session.strokes.size()}, {"strokes_per_slice", counts}, {"per_slice_time", times}};
    }

    static void persist(const ExamHandle& h) {
        if (!h.session_path.empty()) save_session(h.session, h.session_path);
    }

    std::map<std::string, std::unique_ptr<ExamHandle>> exams_;
};

} // namespace vertegrow
