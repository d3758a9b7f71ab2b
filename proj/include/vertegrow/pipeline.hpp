#pragma once

// The annotate -> segment path shared by the CLI, the HTTP service and the
// experiment harness: subsample annotated slices, crop to the seeds, grow,
// and map the result back onto the full exam.

#include "vertegrow/engine.hpp"
#include "vertegrow/seeds.hpp"
#include "vertegrow/volume.hpp"

#include <optional>
#include <vector>

namespace vertegrow {

struct PipelineOptions {
    EngineConfig engine;
    /// Unannotated slices left between kept slices; nullopt keeps all.
    std::optional<std::size_t> slice_distance;
    std::size_t crop_margin = kDefaultCropMargin;
};

struct PipelineResult {
    /// Labels and weights in full exam coordinates (0 outside the crop).
    SegmentationResult result;
    CropRegion region;
    std::vector<std::size_t> kept_slices;
};

[[nodiscard]] inline PipelineResult segment_seeds(const Volume& vol, const LabelField& seeds,
                                                  const PipelineOptions& opts = {}) {
    require_same_dims(vol.dims(), seeds.dims(), "segment_seeds");
    const LabelField kept = opts.slice_distance ? subsample_slices(seeds, *opts.slice_distance) : seeds;
    require_both_polarities(kept);

    auto crop = crop_to_seeds(vol, kept, opts.crop_margin);
    SegmentationResult sub = segment(crop.volume, crop.labels, opts.engine);

    PipelineResult out;
    out.region = crop.region;
    out.kept_slices = annotated_slices(kept);
    out.result.labels = paste(sub.labels, crop.region, vol.dims(), kUnlabeled);
    out.result.weights = paste(sub.weights, crop.region, vol.dims(), 0.0);
    out.result.iterations_run = sub.iterations_run;
    out.result.converged = sub.converged;
    out.result.elapsed_seconds = sub.elapsed_seconds;
    return out;
}

[[nodiscard]] inline PipelineResult segment_session(const Volume& vol, const AnnotationSession& session,
                                                    const PipelineOptions& opts = {}) {
    return segment_seeds(vol, rasterize(session, vol.dims()), opts);
}

} // namespace vertegrow
