// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds are fixed here, not tuned per run.

#include "oracle/brute_force.hpp"
#include "support.hpp"

#include "vertegrow/engine.hpp"
#include "vertegrow/experiment.hpp"
#include "vertegrow/io.hpp"
#include "vertegrow/metrics.hpp"
#include "vertegrow/phantom.hpp"
#include "vertegrow/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace vertegrow;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

// Runs `body`, turning an escaped exception into a FAIL line.
void criterion(const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
    std::ostringstream detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail << " exception: " << e.what();
    }
    report(name, ok, detail.str());
}

template <class T>
std::vector<T> as_vector(const Grid<T>& g) {
    return {g.values().begin(), g.values().end()};
}

Mask random_mask(std::mt19937_64& rng, const Dims& d, double p) {
    Mask m(d, 0);
    std::bernoulli_distribution on(p);
    for (auto& v : m.values()) v = on(rng) ? 1 : 0;
    return m;
}

Mask nonempty_mask(std::mt19937_64& rng, const Dims& d, double p) {
    Mask m = random_mask(rng, d, p);
    if (count(m) == 0) m[std::uniform_int_distribution<std::size_t>(0, d.size() - 1)(rng)] = 1;
    return m;
}

struct Case {
    Volume vol;
    LabelField seeds;
};

Case random_case(std::mt19937_64& rng, std::size_t r, std::size_t c, std::size_t z) {
    Dims d;
    do {
        d = testing_support::random_dims(rng, r, c, z);
    } while (d.size() < 2);
    std::uniform_int_distribution<int> levels(2, 256);
    std::uniform_real_distribution<double> density(0.02, 0.4);
    return {testing_support::random_volume(rng, d, levels(rng)), testing_support::random_seeds(rng, d, density(rng))};
}

PipelineOptions with_algorithm(Algorithm a) {
    PipelineOptions o;
    o.engine.algorithm = a;
    return o;
}

constexpr int kSuite = 20;

} // namespace

int main() {
    std::cout.setf(std::ios::fixed);
    std::cout.precision(4);

    criterion("oracle-equivalence", [](std::ostringstream& out) {
        std::mt19937_64 rng(2024);
        int matched = 0, total = 0;
        for (int t = 0; t < 50; ++t) {
            const auto c = random_case(rng, 6, 6, 4);
            for (bool balanced : {true, false}) {
                ++total;
                const auto r = segment(c.vol, c.seeds, {balanced ? Algorithm::bgrowth3d : Algorithm::growcut, 50, 0});
                const auto o = oracle::grow(c.vol.dims(), as_vector(c.vol.intensities), as_vector(c.seeds), balanced,
                                            false, false, 50);
                if (as_vector(r.labels) == o.labels && as_vector(r.weights) == o.weights &&
                    r.iterations_run == o.iterations && r.converged == o.converged)
                    ++matched;
            }
        }
        out << matched << "/" << total << " runs identical to the brute-force automaton (labels, weights, iterations)";
        return matched == total;
    });

    criterion("engine-invariants", [](std::ostringstream& out) {
        std::mt19937_64 rng(77);
        const Algorithm algs[] = {Algorithm::bgrowth3d, Algorithm::bgrowth2d, Algorithm::growcut};
        int cases = 0, connectivity_checked = 0;
        int bad_range = 0, bad_monotone = 0, bad_seed = 0, bad_connect = 0, bad_determinism = 0;
        for (; cases < 1000; ++cases) {
            const auto c = random_case(rng, 7, 7, 4);
            for (auto alg : algs) {
                const auto r = segment(c.vol, c.seeds, {alg, 50, 0});
                const auto again = segment(c.vol, c.seeds, {alg, 50, 0});
                if (r.labels != again.labels || r.weights != again.weights || r.iterations_run != again.iterations_run)
                    ++bad_determinism;
                for (double w : r.weights.values())
                    if (!(w >= 0.0 && w <= 1.0)) ++bad_range;
                for (std::size_t n = 0; n < c.seeds.size(); ++n)
                    if (c.seeds[n] != kUnlabeled && (r.labels[n] != c.seeds[n] || r.weights[n] != 1.0)) ++bad_seed;
                if (r.converged) {
                    ++connectivity_checked;
                    if (!oracle::labels_connected_to_seeds(c.vol.dims(), as_vector(r.labels), as_vector(c.seeds),
                                                           alg == Algorithm::bgrowth2d, false))
                        ++bad_connect;
                }
            }
            LabelField l = c.seeds;
            WeightField w = initial_weights(c.seeds);
            for (int s = 0; s < 12; ++s) {
                const WeightField before = w;
                const auto changed = sweep_bgrowth(c.vol, l, w);
                for (std::size_t n = 0; n < w.size(); ++n)
                    if (w[n] < before[n]) ++bad_monotone;
                if (changed == 0) break;
            }
        }
        out << cases << " cases x 3 algorithms; violations: range " << bad_range << ", monotonicity " << bad_monotone
            << ", seed immutability " << bad_seed << ", connectivity " << bad_connect << " (of "
            << connectivity_checked << " converged runs), determinism " << bad_determinism;
        return bad_range + bad_monotone + bad_seed + bad_connect + bad_determinism == 0 && cases >= 1000;
    });

    criterion("metric-identities", [](std::ostringstream& out) {
        std::mt19937_64 rng(99);
        double worst = 0.0;
        for (int t = 0; t < 1000; ++t) {
            const Dims d = testing_support::random_dims(rng, 8, 8, 4);
            std::uniform_real_distribution<double> p(0.0, 1.0);
            const Mask a = random_mask(rng, d, p(rng)), b = random_mask(rng, d, p(rng));
            const double j = jaccard(a, b);
            worst = std::max(worst, std::abs(dice(a, b) - 2 * j / (1 + j)));
        }
        int hd_mismatch = 0, self_nonzero = 0;
        for (int t = 0; t < 1000; ++t) {
            const Dims d = testing_support::random_dims(rng, 8, 8, 3);
            std::uniform_real_distribution<double> p(0.02, 0.6);
            const Mask a = nonempty_mask(rng, d, p(rng)), b = nonempty_mask(rng, d, p(rng));
            if (hausdorff(a, b) != oracle::hausdorff(a, b)) ++hd_mismatch;
            if (hausdorff(a, a) != 0.0) ++self_nonzero;
        }
        out << "max |dsc - 2jac/(1+jac)| = " << std::scientific << worst << std::fixed
            << " over 1000 pairs; hd mismatches vs brute force " << hd_mismatch << "/1000; hd(a,a) != 0 "
            << self_nonzero << "/1000";
        return worst <= 1e-12 && hd_mismatch == 0 && self_nonzero == 0;
    });

    criterion("zero-noise-phantom", [](std::ostringstream& out) {
        double min_dsc = 1.0;
        int max_iters = 0;
        for (std::uint64_t seed = 1; seed <= kSuite; ++seed) {
            const auto p = generate(vertebra_phantom_spec(seed, 0.0));
            const auto run = segment_session(p.volume, auto_seed(p.ground_truth), with_algorithm(Algorithm::bgrowth3d));
            min_dsc = std::min(min_dsc, dice(mask(run.result), p.ground_truth));
            max_iters = std::max(max_iters, run.result.iterations_run);
        }
        out << kSuite << " phantoms, sloppy seeds: min DSC " << min_dsc << " (need >= 0.99), max iterations "
            << max_iters << " (need <= 50)";
        return min_dsc >= 0.99 && max_iters <= 50;
    });

    criterion("bgrowth-beats-growcut-on-noisy-phantoms", [](std::ostringstream& out) {
        double sum_bg = 0.0, sum_gc = 0.0;
        int wins = 0, ties = 0;
        for (std::uint64_t seed = 1; seed <= kSuite; ++seed) {
            const auto p = generate(vertebra_phantom_spec(seed, kStandardNoiseFraction));
            const auto session = auto_seed(p.ground_truth);
            const double bg = dice(mask(segment_session(p.volume, session, with_algorithm(Algorithm::bgrowth3d)).result),
                                   p.ground_truth);
            const double gc = dice(mask(segment_session(p.volume, session, with_algorithm(Algorithm::growcut)).result),
                                   p.ground_truth);
            sum_bg += bg;
            sum_gc += gc;
            wins += bg > gc;
            ties += bg == gc;
        }
        const double mean_bg = sum_bg / kSuite, mean_gc = sum_gc / kSuite;
        const double win_rate = static_cast<double>(wins) / kSuite;
        out << std::setprecision(6) << "mean DSC bgrowth3d " << mean_bg << " vs growcut " << mean_gc
            << "; strict wins " << wins << "/" << kSuite << " (" << std::setprecision(2) << 100 * win_rate
            << "%, need >= 70%), ties " << ties;
        return mean_bg > mean_gc && win_rate >= 0.70;
    });

    criterion("sparse-annotation", [](std::ostringstream& out) {
        const std::vector<std::size_t> distances{0, 1, 2, 3, 4, 5, 6, 7};
        double min_dsc_ratio = 1e9, max_time_ratio = 0.0;
        std::size_t min_sel = 99, max_sel = 0;
        for (std::uint64_t seed = 1; seed <= kSuite; ++seed) {
            const auto p = generate(vertebra_phantom_spec(seed, kStandardNoiseFraction));
            const auto s = run_sweep(p.volume, auto_seed(p.ground_truth), p.ground_truth, distances);
            min_dsc_ratio = std::min(min_dsc_ratio, s.points[3].dsc / s.points[0].dsc);
            max_time_ratio = std::max(max_time_ratio, s.points[3].annotation_seconds / s.points[0].annotation_seconds);
            const auto sel = select_distance(s, -1.0);
            min_sel = std::min(min_sel, sel);
            max_sel = std::max(max_sel, sel);
        }
        out << kSuite << " noisy phantoms: min DSC(3)/DSC(0) " << min_dsc_ratio << " (need >= 0.90), max time(3)/time(0) "
            << max_time_ratio << " (need <= 0.5), selected distance in [" << min_sel << ", " << max_sel
            << "] (need within [1, 7])";
        return min_dsc_ratio >= 0.90 && max_time_ratio <= 0.5 && min_sel >= 1 && max_sel <= 7;
    });

    criterion("performance-anchor", [](std::ostringstream& out) {
        // One large body with 7 content slices in a 124 x 124 x 9 exam, at
        // the standard noise level. The noiseless exam is reported alongside.
        auto exam = [](double noise_fraction) {
            PhantomSpec spec;
            StackedVertebrae v;
            v.count = 1;
            v.first_row = 12;
            v.height = 100;
            v.center_j = 62;
            v.radius_j = 48;
            v.center_z = 4;
            v.radius_z = 3.5;
            spec.dims = {124, 124, 9};
            spec.body = v;
            spec.noise_sigma = noise_fraction * (spec.fg_intensity - spec.bg_intensity);
            spec.rng_seed = 11;
            return generate(spec);
        };
        struct Timed {
            PipelineResult run;
            double seconds;
            double dsc;
        };
        auto timed = [](const Phantom& p, Algorithm a) {
            const auto session = auto_seed(p.ground_truth);
            const auto t0 = std::chrono::steady_clock::now();
            auto run = segment_session(p.volume, session, with_algorithm(a));
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const double d = dice(mask(run.result), p.ground_truth);
            return Timed{std::move(run), s, d};
        };
        const auto noisy = exam(kStandardNoiseFraction);
        const auto bg = timed(noisy, Algorithm::bgrowth3d);
        const auto gc = timed(noisy, Algorithm::growcut);
        const auto clean = exam(0.0);
        const auto bg0 = timed(clean, Algorithm::bgrowth3d);
        const auto gc0 = timed(clean, Algorithm::growcut);

        const auto r = bg.run.region.dims();
        const double ratio = bg.seconds / gc.seconds;
        const bool fast = bg.seconds < 2.0;
        const bool converged = bg.run.result.converged && bg.run.result.iterations_run < 50;
        const bool comparable = ratio <= 1.5;
        out << "crop " << r.rows << "x" << r.cols << "x" << r.slices << ", bgrowth3d " << bg.seconds
            << " s (need < 2), " << bg.run.result.iterations_run << " iterations, converged "
            << (bg.run.result.converged ? "yes" : "no") << " (need converged in < 50); growcut " << gc.seconds << " s, "
            << gc.run.result.iterations_run << " iterations; ratio " << ratio << " (need <= 1.5); DSC bg " << bg.dsc
            << " gc " << gc.dsc << " | noiseless reference: bgrowth3d " << bg0.seconds << " s, "
            << bg0.run.result.iterations_run << " iterations, growcut " << gc0.seconds << " s, ratio "
            << bg0.seconds / gc0.seconds;
        return fast && converged && comparable;
    });

    criterion("annotated-fraction", [](std::ostringstream& out) {
        double lo = 1.0, hi = 0.0;
        std::size_t min_content = 99, max_content = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            const auto p = generate(vertebra_phantom_spec(seed, 0.0));
            const auto seeds = rasterize(auto_seed(p.ground_truth), p.ground_truth.dims());
            const auto all = annotated_slices(seeds);
            const auto kept = annotated_slices(subsample_slices(seeds, 3));
            const double f = static_cast<double>(kept.size()) / static_cast<double>(all.size());
            lo = std::min(lo, f);
            hi = std::max(hi, f);
            min_content = std::min(min_content, all.size());
            max_content = std::max(max_content, all.size());
        }
        out << "100 phantoms with " << min_content << "-" << max_content << " content slices: kept fraction at d=3 in ["
            << lo << ", " << hi << "] (need within [0.25, 0.45])";
        return lo >= 0.25 && hi <= 0.45 && min_content >= 7 && max_content <= 13;
    });

    criterion("file-format-round-trips", [](std::ostringstream& out) {
        testing_support::TempDir dir("acceptance");
        std::mt19937_64 rng(4242);
        const ElementType types[] = {ElementType::u8, ElementType::u16, ElementType::f32};
        int exact = 0, total = 0;
        for (int t = 0; t < 100; ++t) {
            const Dims d = testing_support::random_dims(rng, 12, 12, 6);
            const ElementType type = types[t % 3];
            Grid<float> g(d, 0.0f);
            std::uniform_int_distribution<int> u8(0, 255), u16(0, 65535);
            std::uniform_real_distribution<float> f(0.0f, 4000.0f);
            for (auto& x : g.values()) {
                x = type == ElementType::u8    ? static_cast<float>(u8(rng))
                    : type == ElementType::u16 ? static_cast<float>(u16(rng))
                                               : f(rng);
            }
            std::uniform_real_distribution<double> sp(0.2, 4.0);
            const Volume v(std::move(g), Spacing{sp(rng), sp(rng), sp(rng)}, type);
            for (const char* ext : {".mhd", ".raw"}) {
                ++total;
                const auto path = dir / ("v" + std::to_string(t) + ext);
                save_volume(v, path);
                const Volume back = load_volume(path);
                if (back == v && std::memcmp(back.intensities.values().data(), v.intensities.values().data(),
                                             v.intensities.size() * sizeof(float)) == 0)
                    ++exact;
            }
        }
        out << exact << "/" << total << " save/load round-trips bit-exact (MetaImage and raw+sidecar, u8/u16/f32)";
        return exact == total;
    });

    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
