#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kptdiag/geometry.hpp"
#include "kptdiag/similarity.hpp"
#include "kptdiag/taxonomy.hpp"
#include "kptdiag/types.hpp"

namespace kptdiag {

enum class ScoreMode : int { Optimal = 0, NoisyOptimal, Random };

/// Geometry knobs for the generator. Keypoints sit on a per-person grid with
/// pitch `pitch_factor * max ks_radius(.5)`; people sit on a global grid with
/// spacing `spacing_factor * scale_max`, far enough apart that cross-person
/// similarities underflow to exactly 0.
struct FixtureLayout {
    double scale_min = 40.0;
    double scale_max = 60.0;
    double spacing_factor = 15.0;
    double pitch_factor = 3.0;
};

/// What to inject, how to score, and how to lay the scene out. rates holds the
/// per-keypoint probabilities of Jitter/Inversion/Swap/Miss (the remainder is
/// Good). fn_rate drops a person's detection entirely; fp_rate adds a background
/// detection on a spare grid slot; duplicate_rate adds a low-OKS (<= .45) second
/// detection of a person.
struct InjectionSpec {
    std::map<ErrorKind, double> rates;
    ScoreMode score_mode = ScoreMode::Optimal;
    double score_noise = 0.05;  // stddev for NoisyOptimal
    double fn_rate = 0.0;
    double fp_rate = 0.0;
    double duplicate_rate = 0.0;
    std::uint64_t rng_seed = 1;
    FixtureLayout layout;

    void validate() const {
        double sum = 0.0;
        for (const auto& [kind, p] : rates) {
            if (kind == ErrorKind::Good || kind == ErrorKind::Unclassifiable)
                throw validation_error("injection rates: only Jitter/Inversion/Swap/Miss");
            if (p < 0.0 || p > 1.0) throw validation_error("injection rates must be in [0,1]");
            sum += p;
        }
        if (sum > 1.0) throw validation_error("injection rates must sum to at most 1");
        for (double p : {fn_rate, fp_rate, duplicate_rate})
            if (p < 0.0 || p > 1.0) throw validation_error("fixture probabilities must be in [0,1]");
        if (!(score_noise >= 0.0)) throw validation_error("score_noise must be >= 0");
        if (!(layout.scale_min > 0.0 && layout.scale_min <= layout.scale_max))
            throw validation_error("fixture layout: need 0 < scale_min <= scale_max");
    }
};

/// Intended per-keypoint labels for one generated detection.
struct TruthLabel {
    std::int64_t det_id = 0;
    std::int64_t gt_id = 0;
    std::vector<ErrorKind> kinds;
};

struct FixtureData {
    std::vector<ImageRecord> images;
    std::vector<GtInstance> gts;
    std::vector<Detection> dets;
    std::vector<TruthLabel> truth;
    std::vector<std::int64_t> fn_gt_ids;         // people deliberately left undetected
    std::vector<std::int64_t> fp_det_ids;        // background detections
    std::vector<std::int64_t> duplicate_det_ids; // low-OKS duplicates
    std::int64_t degraded = 0;  // injections downgraded (inversion on an unpaired part)
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Deterministic synthetic scene generator. A pure function of (spec, seed):
/// images are generated from independent, index-derived seeds, so thread count
/// and generation order cannot change the output. Every injected keypoint is
/// re-classified on the spot and must land in its intended class, otherwise the
/// generator aborts (a generator bug, not an input error).
inline FixtureData generate(int n_images, int people_per_image, const InjectionSpec& spec,
                            const KeypointSchema& schema) {
    spec.validate();
    schema.validate();
    if (n_images < 1 || people_per_image < 1)
        throw validation_error("fixtures: need at least 1 image and 1 person per image");

    const double swap_rate = spec.rates.count(ErrorKind::Swap) ? spec.rates.at(ErrorKind::Swap) : 0.0;
    if (swap_rate > 0.0 && people_per_image < 2)
        throw validation_error(
            "infeasible layout parameters: swap injection needs >= 2 people per image");

    const std::size_t K = schema.size();
    const double k_max = *std::max_element(schema.k_constants.begin(), schema.k_constants.end());
    const double r_half_max = ks_radius(0.5, 1.0, k_max);  // per unit scale

    // keypoint grid: pitch_factor * r_max(.5); people grid: spacing_factor * scale_max
    const int kp_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(K))));
    const int kp_rows = static_cast<int>(std::ceil(static_cast<double>(K) / kp_cols));
    if (spec.layout.pitch_factor < 2.0)
        throw validation_error("infeasible layout parameters: pitch_factor must be >= 2");

    const bool want_fp = spec.fp_rate > 0.0;
    const int slots = people_per_image + (want_fp ? 1 : 0);
    const int person_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(slots))));
    const int person_rows = static_cast<int>(std::ceil(static_cast<double>(slots) / person_cols));
    const double spacing = spec.layout.spacing_factor * spec.layout.scale_max;

    // cross-person ks must underflow to exactly 0: exp(x) == 0 for x < -746
    const double pitch_max = spec.layout.pitch_factor * r_half_max * spec.layout.scale_max;
    const double half_diag =
        0.5 * std::hypot((kp_cols - 1) * pitch_max, (kp_rows - 1) * pitch_max);
    const double wander = 2.0 * r_half_max * spec.layout.scale_max;
    const double min_cross = spacing - 2.0 * (half_diag + wander);
    if (min_cross < 39.0 * k_max * spec.layout.scale_max)
        throw validation_error(
            "infeasible layout parameters: spacing_factor too small for exact cross-person "
            "separation");

    const double margin = spacing;
    const int image_w =
        static_cast<int>(std::ceil(person_cols * spacing + margin));
    const int image_h =
        static_cast<int>(std::ceil(person_rows * spacing + margin));

    const EvalConfig config;  // classification uses the default .5/.85 bands
    FixtureData out;
    out.images.resize(n_images);
    std::vector<FixtureData> per_image(n_images);

    for (int img = 0; img < n_images; ++img) {
        const std::int64_t image_id = img + 1;
        out.images[img] = {image_id, image_w, image_h};
        FixtureData& local = per_image[img];
        std::mt19937_64 rng(detail::splitmix64(spec.rng_seed ^
                                               detail::splitmix64(static_cast<std::uint64_t>(img) + 1)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto angle = [&] { return unit(rng) * 2.0 * 3.141592653589793238462643383279502884; };

        // ---- ground truth people on the slot grid
        std::vector<GtInstance> people;
        for (int person = 0; person < people_per_image; ++person) {
            const double s =
                spec.layout.scale_min + unit(rng) * (spec.layout.scale_max - spec.layout.scale_min);
            const double pitch = spec.layout.pitch_factor * r_half_max * s;
            const int col = person % person_cols;
            const int row = person / person_cols;
            const double cx = margin / 2.0 + col * spacing + spacing / 2.0;
            const double cy = margin / 2.0 + row * spacing + spacing / 2.0;

            GtInstance g;
            g.id = image_id * 1000 + person + 1;
            g.image_id = image_id;
            g.area = s * s;
            g.keypoints.resize(K);
            for (std::size_t i = 0; i < K; ++i) {
                const int kc = static_cast<int>(i) % kp_cols;
                const int kr = static_cast<int>(i) / kp_cols;
                g.keypoints[i] = {cx + (kc - (kp_cols - 1) / 2.0) * pitch,
                                  cy + (kr - (kp_rows - 1) / 2.0) * pitch, kLabeledVisible};
            }
            g.num_visible = static_cast<int>(K);
            std::vector<Point> pts;
            for (const Keypoint& kp : g.keypoints) pts.push_back(kp.pos());
            const Box tight = keypoint_bbox(pts);
            const double pad = r_half_max * s;
            g.bbox = {tight.x - pad, tight.y - pad, tight.w + 2 * pad, tight.h + 2 * pad};
            people.push_back(std::move(g));
        }

        // ---- detections with injected errors
        std::int64_t next_det = image_id * 1000;
        for (int person = 0; person < people_per_image; ++person) {
            const GtInstance& g = people[person];
            const double s = g.scale();
            if (unit(rng) < spec.fn_rate) {
                local.fn_gt_ids.push_back(g.id);
                continue;
            }

            Detection d;
            d.id = ++next_det;
            d.image_id = image_id;
            d.keypoints.resize(K);
            TruthLabel truth{d.id, g.id, std::vector<ErrorKind>(K, ErrorKind::Good)};

            for (std::size_t i = 0; i < K; ++i) {
                const double k_i = schema.k_constants[i];
                const Point own = g.keypoints[i].pos();
                const int cp = schema.counterpart[i];

                ErrorKind kind = ErrorKind::Good;
                double u = unit(rng);
                for (const auto& [candidate, rate] : spec.rates) {
                    if (u < rate) {
                        kind = candidate;
                        break;
                    }
                    u -= rate;
                }
                if (kind == ErrorKind::Inversion && cp < 0) {
                    kind = ErrorKind::Jitter;  // unpaired part cannot invert
                    ++local.degraded;
                }

                Point placed;
                switch (kind) {
                    case ErrorKind::Good: {
                        const double ks = 0.855 + unit(rng) * (0.995 - 0.855);
                        const double a = angle();
                        const double r = ks_radius(ks, s, k_i);
                        placed = {own.x + std::cos(a) * r, own.y + std::sin(a) * r};
                        break;
                    }
                    case ErrorKind::Jitter: {
                        const double ks = 0.505 + unit(rng) * (0.845 - 0.505);
                        const double a = angle();
                        const double r = ks_radius(ks, s, k_i);
                        placed = {own.x + std::cos(a) * r, own.y + std::sin(a) * r};
                        break;
                    }
                    case ErrorKind::Inversion: {
                        const Point target = g.keypoints[cp].pos();
                        const double ks = 0.86 + unit(rng) * (0.99 - 0.86);
                        const double a = angle();
                        const double r = ks_radius(ks, s, schema.k_constants[cp]);
                        placed = {target.x + std::cos(a) * r, target.y + std::sin(a) * r};
                        break;
                    }
                    case ErrorKind::Swap: {
                        int other = static_cast<int>(unit(rng) * (people_per_image - 1));
                        if (other >= person) ++other;
                        const GtInstance& q = people[other];
                        const Point target = q.keypoints[i].pos();
                        const double d_max = std::min(ks_radius(0.86, q.scale(), k_i),
                                                      ks_radius(0.5, s, k_i) / 1.01);
                        const double a = angle();
                        const double r = unit(rng) * d_max;
                        placed = {target.x + std::cos(a) * r, target.y + std::sin(a) * r};
                        break;
                    }
                    case ErrorKind::Miss: {
                        const double m = 1.2 + unit(rng) * 0.8;
                        double ux, uy;
                        if (cp >= 0) {
                            const Point away = g.keypoints[cp].pos();
                            const double dx = own.x - away.x, dy = own.y - away.y;
                            const double len = std::hypot(dx, dy);
                            ux = dx / len;
                            uy = dy / len;
                        } else {
                            const double a = angle();
                            ux = std::cos(a);
                            uy = std::sin(a);
                        }
                        const double r = m * ks_radius(0.5, s, k_i);
                        placed = {own.x + ux * r, own.y + uy * r};
                        break;
                    }
                    default: placed = own; break;
                }
                d.keypoints[i] = placed;
                truth.kinds[i] = kind;
            }

            // the generator must land every keypoint in its intended class
            for (std::size_t i = 0; i < K; ++i) {
                const KeypointErrorLabel check =
                    classify_keypoint(d, g, people, i, schema, config);
                if (check.kind != truth.kinds[i])
                    throw std::logic_error("fixture generator: injected " +
                                           std::string(to_string(truth.kinds[i])) +
                                           " classified as " + to_string(check.kind));
            }

            local.dets.push_back(d);
            local.truth.push_back(std::move(truth));

            if (unit(rng) < spec.duplicate_rate) {
                Detection dup;
                dup.id = ++next_det;
                dup.image_id = image_id;
                dup.keypoints.resize(K);
                for (std::size_t i = 0; i < K; ++i) {
                    const double ks = 0.30 + unit(rng) * 0.14;  // OKS capped at .44
                    const double a = angle();
                    const double r = ks_radius(ks, s, schema.k_constants[i]);
                    const Point own = g.keypoints[i].pos();
                    dup.keypoints[i] = {own.x + std::cos(a) * r, own.y + std::sin(a) * r};
                }
                local.duplicate_det_ids.push_back(dup.id);
                local.dets.push_back(std::move(dup));
            }
        }

        if (want_fp && unit(rng) < spec.fp_rate) {
            // a detection on the spare slot, similarity 0 to every person
            const int slot = slots - 1;
            const double s = spec.layout.scale_min;
            const double pitch = spec.layout.pitch_factor * r_half_max * s;
            const int col = slot % person_cols;
            const int row = slot / person_cols;
            const double cx = margin / 2.0 + col * spacing + spacing / 2.0;
            const double cy = margin / 2.0 + row * spacing + spacing / 2.0;
            Detection fp;
            fp.id = ++next_det;
            fp.image_id = image_id;
            fp.keypoints.resize(K);
            for (std::size_t i = 0; i < K; ++i) {
                const int kc = static_cast<int>(i) % kp_cols;
                const int kr = static_cast<int>(i) / kp_cols;
                fp.keypoints[i] = {cx + (kc - (kp_cols - 1) / 2.0) * pitch,
                                   cy + (kr - (kp_rows - 1) / 2.0) * pitch};
            }
            local.fp_det_ids.push_back(fp.id);
            local.dets.push_back(std::move(fp));
        }

        // ---- scores
        for (Detection& d : local.dets) {
            double best = 0.0;
            for (const GtInstance& g : people) best = std::max(best, oks(d, g, schema));
            switch (spec.score_mode) {
                case ScoreMode::Optimal: d.score = best; break;
                case ScoreMode::NoisyOptimal: {
                    std::normal_distribution<double> noise(0.0, spec.score_noise);
                    d.score = std::clamp(best + noise(rng), 0.0, 1.0);
                    break;
                }
                case ScoreMode::Random: d.score = unit(rng); break;
            }
        }
        local.gts = std::move(people);
    }

    for (FixtureData& local : per_image) {
        auto append = [](auto& dst, auto& src) {
            dst.insert(dst.end(), std::make_move_iterator(src.begin()),
                       std::make_move_iterator(src.end()));
        };
        append(out.gts, local.gts);
        append(out.dets, local.dets);
        append(out.truth, local.truth);
        append(out.fn_gt_ids, local.fn_gt_ids);
        append(out.fp_det_ids, local.fp_det_ids);
        append(out.duplicate_det_ids, local.duplicate_det_ids);
        out.degraded += local.degraded;
    }
    return out;
}

}  // namespace kptdiag
