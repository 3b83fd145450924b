#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kptdiag/geometry.hpp"
#include "kptdiag/matching.hpp"
#include "kptdiag/types.hpp"

namespace kptdiag {

// ---------------------------------------------------------------------------
// FP/FN impact on AP

struct BackgroundImpact {
    double threshold = 0.0;
    double ap_baseline = 0.0;
    double ap_without_fn = 0.0;  // FN gts leave the recall denominator
    double ap_without_fp = 0.0;  // FP detections leave the ledger
};

/// AP recovery from removing all FNs (resp. FPs) at the evaluation thresholds
/// .5/.75/.95. FP/FN are the threshold-level sets of classify_at_threshold.
inline std::vector<BackgroundImpact> background_impact(const std::vector<MatchSet>& matches,
                                                       const std::vector<Detection>& dets,
                                                       const std::vector<GtInstance>& gts,
                                                       const EvalConfig& config) {
    std::vector<BackgroundImpact> out;
    for (double t : {0.50, 0.75, 0.95}) {
        BackgroundImpact row;
        row.threshold = t;
        row.ap_baseline = pr_and_ap(matches, dets, gts, t, config).ap;

        LedgerOptions no_fn;
        no_fn.drop_fn_at = t;
        row.ap_without_fn = pr_and_ap_allowing_empty(
            build_ledger(matches, dets, gts, config, no_fn), t, config).ap;

        LedgerOptions no_fp;
        no_fp.drop_fp_at = t;
        row.ap_without_fp = pr_and_ap_allowing_empty(
            build_ledger(matches, dets, gts, config, no_fp), t, config).ap;
        out.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// high-confidence background FPs by size

struct FpHistogram {
    /// Area boundaries 32^2..128^2; counts has one extra leading under-32^2 bin
    /// and a trailing >=128^2 bin.
    std::vector<double> boundaries = {32.0 * 32.0, 64.0 * 64.0, 96.0 * 96.0, 128.0 * 128.0};
    std::vector<std::int64_t> counts;
    double percentile_score = 0.0;       // nearest-rank 80th percentile of all scores
    std::vector<std::int64_t> fp_ids;    // the qualifying detections, ascending id
};

/// Histogram of tight keypoint-bbox areas of false positives (threshold .5)
/// whose confidence lies strictly above the nearest-rank 80th percentile of all
/// detection scores.
inline FpHistogram high_conf_fp_histogram(const std::vector<MatchSet>& matches,
                                          const std::vector<Detection>& dets,
                                          const EvalConfig& /*config*/) {
    FpHistogram hist;
    hist.counts.assign(hist.boundaries.size() + 1, 0);
    if (dets.empty()) return hist;

    std::vector<double> scores;
    scores.reserve(dets.size());
    for (const Detection& d : dets) scores.push_back(d.score);
    std::sort(scores.begin(), scores.end());
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.80 * static_cast<double>(scores.size())));
    hist.percentile_score = scores[rank - 1];

    std::unordered_set<std::int64_t> fp_at_half;
    for (const MatchSet& ms : matches) {
        const Classification c = classify_at_threshold(ms, 0.5);
        fp_at_half.insert(c.fp_detections.begin(), c.fp_detections.end());
    }

    std::vector<const Detection*> qualifying;
    for (const Detection& d : dets)
        if (fp_at_half.count(d.id) && d.score > hist.percentile_score) qualifying.push_back(&d);
    std::sort(qualifying.begin(), qualifying.end(),
              [](const Detection* a, const Detection* b) { return a->id < b->id; });

    for (const Detection* d : qualifying) {
        const double area = keypoint_bbox(d->keypoints).area();
        std::size_t bin = 0;
        while (bin < hist.boundaries.size() && area >= hist.boundaries[bin]) ++bin;
        ++hist.counts[bin];
        hist.fp_ids.push_back(d->id);
    }
    return hist;
}

// ---------------------------------------------------------------------------
// FN spatial heatmap

struct FnHeatmap {
    int rows = 0;
    int cols = 0;
    std::vector<std::int64_t> counts;    // row-major
    std::vector<double> normalized;      // counts / max count
    std::int64_t fn_count = 0;
    std::vector<std::string> warnings;

    std::int64_t at(int r, int c) const { return counts[static_cast<std::size_t>(r) * cols + c]; }
};

/// Accumulate the footprints of all FN gts (threshold .5 by default) onto a
/// normalized grid: a cell fires when its center falls inside the gt's polygon
/// or RLE mask; without a usable mask the filled bbox stands in. Compressed RLE
/// also falls back to the bbox (with a warning).
inline FnHeatmap fn_heatmap(const std::vector<GtInstance>& gts,
                            const std::vector<MatchSet>& matches,
                            const std::vector<ImageRecord>& images, int grid_h = 128,
                            int grid_w = 128, double threshold = 0.5) {
    if (grid_h < 1 || grid_w < 1) throw std::invalid_argument("fn_heatmap: grid must be >= 1x1");
    FnHeatmap heat;
    heat.rows = grid_h;
    heat.cols = grid_w;
    heat.counts.assign(static_cast<std::size_t>(grid_h) * grid_w, 0);

    std::unordered_set<std::int64_t> fn_ids;
    for (const MatchSet& ms : matches) {
        const Classification c = classify_at_threshold(ms, threshold);
        fn_ids.insert(c.fn_gts.begin(), c.fn_gts.end());
    }
    std::unordered_map<std::int64_t, const ImageRecord*> image_by_id;
    for (const ImageRecord& im : images) image_by_id.emplace(im.id, &im);

    for (const GtInstance& g : gts) {
        if (!fn_ids.count(g.id)) continue;
        const auto it = image_by_id.find(g.image_id);
        if (it == image_by_id.end()) {
            heat.warnings.push_back("fn_heatmap: gt " + std::to_string(g.id) +
                                    " references unknown image; skipped");
            continue;
        }
        const double img_w = it->second->width;
        const double img_h = it->second->height;
        ++heat.fn_count;

        const PolygonMask* poly = std::get_if<PolygonMask>(&g.segmentation);
        const RleMask* rle = std::get_if<RleMask>(&g.segmentation);
        bool use_bbox = !poly && !rle;
        if (std::holds_alternative<CompressedRleMask>(g.segmentation))
            heat.warnings.push_back("fn_heatmap: gt " + std::to_string(g.id) +
                                    " has compressed RLE; using bbox fallback");
        if (use_bbox && !(g.bbox[2] > 0.0 && g.bbox[3] > 0.0)) {
            heat.warnings.push_back("fn_heatmap: gt " + std::to_string(g.id) +
                                    " has neither mask nor usable bbox; skipped");
            --heat.fn_count;
            continue;
        }

        for (int r = 0; r < grid_h; ++r) {
            const double y = (r + 0.5) / grid_h * img_h;
            for (int c = 0; c < grid_w; ++c) {
                const double x = (c + 0.5) / grid_w * img_w;
                bool inside = false;
                if (poly) {
                    inside = point_in_mask(x, y, *poly);
                } else if (rle) {
                    const int col = static_cast<int>((c + 0.5) / grid_w * rle->width);
                    const int row = static_cast<int>((r + 0.5) / grid_h * rle->height);
                    inside = point_in_mask(col, row, *rle);
                } else {
                    inside = x >= g.bbox[0] && x < g.bbox[0] + g.bbox[2] && y >= g.bbox[1] &&
                             y < g.bbox[1] + g.bbox[3];
                }
                if (inside) ++heat.counts[static_cast<std::size_t>(r) * grid_w + c];
            }
        }
    }

    heat.normalized.assign(heat.counts.size(), 0.0);
    const std::int64_t peak = *std::max_element(heat.counts.begin(), heat.counts.end());
    if (peak > 0)
        for (std::size_t i = 0; i < heat.counts.size(); ++i)
            heat.normalized[i] = static_cast<double>(heat.counts[i]) / static_cast<double>(peak);
    return heat;
}

// ---------------------------------------------------------------------------
// clutter

struct ClutterStats {
    std::optional<double> avg_people_fp_images;  // absent when no image has a FP
    std::optional<double> avg_people_fn_images;
    double avg_people_overall = 0.0;             // over every image in the dataset
};

/// Average number of annotated (non-excluded) people in images containing FPs,
/// containing FNs, and across the whole dataset (threshold .5 by default).
inline ClutterStats clutter_stats(const std::vector<MatchSet>& matches,
                                  const std::vector<GtInstance>& gts,
                                  const std::vector<ImageRecord>& images,
                                  double threshold = 0.5) {
    std::unordered_map<std::int64_t, std::int64_t> people;
    for (const GtInstance& g : gts)
        if (!g.excluded()) ++people[g.image_id];

    ClutterStats stats;
    std::int64_t total_people = 0;
    for (const ImageRecord& im : images) {
        const auto it = people.find(im.id);
        total_people += it == people.end() ? 0 : it->second;
    }
    if (!images.empty())
        stats.avg_people_overall = static_cast<double>(total_people) / images.size();

    std::int64_t fp_images = 0, fp_people = 0, fn_images = 0, fn_people = 0;
    for (const MatchSet& ms : matches) {
        const Classification c = classify_at_threshold(ms, threshold);
        const auto it = people.find(ms.image_id);
        const std::int64_t n = it == people.end() ? 0 : it->second;
        if (!c.fp_detections.empty()) {
            ++fp_images;
            fp_people += n;
        }
        if (!c.fn_gts.empty()) {
            ++fn_images;
            fn_people += n;
        }
    }
    if (fp_images > 0)
        stats.avg_people_fp_images = static_cast<double>(fp_people) / static_cast<double>(fp_images);
    if (fn_images > 0)
        stats.avg_people_fn_images = static_cast<double>(fn_people) / static_cast<double>(fn_images);
    return stats;
}

}  // namespace kptdiag
