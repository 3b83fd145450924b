#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kptdiag/geometry.hpp"
#include "kptdiag/matching.hpp"
#include "kptdiag/parallel.hpp"
#include "kptdiag/similarity.hpp"
#include "kptdiag/types.hpp"

namespace kptdiag {

/// A confidence ranking contradiction: det_hi outscores det_lo on the same gt
/// while localizing it worse.
struct ScoringError {
    std::int64_t gt_id = 0;
    std::int64_t det_hi = 0;
    std::int64_t det_lo = 0;
    double score_hi = 0.0, score_lo = 0.0;
    double oks_hi = 0.0, oks_lo = 0.0;
};

/// For every gt, look at the detections in its image with OKS >= the proximity
/// threshold and report every pair ranked opposite to its OKS.
inline std::vector<ScoringError> find_scoring_errors(const std::vector<Detection>& dets,
                                                     const std::vector<GtInstance>& gts,
                                                     const KeypointSchema& schema,
                                                     const EvalConfig& config) {
    const auto det_idx = group_by_image(dets);
    std::vector<ScoringError> out;

    std::vector<const GtInstance*> ordered;
    for (const GtInstance& g : gts)
        if (!g.excluded()) ordered.push_back(&g);
    std::sort(ordered.begin(), ordered.end(),
              [](const GtInstance* a, const GtInstance* b) { return a->id < b->id; });

    for (const GtInstance* gt : ordered) {
        const auto it = det_idx.find(gt->image_id);
        if (it == det_idx.end()) continue;
        struct Proximal {
            const Detection* det;
            double oks;
        };
        std::vector<Proximal> close;
        for (std::size_t j : it->second) {
            const double o = oks(dets[j], *gt, schema);
            if (o >= config.proximity_threshold) close.push_back({&dets[j], o});
        }
        std::sort(close.begin(), close.end(), [](const Proximal& a, const Proximal& b) {
            if (a.det->score != b.det->score) return a.det->score > b.det->score;
            return a.det->id < b.det->id;
        });
        for (std::size_t a = 0; a < close.size(); ++a)
            for (std::size_t b = a + 1; b < close.size(); ++b)
                if (close[a].det->score > close[b].det->score && close[a].oks < close[b].oks)
                    out.push_back({gt->id, close[a].det->id, close[b].det->id,
                                   close[a].det->score, close[b].det->score, close[a].oks,
                                   close[b].oks});
    }
    return out;
}

/// Oracle rescoring: each detection's confidence becomes the best OKS it can
/// reach with any non-excluded gt of its image (0 with no gts around).
inline std::vector<Detection> optimal_rescore(const std::vector<Detection>& dets,
                                              const std::vector<GtInstance>& gts,
                                              const KeypointSchema& schema, int n_threads = 1) {
    std::unordered_map<std::int64_t, std::vector<const GtInstance*>> gts_by_image;
    for (const GtInstance& g : gts)
        if (!g.excluded()) gts_by_image[g.image_id].push_back(&g);

    std::vector<Detection> out = dets;
    parallel_for(out.size(), n_threads, [&](std::size_t i) {
        double best = 0.0;
        if (const auto it = gts_by_image.find(out[i].image_id); it != gts_by_image.end())
            for (const GtInstance* g : it->second) best = std::max(best, oks(out[i], *g, schema));
        out[i].score = best;
    });
    return out;
}

struct SoftNmsResult {
    std::vector<Detection> dets;  // input order, decayed scores
    std::vector<std::string> warnings;
};

/// Gaussian soft-NMS on keypoints: repeatedly promote the highest-scored
/// detection and decay every other detection by exp(-o^2/sigma), where o is its
/// OKS against the promoted detection read as a fully-labeled gt whose scale
/// comes from the tight keypoint bbox. A zero-area bbox decays nothing (o = 0)
/// and is reported as a warning.
inline SoftNmsResult soft_nms(const std::vector<Detection>& dets, const KeypointSchema& schema,
                              double sigma = 0.5) {
    if (!(sigma > 0.0)) throw std::invalid_argument("soft_nms: sigma must be > 0");
    SoftNmsResult res;
    res.dets = dets;

    std::unordered_map<std::int64_t, std::vector<Detection*>> by_image;
    std::map<std::int64_t, bool> image_order;  // deterministic warning order
    for (Detection& d : res.dets) {
        by_image[d.image_id].push_back(&d);
        image_order.emplace(d.image_id, true);
    }

    for (const auto& [image_id, _] : image_order) {
        std::vector<Detection*>& pool = by_image[image_id];
        std::vector<bool> kept(pool.size(), false);
        for (std::size_t round = 0; round < pool.size(); ++round) {
            int top = -1;
            for (std::size_t j = 0; j < pool.size(); ++j) {
                if (kept[j]) continue;
                if (top < 0 || pool[j]->score > pool[top]->score ||
                    (pool[j]->score == pool[top]->score && pool[j]->id < pool[top]->id))
                    top = static_cast<int>(j);
            }
            kept[top] = true;
            const Detection& anchor = *pool[top];

            GtInstance pseudo;
            pseudo.id = anchor.id;
            pseudo.image_id = anchor.image_id;
            pseudo.num_visible = static_cast<int>(schema.size());
            pseudo.keypoints.reserve(schema.size());
            for (const Point& p : anchor.keypoints) pseudo.keypoints.push_back({p.x, p.y, 2});
            pseudo.area = keypoint_bbox(anchor.keypoints).area();
            if (pseudo.area <= 0.0) {
                res.warnings.push_back("soft_nms: detection " + std::to_string(anchor.id) +
                                       " has a zero-area keypoint bbox; no decay applied");
                continue;
            }
            for (std::size_t j = 0; j < pool.size(); ++j) {
                if (kept[j]) continue;
                const double o = oks(*pool[j], pseudo, schema);
                pool[j]->score *= std::exp(-(o * o) / sigma);
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// score histograms (best-match vs other proximal detections)

struct ScoreHistogramPair {
    std::vector<std::int64_t> best;   // histogram of best-match detection scores
    std::vector<std::int64_t> other;  // histogram of other proximal detection scores
    double lo = 0.0, hi = 1.0;        // shared bin range
    double overlap = 0.0;             // intersection area of the two normalized histograms
};

struct ScoreHistograms {
    ScoreHistogramPair original;
    ScoreHistogramPair rescored;
    int bins = 0;
};

namespace detail {

inline ScoreHistogramPair histogram_pair(const std::vector<double>& best_scores,
                                         const std::vector<double>& other_scores, int bins) {
    ScoreHistogramPair out;
    out.best.assign(bins, 0);
    out.other.assign(bins, 0);
    if (best_scores.empty() && other_scores.empty()) return out;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto* v : {&best_scores, &other_scores})
        for (double s : *v) {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
    out.lo = lo;
    out.hi = hi;
    const double span = hi - lo;
    auto bin_of = [&](double s) {
        if (span <= 0.0) return 0;
        const int b = static_cast<int>((s - lo) / span * bins);
        return std::min(b, bins - 1);
    };
    for (double s : best_scores) ++out.best[bin_of(s)];
    for (double s : other_scores) ++out.other[bin_of(s)];

    if (!best_scores.empty() && !other_scores.empty()) {
        for (int b = 0; b < bins; ++b) {
            const double pb = static_cast<double>(out.best[b]) / best_scores.size();
            const double po = static_cast<double>(out.other[b]) / other_scores.size();
            out.overlap += std::min(pb, po);
        }
    }
    return out;
}

}  // namespace detail

/// Fig-style separation check: per gt, the argmax-OKS detection is a "best match",
/// every other detection with OKS >= .1 is clutter. Histograms of both groups'
/// scores under the original and the optimal scoring; the overlap statistic is
/// the shared area of the two normalized histograms (0 = perfectly separated).
inline ScoreHistograms score_histograms(const std::vector<Detection>& dets,
                                        const std::vector<GtInstance>& gts,
                                        const KeypointSchema& schema, const EvalConfig& config,
                                        int bins = 20) {
    if (bins < 2) throw std::invalid_argument("score_histograms: bins must be >= 2");
    const auto det_idx = group_by_image(dets);

    // group membership is pure geometry (scores never enter)
    std::unordered_map<std::int64_t, int> role;  // det id -> 1 best, 0 other
    for (const GtInstance& g : gts) {
        if (g.excluded()) continue;
        const auto it = det_idx.find(g.image_id);
        if (it == det_idx.end()) continue;
        std::int64_t best_id = -1;
        double best_oks = -1.0;
        for (std::size_t j : it->second) {
            const double o = oks(dets[j], g, schema);
            if (o < config.proximity_threshold) continue;
            role.emplace(dets[j].id, 0);
            if (o > best_oks || (o == best_oks && dets[j].id < best_id)) {
                best_oks = o;
                best_id = dets[j].id;
            }
        }
        if (best_id >= 0) role[best_id] = 1;
    }

    const std::vector<Detection> rescored = optimal_rescore(dets, gts, schema);
    auto split = [&](const std::vector<Detection>& source) {
        std::pair<std::vector<double>, std::vector<double>> scores;
        for (const Detection& d : source) {
            const auto it = role.find(d.id);
            if (it == role.end()) continue;
            (it->second == 1 ? scores.first : scores.second).push_back(d.score);
        }
        return scores;
    };

    ScoreHistograms out;
    out.bins = bins;
    const auto [orig_best, orig_other] = split(dets);
    const auto [opt_best, opt_other] = split(rescored);
    out.original = detail::histogram_pair(orig_best, orig_other, bins);
    out.rescored = detail::histogram_pair(opt_best, opt_other, bins);
    return out;
}

// ---------------------------------------------------------------------------
// rescoring report

struct RescoreReport {
    std::int64_t images_with_detections = 0;
    std::int64_t images_with_optimal_order = 0;
    std::int64_t scoring_errors = 0;
    std::int64_t match_increase = 0;               // matched pairs after - before
    std::int64_t matches_with_oks_improvement = 0; // gts with strictly higher matched OKS
};

/// The five rescoring statistics: matching is run with the original scores and
/// with optimal scores followed by soft-NMS; unmatched gts count as OKS 0 when
/// deciding improvement.
inline RescoreReport rescore_report(const std::vector<Detection>& dets,
                                    const std::vector<GtInstance>& gts,
                                    const KeypointSchema& schema, const EvalConfig& config,
                                    double nms_sigma = 0.5, int n_threads = 1) {
    RescoreReport report;
    report.scoring_errors =
        static_cast<std::int64_t>(find_scoring_errors(dets, gts, schema, config).size());

    const std::vector<Detection> optimal = optimal_rescore(dets, gts, schema, n_threads);
    const std::vector<Detection> rescored = soft_nms(optimal, schema, nms_sigma).dets;

    const auto det_idx = group_by_image(dets);
    report.images_with_detections = static_cast<std::int64_t>(det_idx.size());
    std::unordered_map<std::int64_t, const Detection*> optimal_by_id;
    for (const Detection& d : optimal) optimal_by_id.emplace(d.id, &d);
    for (const auto& [image_id, indices] : det_idx) {
        auto order = [&](auto score_of) {
            std::vector<std::int64_t> ids;
            for (std::size_t j : indices) ids.push_back(dets[j].id);
            std::sort(ids.begin(), ids.end(), [&](std::int64_t a, std::int64_t b) {
                const double sa = score_of(a), sb = score_of(b);
                if (sa != sb) return sa > sb;
                return a < b;
            });
            return ids;
        };
        std::unordered_map<std::int64_t, double> original_score;
        for (std::size_t j : indices) original_score.emplace(dets[j].id, dets[j].score);
        const auto lhs = order([&](std::int64_t id) { return original_score.at(id); });
        const auto rhs = order([&](std::int64_t id) { return optimal_by_id.at(id)->score; });
        if (lhs == rhs) ++report.images_with_optimal_order;
    }

    const std::vector<MatchSet> before = match_grouped(gts, dets, schema, config, n_threads);
    const std::vector<MatchSet> after = match_grouped(gts, rescored, schema, config, n_threads);
    std::int64_t pairs_before = 0, pairs_after = 0;
    std::unordered_map<std::int64_t, double> gt_oks_before, gt_oks_after;
    for (const MatchSet& ms : before) {
        pairs_before += static_cast<std::int64_t>(ms.pairs.size());
        for (const MatchPair& p : ms.pairs) gt_oks_before[p.gt_id] = p.oks;
    }
    for (const MatchSet& ms : after) {
        pairs_after += static_cast<std::int64_t>(ms.pairs.size());
        for (const MatchPair& p : ms.pairs) gt_oks_after[p.gt_id] = p.oks;
    }
    report.match_increase = pairs_after - pairs_before;
    for (const GtInstance& g : gts) {
        if (g.excluded()) continue;
        const auto b = gt_oks_before.find(g.id);
        const auto a = gt_oks_after.find(g.id);
        const double oks_b = b == gt_oks_before.end() ? 0.0 : b->second;
        const double oks_a = a == gt_oks_after.end() ? 0.0 : a->second;
        if (oks_a > oks_b) ++report.matches_with_oks_improvement;
    }
    return report;
}

}  // namespace kptdiag
