#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kptdiag/parallel.hpp"
#include "kptdiag/similarity.hpp"
#include "kptdiag/types.hpp"

namespace kptdiag {

struct MatchPair {
    std::int64_t det_id = 0;
    std::int64_t gt_id = 0;
    double oks = 0.0;
    int order = 0;  // rank of the detection in the image's score ordering
};

/// Per-image greedy assignment. Matching happens once; thresholds only
/// reinterpret the stored pairs. Excluded gts never appear here.
struct MatchSet {
    std::int64_t image_id = 0;
    std::vector<MatchPair> pairs;                  // in descending-score order
    std::vector<std::int64_t> unmatched_detections;  // in descending-score order
    std::vector<std::int64_t> unmatched_gts;         // ascending gt id
};

namespace detail {

/// Detection processing order: score descending, ties by ascending id.
inline bool score_order(const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

}  // namespace detail

/// Greedily assign detections (score descending, ties by ascending id) to the
/// available gt with the highest OKS; OKS 0 to everything leaves a detection
/// unmatched. The assignment is independent of any evaluation threshold.
inline MatchSet match_image(const std::vector<Detection>& dets,
                            const std::vector<GtInstance>& gts, const KeypointSchema& schema,
                            const EvalConfig& /*config*/) {
    MatchSet ms;
    if (!dets.empty())
        ms.image_id = dets.front().image_id;
    else if (!gts.empty())
        ms.image_id = gts.front().image_id;
    for (const Detection& d : dets)
        if (d.image_id != ms.image_id)
            throw std::invalid_argument("match_image: detections from multiple images");
    for (const GtInstance& g : gts)
        if (g.image_id != ms.image_id)
            throw std::invalid_argument("match_image: gts from multiple images");

    std::vector<const Detection*> order;
    order.reserve(dets.size());
    for (const Detection& d : dets) order.push_back(&d);
    std::sort(order.begin(), order.end(),
              [](const Detection* a, const Detection* b) { return detail::score_order(*a, *b); });

    std::vector<const GtInstance*> pool;
    for (const GtInstance& g : gts)
        if (!g.excluded()) pool.push_back(&g);
    std::vector<bool> taken(pool.size(), false);

    int rank = 0;
    for (const Detection* d : order) {
        int best = -1;
        double best_oks = 0.0;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            if (taken[j]) continue;
            const double o = oks(*d, *pool[j], schema);
            if (o > best_oks || (o == best_oks && o > 0.0 && best >= 0 && pool[j]->id < pool[best]->id)) {
                best = static_cast<int>(j);
                best_oks = o;
            }
        }
        if (best >= 0 && best_oks > 0.0) {
            taken[best] = true;
            ms.pairs.push_back({d->id, pool[best]->id, best_oks, rank});
        } else {
            ms.unmatched_detections.push_back(d->id);
        }
        ++rank;
    }
    for (std::size_t j = 0; j < pool.size(); ++j)
        if (!taken[j]) ms.unmatched_gts.push_back(pool[j]->id);
    std::sort(ms.unmatched_gts.begin(), ms.unmatched_gts.end());
    return ms;
}

/// TP/FP/FN view of one MatchSet at a threshold. A matched pair below the
/// threshold contributes both a FP (the detection) and a FN (its gt).
struct Classification {
    std::vector<MatchPair> tp;                   // score order
    std::vector<std::int64_t> fp_detections;     // ascending id
    std::vector<std::int64_t> fn_gts;            // ascending id
};

inline Classification classify_at_threshold(const MatchSet& ms, double t) {
    if (!(t > 0.0 && t <= 1.0))
        throw std::invalid_argument("classify_at_threshold: t must be in (0,1]");
    Classification c;
    for (const MatchPair& p : ms.pairs) {
        if (p.oks >= t) {
            c.tp.push_back(p);
        } else {
            c.fp_detections.push_back(p.det_id);
            c.fn_gts.push_back(p.gt_id);
        }
    }
    c.fp_detections.insert(c.fp_detections.end(), ms.unmatched_detections.begin(),
                           ms.unmatched_detections.end());
    c.fn_gts.insert(c.fn_gts.end(), ms.unmatched_gts.begin(), ms.unmatched_gts.end());
    std::sort(c.fp_detections.begin(), c.fp_detections.end());
    std::sort(c.fn_gts.begin(), c.fn_gts.end());
    return c;
}

// ---------------------------------------------------------------------------
// dataset grouping and matching

/// Stable grouping of indices by image id, ascending image id.
template <typename T>
std::map<std::int64_t, std::vector<std::size_t>> group_by_image(const std::vector<T>& records) {
    std::map<std::int64_t, std::vector<std::size_t>> by_image;
    for (std::size_t i = 0; i < records.size(); ++i) by_image[records[i].image_id].push_back(i);
    return by_image;
}

/// Match every image found in the gt or detection lists; result is ordered by
/// ascending image id and independent of n_threads.
inline std::vector<MatchSet> match_grouped(const std::vector<GtInstance>& gts,
                                           const std::vector<Detection>& dets,
                                           const KeypointSchema& schema, const EvalConfig& config,
                                           int n_threads = 1) {
    const auto gt_idx = group_by_image(gts);
    const auto det_idx = group_by_image(dets);
    std::vector<std::int64_t> image_ids;
    for (const auto& [id, _] : gt_idx) image_ids.push_back(id);
    for (const auto& [id, _] : det_idx)
        if (!gt_idx.count(id)) image_ids.push_back(id);
    std::sort(image_ids.begin(), image_ids.end());

    std::vector<MatchSet> result(image_ids.size());
    parallel_for(image_ids.size(), n_threads, [&](std::size_t i) {
        const std::int64_t id = image_ids[i];
        std::vector<Detection> img_dets;
        std::vector<GtInstance> img_gts;
        if (auto it = det_idx.find(id); it != det_idx.end())
            for (std::size_t j : it->second) img_dets.push_back(dets[j]);
        if (auto it = gt_idx.find(id); it != gt_idx.end())
            for (std::size_t j : it->second) img_gts.push_back(gts[j]);
        result[i] = match_image(img_dets, img_gts, schema, config);
        result[i].image_id = id;
    });
    return result;
}

/// match_grouped plus the dataset-level check that every detection references a
/// known image (the statistics downstream are keyed by the ground-truth images).
inline std::vector<MatchSet> match_all(const std::vector<ImageRecord>& images,
                                       const std::vector<GtInstance>& gts,
                                       const std::vector<Detection>& dets,
                                       const KeypointSchema& schema, const EvalConfig& config,
                                       int n_threads = 1) {
    std::unordered_set<std::int64_t> known;
    for (const ImageRecord& im : images) known.insert(im.id);
    for (const Detection& d : dets)
        if (!known.count(d.image_id))
            throw validation_error("detection " + std::to_string(d.id) + ": unknown image_id " +
                                   std::to_string(d.image_id));
    return match_grouped(gts, dets, schema, config, n_threads);
}

// ---------------------------------------------------------------------------
// the PR ledger: one flattened, score-sorted view of all retained detections

struct LedgerEntry {
    std::int64_t det_id = 0;
    std::int64_t image_id = 0;
    double score = 0.0;
    bool matched = false;
    std::int64_t gt_id = 0;  // valid only when matched
    double oks = 0.0;        // pair OKS when matched, else 0
};

struct EvalLedger {
    std::vector<LedgerEntry> entries;  // score descending, ties ascending det id
    std::int64_t n_gts = 0;            // recall denominator
};

struct LedgerOptions {
    /// Restrict evaluation to this gt id set (benchmark cell). Detections matched
    /// to gts outside the set are ignored: neither TP nor FP; out-of-set gts are
    /// not counted in the recall denominator.
    const std::unordered_set<std::int64_t>* cell_gt_ids = nullptr;
    /// Drop detections that classify as FP at this threshold (background removal).
    std::optional<double> drop_fp_at;
    /// Remove gts that classify as FN at this threshold from the denominator.
    std::optional<double> drop_fn_at;
    /// Override config.max_detections_per_image (used by average_recall at k).
    std::optional<int> max_detections;
};

/// Flatten MatchSets into a globally score-sorted ledger, keeping each image's
/// top-scored detections. Retention happens before ignore filtering, so an
/// ignored match still occupies a retention slot.
inline EvalLedger build_ledger(const std::vector<MatchSet>& matches,
                               const std::vector<Detection>& dets,
                               const std::vector<GtInstance>& gts, const EvalConfig& config,
                               const LedgerOptions& opt = {}) {
    std::unordered_map<std::int64_t, const Detection*> det_by_id;
    det_by_id.reserve(dets.size());
    for (const Detection& d : dets) det_by_id.emplace(d.id, &d);

    const int keep = opt.max_detections.value_or(config.max_detections_per_image);

    EvalLedger ledger;
    for (const MatchSet& ms : matches) {
        std::vector<const Detection*> img_dets;
        for (const MatchPair& p : ms.pairs) img_dets.push_back(det_by_id.at(p.det_id));
        for (std::int64_t id : ms.unmatched_detections) img_dets.push_back(det_by_id.at(id));
        std::sort(img_dets.begin(), img_dets.end(),
                  [](const Detection* a, const Detection* b) { return detail::score_order(*a, *b); });
        if (static_cast<int>(img_dets.size()) > keep) img_dets.resize(keep);

        std::unordered_map<std::int64_t, const MatchPair*> pair_by_det;
        for (const MatchPair& p : ms.pairs) pair_by_det.emplace(p.det_id, &p);
        for (const Detection* d : img_dets) {
            LedgerEntry e;
            e.det_id = d->id;
            e.image_id = d->image_id;
            e.score = d->score;
            if (auto it = pair_by_det.find(d->id); it != pair_by_det.end()) {
                if (opt.cell_gt_ids && !opt.cell_gt_ids->count(it->second->gt_id))
                    continue;  // ignored: matched to an out-of-cell gt
                e.matched = true;
                e.gt_id = it->second->gt_id;
                e.oks = it->second->oks;
            }
            ledger.entries.push_back(e);
        }
    }

    if (opt.cell_gt_ids) {
        ledger.n_gts = static_cast<std::int64_t>(opt.cell_gt_ids->size());
    } else {
        for (const GtInstance& g : gts)
            if (!g.excluded()) ++ledger.n_gts;
    }

    if (opt.drop_fn_at) {
        const double t = *opt.drop_fn_at;
        std::int64_t tp_gts = 0;
        for (const LedgerEntry& e : ledger.entries)
            if (e.matched && e.oks >= t) ++tp_gts;
        ledger.n_gts = tp_gts;  // every FN gt leaves the denominator
    }
    if (opt.drop_fp_at) {
        const double t = *opt.drop_fp_at;
        std::erase_if(ledger.entries,
                      [t](const LedgerEntry& e) { return !(e.matched && e.oks >= t); });
    }

    std::sort(ledger.entries.begin(), ledger.entries.end(),
              [](const LedgerEntry& a, const LedgerEntry& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.det_id < b.det_id;
              });
    return ledger;
}

// ---------------------------------------------------------------------------
// PR curves, AP, AR

struct EvalResult {
    double threshold = 0.0;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    /// (recall, interpolated precision) on the fixed 101-point recall grid.
    std::vector<std::pair<double, double>> pr_samples;
    double ap = 0.0;
    double ar_at_k = 0.0;
};

/// 101-point interpolated AP at one threshold over a prebuilt ledger.
inline EvalResult pr_and_ap(const EvalLedger& ledger, double t, const EvalConfig& /*config*/) {
    if (ledger.n_gts == 0)
        throw empty_input_error("pr_and_ap: no ground truth to evaluate against");
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("pr_and_ap: t must be in (0,1]");

    EvalResult res;
    res.threshold = t;
    const std::size_t n = ledger.entries.size();
    std::vector<double> precision(n), recall(n);
    std::int64_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const LedgerEntry& e = ledger.entries[i];
        if (e.matched && e.oks >= t) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(ledger.n_gts);
    }
    res.tp = tp;
    res.fp = static_cast<std::int64_t>(n) - tp;
    res.fn = ledger.n_gts - tp;
    res.ar_at_k = static_cast<double>(tp) / static_cast<double>(ledger.n_gts);

    // p*(r) = max precision at any recall >= r
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    const std::vector<double> grid = EvalConfig::recall_grid();
    res.pr_samples.reserve(grid.size());
    double sum = 0.0;
    for (double r : grid) {
        const auto it = std::lower_bound(recall.begin(), recall.end(), r);
        const double p = it == recall.end() ? 0.0 : precision[static_cast<std::size_t>(it - recall.begin())];
        res.pr_samples.emplace_back(r, p);
        sum += p;
    }
    res.ap = sum / static_cast<double>(grid.size());
    return res;
}

inline EvalResult pr_and_ap(const std::vector<MatchSet>& matches,
                            const std::vector<Detection>& dets,
                            const std::vector<GtInstance>& gts, double t,
                            const EvalConfig& config) {
    return pr_and_ap(build_ledger(matches, dets, gts, config), t, config);
}

/// Variant tolerating a denominator emptied by FN removal: an empty task with no
/// detections left is perfect (ap 1), leftover detections with nothing to find
/// score 0. Plain datasets with zero usable gts still go through pr_and_ap.
inline EvalResult pr_and_ap_allowing_empty(const EvalLedger& ledger, double t,
                                           const EvalConfig& config) {
    if (ledger.n_gts > 0) return pr_and_ap(ledger, t, config);
    EvalResult res;
    res.threshold = t;
    res.fp = static_cast<std::int64_t>(ledger.entries.size());
    const double p = ledger.entries.empty() ? 1.0 : 0.0;
    for (double r : EvalConfig::recall_grid()) res.pr_samples.emplace_back(r, p);
    res.ap = p;
    res.ar_at_k = p;
    return res;
}

/// Recall at threshold t with each image limited to its top-k detections.
inline double average_recall(const std::vector<MatchSet>& matches,
                             const std::vector<Detection>& dets,
                             const std::vector<GtInstance>& gts, double t, int k,
                             const EvalConfig& config) {
    if (k < 1) throw std::invalid_argument("average_recall: k must be >= 1");
    LedgerOptions opt;
    opt.max_detections = k;
    const EvalLedger ledger = build_ledger(matches, dets, gts, config, opt);
    if (ledger.n_gts == 0)
        throw empty_input_error("average_recall: no ground truth to evaluate against");
    std::int64_t tp = 0;
    for (const LedgerEntry& e : ledger.entries)
        if (e.matched && e.oks >= t) ++tp;
    return static_cast<double>(tp) / static_cast<double>(ledger.n_gts);
}

/// Whole-dataset evaluation: per-threshold PR/AP/AR plus the .5:.05:.95 means.
struct DatasetEval {
    std::vector<EvalResult> per_threshold;
    double coco_ap = 0.0;
    double coco_ar = 0.0;
};

inline DatasetEval evaluate_ledger(const EvalLedger& ledger, const EvalConfig& config) {
    DatasetEval out;
    double ap_sum = 0.0, ar_sum = 0.0;
    for (double t : config.oks_thresholds) {
        out.per_threshold.push_back(pr_and_ap(ledger, t, config));
        ap_sum += out.per_threshold.back().ap;
        ar_sum += out.per_threshold.back().ar_at_k;
    }
    out.coco_ap = ap_sum / static_cast<double>(config.oks_thresholds.size());
    out.coco_ar = ar_sum / static_cast<double>(config.oks_thresholds.size());
    return out;
}

inline DatasetEval evaluate_dataset(const std::vector<MatchSet>& matches,
                                    const std::vector<Detection>& dets,
                                    const std::vector<GtInstance>& gts,
                                    const EvalConfig& config) {
    return evaluate_ledger(build_ledger(matches, dets, gts, config), config);
}

inline double coco_ap(const std::vector<MatchSet>& matches, const std::vector<Detection>& dets,
                      const std::vector<GtInstance>& gts, const EvalConfig& config) {
    return evaluate_dataset(matches, dets, gts, config).coco_ap;
}

inline double coco_ar(const std::vector<MatchSet>& matches, const std::vector<Detection>& dets,
                      const std::vector<GtInstance>& gts, const EvalConfig& config) {
    return evaluate_dataset(matches, dets, gts, config).coco_ar;
}

}  // namespace kptdiag
