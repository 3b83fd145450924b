#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "kptdiag/matching.hpp"
#include "kptdiag/scoring.hpp"
#include "kptdiag/similarity.hpp"
#include "kptdiag/taxonomy.hpp"
#include "kptdiag/types.hpp"

namespace kptdiag {

/// Reposition one erroneous keypoint. Jitter lands on the good_threshold ks
/// circle, Miss on the jitter_threshold circle, Inversion/Swap keep the distance
/// the prediction had to the confused part. The corrected point sits on the ray
/// from the gt part through the old prediction (kind != Good implies ks < 1,
/// so the ray is well-defined).
inline Point correct_keypoint(const KeypointErrorLabel& label, const Detection& det,
                              const GtInstance& gt, std::size_t i, const KeypointSchema& schema,
                              const EvalConfig& config) {
    if (label.kind == ErrorKind::Good || label.kind == ErrorKind::Unclassifiable)
        throw std::invalid_argument("correct_keypoint: nothing to correct for this label");

    const Point pred = det.keypoints[i];
    const Point target = gt.keypoints[i].pos();
    const double dx = pred.x - target.x;
    const double dy = pred.y - target.y;
    const double dist = std::hypot(dx, dy);
    const double ux = dist > 0.0 ? dx / dist : 1.0;
    const double uy = dist > 0.0 ? dy / dist : 0.0;

    double radius = 0.0;
    switch (label.kind) {
        case ErrorKind::Jitter:
            radius = ks_radius(config.good_threshold, gt.scale(), schema.k_constants[i]);
            break;
        case ErrorKind::Miss:
            radius = ks_radius(config.jitter_threshold, gt.scale(), schema.k_constants[i]);
            break;
        case ErrorKind::Inversion:
        case ErrorKind::Swap:
            radius = std::hypot(pred.x - label.wrong_pos->x, pred.y - label.wrong_pos->y);
            break;
        default:
            break;
    }
    return {target.x + ux * radius, target.y + uy * radius};
}

/// Per-detection OKS movement caused by a correction pass.
struct OksDelta {
    std::int64_t det_id = 0;
    std::int64_t gt_id = 0;
    double oks_before = 0.0;
    double oks_after = 0.0;

    double delta() const { return oks_after - oks_before; }
};

struct CorrectionOutcome {
    std::vector<Detection> dets;   // every input detection, corrected where labeled
    std::vector<OksDelta> deltas;  // one per matched detection, label order
};

/// Move every keypoint whose label kind is in `kinds`; everything else is
/// untouched. Corrections never decrease a matched detection's OKS on data
/// satisfying the taxonomy's geometry (enforced here).
inline CorrectionOutcome apply_correction(const std::vector<Detection>& dets,
                                          const std::vector<GtInstance>& gts,
                                          const std::vector<LabeledDetection>& labeled,
                                          const std::set<ErrorKind>& kinds,
                                          const KeypointSchema& schema, const EvalConfig& config) {
    std::unordered_map<std::int64_t, std::size_t> det_index;
    for (std::size_t i = 0; i < dets.size(); ++i) det_index.emplace(dets[i].id, i);
    std::unordered_map<std::int64_t, const GtInstance*> gt_by_id;
    for (const GtInstance& g : gts) gt_by_id.emplace(g.id, &g);

    CorrectionOutcome out;
    out.dets = dets;
    for (const LabeledDetection& ld : labeled) {
        Detection& d = out.dets[det_index.at(ld.det_id)];
        const GtInstance& gt = *gt_by_id.at(ld.gt_id);
        const Detection& original = dets[det_index.at(ld.det_id)];
        for (std::size_t i = 0; i < ld.labels.size(); ++i) {
            const KeypointErrorLabel& label = ld.labels[i];
            if (!kinds.count(label.kind)) continue;
            if (label.kind == ErrorKind::Good || label.kind == ErrorKind::Unclassifiable) continue;
            d.keypoints[i] = correct_keypoint(label, original, gt, i, schema, config);
        }
        OksDelta delta;
        delta.det_id = ld.det_id;
        delta.gt_id = ld.gt_id;
        delta.oks_before = oks(original, gt, schema);
        delta.oks_after = oks(d, gt, schema);
        if (delta.delta() < -1e-12)
            throw std::logic_error("apply_correction: OKS decreased for detection " +
                                   std::to_string(ld.det_id) +
                                   " (cross-scale swap geometry violates the correction rule)");
        out.deltas.push_back(delta);
    }
    return out;
}

// ---------------------------------------------------------------------------
// separate per-kind impact (OKS quartiles, AP deltas)

struct ImpactStats {
    ErrorKind kind = ErrorKind::Good;
    std::int64_t corrected_keypoints = 0;
    double q1 = 0.0, median = 0.0, q3 = 0.0;  // OKS-delta quartiles over matched dets
    double ap_delta_50 = 0.0;
    double ap_delta_75 = 0.0;
};

namespace detail {

/// Linear-interpolation quantile (values need not be sorted).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

}  // namespace detail

/// Correct each error kind in isolation (baseline restored in between) and report
/// the distribution of OKS improvements plus AP improvements at .5 and .75.
inline std::vector<ImpactStats> separate_impact(const std::vector<Detection>& dets,
                                                const std::vector<GtInstance>& gts,
                                                const std::vector<MatchSet>& matches,
                                                const std::vector<LabeledDetection>& labeled,
                                                const KeypointSchema& schema,
                                                const EvalConfig& config, int n_threads = 1) {
    const double ap50_base = pr_and_ap(matches, dets, gts, 0.50, config).ap;
    const double ap75_base = pr_and_ap(matches, dets, gts, 0.75, config).ap;

    std::vector<ImpactStats> out;
    for (ErrorKind kind :
         {ErrorKind::Jitter, ErrorKind::Inversion, ErrorKind::Swap, ErrorKind::Miss}) {
        ImpactStats stats;
        stats.kind = kind;
        const CorrectionOutcome corrected =
            apply_correction(dets, gts, labeled, {kind}, schema, config);
        for (const LabeledDetection& ld : labeled)
            for (const KeypointErrorLabel& label : ld.labels)
                if (label.kind == kind) ++stats.corrected_keypoints;

        std::vector<double> deltas;
        deltas.reserve(corrected.deltas.size());
        for (const OksDelta& d : corrected.deltas) deltas.push_back(d.delta());
        stats.q1 = detail::quantile(deltas, 0.25);
        stats.median = detail::quantile(deltas, 0.50);
        stats.q3 = detail::quantile(deltas, 0.75);

        const std::vector<MatchSet> rematched =
            match_grouped(gts, corrected.dets, schema, config, n_threads);
        stats.ap_delta_50 = pr_and_ap(rematched, corrected.dets, gts, 0.50, config).ap - ap50_base;
        stats.ap_delta_75 = pr_and_ap(rematched, corrected.dets, gts, 0.75, config).ap - ap75_base;
        out.push_back(stats);
    }
    return out;
}

// ---------------------------------------------------------------------------
// progressive correction (fine-grained PR curves)

enum class Stage : int { Miss = 0, Swap, Inversion, Jitter, OptScore, RemoveBgFP, RemoveFN };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::Miss: return "miss";
        case Stage::Swap: return "swap";
        case Stage::Inversion: return "inversion";
        case Stage::Jitter: return "jitter";
        case Stage::OptScore: return "opt_score";
        case Stage::RemoveBgFP: return "remove_bg_fp";
        case Stage::RemoveFN: return "remove_fn";
    }
    return "?";
}

inline Stage stage_from_string(const std::string& name) {
    for (Stage s : {Stage::Miss, Stage::Swap, Stage::Inversion, Stage::Jitter, Stage::OptScore,
                    Stage::RemoveBgFP, Stage::RemoveFN})
        if (name == to_string(s)) return s;
    throw validation_error("unknown correction stage: " + name);
}

struct CorrectionPlan {
    std::vector<Stage> stages = {Stage::Miss,     Stage::Swap,       Stage::Inversion,
                                 Stage::Jitter,   Stage::OptScore,   Stage::RemoveBgFP,
                                 Stage::RemoveFN};
    double threshold = 0.75;

    void validate(const EvalConfig& config) const {
        std::set<Stage> seen;
        for (Stage s : stages)
            if (!seen.insert(s).second)
                throw validation_error(std::string("correction plan repeats stage ") +
                                       to_string(s));
        if (std::find(config.oks_thresholds.begin(), config.oks_thresholds.end(), threshold) ==
            config.oks_thresholds.end())
            throw validation_error("correction plan threshold must be one of the OKS thresholds");
    }
};

struct StageResult {
    Stage stage;
    EvalResult eval;
    double auc_gain = 0.0;  // AP increment over the previous stage
};

struct ProgressiveResult {
    EvalResult baseline;
    std::vector<StageResult> stages;
};

/// Evaluate the PR curve at plan.threshold after each cumulative stage. Keypoint
/// labels come from the baseline matching once; every stage re-matches and
/// re-evaluates the corrected detections from scratch.
inline ProgressiveResult progressive_pr(const std::vector<Detection>& dets,
                                        const std::vector<GtInstance>& gts,
                                        const CorrectionPlan& plan, const KeypointSchema& schema,
                                        const EvalConfig& config, int n_threads = 1) {
    plan.validate(config);
    const std::vector<MatchSet> baseline_matches =
        match_grouped(gts, dets, schema, config, n_threads);
    const std::vector<LabeledDetection> labeled =
        classify_matches(baseline_matches, dets, gts, schema, config, n_threads);

    ProgressiveResult out;
    out.baseline = pr_and_ap(baseline_matches, dets, gts, plan.threshold, config);

    std::set<ErrorKind> kinds;
    bool opt_score = false;
    LedgerOptions opt;
    double prev_ap = out.baseline.ap;
    for (Stage stage : plan.stages) {
        switch (stage) {
            case Stage::Miss: kinds.insert(ErrorKind::Miss); break;
            case Stage::Swap: kinds.insert(ErrorKind::Swap); break;
            case Stage::Inversion: kinds.insert(ErrorKind::Inversion); break;
            case Stage::Jitter: kinds.insert(ErrorKind::Jitter); break;
            case Stage::OptScore: opt_score = true; break;
            case Stage::RemoveBgFP: opt.drop_fp_at = plan.threshold; break;
            case Stage::RemoveFN: opt.drop_fn_at = plan.threshold; break;
        }
        std::vector<Detection> current =
            apply_correction(dets, gts, labeled, kinds, schema, config).dets;
        if (opt_score) current = optimal_rescore(current, gts, schema, n_threads);
        const std::vector<MatchSet> rematched =
            match_grouped(gts, current, schema, config, n_threads);
        const EvalLedger ledger = build_ledger(rematched, current, gts, config, opt);
        StageResult sr{stage, pr_and_ap_allowing_empty(ledger, plan.threshold, config), 0.0};
        sr.auc_gain = sr.eval.ap - prev_ap;
        prev_ap = sr.eval.ap;
        out.stages.push_back(std::move(sr));
    }
    return out;
}

}  // namespace kptdiag
