#pragma once

// Shared fixtures and independent oracles. The oracles re-derive matching and
// AP from the written contract (rank by score, best free gt, prefix scan over
// the recall grid) rather than reusing the library's ledger machinery, so
// agreement is meaningful.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "kptdiag/kptdiag.hpp"

namespace testutil {

inline constexpr double kIdentityTol = 1e-12;  // similarity identities
inline constexpr double kGoldenTol = 1e-9;     // hand-derived AP goldens

/// 3-part schema: one unpaired part plus a counterpart pair. Cheap enough for
/// exhaustive sweeps while still exercising inversion geometry.
inline kptdiag::KeypointSchema mini_schema() {
    kptdiag::KeypointSchema s;
    s.names = {"head", "left_tip", "right_tip"};
    s.counterpart = {-1, 2, 1};
    s.k_constants = {0.08, 0.12, 0.12};
    s.face_group = {0};
    s.upper_group = {1, 2};
    s.validate();
    return s;
}

struct Scene {
    std::vector<kptdiag::ImageRecord> images;
    std::vector<kptdiag::GtInstance> gts;
    std::vector<kptdiag::Detection> dets;
};

/// Random single-image geometry: instances scattered in a 1000x1000 frame with
/// overlapping neighborhoods, discrete score levels (forcing ties), a sprinkle
/// of crowd and unlabeled ground truths, and detections that range from spot-on
/// to background noise.
inline Scene random_scene(std::mt19937_64& rng, int n_gts, int n_dets,
                          const kptdiag::KeypointSchema& schema, std::int64_t image_id = 1,
                          std::int64_t id_base = 0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t K = schema.size();
    Scene sc;
    sc.images.push_back({image_id, 1000, 1000});

    for (int g = 0; g < n_gts; ++g) {
        kptdiag::GtInstance gt;
        gt.id = id_base + g + 1;
        gt.image_id = image_id;
        const double s = 20.0 + unit(rng) * 40.0;
        gt.area = s * s;
        const double cx = 150.0 + unit(rng) * 700.0;
        const double cy = 150.0 + unit(rng) * 700.0;
        gt.keypoints.resize(K);
        gt.num_visible = 0;
        const bool unlabeled = unit(rng) < 0.05;
        for (std::size_t i = 0; i < K; ++i) {
            const double x = cx + (unit(rng) - 0.5) * 2.0 * s;
            const double y = cy + (unit(rng) - 0.5) * 2.0 * s;
            int v = unlabeled ? 0 : (unit(rng) < 0.15 ? 0 : (unit(rng) < 0.5 ? 1 : 2));
            gt.keypoints[i] = {x, y, v};
            if (v > 0) ++gt.num_visible;
        }
        if (!unlabeled && gt.num_visible == 0) {
            gt.keypoints[0].visibility = 2;  // keep at least one labeled part
            gt.num_visible = 1;
        }
        gt.bbox = {cx - s, cy - s, 2.0 * s, 2.0 * s};
        gt.iscrowd = unit(rng) < 0.1;
        sc.gts.push_back(std::move(gt));
    }

    std::uniform_int_distribution<int> score_level(1, 9);
    for (int d = 0; d < n_dets; ++d) {
        kptdiag::Detection det;
        det.id = id_base + 100 + d;
        det.image_id = image_id;
        det.score = score_level(rng) / 10.0;  // discrete levels force ties
        det.keypoints.resize(K);
        if (!sc.gts.empty() && unit(rng) < 0.8) {
            const auto& gt = sc.gts[static_cast<std::size_t>(unit(rng) * sc.gts.size())];
            const double s = gt.scale();
            for (std::size_t i = 0; i < K; ++i) {
                const double sigma = s * schema.k_constants[i] * (0.2 + 2.0 * unit(rng));
                det.keypoints[i] = {gt.keypoints[i].x + (unit(rng) - 0.5) * 2.0 * sigma,
                                    gt.keypoints[i].y + (unit(rng) - 0.5) * 2.0 * sigma};
            }
        } else {
            for (std::size_t i = 0; i < K; ++i)
                det.keypoints[i] = {unit(rng) * 1000.0, unit(rng) * 1000.0};
        }
        sc.dets.push_back(std::move(det));
    }
    return sc;
}

/// Literal transcription of the matching rule: walk detections in
/// (score desc, id asc) order; each takes the still-free non-excluded gt with
/// the highest positive OKS, smaller gt id on ties.
inline kptdiag::MatchSet oracle_match(const std::vector<kptdiag::Detection>& dets_in,
                                      const std::vector<kptdiag::GtInstance>& gts_in,
                                      const kptdiag::KeypointSchema& schema) {
    auto dets = dets_in;
    std::sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    auto gts = gts_in;
    std::sort(gts.begin(), gts.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    kptdiag::MatchSet ms;
    if (!dets.empty())
        ms.image_id = dets.front().image_id;
    else if (!gts.empty())
        ms.image_id = gts.front().image_id;

    std::set<std::int64_t> taken;
    for (const auto& det : dets) {
        double best = 0.0;
        const kptdiag::GtInstance* best_gt = nullptr;
        for (const auto& gt : gts) {
            if (gt.excluded() || taken.count(gt.id)) continue;
            const double o = kptdiag::oks(det, gt, schema);
            if (o > best) {  // strict: first (lowest-id) maximum wins
                best = o;
                best_gt = &gt;
            }
        }
        if (best_gt) {
            taken.insert(best_gt->id);
            ms.pairs.push_back({det.id, best_gt->id, best, 0});
        } else {
            ms.unmatched_detections.push_back(det.id);
        }
    }
    for (const auto& gt : gts)
        if (!gt.excluded() && !taken.count(gt.id)) ms.unmatched_gts.push_back(gt.id);
    return ms;
}

inline bool same_match(const kptdiag::MatchSet& a, const kptdiag::MatchSet& b) {
    if (a.pairs.size() != b.pairs.size()) return false;
    for (std::size_t i = 0; i < a.pairs.size(); ++i)
        if (a.pairs[i].det_id != b.pairs[i].det_id || a.pairs[i].gt_id != b.pairs[i].gt_id ||
            a.pairs[i].oks != b.pairs[i].oks)
            return false;
    return a.unmatched_detections == b.unmatched_detections && a.unmatched_gts == b.unmatched_gts;
}

/// From-scratch 101-point AP: per-image top-k retention, oracle matching, then
/// a direct max-precision scan per recall grid point.
inline double oracle_ap(const Scene& scene, const kptdiag::KeypointSchema& schema, double t,
                        const kptdiag::EvalConfig& config) {
    std::map<std::int64_t, std::vector<kptdiag::Detection>> by_image;
    for (const auto& d : scene.dets) by_image[d.image_id].push_back(d);
    std::map<std::int64_t, std::vector<kptdiag::GtInstance>> gts_by_image;
    for (const auto& g : scene.gts) gts_by_image[g.image_id].push_back(g);

    struct Entry {
        double score;
        std::int64_t det_id;
        bool tp;
    };
    std::vector<Entry> entries;
    std::int64_t n_gts = 0;
    for (const auto& g : scene.gts)
        if (!g.excluded()) ++n_gts;

    for (auto& [image_id, dets] : by_image) {
        std::sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        if (dets.size() > static_cast<std::size_t>(config.max_detections_per_image))
            dets.resize(static_cast<std::size_t>(config.max_detections_per_image));
        const auto& gts = gts_by_image.count(image_id) ? gts_by_image[image_id]
                                                       : std::vector<kptdiag::GtInstance>{};
        const auto ms = oracle_match(dets, gts, schema);
        std::map<std::int64_t, double> matched_oks;
        for (const auto& p : ms.pairs) matched_oks[p.det_id] = p.oks;
        for (const auto& d : dets) {
            const auto it = matched_oks.find(d.id);
            entries.push_back({d.score, d.id, it != matched_oks.end() && it->second >= t});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.det_id < b.det_id;
    });

    std::vector<double> precision, recall;
    std::int64_t tp = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].tp) ++tp;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
        recall.push_back(n_gts > 0 ? static_cast<double>(tp) / static_cast<double>(n_gts) : 0.0);
    }

    double sum = 0.0;
    for (int j = 0; j < kptdiag::EvalConfig::recall_points; ++j) {
        const double r = static_cast<double>(j) / (kptdiag::EvalConfig::recall_points - 1);
        double best = 0.0;
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (recall[i] >= r) best = std::max(best, precision[i]);
        sum += best;
    }
    return sum / kptdiag::EvalConfig::recall_points;
}

}  // namespace testutil
