#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kptdiag/matching.hpp"
#include "kptdiag/similarity.hpp"
#include "kptdiag/types.hpp"

namespace kptdiag {

enum class ErrorKind : int { Good = 0, Jitter, Inversion, Swap, Miss, Unclassifiable };

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Good: return "good";
        case ErrorKind::Jitter: return "jitter";
        case ErrorKind::Inversion: return "inversion";
        case ErrorKind::Swap: return "swap";
        case ErrorKind::Miss: return "miss";
        case ErrorKind::Unclassifiable: return "unclassifiable";
    }
    return "?";
}

/// Per-keypoint diagnosis of a matched detection.
struct KeypointErrorLabel {
    ErrorKind kind = ErrorKind::Unclassifiable;
    double ks_self = 0.0;  // ks to the matched gt part; 0 when Unclassifiable
    /// The confused part (gt person id, keypoint index); present for Inversion/Swap.
    std::optional<std::pair<std::int64_t, int>> wrong_part;
    std::optional<double> ks_wrong;
    /// Ground-truth location of the wrong part, kept for the correction step.
    std::optional<Point> wrong_pos;
};

/// Diagnose predicted keypoint i of a detection matched to `gt`. Good/Jitter come
/// from ks to the part itself; below that, the counterpart on the same person
/// (inversion) competes with part i and its counterpart on every other person
/// (swap); candidates score with the candidate person's own scale. No candidate
/// at ks >= jitter_threshold means the part was missed.
inline KeypointErrorLabel classify_keypoint(const Detection& det, const GtInstance& gt,
                                            const std::vector<GtInstance>& gts_in_image,
                                            std::size_t i, const KeypointSchema& schema,
                                            const EvalConfig& config) {
    KeypointErrorLabel label;
    if (i >= schema.size() || det.keypoints.size() != schema.size())
        throw std::invalid_argument("classify_keypoint: index/schema mismatch");
    if (!gt.keypoints[i].labeled()) return label;  // Unclassifiable

    const Point pred = det.keypoints[i];
    label.ks_self =
        keypoint_similarity(pred, gt.keypoints[i].pos(), gt.scale(), schema.k_constants[i]);
    if (label.ks_self >= config.good_threshold) {
        label.kind = ErrorKind::Good;
        return label;
    }
    if (label.ks_self >= config.jitter_threshold) {
        label.kind = ErrorKind::Jitter;
        return label;
    }

    struct Candidate {
        double ks;
        bool inversion;
        std::int64_t person;
        int index;
        Point pos;
    };
    std::optional<Candidate> best;
    auto consider = [&](const Candidate& c) {
        if (c.ks < config.jitter_threshold) return;
        if (!best) {
            best = c;
            return;
        }
        if (c.ks != best->ks) {
            if (c.ks > best->ks) best = c;
        } else if (c.inversion != best->inversion) {
            if (c.inversion) best = c;  // inversion wins ties
        } else if (c.person != best->person) {
            if (c.person < best->person) best = c;
        } else if (c.index < best->index) {
            best = c;
        }
    };

    const int counterpart = schema.counterpart[i];
    if (counterpart >= 0 && gt.keypoints[counterpart].labeled()) {
        const Point pos = gt.keypoints[counterpart].pos();
        consider({keypoint_similarity(pred, pos, gt.scale(), schema.k_constants[counterpart]),
                  true, gt.id, counterpart, pos});
    }
    for (const GtInstance& other : gts_in_image) {
        if (other.id == gt.id || other.excluded()) continue;
        for (int idx : {static_cast<int>(i), counterpart}) {
            if (idx < 0 || !other.keypoints[idx].labeled()) continue;
            const Point pos = other.keypoints[idx].pos();
            consider({keypoint_similarity(pred, pos, other.scale(), schema.k_constants[idx]),
                      false, other.id, idx, pos});
        }
    }

    if (best) {
        label.kind = best->inversion ? ErrorKind::Inversion : ErrorKind::Swap;
        label.wrong_part = {best->person, best->index};
        label.ks_wrong = best->ks;
        label.wrong_pos = best->pos;
    } else {
        label.kind = ErrorKind::Miss;
    }
    return label;
}

/// A matched detection with all of its keypoints diagnosed.
struct LabeledDetection {
    std::int64_t det_id = 0;
    std::int64_t gt_id = 0;
    std::int64_t image_id = 0;
    double oks = 0.0;
    std::vector<KeypointErrorLabel> labels;
};

/// Diagnose every matched pair of the dataset. Output ordering follows the match
/// sets (ascending image id, pairs in score order) regardless of thread count.
inline std::vector<LabeledDetection> classify_matches(const std::vector<MatchSet>& matches,
                                                      const std::vector<Detection>& dets,
                                                      const std::vector<GtInstance>& gts,
                                                      const KeypointSchema& schema,
                                                      const EvalConfig& config,
                                                      int n_threads = 1) {
    std::unordered_map<std::int64_t, const Detection*> det_by_id;
    for (const Detection& d : dets) det_by_id.emplace(d.id, &d);
    std::unordered_map<std::int64_t, const GtInstance*> gt_by_id;
    std::unordered_map<std::int64_t, std::vector<GtInstance>> gts_by_image;
    for (const GtInstance& g : gts) {
        gt_by_id.emplace(g.id, &g);
        gts_by_image[g.image_id].push_back(g);
    }
    static const std::vector<GtInstance> kNone;

    std::vector<std::vector<LabeledDetection>> buckets(matches.size());
    parallel_for(matches.size(), n_threads, [&](std::size_t m) {
        const MatchSet& ms = matches[m];
        const auto it = gts_by_image.find(ms.image_id);
        const std::vector<GtInstance>& in_image = it == gts_by_image.end() ? kNone : it->second;
        for (const MatchPair& p : ms.pairs) {
            const Detection& det = *det_by_id.at(p.det_id);
            const GtInstance& gt = *gt_by_id.at(p.gt_id);
            LabeledDetection ld{p.det_id, p.gt_id, ms.image_id, p.oks, {}};
            ld.labels.reserve(schema.size());
            for (std::size_t i = 0; i < schema.size(); ++i)
                ld.labels.push_back(classify_keypoint(det, gt, in_image, i, schema, config));
            buckets[m].push_back(std::move(ld));
        }
    });
    std::vector<LabeledDetection> out;
    for (auto& b : buckets)
        for (auto& ld : b) out.push_back(std::move(ld));
    return out;
}

// ---------------------------------------------------------------------------
// aggregation

struct BreakdownRow {
    std::string name;
    std::array<std::int64_t, 5> counts{};  // Good, Jitter, Inversion, Swap, Miss
    std::int64_t unclassifiable = 0;

    std::int64_t classifiable() const {
        std::int64_t n = 0;
        for (std::int64_t c : counts) n += c;
        return n;
    }
    /// Share of each kind among classifiable keypoints (zeros when empty).
    std::array<double, 5> frequencies() const {
        std::array<double, 5> f{};
        const std::int64_t n = classifiable();
        if (n == 0) return f;
        for (std::size_t k = 0; k < 5; ++k) f[k] = static_cast<double>(counts[k]) / n;
        return f;
    }
};

/// Error composition per keypoint type, per body group, and overall.
struct ErrorBreakdown {
    std::vector<BreakdownRow> per_type;
    std::vector<BreakdownRow> per_group;  // face, upper, torso, lower
    BreakdownRow overall;
};

inline ErrorBreakdown error_breakdown(const std::vector<LabeledDetection>& labeled,
                                      const KeypointSchema& schema) {
    ErrorBreakdown out;
    out.per_type.resize(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) out.per_type[i].name = schema.names[i];
    out.overall.name = "overall";

    for (const LabeledDetection& ld : labeled) {
        for (std::size_t i = 0; i < ld.labels.size(); ++i) {
            const ErrorKind kind = ld.labels[i].kind;
            if (kind == ErrorKind::Unclassifiable) {
                ++out.per_type[i].unclassifiable;
                ++out.overall.unclassifiable;
            } else {
                ++out.per_type[i].counts[static_cast<int>(kind)];
                ++out.overall.counts[static_cast<int>(kind)];
            }
        }
    }

    const std::pair<const char*, const std::vector<std::size_t>*> groups[] = {
        {"face", &schema.face_group},
        {"upper", &schema.upper_group},
        {"torso", &schema.torso_group},
        {"lower", &schema.lower_group}};
    for (const auto& [name, indices] : groups) {
        BreakdownRow row;
        row.name = name;
        for (std::size_t i : *indices) {
            for (std::size_t k = 0; k < 5; ++k) row.counts[k] += out.per_type[i].counts[k];
            row.unclassifiable += out.per_type[i].unclassifiable;
        }
        out.per_group.push_back(std::move(row));
    }
    return out;
}

}  // namespace kptdiag
