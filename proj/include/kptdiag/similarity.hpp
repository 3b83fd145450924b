#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kptdiag/types.hpp"

namespace kptdiag {

/// Keypoint similarity: un-normalized Gaussian of the prediction/ground-truth
/// distance, ks = exp(-d^2 / (2 s^2 k^2)). `scale` is the instance scale
/// s = sqrt(area), so s^2 in the exponent is the annotated pixel area.
inline double keypoint_similarity(Point pred, Point gt, double scale, double k) {
    if (!(scale > 0.0)) throw std::invalid_argument("keypoint_similarity: scale must be > 0");
    if (!(k > 0.0)) throw std::invalid_argument("keypoint_similarity: k must be > 0");
    const double dx = pred.x - gt.x;
    const double dy = pred.y - gt.y;
    const double denom = 2.0 * scale * scale * k * k;
    return std::exp(-(dx * dx + dy * dy) / denom);
}

/// Radius of the ks = target circle in the image plane:
/// r = s * k * sqrt(-2 ln target). Inverse of keypoint_similarity in distance.
inline double ks_radius(double target, double scale, double k) {
    if (!(target > 0.0 && target < 1.0))
        throw std::invalid_argument("ks_radius: target must be in (0,1)");
    if (!(scale > 0.0)) throw std::invalid_argument("ks_radius: scale must be > 0");
    if (!(k > 0.0)) throw std::invalid_argument("ks_radius: k must be > 0");
    return scale * k * std::sqrt(-2.0 * std::log(target));
}

/// Object Keypoint Similarity: mean ks over the ground truth's labeled keypoints
/// (v > 0). Unlabeled parts do not contribute. Undefined when nothing is labeled.
inline double oks(const Detection& det, const GtInstance& gt, const KeypointSchema& schema) {
    if (gt.num_visible <= 0)
        throw std::invalid_argument("oks: ground truth has no labeled keypoints");
    if (det.keypoints.size() != schema.size() || gt.keypoints.size() != schema.size())
        throw std::invalid_argument("oks: keypoint count does not match schema");
    const double s = gt.scale();
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (!gt.keypoints[i].labeled()) continue;
        sum += keypoint_similarity(det.keypoints[i], gt.keypoints[i].pos(), s, schema.k_constants[i]);
        ++n;
    }
    return sum / n;
}

/// Result of estimating per-type constants from redundant annotations.
struct CalibrationResult {
    /// k_i = 2 * sigma_i; missing where no keypoint type had two labeled annotations
    /// of the same person.
    std::vector<std::optional<double>> k;
    /// Set where the pooled offsets were identically zero (annotators agreed exactly);
    /// the estimate is 0 and unusable as a similarity constant.
    std::vector<bool> degenerate;
    /// Samples pooled per keypoint type (2 per annotation beyond the first in a group).
    std::vector<std::size_t> dof;
};

/// Estimate per-keypoint-type constants from groups of redundant annotations of the
/// same person. For each type, offsets of each annotation from the group mean are
/// normalized by the group reference scale sqrt(mean area) and pooled as a per-axis
/// variance (x and y together, m-1 correction per group); k_i = 2 * sigma_i.
inline CalibrationResult calibrate_constants(const std::vector<std::vector<GtInstance>>& groups,
                                             std::size_t n_keypoints) {
    CalibrationResult out;
    out.k.resize(n_keypoints);
    out.degenerate.assign(n_keypoints, false);
    out.dof.assign(n_keypoints, 0);
    std::vector<double> sq_sum(n_keypoints, 0.0);

    for (const auto& group : groups) {
        if (group.size() < 2) continue;
        double mean_area = 0.0;
        for (const GtInstance& a : group) {
            if (a.keypoints.size() != n_keypoints)
                throw std::invalid_argument("calibrate_constants: keypoint count mismatch in group");
            mean_area += a.area;
        }
        mean_area /= group.size();
        if (!(mean_area > 0.0))
            throw std::invalid_argument("calibrate_constants: group reference area must be > 0");
        const double s = std::sqrt(mean_area);

        for (std::size_t i = 0; i < n_keypoints; ++i) {
            double mx = 0.0, my = 0.0;
            std::size_t m = 0;
            for (const GtInstance& a : group) {
                if (!a.keypoints[i].labeled()) continue;
                mx += a.keypoints[i].x;
                my += a.keypoints[i].y;
                ++m;
            }
            if (m < 2) continue;
            mx /= m;
            my /= m;
            for (const GtInstance& a : group) {
                if (!a.keypoints[i].labeled()) continue;
                const double dx = (a.keypoints[i].x - mx) / s;
                const double dy = (a.keypoints[i].y - my) / s;
                sq_sum[i] += dx * dx + dy * dy;
            }
            out.dof[i] += 2 * (m - 1);
        }
    }

    for (std::size_t i = 0; i < n_keypoints; ++i) {
        if (out.dof[i] == 0) continue;  // k[i] stays missing
        const double sigma = std::sqrt(sq_sum[i] / out.dof[i]);
        out.k[i] = 2.0 * sigma;
        if (sigma == 0.0) out.degenerate[i] = true;
    }
    return out;
}

}  // namespace kptdiag
