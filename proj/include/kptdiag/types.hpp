#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kptdiag {

/// Thrown when an input file cannot be read or written.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an input file parses but violates the data contract
/// (wrong keypoint count, duplicate ids, non-finite score, ...).
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when there is nothing to evaluate (no non-excluded ground truth).
struct empty_input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }

/// COCO visibility flag: 0 = unlabeled, 1 = labeled but occluded, 2 = labeled and visible.
/// Only v > 0 participates in any similarity computation.
enum Visibility : int {
    kUnlabeled = 0,
    kLabeledOccluded = 1,
    kLabeledVisible = 2,
};

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    int visibility = kUnlabeled;

    bool labeled() const { return visibility > 0; }
    Point pos() const { return {x, y}; }
};

inline bool operator==(const Keypoint& a, const Keypoint& b) {
    return a.x == b.x && a.y == b.y && a.visibility == b.visibility;
}

/// Polygon segmentation: list of rings, each a flat [x0,y0,x1,y1,...] list.
using PolygonMask = std::vector<std::vector<double>>;

/// Uncompressed COCO run-length mask (column-major runs over a h*w grid,
/// starting with the background run).
struct RleMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint64_t> counts;

    friend bool operator==(const RleMask&, const RleMask&) = default;
};

/// Compressed RLE is carried through untouched; rasterization falls back to the bbox.
struct CompressedRleMask {
    int height = 0;
    int width = 0;
    std::string counts;

    friend bool operator==(const CompressedRleMask&, const CompressedRleMask&) = default;
};

using Segmentation = std::variant<std::monostate, PolygonMask, RleMask, CompressedRleMask>;

/// One annotated person instance.
struct GtInstance {
    std::int64_t id = 0;
    std::int64_t image_id = 0;
    std::vector<Keypoint> keypoints;
    double area = 0.0;                 // annotated pixel area; instance scale is sqrt(area)
    std::array<double, 4> bbox{};      // x, y, w, h
    Segmentation segmentation;
    bool iscrowd = false;
    int num_visible = 0;               // |{i : v_i > 0}|, derived at load

    /// Crowd regions and instances without a single labeled keypoint are kept in the
    /// dataset but never matched, classified, or binned.
    bool excluded() const { return iscrowd || num_visible == 0; }

    double scale() const { return std::sqrt(area); }

    friend bool operator==(const GtInstance&, const GtInstance&) = default;
};

/// One predicted person instance.
struct Detection {
    std::int64_t id = 0;
    std::int64_t image_id = 0;
    std::vector<Point> keypoints;
    double score = 0.0;
    /// Per-keypoint confidences from the results file's third slot, when present.
    std::vector<double> keypoint_scores;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct ImageRecord {
    std::int64_t id = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Keypoint vocabulary: names, left/right counterpart pairing, per-type similarity
/// constants, and the body-part groupings used by the report tables.
struct KeypointSchema {
    std::vector<std::string> names;
    std::vector<int> counterpart;      // index of the paired part, -1 if none
    std::vector<double> k_constants;   // per-type Gaussian constant k_i, all > 0
    std::vector<std::size_t> face_group;
    std::vector<std::size_t> upper_group;
    std::vector<std::size_t> torso_group;
    std::vector<std::size_t> lower_group;

    std::size_t size() const { return names.size(); }

    bool has_counterpart(std::size_t i) const {
        return i < counterpart.size() && counterpart[i] >= 0;
    }

    void validate() const {
        const std::size_t k = size();
        if (k == 0) throw validation_error("schema: empty keypoint list");
        if (counterpart.size() != k || k_constants.size() != k)
            throw validation_error("schema: names/counterpart/k_constants lengths differ");
        for (std::size_t i = 0; i < k; ++i) {
            if (!(k_constants[i] > 0.0))
                throw validation_error("schema: k_constants must be positive (" + names[i] + ")");
            const int c = counterpart[i];
            if (c < -1 || c >= static_cast<int>(k))
                throw validation_error("schema: counterpart index out of range for " + names[i]);
            if (c >= 0 && counterpart[static_cast<std::size_t>(c)] != static_cast<int>(i))
                throw validation_error("schema: counterpart map is not symmetric at " + names[i]);
            if (c == static_cast<int>(i))
                throw validation_error("schema: keypoint cannot be its own counterpart: " + names[i]);
        }
        for (const auto* group : {&face_group, &upper_group, &torso_group, &lower_group})
            for (std::size_t idx : *group)
                if (idx >= k) throw validation_error("schema: group index out of range");
    }
};

/// Evaluation parameters. Defaults follow the COCO keypoint protocol:
/// OKS thresholds .5:.05:.95, the .5/.85 ks bands for the error taxonomy,
/// and 101-point interpolated AP.
struct EvalConfig {
    std::vector<double> oks_thresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                          0.75, 0.80, 0.85, 0.90, 0.95};
    double good_threshold = 0.85;
    double jitter_threshold = 0.50;
    double proximity_threshold = 0.10;
    int max_detections_per_image = 20;
    static constexpr int recall_points = 101;

    void validate() const {
        if (oks_thresholds.empty())
            throw validation_error("config: oks_thresholds empty");
        double prev = 0.0;
        for (double t : oks_thresholds) {
            if (!(t > prev && t <= 1.0))
                throw validation_error("config: oks_thresholds must be strictly increasing in (0,1]");
            prev = t;
        }
        if (!(jitter_threshold > 0.0 && jitter_threshold < good_threshold && good_threshold <= 1.0))
            throw validation_error("config: need 0 < jitter_threshold < good_threshold <= 1");
        if (max_detections_per_image < 1)
            throw validation_error("config: max_detections_per_image must be >= 1");
        if (!(proximity_threshold > 0.0 && proximity_threshold < 1.0))
            throw validation_error("config: proximity_threshold must be in (0,1)");
    }

    /// The fixed recall grid {0, .01, ..., 1} precision is averaged over.
    static std::vector<double> recall_grid() {
        std::vector<double> g(recall_points);
        for (int i = 0; i < recall_points; ++i) g[i] = i / 100.0;
        return g;
    }
};

/// The 17-keypoint COCO person schema. The k constants are the published COCO
/// evaluation values (twice the per-type annotator sigma); data/coco17_schema.json
/// ships the same values for use with --schema.
inline KeypointSchema coco17_schema() {
    KeypointSchema s;
    s.names = {"nose",
               "left_eye",      "right_eye",
               "left_ear",      "right_ear",
               "left_shoulder", "right_shoulder",
               "left_elbow",    "right_elbow",
               "left_wrist",    "right_wrist",
               "left_hip",      "right_hip",
               "left_knee",     "right_knee",
               "left_ankle",    "right_ankle"};
    s.counterpart = {-1, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15};
    s.k_constants = {0.052,
                     0.050, 0.050,
                     0.070, 0.070,
                     0.158, 0.158,
                     0.144, 0.144,
                     0.124, 0.124,
                     0.214, 0.214,
                     0.174, 0.174,
                     0.178, 0.178};
    s.face_group = {0, 1, 2, 3, 4};
    s.upper_group = {5, 6, 7, 8, 9, 10};
    s.torso_group = {11, 12};
    s.lower_group = {13, 14, 15, 16};
    s.validate();
    return s;
}

}  // namespace kptdiag
