#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kptdiag/geometry.hpp"
#include "kptdiag/matching.hpp"
#include "kptdiag/parallel.hpp"
#include "kptdiag/taxonomy.hpp"
#include "kptdiag/types.hpp"

namespace kptdiag {

/// Bin layout for the occlusion/crowding and size benchmarks. Defaults give the
/// twelve visibility x overlap cells and four size groups.
struct BenchmarkSpec {
    std::vector<std::pair<int, int>> visibility_bins = {{1, 5}, {6, 10}, {11, 15}, {16, 17}};
    std::vector<std::pair<int, int>> overlap_bins = {
        {0, 0}, {1, 2}, {3, std::numeric_limits<int>::max()}};
    std::vector<std::pair<double, double>> size_bins = {
        {32.0 * 32.0, 64.0 * 64.0},
        {64.0 * 64.0, 96.0 * 96.0},
        {96.0 * 96.0, 128.0 * 128.0},
        {128.0 * 128.0, std::numeric_limits<double>::infinity()}};
    double iou_threshold = 0.1;

    void validate() const {
        if (visibility_bins.empty() || overlap_bins.empty() || size_bins.empty())
            throw validation_error("benchmark spec: empty bin list");
        for (std::size_t i = 0; i < visibility_bins.size(); ++i) {
            const auto [lo, hi] = visibility_bins[i];
            if (lo > hi || lo < 1) throw validation_error("benchmark spec: bad visibility bin");
            if (i > 0 && lo != visibility_bins[i - 1].second + 1)
                throw validation_error("benchmark spec: visibility bins must be contiguous");
        }
        for (std::size_t i = 0; i < overlap_bins.size(); ++i) {
            const auto [lo, hi] = overlap_bins[i];
            if (lo > hi || lo < 0) throw validation_error("benchmark spec: bad overlap bin");
            if (i == 0 && lo != 0)
                throw validation_error("benchmark spec: overlap bins must start at 0");
            if (i > 0 && lo != overlap_bins[i - 1].second + 1)
                throw validation_error("benchmark spec: overlap bins must be contiguous");
        }
        for (std::size_t i = 0; i < size_bins.size(); ++i) {
            const auto [lo, hi] = size_bins[i];
            if (!(lo < hi) || lo < 0.0) throw validation_error("benchmark spec: bad size bin");
            if (i > 0 && lo != size_bins[i - 1].second)
                throw validation_error("benchmark spec: size bins must be contiguous");
        }
        if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
            throw validation_error("benchmark spec: iou_threshold must be in (0,1]");
    }
};

/// Number of other non-excluded people in the image whose bbox IoU with this gt
/// reaches the threshold.
inline int overlap_count(const GtInstance& gt, const std::vector<GtInstance>& gts_in_image,
                         double iou_threshold = 0.1) {
    int n = 0;
    const Box own = to_box(gt.bbox);
    for (const GtInstance& other : gts_in_image) {
        if (other.id == gt.id || other.excluded()) continue;
        if (box_iou(own, to_box(other.bbox)) >= iou_threshold) ++n;
    }
    return n;
}

struct BenchmarkCell {
    std::string id;
    std::vector<std::int64_t> gt_ids;  // ascending
};

/// Disjoint assignment of each non-excluded gt to one visibility x overlap cell
/// (cells ordered visibility-major) and, when large enough, one size cell.
struct BenchmarkPartition {
    std::vector<BenchmarkCell> occlusion_crowding;
    std::vector<BenchmarkCell> size;
};

namespace detail {

inline std::string range_tag(int lo, int hi) {
    if (lo == hi) return std::to_string(lo);
    if (hi == std::numeric_limits<int>::max()) return std::to_string(lo) + "+";
    return std::to_string(lo) + "-" + std::to_string(hi);
}

inline std::string size_tag(double lo, double hi) {
    const auto side = [](double area) { return std::to_string(static_cast<int>(std::sqrt(area))); };
    if (hi == std::numeric_limits<double>::infinity()) return side(lo) + "+";
    return side(lo) + "-" + side(hi);
}

}  // namespace detail

inline BenchmarkPartition partition(const std::vector<GtInstance>& gts,
                                    const BenchmarkSpec& spec) {
    spec.validate();
    BenchmarkPartition part;
    for (const auto& [vlo, vhi] : spec.visibility_bins)
        for (const auto& [olo, ohi] : spec.overlap_bins)
            part.occlusion_crowding.push_back(
                {"vis" + detail::range_tag(vlo, vhi) + "_ovl" + detail::range_tag(olo, ohi), {}});
    for (const auto& [slo, shi] : spec.size_bins)
        part.size.push_back({"size" + detail::size_tag(slo, shi), {}});

    std::unordered_map<std::int64_t, std::vector<GtInstance>> by_image;
    for (const GtInstance& g : gts) by_image[g.image_id].push_back(g);

    for (const GtInstance& g : gts) {
        if (g.excluded()) continue;
        int vbin = -1;
        for (std::size_t i = 0; i < spec.visibility_bins.size(); ++i)
            if (g.num_visible >= spec.visibility_bins[i].first &&
                g.num_visible <= spec.visibility_bins[i].second)
                vbin = static_cast<int>(i);
        const int overlaps = overlap_count(g, by_image.at(g.image_id), spec.iou_threshold);
        int obin = -1;
        for (std::size_t i = 0; i < spec.overlap_bins.size(); ++i)
            if (overlaps >= spec.overlap_bins[i].first && overlaps <= spec.overlap_bins[i].second)
                obin = static_cast<int>(i);
        if (vbin >= 0 && obin >= 0)
            part.occlusion_crowding[vbin * spec.overlap_bins.size() + obin].gt_ids.push_back(g.id);

        for (std::size_t i = 0; i < spec.size_bins.size(); ++i)
            if (g.area >= spec.size_bins[i].first && g.area < spec.size_bins[i].second)
                part.size[i].gt_ids.push_back(g.id);
    }
    for (BenchmarkCell& c : part.occlusion_crowding) std::sort(c.gt_ids.begin(), c.gt_ids.end());
    for (BenchmarkCell& c : part.size) std::sort(c.gt_ids.begin(), c.gt_ids.end());
    return part;
}

/// Per-cell evaluation with ignore semantics (out-of-cell gts absorb their
/// matches silently) plus the error composition of the cell's matched detections.
struct BenchmarkEval {
    std::string cell_id;
    std::int64_t gt_count = 0;
    bool empty = false;
    DatasetEval eval;            // all thresholds, cell-restricted ledger
    BreakdownRow errors;         // taxonomy counts over the cell's matched detections
};

inline BenchmarkEval benchmark_eval(const std::vector<MatchSet>& matches,
                                    const std::vector<Detection>& dets,
                                    const std::vector<GtInstance>& gts,
                                    const std::vector<LabeledDetection>& labeled,
                                    const BenchmarkCell& cell, const KeypointSchema& /*schema*/,
                                    const EvalConfig& config) {
    BenchmarkEval out;
    out.cell_id = cell.id;
    out.gt_count = static_cast<std::int64_t>(cell.gt_ids.size());
    out.errors.name = cell.id;
    if (cell.gt_ids.empty()) {
        out.empty = true;
        return out;
    }
    const std::unordered_set<std::int64_t> cell_ids(cell.gt_ids.begin(), cell.gt_ids.end());
    LedgerOptions opt;
    opt.cell_gt_ids = &cell_ids;
    out.eval = evaluate_ledger(build_ledger(matches, dets, gts, config, opt), config);

    for (const LabeledDetection& ld : labeled) {
        if (!cell_ids.count(ld.gt_id)) continue;
        for (const KeypointErrorLabel& label : ld.labels) {
            if (label.kind == ErrorKind::Unclassifiable)
                ++out.errors.unclassifiable;
            else
                ++out.errors.counts[static_cast<int>(label.kind)];
        }
    }
    return out;
}

/// S = max - min across cells; I = max - overall. Cells must be non-empty.
struct SensitivityImpact {
    double sensitivity = 0.0;
    double impact = 0.0;
};

inline SensitivityImpact sensitivity_impact(const std::vector<double>& cell_values,
                                            double overall) {
    if (cell_values.empty())
        throw std::invalid_argument("sensitivity_impact: need at least one cell value");
    const auto [mn, mx] = std::minmax_element(cell_values.begin(), cell_values.end());
    return {*mx - *mn, *mx - overall};
}

/// Everything the benchmarks section of a report needs.
struct BenchmarkReport {
    BenchmarkPartition cells;
    std::vector<BenchmarkEval> occlusion_crowding;
    std::vector<BenchmarkEval> size;
    double overall_coco_ap = 0.0;
    SensitivityImpact occlusion_crowding_si;  // over non-empty cells' cocoAP
    SensitivityImpact size_si;
};

inline BenchmarkReport run_benchmarks(const std::vector<MatchSet>& matches,
                                      const std::vector<Detection>& dets,
                                      const std::vector<GtInstance>& gts,
                                      const std::vector<LabeledDetection>& labeled,
                                      const KeypointSchema& schema, const EvalConfig& config,
                                      const BenchmarkSpec& spec = {}, int n_threads = 1) {
    BenchmarkReport report;
    report.cells = partition(gts, spec);
    report.overall_coco_ap = evaluate_dataset(matches, dets, gts, config).coco_ap;

    auto eval_cells = [&](const std::vector<BenchmarkCell>& cells) {
        std::vector<BenchmarkEval> out(cells.size());
        parallel_for(cells.size(), n_threads, [&](std::size_t i) {
            out[i] = benchmark_eval(matches, dets, gts, labeled, cells[i], schema, config);
        });
        return out;
    };
    report.occlusion_crowding = eval_cells(report.cells.occlusion_crowding);
    report.size = eval_cells(report.cells.size);

    auto si_of = [&](const std::vector<BenchmarkEval>& evals) -> SensitivityImpact {
        std::vector<double> values;
        for (const BenchmarkEval& e : evals)
            if (!e.empty) values.push_back(e.eval.coco_ap);
        if (values.empty()) return {};
        return sensitivity_impact(values, report.overall_coco_ap);
    };
    report.occlusion_crowding_si = si_of(report.occlusion_crowding);
    report.size_si = si_of(report.size);
    return report;
}

}  // namespace kptdiag
