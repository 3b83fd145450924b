#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "kptdiag/background.hpp"
#include "kptdiag/benchmarks.hpp"
#include "kptdiag/correction.hpp"
#include "kptdiag/io.hpp"
#include "kptdiag/matching.hpp"
#include "kptdiag/scoring.hpp"
#include "kptdiag/svg.hpp"
#include "kptdiag/taxonomy.hpp"
#include "kptdiag/types.hpp"

namespace kptdiag {

inline constexpr int kSummarySchemaVersion = 1;

enum class ReportFormat : int { Json = 0, Csv, Both };

struct ReportOptions {
    EvalConfig config;
    CorrectionPlan plan;
    BenchmarkSpec benchmark_spec;
    ReportFormat format = ReportFormat::Both;
    int histogram_bins = 20;
    double nms_sigma = 0.5;
    int n_threads = 1;
};

/// Everything the report emitters need, computed once.
struct ReportData {
    KeypointSchema schema;
    std::size_t n_images = 0, n_gts = 0, n_dets = 0;
    DatasetEval eval;
    ErrorBreakdown breakdown;
    ProgressiveResult progressive;
    std::vector<ImpactStats> impacts;
    RescoreReport rescore;
    ScoreHistograms histograms;
    std::vector<BackgroundImpact> background;
    FpHistogram fp_histogram;
    FnHeatmap heatmap;
    ClutterStats clutter;
    BenchmarkReport benchmarks;
};

inline ReportData run_full_report(const std::vector<ImageRecord>& images,
                                  const std::vector<GtInstance>& gts,
                                  const std::vector<Detection>& dets,
                                  const KeypointSchema& schema, const ReportOptions& opt) {
    ReportData data;
    data.schema = schema;
    data.n_images = images.size();
    data.n_gts = gts.size();
    data.n_dets = dets.size();

    const auto matches = match_all(images, gts, dets, schema, opt.config, opt.n_threads);
    data.eval = evaluate_dataset(matches, dets, gts, opt.config);
    const auto labeled = classify_matches(matches, dets, gts, schema, opt.config, opt.n_threads);
    data.breakdown = error_breakdown(labeled, schema);
    data.progressive = progressive_pr(dets, gts, opt.plan, schema, opt.config, opt.n_threads);
    data.impacts = separate_impact(dets, gts, matches, labeled, schema, opt.config, opt.n_threads);
    data.rescore = rescore_report(dets, gts, schema, opt.config, opt.nms_sigma, opt.n_threads);
    data.histograms = score_histograms(dets, gts, schema, opt.config, opt.histogram_bins);
    data.background = background_impact(matches, dets, gts, opt.config);
    data.fp_histogram = high_conf_fp_histogram(matches, dets, opt.config);
    data.heatmap = fn_heatmap(gts, matches, images);
    data.clutter = clutter_stats(matches, gts, images);
    data.benchmarks =
        run_benchmarks(matches, dets, gts, labeled, schema, opt.config, opt.benchmark_spec,
                       opt.n_threads);
    return data;
}

namespace detail {

/// Shortest round-trip decimal form; used for CSV cells and digest numbers.
inline std::string num(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) return "0";
    return std::string(buf.data(), ptr);
}

inline std::string threshold_key(double t) {
    std::array<char, 16> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), t,
                                   std::chars_format::fixed, 2);
    (void)ec;
    return std::string(buf.data(), ptr);
}

inline void assert_finite(const nlohmann::json& j, const std::string& where) {
    if (j.is_number_float()) {
        if (!std::isfinite(j.get<double>()))
            throw std::logic_error("non-finite value in summary at " + where);
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items()) assert_finite(v, where + "/" + k);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i)
            assert_finite(j[i], where + "/" + std::to_string(i));
    }
}

inline nlohmann::json breakdown_row_json(const BreakdownRow& row) {
    static const std::array<const char*, 5> kinds = {"good", "jitter", "inversion", "swap",
                                                     "miss"};
    nlohmann::json counts, freqs;
    const auto f = row.frequencies();
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        counts[kinds[i]] = row.counts[i];
        freqs[kinds[i]] = f[i];
    }
    return {{"name", row.name},
            {"counts", counts},
            {"frequencies", freqs},
            {"unclassifiable", row.unclassifiable},
            {"classifiable", row.classifiable()}};
}

inline nlohmann::json benchmark_cell_json(const BenchmarkEval& cell) {
    nlohmann::json j{{"cell_id", cell.cell_id},
                     {"gt_count", cell.gt_count},
                     {"empty", cell.empty},
                     {"errors", breakdown_row_json(cell.errors)}};
    if (!cell.empty) {
        j["coco_ap"] = cell.eval.coco_ap;
        j["coco_ar"] = cell.eval.coco_ar;
        nlohmann::json ap;
        for (const EvalResult& r : cell.eval.per_threshold) ap[threshold_key(r.threshold)] = r.ap;
        j["ap"] = ap;
    }
    return j;
}

}  // namespace detail

inline nlohmann::json summary_json(const ReportData& d) {
    nlohmann::json j;
    j["schema_version"] = kSummarySchemaVersion;
    j["dataset"] = {{"images", d.n_images}, {"ground_truths", d.n_gts}, {"detections", d.n_dets}};

    nlohmann::json ap, ar;
    for (const EvalResult& r : d.eval.per_threshold) {
        ap[detail::threshold_key(r.threshold)] = r.ap;
        ar[detail::threshold_key(r.threshold)] = r.ar_at_k;
    }
    j["ap"] = ap;
    j["ar"] = ar;
    j["coco_ap"] = d.eval.coco_ap;
    j["coco_ar"] = d.eval.coco_ar;

    nlohmann::json types = nlohmann::json::array(), groups = nlohmann::json::array();
    for (const BreakdownRow& row : d.breakdown.per_type)
        types.push_back(detail::breakdown_row_json(row));
    for (const BreakdownRow& row : d.breakdown.per_group)
        groups.push_back(detail::breakdown_row_json(row));
    j["error_breakdown"] = {{"overall", detail::breakdown_row_json(d.breakdown.overall)},
                            {"per_type", types},
                            {"per_group", groups}};

    nlohmann::json stages = nlohmann::json::array();
    for (const StageResult& s : d.progressive.stages)
        stages.push_back({{"stage", to_string(s.stage)},
                          {"ap", s.eval.ap},
                          {"auc_gain", s.auc_gain},
                          {"tp", s.eval.tp},
                          {"fp", s.eval.fp},
                          {"fn", s.eval.fn}});
    j["progressive"] = {{"threshold", d.progressive.baseline.threshold},
                        {"baseline_ap", d.progressive.baseline.ap},
                        {"stages", stages}};

    nlohmann::json impacts = nlohmann::json::array();
    for (const ImpactStats& s : d.impacts)
        impacts.push_back({{"kind", to_string(s.kind)},
                           {"corrected_keypoints", s.corrected_keypoints},
                           {"oks_delta_q1", s.q1},
                           {"oks_delta_median", s.median},
                           {"oks_delta_q3", s.q3},
                           {"ap_delta_50", s.ap_delta_50},
                           {"ap_delta_75", s.ap_delta_75}});
    j["correction_impact"] = impacts;

    j["rescore"] = {{"images_with_detections", d.rescore.images_with_detections},
                    {"images_with_optimal_order", d.rescore.images_with_optimal_order},
                    {"scoring_errors", d.rescore.scoring_errors},
                    {"match_increase", d.rescore.match_increase},
                    {"matches_with_oks_improvement", d.rescore.matches_with_oks_improvement},
                    {"histogram_overlap_original", d.histograms.original.overlap},
                    {"histogram_overlap_rescored", d.histograms.rescored.overlap}};

    nlohmann::json bg_rows = nlohmann::json::array();
    for (const BackgroundImpact& b : d.background)
        bg_rows.push_back({{"threshold", b.threshold},
                           {"ap", b.ap_baseline},
                           {"ap_without_fn", b.ap_without_fn},
                           {"ap_without_fp", b.ap_without_fp}});
    nlohmann::json clutter;
    clutter["avg_people_overall"] = d.clutter.avg_people_overall;
    clutter["avg_people_fp_images"] = d.clutter.avg_people_fp_images
                                          ? nlohmann::json(*d.clutter.avg_people_fp_images)
                                          : nlohmann::json(nullptr);
    clutter["avg_people_fn_images"] = d.clutter.avg_people_fn_images
                                          ? nlohmann::json(*d.clutter.avg_people_fn_images)
                                          : nlohmann::json(nullptr);
    j["background"] = {
        {"impact", bg_rows},
        {"fp_histogram",
         {{"boundaries", d.fp_histogram.boundaries},
          {"counts", d.fp_histogram.counts},
          {"percentile_score", d.fp_histogram.percentile_score},
          {"high_confidence_fps", d.fp_histogram.fp_ids.size()}}},
        {"fn_heatmap",
         {{"rows", d.heatmap.rows},
          {"cols", d.heatmap.cols},
          {"fn_count", d.heatmap.fn_count},
          {"warnings", d.heatmap.warnings}}},
        {"clutter", clutter}};

    nlohmann::json occ = nlohmann::json::array(), size = nlohmann::json::array();
    for (const BenchmarkEval& cell : d.benchmarks.occlusion_crowding)
        occ.push_back(detail::benchmark_cell_json(cell));
    for (const BenchmarkEval& cell : d.benchmarks.size)
        size.push_back(detail::benchmark_cell_json(cell));
    j["benchmarks"] = {
        {"overall_coco_ap", d.benchmarks.overall_coco_ap},
        {"occlusion_crowding", occ},
        {"size", size},
        {"occlusion_crowding_sensitivity", d.benchmarks.occlusion_crowding_si.sensitivity},
        {"occlusion_crowding_impact", d.benchmarks.occlusion_crowding_si.impact},
        {"size_sensitivity", d.benchmarks.size_si.sensitivity},
        {"size_impact", d.benchmarks.size_si.impact}};

    detail::assert_finite(j, "");
    return j;
}

// ---------------------------------------------------------------------------
// CSV tables

namespace detail {

inline std::string pr_curves_csv(const ReportData& d) {
    std::string out = "threshold,recall,precision\n";
    for (const EvalResult& r : d.eval.per_threshold)
        for (const auto& [recall, precision] : r.pr_samples)
            out += threshold_key(r.threshold) + ',' + num(recall) + ',' + num(precision) + '\n';
    return out;
}

inline std::string ap_csv(const ReportData& d) {
    std::string out = "threshold,ap,ar,tp,fp,fn\n";
    for (const EvalResult& r : d.eval.per_threshold)
        out += threshold_key(r.threshold) + ',' + num(r.ap) + ',' + num(r.ar_at_k) + ',' +
               std::to_string(r.tp) + ',' + std::to_string(r.fp) + ',' + std::to_string(r.fn) +
               '\n';
    out += "coco," + num(d.eval.coco_ap) + ',' + num(d.eval.coco_ar) + ",,,\n";
    return out;
}

inline std::string breakdown_csv(const ErrorBreakdown& b) {
    std::string out =
        "row,good,jitter,inversion,swap,miss,unclassifiable,"
        "freq_good,freq_jitter,freq_inversion,freq_swap,freq_miss\n";
    auto row = [&](const BreakdownRow& r) {
        out += r.name;
        for (std::int64_t c : r.counts) out += ',' + std::to_string(c);
        out += ',' + std::to_string(r.unclassifiable);
        for (double f : r.frequencies()) out += ',' + num(f);
        out += '\n';
    };
    row(b.overall);
    for (const BreakdownRow& r : b.per_group) row(r);
    for (const BreakdownRow& r : b.per_type) row(r);
    return out;
}

inline std::string progressive_csv(const ProgressiveResult& p) {
    std::string out = "stage,ap,auc_gain,tp,fp,fn\n";
    out += "baseline," + num(p.baseline.ap) + ",0," + std::to_string(p.baseline.tp) + ',' +
           std::to_string(p.baseline.fp) + ',' + std::to_string(p.baseline.fn) + '\n';
    for (const StageResult& s : p.stages)
        out += std::string(to_string(s.stage)) + ',' + num(s.eval.ap) + ',' + num(s.auc_gain) +
               ',' + std::to_string(s.eval.tp) + ',' + std::to_string(s.eval.fp) + ',' +
               std::to_string(s.eval.fn) + '\n';
    return out;
}

inline std::string impact_csv(const std::vector<ImpactStats>& impacts) {
    std::string out =
        "kind,corrected_keypoints,oks_delta_q1,oks_delta_median,oks_delta_q3,ap_delta_50,"
        "ap_delta_75\n";
    for (const ImpactStats& s : impacts)
        out += std::string(to_string(s.kind)) + ',' + std::to_string(s.corrected_keypoints) +
               ',' + num(s.q1) + ',' + num(s.median) + ',' + num(s.q3) + ',' +
               num(s.ap_delta_50) + ',' + num(s.ap_delta_75) + '\n';
    return out;
}

inline std::string rescore_csv(const ReportData& d) {
    std::string out = "metric,value\n";
    out += "images_with_detections," + std::to_string(d.rescore.images_with_detections) + '\n';
    out += "images_with_optimal_order," + std::to_string(d.rescore.images_with_optimal_order) +
           '\n';
    out += "scoring_errors," + std::to_string(d.rescore.scoring_errors) + '\n';
    out += "match_increase," + std::to_string(d.rescore.match_increase) + '\n';
    out += "matches_with_oks_improvement," +
           std::to_string(d.rescore.matches_with_oks_improvement) + '\n';
    out += "histogram_overlap_original," + num(d.histograms.original.overlap) + '\n';
    out += "histogram_overlap_rescored," + num(d.histograms.rescored.overlap) + '\n';
    return out;
}

inline std::string background_csv(const ReportData& d) {
    std::string out = "threshold,ap,ap_without_fn,ap_without_fp\n";
    for (const BackgroundImpact& b : d.background)
        out += threshold_key(b.threshold) + ',' + num(b.ap_baseline) + ',' +
               num(b.ap_without_fn) + ',' + num(b.ap_without_fp) + '\n';
    return out;
}

inline std::string fp_histogram_csv(const FpHistogram& h) {
    std::string out = "bin,count\n";
    static const std::array<const char*, 5> labels = {"<32^2", "32^2-64^2", "64^2-96^2",
                                                      "96^2-128^2", ">=128^2"};
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out += std::string(labels[i]) + ',' + std::to_string(h.counts[i]) + '\n';
    out += "percentile_score," + num(h.percentile_score) + '\n';
    return out;
}

inline std::string benchmarks_csv(const BenchmarkReport& b) {
    std::string out = "cell,gt_count,empty,coco_ap,ap_50,ap_75\n";
    auto row = [&](const BenchmarkEval& cell) {
        out += cell.cell_id + ',' + std::to_string(cell.gt_count) + ',' +
               (cell.empty ? "1" : "0");
        if (cell.empty) {
            out += ",,,\n";
            return;
        }
        double ap50 = 0.0, ap75 = 0.0;
        for (const EvalResult& r : cell.eval.per_threshold) {
            if (r.threshold == 0.5) ap50 = r.ap;
            if (r.threshold == 0.75) ap75 = r.ap;
        }
        out += ',' + num(cell.eval.coco_ap) + ',' + num(ap50) + ',' + num(ap75) + '\n';
    };
    for (const BenchmarkEval& cell : b.occlusion_crowding) row(cell);
    for (const BenchmarkEval& cell : b.size) row(cell);
    out += "occlusion_crowding_S," + num(b.occlusion_crowding_si.sensitivity) + ",,,,\n";
    out += "occlusion_crowding_I," + num(b.occlusion_crowding_si.impact) + ",,,,\n";
    out += "size_S," + num(b.size_si.sensitivity) + ",,,,\n";
    out += "size_I," + num(b.size_si.impact) + ",,,,\n";
    return out;
}

inline std::string fn_heatmap_csv(const FnHeatmap& h) {
    std::string out;
    for (int r = 0; r < h.rows; ++r) {
        for (int c = 0; c < h.cols; ++c) {
            if (c) out += ',';
            out += std::to_string(h.at(r, c));
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG figures

inline const char* kind_color(ErrorKind k) {
    switch (k) {
        case ErrorKind::Good: return "#59a14f";
        case ErrorKind::Jitter: return "#edc948";
        case ErrorKind::Inversion: return "#b07aa1";
        case ErrorKind::Swap: return "#4e79a7";
        case ErrorKind::Miss: return "#e15759";
        default: return "#bab0ac";
    }
}

inline std::string progressive_svg(const ProgressiveResult& p) {
    std::vector<svg::Series> series;
    auto to_series = [](const std::string& name, const EvalResult& r) {
        svg::Series s;
        s.name = name;
        s.points = r.pr_samples;
        return s;
    };
    series.push_back(to_series("baseline", p.baseline));
    for (const StageResult& s : p.stages)
        series.push_back(to_series(std::string("+") + to_string(s.stage), s.eval));
    return svg::stacked_curves("Progressive PR at OKS " +
                                   detail::threshold_key(p.baseline.threshold),
                               "recall", "precision", series);
}

inline std::string error_pie_svg(const BreakdownRow& overall) {
    static const std::array<ErrorKind, 5> kinds = {ErrorKind::Good, ErrorKind::Jitter,
                                                   ErrorKind::Inversion, ErrorKind::Swap,
                                                   ErrorKind::Miss};
    std::vector<svg::Slice> slices;
    if (overall.classifiable() == 0) {
        slices.push_back({"good", 1.0, kind_color(ErrorKind::Good)});
    } else {
        for (std::size_t i = 0; i < kinds.size(); ++i)
            slices.push_back({to_string(kinds[i]), static_cast<double>(overall.counts[i]),
                              kind_color(kinds[i])});
    }
    return svg::pie_chart("Keypoint outcome share", slices);
}

inline std::string error_bars_svg(const std::vector<BreakdownRow>& rows,
                                  const std::string& title) {
    static const std::array<ErrorKind, 5> kinds = {ErrorKind::Good, ErrorKind::Jitter,
                                                   ErrorKind::Inversion, ErrorKind::Swap,
                                                   ErrorKind::Miss};
    std::vector<std::string> categories;
    std::vector<svg::BarSeries> series(kinds.size());
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        series[k].name = to_string(kinds[k]);
        series[k].color = kind_color(kinds[k]);
    }
    for (const BreakdownRow& row : rows) {
        categories.push_back(row.name);
        const auto f = row.frequencies();
        for (std::size_t k = 0; k < kinds.size(); ++k) series[k].values.push_back(f[k]);
    }
    return svg::stacked_bars(title, "share", categories, series, 760, 420, true);
}

inline std::string score_hist_svg(const ScoreHistogramPair& pair, int bins,
                                  const std::string& title) {
    std::vector<std::string> labels;
    for (int i = 0; i < bins; ++i) {
        const double lo = pair.lo + (pair.hi - pair.lo) * i / bins;
        labels.push_back(num(std::round(lo * 100.0) / 100.0));
    }
    std::vector<svg::HistSeries> series(2);
    series[0].name = "best match";
    series[0].color = "#59a14f";
    for (std::int64_t v : pair.best) series[0].counts.push_back(static_cast<double>(v));
    series[1].name = "other proximal";
    series[1].color = "#e15759";
    for (std::int64_t v : pair.other) series[1].counts.push_back(static_cast<double>(v));
    return svg::histogram(title + " (overlap " + num(pair.overlap) + ")", "score", labels,
                          series);
}

inline std::string fp_histogram_svg(const FpHistogram& h) {
    static const std::vector<std::string> labels = {"<32^2", "32-64^2", "64-96^2", "96-128^2",
                                                    ">=128^2"};
    std::vector<svg::HistSeries> series(1);
    series[0].name = "high-confidence FPs";
    series[0].color = "#e15759";
    for (std::int64_t v : h.counts) series[0].counts.push_back(static_cast<double>(v));
    return svg::histogram("High-confidence background FPs by area", "keypoint-bbox area",
                          labels, series);
}

inline std::string benchmark_grid_svg(const BenchmarkReport& b, const BenchmarkSpec& spec) {
    std::vector<std::string> rows, cols;
    for (const auto& [lo, hi] : spec.visibility_bins)
        rows.push_back("vis " + std::to_string(lo) + "-" + std::to_string(hi));
    for (std::size_t i = 0; i < spec.overlap_bins.size(); ++i) {
        const auto& [lo, hi] = spec.overlap_bins[i];
        const bool open = i + 1 == spec.overlap_bins.size();
        cols.push_back("ovl " + std::to_string(lo) + (open ? "+" : "-" + std::to_string(hi)));
    }
    std::vector<double> values;
    for (const BenchmarkEval& cell : b.occlusion_crowding)
        values.push_back(cell.empty ? -1.0 : cell.eval.coco_ap);
    // cells are vis-major in partition order, matching rows x cols here
    return svg::value_grid("Benchmark cocoAP by visibility x overlap", rows, cols, values);
}

inline std::string benchmark_size_svg(const BenchmarkReport& b) {
    std::vector<std::string> cols;
    std::vector<double> values;
    for (const BenchmarkEval& cell : b.size) {
        cols.push_back(cell.cell_id);
        values.push_back(cell.empty ? -1.0 : cell.eval.coco_ap);
    }
    return svg::value_grid("Benchmark cocoAP by instance size", {"cocoAP"}, cols, values, 720,
                           220);
}

// ---------------------------------------------------------------------------

inline std::string digest_text(const ReportData& d) {
    std::string out;
    out += "keypoint diagnosis digest\n";
    out += "=========================\n";
    out += "dataset: " + std::to_string(d.n_images) + " images, " + std::to_string(d.n_gts) +
           " ground truths, " + std::to_string(d.n_dets) + " detections\n\n";
    out += "cocoAP " + num(d.eval.coco_ap) + "  cocoAR " + num(d.eval.coco_ar) + "\n";
    for (const EvalResult& r : d.eval.per_threshold)
        out += "  AP@" + threshold_key(r.threshold) + " = " + num(r.ap) + "\n";
    const auto f = d.breakdown.overall.frequencies();
    out += "\nkeypoint outcomes (classifiable " +
           std::to_string(d.breakdown.overall.classifiable()) + "):\n";
    static const std::array<const char*, 5> kinds = {"good", "jitter", "inversion", "swap",
                                                     "miss"};
    for (std::size_t i = 0; i < kinds.size(); ++i)
        out += "  " + std::string(kinds[i]) + " " + num(f[i] * 100.0) + "%\n";
    out += "\nprogressive AP at OKS " + threshold_key(d.progressive.baseline.threshold) + ": " +
           num(d.progressive.baseline.ap);
    for (const StageResult& s : d.progressive.stages)
        out += " -> " + num(s.eval.ap) + " (+" + std::string(to_string(s.stage)) + ")";
    out += "\n\nscoring: " + std::to_string(d.rescore.scoring_errors) + " scoring errors, " +
           std::to_string(d.rescore.images_with_optimal_order) + "/" +
           std::to_string(d.rescore.images_with_detections) + " images already optimally ordered\n";
    out += "background: " + std::to_string(d.heatmap.fn_count) + " FNs at OKS .5, " +
           std::to_string(d.fp_histogram.fp_ids.size()) + " high-confidence FPs\n";
    out += "benchmarks: occlusion/crowding S=" + num(d.benchmarks.occlusion_crowding_si.sensitivity) +
           " I=" + num(d.benchmarks.occlusion_crowding_si.impact) +
           ", size S=" + num(d.benchmarks.size_si.sensitivity) +
           " I=" + num(d.benchmarks.size_si.impact) + "\n";
    return out;
}

}  // namespace detail

/// Writes summary.json / tables/*.csv / plots/*.svg / digest.txt under out_dir.
/// Byte-identical output for identical ReportData regardless of thread count.
inline void write_report(const ReportData& d, const std::string& out_dir,
                         const ReportOptions& opt) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "tables", ec);
    if (ec) throw io_error("cannot create output directory: " + out_dir);
    fs::create_directories(fs::path(out_dir) / "plots", ec);
    if (ec) throw io_error("cannot create output directory: " + out_dir);

    const auto path = [&](const char* rel) { return (fs::path(out_dir) / rel).string(); };

    if (opt.format != ReportFormat::Csv)
        write_file(path("summary.json"), summary_json(d).dump(2) + "\n");

    if (opt.format != ReportFormat::Json) {
        write_file(path("tables/pr_curves.csv"), detail::pr_curves_csv(d));
        write_file(path("tables/ap.csv"), detail::ap_csv(d));
        write_file(path("tables/error_breakdown.csv"), detail::breakdown_csv(d.breakdown));
        write_file(path("tables/progressive.csv"), detail::progressive_csv(d.progressive));
        write_file(path("tables/correction_impact.csv"), detail::impact_csv(d.impacts));
        write_file(path("tables/rescore.csv"), detail::rescore_csv(d));
        write_file(path("tables/background.csv"), detail::background_csv(d));
        write_file(path("tables/fp_histogram.csv"), detail::fp_histogram_csv(d.fp_histogram));
        write_file(path("tables/benchmarks.csv"), detail::benchmarks_csv(d.benchmarks));
        write_file(path("tables/fn_heatmap.csv"), detail::fn_heatmap_csv(d.heatmap));
    }

    write_file(path("plots/pr_progressive.svg"), detail::progressive_svg(d.progressive));
    write_file(path("plots/error_pie.svg"), detail::error_pie_svg(d.breakdown.overall));
    write_file(path("plots/error_bars_per_part.svg"),
               detail::error_bars_svg(d.breakdown.per_type, "Error share per keypoint type"));
    write_file(path("plots/error_bars_per_group.svg"),
               detail::error_bars_svg(d.breakdown.per_group, "Error share per keypoint group"));
    write_file(path("plots/score_histogram_original.svg"),
               detail::score_hist_svg(d.histograms.original, d.histograms.bins,
                                      "Scores: original"));
    write_file(path("plots/score_histogram_rescored.svg"),
               detail::score_hist_svg(d.histograms.rescored, d.histograms.bins,
                                      "Scores: optimal + soft-NMS"));
    write_file(path("plots/fp_area_histogram.svg"), detail::fp_histogram_svg(d.fp_histogram));
    write_file(path("plots/fn_heatmap.svg"),
               svg::heatmap("FN density over normalized image", d.heatmap.rows, d.heatmap.cols,
                            d.heatmap.normalized));
    write_file(path("plots/benchmark_ap_grid.svg"),
               detail::benchmark_grid_svg(d.benchmarks, opt.benchmark_spec));
    write_file(path("plots/benchmark_size_ap.svg"), detail::benchmark_size_svg(d.benchmarks));

    write_file(path("digest.txt"), detail::digest_text(d));
}

}  // namespace kptdiag
