// kpt_diagnose: evaluation and error diagnosis for multi-person keypoint
// detection. Thin shell over the kptdiag headers; every number printed here is
// available through the library.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kptdiag/kptdiag.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
    std::string gt_path, dt_path, schema_path, out_dir;
    std::vector<double> oks_thresholds;
    int max_dets = -1;
    std::string plan;
    double plan_threshold = 0.75;
    std::uint64_t seed = 1;
    std::string format = "both";
    int parallel = 1;
};

void add_data_flags(CLI::App* sub, CommonArgs& a, bool need_dt = true) {
    sub->add_option("--gt", a.gt_path, "ground-truth JSON")->required();
    auto* dt = sub->add_option("--dt", a.dt_path, "detections JSON");
    if (need_dt) dt->required();
    sub->add_option("--schema", a.schema_path, "keypoint schema JSON (default: builtin 17-part)");
    sub->add_option("--oks-thresholds", a.oks_thresholds,
                    "evaluation thresholds (default .5:.05:.95)")
        ->delimiter(',');
    sub->add_option("--max-dets", a.max_dets, "retained detections per image");
}

void add_run_flags(CLI::App* sub, CommonArgs& a) {
    sub->add_option("--parallel", a.parallel, "worker threads")
        ->envname("KPT_DIAGNOSE_PARALLEL")
        ->check(CLI::PositiveNumber);
    sub->add_option("--format", a.format, "output tables as json, csv or both")
        ->check(CLI::IsMember({"json", "csv", "both"}));
}

kptdiag::EvalConfig make_config(const CommonArgs& a) {
    kptdiag::EvalConfig config;
    if (!a.oks_thresholds.empty()) config.oks_thresholds = a.oks_thresholds;
    if (a.max_dets > 0) config.max_detections_per_image = a.max_dets;
    config.validate();
    return config;
}

kptdiag::CorrectionPlan make_plan(const CommonArgs& a) {
    kptdiag::CorrectionPlan plan;
    plan.threshold = a.plan_threshold;
    if (!a.plan.empty()) {
        plan.stages.clear();
        std::stringstream ss(a.plan);
        std::string token;
        while (std::getline(ss, token, ','))
            if (!token.empty()) plan.stages.push_back(kptdiag::stage_from_string(token));
    }
    return plan;
}

struct Loaded {
    kptdiag::KeypointSchema schema;
    std::vector<kptdiag::ImageRecord> images;
    std::vector<kptdiag::GtInstance> gts;
    std::vector<kptdiag::Detection> dets;
};

Loaded load(const CommonArgs& a, bool need_dt = true) {
    Loaded l;
    l.schema = a.schema_path.empty() ? kptdiag::coco17_schema()
                                     : kptdiag::load_keypoint_schema(a.schema_path);
    std::tie(l.images, l.gts) = kptdiag::load_ground_truth(a.gt_path, l.schema);
    if (need_dt && !a.dt_path.empty()) l.dets = kptdiag::load_detections(a.dt_path, l.schema);
    return l;
}

void write_out(const CommonArgs& a, const std::string& name, const json& j) {
    if (a.out_dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(a.out_dir, ec);
    if (ec) throw kptdiag::io_error("cannot create output directory: " + a.out_dir);
    kptdiag::write_file((std::filesystem::path(a.out_dir) / name).string(), j.dump(2) + "\n");
}

std::string num(double v) { return kptdiag::detail::num(v); }

// ---------------------------------------------------------------------------

int cmd_evaluate(const CommonArgs& a) {
    const Loaded l = load(a);
    const auto config = make_config(a);
    const auto matches =
        kptdiag::match_all(l.images, l.gts, l.dets, l.schema, config, a.parallel);
    const auto eval = kptdiag::evaluate_dataset(matches, l.dets, l.gts, config);

    json per;
    std::printf("threshold      AP        AR\n");
    for (const auto& r : eval.per_threshold) {
        std::printf("%-9s %9s %9s\n", kptdiag::detail::threshold_key(r.threshold).c_str(),
                    num(r.ap).c_str(), num(r.ar_at_k).c_str());
        per[kptdiag::detail::threshold_key(r.threshold)] = {{"ap", r.ap}, {"ar", r.ar_at_k}};
    }
    std::printf("cocoAP = %s\ncocoAR = %s\n", num(eval.coco_ap).c_str(),
                num(eval.coco_ar).c_str());
    write_out(a, "evaluation.json",
              json{{"per_threshold", per}, {"coco_ap", eval.coco_ap}, {"coco_ar", eval.coco_ar}});
    return 0;
}

int cmd_errors(const CommonArgs& a) {
    const Loaded l = load(a);
    const auto config = make_config(a);
    const auto matches =
        kptdiag::match_all(l.images, l.gts, l.dets, l.schema, config, a.parallel);
    const auto labeled =
        kptdiag::classify_matches(matches, l.dets, l.gts, l.schema, config, a.parallel);
    const auto breakdown = kptdiag::error_breakdown(labeled, l.schema);

    std::printf("%-16s %8s %8s %9s %6s %6s %14s\n", "row", "good", "jitter", "inversion", "swap",
                "miss", "unclassifiable");
    auto print_row = [](const kptdiag::BreakdownRow& r) {
        std::printf("%-16s %8lld %8lld %9lld %6lld %6lld %14lld\n", r.name.c_str(),
                    static_cast<long long>(r.counts[0]), static_cast<long long>(r.counts[1]),
                    static_cast<long long>(r.counts[2]), static_cast<long long>(r.counts[3]),
                    static_cast<long long>(r.counts[4]),
                    static_cast<long long>(r.unclassifiable));
    };
    print_row(breakdown.overall);
    for (const auto& r : breakdown.per_group) print_row(r);
    for (const auto& r : breakdown.per_type) print_row(r);

    json types = json::array(), groups = json::array();
    for (const auto& r : breakdown.per_type) types.push_back(kptdiag::detail::breakdown_row_json(r));
    for (const auto& r : breakdown.per_group)
        groups.push_back(kptdiag::detail::breakdown_row_json(r));
    write_out(a, "errors.json",
              json{{"overall", kptdiag::detail::breakdown_row_json(breakdown.overall)},
                   {"per_type", types},
                   {"per_group", groups}});
    return 0;
}

int cmd_correct(const CommonArgs& a) {
    const Loaded l = load(a);
    const auto config = make_config(a);
    const auto plan = make_plan(a);
    const auto prog = kptdiag::progressive_pr(l.dets, l.gts, plan, l.schema, config, a.parallel);

    std::printf("stage          AP@%s    gain\n",
                kptdiag::detail::threshold_key(plan.threshold).c_str());
    std::printf("%-12s %8s %8s\n", "baseline", num(prog.baseline.ap).c_str(), "");
    json stages = json::array();
    for (const auto& s : prog.stages) {
        std::printf("%-12s %8s %8s\n", kptdiag::to_string(s.stage), num(s.eval.ap).c_str(),
                    num(s.auc_gain).c_str());
        stages.push_back({{"stage", kptdiag::to_string(s.stage)},
                          {"ap", s.eval.ap},
                          {"auc_gain", s.auc_gain}});
    }
    write_out(a, "progressive.json",
              json{{"threshold", plan.threshold},
                   {"baseline_ap", prog.baseline.ap},
                   {"stages", stages}});
    return 0;
}

int cmd_rescore(const CommonArgs& a) {
    const Loaded l = load(a);
    const auto config = make_config(a);
    const auto report = kptdiag::rescore_report(l.dets, l.gts, l.schema, config, 0.5, a.parallel);
    const auto hist = kptdiag::score_histograms(l.dets, l.gts, l.schema, config);

    std::printf("images with detections:      %lld\n",
                static_cast<long long>(report.images_with_detections));
    std::printf("already optimally ordered:   %lld\n",
                static_cast<long long>(report.images_with_optimal_order));
    std::printf("scoring errors:              %lld\n",
                static_cast<long long>(report.scoring_errors));
    std::printf("match increase:              %lld\n",
                static_cast<long long>(report.match_increase));
    std::printf("gts with OKS improvement:    %lld\n",
                static_cast<long long>(report.matches_with_oks_improvement));
    std::printf("histogram overlap:           %s -> %s\n", num(hist.original.overlap).c_str(),
                num(hist.rescored.overlap).c_str());
    write_out(a, "rescore.json",
              json{{"images_with_detections", report.images_with_detections},
                   {"images_with_optimal_order", report.images_with_optimal_order},
                   {"scoring_errors", report.scoring_errors},
                   {"match_increase", report.match_increase},
                   {"matches_with_oks_improvement", report.matches_with_oks_improvement},
                   {"histogram_overlap_original", hist.original.overlap},
                   {"histogram_overlap_rescored", hist.rescored.overlap}});
    return 0;
}

int cmd_background(const CommonArgs& a) {
    const Loaded l = load(a);
    const auto config = make_config(a);
    const auto matches =
        kptdiag::match_all(l.images, l.gts, l.dets, l.schema, config, a.parallel);
    const auto impact = kptdiag::background_impact(matches, l.dets, l.gts, config);
    const auto fp_hist = kptdiag::high_conf_fp_histogram(matches, l.dets, config);
    const auto heatmap = kptdiag::fn_heatmap(l.gts, matches, l.images);
    const auto clutter = kptdiag::clutter_stats(matches, l.gts, l.images);

    json rows = json::array();
    std::printf("threshold        AP   no-FN AP   no-FP AP\n");
    for (const auto& b : impact) {
        std::printf("%-9s %9s %10s %10s\n", kptdiag::detail::threshold_key(b.threshold).c_str(),
                    num(b.ap_baseline).c_str(), num(b.ap_without_fn).c_str(),
                    num(b.ap_without_fp).c_str());
        rows.push_back({{"threshold", b.threshold},
                        {"ap", b.ap_baseline},
                        {"ap_without_fn", b.ap_without_fn},
                        {"ap_without_fp", b.ap_without_fp}});
    }
    std::printf("high-confidence FPs: %zu (score > %s)\n", fp_hist.fp_ids.size(),
                num(fp_hist.percentile_score).c_str());
    std::printf("FNs at OKS .5: %lld\n", static_cast<long long>(heatmap.fn_count));
    for (const auto& w : heatmap.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    json clutter_json;
    clutter_json["avg_people_overall"] = clutter.avg_people_overall;
    clutter_json["avg_people_fp_images"] =
        clutter.avg_people_fp_images ? json(*clutter.avg_people_fp_images) : json(nullptr);
    clutter_json["avg_people_fn_images"] =
        clutter.avg_people_fn_images ? json(*clutter.avg_people_fn_images) : json(nullptr);
    write_out(a, "background.json",
              json{{"impact", rows},
                   {"fp_histogram",
                    {{"boundaries", fp_hist.boundaries},
                     {"counts", fp_hist.counts},
                     {"percentile_score", fp_hist.percentile_score}}},
                   {"fn_count", heatmap.fn_count},
                   {"clutter", clutter_json}});
    return 0;
}

int cmd_benchmarks(const CommonArgs& a) {
    const Loaded l = load(a);
    const auto config = make_config(a);
    const auto matches =
        kptdiag::match_all(l.images, l.gts, l.dets, l.schema, config, a.parallel);
    const auto labeled =
        kptdiag::classify_matches(matches, l.dets, l.gts, l.schema, config, a.parallel);
    const auto report = kptdiag::run_benchmarks(matches, l.dets, l.gts, labeled, l.schema, config,
                                                kptdiag::BenchmarkSpec{}, a.parallel);

    std::printf("%-16s %8s %9s\n", "cell", "gts", "cocoAP");
    json occ = json::array(), size = json::array();
    for (const auto& cell : report.occlusion_crowding) {
        std::printf("%-16s %8lld %9s\n", cell.cell_id.c_str(),
                    static_cast<long long>(cell.gt_count),
                    cell.empty ? "-" : num(cell.eval.coco_ap).c_str());
        occ.push_back(kptdiag::detail::benchmark_cell_json(cell));
    }
    for (const auto& cell : report.size) {
        std::printf("%-16s %8lld %9s\n", cell.cell_id.c_str(),
                    static_cast<long long>(cell.gt_count),
                    cell.empty ? "-" : num(cell.eval.coco_ap).c_str());
        size.push_back(kptdiag::detail::benchmark_cell_json(cell));
    }
    std::printf("occlusion/crowding S=%s I=%s\n",
                num(report.occlusion_crowding_si.sensitivity).c_str(),
                num(report.occlusion_crowding_si.impact).c_str());
    std::printf("size S=%s I=%s\n", num(report.size_si.sensitivity).c_str(),
                num(report.size_si.impact).c_str());
    write_out(a, "benchmarks.json",
              json{{"overall_coco_ap", report.overall_coco_ap},
                   {"occlusion_crowding", occ},
                   {"size", size},
                   {"occlusion_crowding_sensitivity", report.occlusion_crowding_si.sensitivity},
                   {"occlusion_crowding_impact", report.occlusion_crowding_si.impact},
                   {"size_sensitivity", report.size_si.sensitivity},
                   {"size_impact", report.size_si.impact}});
    return 0;
}

struct FixtureArgs {
    int images = 10;
    int people = 3;
    double jitter = 0.15, inversion = 0.05, swap = 0.05, miss = 0.1;
    double fn_rate = 0.0, fp_rate = 0.0, duplicate_rate = 0.0;
    std::string score_mode = "optimal";
    double score_noise = 0.05;
};

int cmd_fixtures(const CommonArgs& a, const FixtureArgs& f) {
    const kptdiag::KeypointSchema schema = a.schema_path.empty()
                                               ? kptdiag::coco17_schema()
                                               : kptdiag::load_keypoint_schema(a.schema_path);
    kptdiag::InjectionSpec spec;
    spec.rates = {{kptdiag::ErrorKind::Jitter, f.jitter},
                  {kptdiag::ErrorKind::Inversion, f.inversion},
                  {kptdiag::ErrorKind::Swap, f.swap},
                  {kptdiag::ErrorKind::Miss, f.miss}};
    spec.fn_rate = f.fn_rate;
    spec.fp_rate = f.fp_rate;
    spec.duplicate_rate = f.duplicate_rate;
    spec.rng_seed = a.seed;
    spec.score_noise = f.score_noise;
    if (f.score_mode == "optimal")
        spec.score_mode = kptdiag::ScoreMode::Optimal;
    else if (f.score_mode == "noisy")
        spec.score_mode = kptdiag::ScoreMode::NoisyOptimal;
    else
        spec.score_mode = kptdiag::ScoreMode::Random;

    const auto data = kptdiag::generate(f.images, f.people, spec, schema);

    std::error_code ec;
    std::filesystem::create_directories(a.out_dir, ec);
    if (ec) throw kptdiag::io_error("cannot create output directory: " + a.out_dir);
    const auto path = [&](const char* rel) {
        return (std::filesystem::path(a.out_dir) / rel).string();
    };
    kptdiag::save_ground_truth(path("gt.json"), data.images, data.gts, schema);
    kptdiag::save_detections(path("dt.json"), data.dets);

    json labels = json::array();
    for (const auto& t : data.truth) {
        json kinds = json::array();
        for (kptdiag::ErrorKind k : t.kinds) kinds.push_back(kptdiag::to_string(k));
        labels.push_back({{"det_id", t.det_id}, {"gt_id", t.gt_id}, {"kinds", kinds}});
    }
    kptdiag::write_file(path("truth_labels.json"),
                        json{{"labels", labels},
                             {"fn_gt_ids", data.fn_gt_ids},
                             {"fp_det_ids", data.fp_det_ids},
                             {"duplicate_det_ids", data.duplicate_det_ids},
                             {"degraded", data.degraded}}
                                .dump(2) +
                            "\n");
    std::printf("wrote %zu gts / %zu dets over %d images to %s\n", data.gts.size(),
                data.dets.size(), f.images, a.out_dir.c_str());
    return 0;
}

int cmd_report(const CommonArgs& a) {
    const Loaded l = load(a);
    kptdiag::ReportOptions opt;
    opt.config = make_config(a);
    opt.plan = make_plan(a);
    opt.n_threads = a.parallel;
    opt.format = a.format == "json" ? kptdiag::ReportFormat::Json
                 : a.format == "csv" ? kptdiag::ReportFormat::Csv
                                     : kptdiag::ReportFormat::Both;
    const auto data = kptdiag::run_full_report(l.images, l.gts, l.dets, l.schema, opt);
    kptdiag::write_report(data, a.out_dir, opt);
    std::fputs(kptdiag::detail::digest_text(data).c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evaluation and error diagnosis for multi-person keypoint detection"};
    app.require_subcommand(1);

    CommonArgs a;
    FixtureArgs f;

    auto* evaluate = app.add_subcommand("evaluate", "AP/AR over the OKS thresholds");
    add_data_flags(evaluate, a);
    add_run_flags(evaluate, a);
    evaluate->add_option("--out", a.out_dir, "directory for evaluation.json");

    auto* errors = app.add_subcommand("errors", "keypoint error taxonomy breakdown");
    add_data_flags(errors, a);
    add_run_flags(errors, a);
    errors->add_option("--out", a.out_dir, "directory for errors.json");

    auto* correct = app.add_subcommand("correct", "progressive error correction PR");
    add_data_flags(correct, a);
    add_run_flags(correct, a);
    correct->add_option("--out", a.out_dir, "directory for progressive.json");
    correct->add_option("--plan", a.plan, "comma-separated stages (default full plan)");
    correct->add_option("--plan-threshold", a.plan_threshold, "OKS threshold for the plan");

    auto* rescore = app.add_subcommand("rescore", "scoring-error analysis and optimal rescoring");
    add_data_flags(rescore, a);
    add_run_flags(rescore, a);
    rescore->add_option("--out", a.out_dir, "directory for rescore.json");

    auto* background = app.add_subcommand("background", "background FP/FN analysis");
    add_data_flags(background, a);
    add_run_flags(background, a);
    background->add_option("--out", a.out_dir, "directory for background.json");

    auto* benchmarks = app.add_subcommand("benchmarks", "occlusion/crowding and size benchmarks");
    add_data_flags(benchmarks, a);
    add_run_flags(benchmarks, a);
    benchmarks->add_option("--out", a.out_dir, "directory for benchmarks.json");

    auto* fixtures = app.add_subcommand("fixtures", "generate synthetic labeled data");
    fixtures->add_option("--out", a.out_dir, "output directory")->required();
    fixtures->add_option("--schema", a.schema_path, "keypoint schema JSON");
    fixtures->add_option("--seed", a.seed, "generator seed");
    fixtures->add_option("--images", f.images, "number of images");
    fixtures->add_option("--people", f.people, "people per image");
    fixtures->add_option("--jitter", f.jitter, "jitter rate");
    fixtures->add_option("--inversion", f.inversion, "inversion rate");
    fixtures->add_option("--swap", f.swap, "swap rate");
    fixtures->add_option("--miss", f.miss, "miss rate");
    fixtures->add_option("--fn-rate", f.fn_rate, "dropped-person rate");
    fixtures->add_option("--fp-rate", f.fp_rate, "background detection rate");
    fixtures->add_option("--duplicate-rate", f.duplicate_rate, "duplicate detection rate");
    fixtures->add_option("--score-mode", f.score_mode, "optimal | noisy | random")
        ->check(CLI::IsMember({"optimal", "noisy", "random"}));
    fixtures->add_option("--score-noise", f.score_noise, "stddev for noisy scores");

    auto* report = app.add_subcommand("report", "full analysis report");
    add_data_flags(report, a);
    add_run_flags(report, a);
    report->add_option("--out", a.out_dir, "report directory")->required();
    report->add_option("--plan", a.plan, "comma-separated stages (default full plan)");
    report->add_option("--plan-threshold", a.plan_threshold, "OKS threshold for the plan");
    report->add_option("--seed", a.seed, "seed for any randomized analysis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (evaluate->parsed()) return cmd_evaluate(a);
        if (errors->parsed()) return cmd_errors(a);
        if (correct->parsed()) return cmd_correct(a);
        if (rescore->parsed()) return cmd_rescore(a);
        if (background->parsed()) return cmd_background(a);
        if (benchmarks->parsed()) return cmd_benchmarks(a);
        if (fixtures->parsed()) return cmd_fixtures(a, f);
        if (report->parsed()) return cmd_report(a);
    } catch (const kptdiag::empty_input_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const kptdiag::io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const kptdiag::validation_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
