#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "test_util.hpp"

using namespace kptdiag;

namespace {

const KeypointSchema kSchema = testutil::mini_schema();
const EvalConfig kConfig;

GtInstance person(std::int64_t id, double x0 = 100.0, double s = 40.0) {
    GtInstance g;
    g.id = id;
    g.image_id = 1;
    g.area = s * s;
    g.keypoints = {{x0, 100.0, 2}, {x0 + 60.0, 100.0, 2}, {x0 + 120.0, 100.0, 2}};
    g.num_visible = 3;
    g.bbox = {x0 - 20.0, 60.0, 160.0, 80.0};
    return g;
}

Detection copy_of(const GtInstance& g, std::int64_t id, double score) {
    Detection d;
    d.id = id;
    d.image_id = g.image_id;
    d.score = score;
    for (const auto& kp : g.keypoints) d.keypoints.push_back(kp.pos());
    return d;
}

double ks_of(const Point& p, const GtInstance& g, std::size_t i) {
    return keypoint_similarity(p, g.keypoints[i].pos(), g.scale(), kSchema.k_constants[i]);
}

}  // namespace

TEST_CASE("correct_keypoint geometry per error kind") {
    const auto g = person(1);
    const std::vector<GtInstance> all = {g};
    auto d = copy_of(g, 100, 0.9);

    SECTION("jitter lands on the good-threshold circle, same ray") {
        d.keypoints[0] = {g.keypoints[0].x + 3.0, g.keypoints[0].y + 1.5};
        const auto label = classify_keypoint(d, g, all, 0, kSchema, kConfig);
        REQUIRE(label.kind == ErrorKind::Jitter);
        const Point c = correct_keypoint(label, d, g, 0, kSchema, kConfig);
        CHECK(ks_of(c, g, 0) == Catch::Approx(kConfig.good_threshold).margin(1e-12));
        // collinear with the original offset
        const double cross = (c.x - g.keypoints[0].x) * 1.5 - (c.y - g.keypoints[0].y) * 3.0;
        CHECK(std::abs(cross) < 1e-9);
        CHECK((c.x - g.keypoints[0].x) * 3.0 > 0.0);  // same side, not mirrored
    }
    SECTION("miss lands on the jitter-threshold circle") {
        d.keypoints[0] = {g.keypoints[0].x - 400.0, g.keypoints[0].y + 300.0};
        const auto label = classify_keypoint(d, g, all, 0, kSchema, kConfig);
        REQUIRE(label.kind == ErrorKind::Miss);
        const Point c = correct_keypoint(label, d, g, 0, kSchema, kConfig);
        CHECK(ks_of(c, g, 0) == Catch::Approx(kConfig.jitter_threshold).margin(1e-12));
    }
    SECTION("inversion keeps the distance it had to the confused part") {
        d.keypoints[1] = {g.keypoints[2].x + 2.0, g.keypoints[2].y};  // 2 px past the right tip
        const auto label = classify_keypoint(d, g, all, 1, kSchema, kConfig);
        REQUIRE(label.kind == ErrorKind::Inversion);
        const Point c = correct_keypoint(label, d, g, 1, kSchema, kConfig);
        const double r = std::hypot(c.x - g.keypoints[1].x, c.y - g.keypoints[1].y);
        CHECK(r == Catch::Approx(2.0).margin(1e-12));
    }
    SECTION("a dead-centre prediction walks out along +x") {
        KeypointErrorLabel label;  // synthetic: classify would call this Good
        label.kind = ErrorKind::Miss;
        d.keypoints[0] = g.keypoints[0].pos();
        const Point c = correct_keypoint(label, d, g, 0, kSchema, kConfig);
        CHECK(c.y == g.keypoints[0].y);
        CHECK(c.x - g.keypoints[0].x ==
              Catch::Approx(ks_radius(kConfig.jitter_threshold, g.scale(), kSchema.k_constants[0]))
                  .margin(1e-12));
    }
    SECTION("good and unclassifiable labels are rejected") {
        KeypointErrorLabel label;
        label.kind = ErrorKind::Good;
        CHECK_THROWS_AS(correct_keypoint(label, d, g, 0, kSchema, kConfig), std::invalid_argument);
        label.kind = ErrorKind::Unclassifiable;
        CHECK_THROWS_AS(correct_keypoint(label, d, g, 0, kSchema, kConfig), std::invalid_argument);
    }
}

TEST_CASE("apply_correction fixes selected kinds only and never lowers OKS") {
    const auto g1 = person(1, 100.0);
    const auto g2 = person(2, 700.0);
    const std::vector<ImageRecord> images = {{1, 2000, 1000}};
    const std::vector<GtInstance> gts = {g1, g2};

    auto d1 = copy_of(g1, 100, 0.9);
    d1.keypoints[1] = g1.keypoints[2].pos();  // inversion
    auto d2 = copy_of(g2, 101, 0.8);
    d2.keypoints[0] = {g2.keypoints[0].x, g2.keypoints[0].y + 900.0};  // miss
    const std::vector<Detection> dets = {d1, d2};

    const auto matches = match_all(images, gts, dets, kSchema, kConfig);
    const auto labeled = classify_matches(matches, dets, gts, kSchema, kConfig);

    SECTION("correcting only inversions leaves the miss alone") {
        const auto out = apply_correction(dets, gts, labeled, {ErrorKind::Inversion}, kSchema,
                                          kConfig);
        CHECK(out.dets[0].keypoints[1].x == g1.keypoints[1].x);  // distance to wrong part was 0
        CHECK(out.dets[1].keypoints[0].y == d2.keypoints[0].y);
        REQUIRE(out.deltas.size() == 2);
        CHECK(out.deltas[0].oks_after == Catch::Approx(1.0).margin(1e-12));
        CHECK(out.deltas[1].delta() == 0.0);
        for (const auto& delta : out.deltas) CHECK(delta.delta() >= 0.0);
    }
    SECTION("correcting misses pulls the stray onto the jitter circle") {
        const auto out =
            apply_correction(dets, gts, labeled, {ErrorKind::Miss}, kSchema, kConfig);
        const double ks = keypoint_similarity(out.dets[1].keypoints[0], g2.keypoints[0].pos(),
                                              g2.scale(), kSchema.k_constants[0]);
        CHECK(ks == Catch::Approx(kConfig.jitter_threshold).margin(1e-12));
        CHECK(out.deltas[1].oks_after ==
              Catch::Approx((kConfig.jitter_threshold + 2.0) / 3.0).margin(1e-12));
    }
    SECTION("empty kind set is the identity") {
        const auto out = apply_correction(dets, gts, labeled, {}, kSchema, kConfig);
        CHECK(out.dets[0] == d1);
        CHECK(out.dets[1] == d2);
    }
}

TEST_CASE("cross-scale swap that would lower OKS is refused") {
    // small person A next to a huge person B: the det sits 2 px from A's left tip
    // (ks .25 on A's scale) but 100 px from B's left tip, which B's 1000 px scale
    // still scores at .7 -- so the taxonomy calls it a Swap. Re-planting it 100 px
    // from A's own tip would crater the OKS, which apply_correction must refuse.
    GtInstance a;
    a.id = 1;
    a.image_id = 1;
    a.area = 100.0;  // scale 10
    a.keypoints = {{100.0, 100.0, 2}, {103.0, 100.0, 2}, {106.0, 100.0, 2}};
    a.num_visible = 3;
    a.bbox = {95.0, 95.0, 16.0, 10.0};

    GtInstance b;
    b.id = 2;
    b.image_id = 1;
    b.area = 1e6;  // scale 1000
    b.keypoints = {{250.0, 300.0, 2}, {201.0, 100.0, 2}, {150.0, 400.0, 2}};
    b.num_visible = 3;
    b.bbox = {0.0, 0.0, 1500.0, 1500.0};

    Detection d;
    d.id = 100;
    d.image_id = 1;
    d.score = 0.9;
    d.keypoints = {{100.0, 100.0}, {101.0, 100.0}, {106.0, 100.0}};

    const std::vector<ImageRecord> images = {{1, 1600, 1600}};
    const std::vector<GtInstance> gts = {a, b};
    const std::vector<Detection> dets = {d};
    const auto matches = match_all(images, gts, dets, kSchema, kConfig);
    REQUIRE(matches[0].pairs.size() == 1);
    REQUIRE(matches[0].pairs[0].gt_id == 1);
    const auto labeled = classify_matches(matches, dets, gts, kSchema, kConfig);
    REQUIRE(labeled[0].labels[1].kind == ErrorKind::Swap);
    REQUIRE(labeled[0].labels[1].wrong_part->first == 2);

    CHECK_THROWS_AS(apply_correction(dets, gts, labeled, {ErrorKind::Swap}, kSchema, kConfig),
                    std::logic_error);
}

TEST_CASE("separate_impact isolates each kind") {
    // every keypoint jittered to ks .6, so OKS sits between the .5 and .75
    // thresholds; correcting jitter lifts it to .85, the other kinds are no-ops
    const auto g = person(1);
    const std::vector<ImageRecord> images = {{1, 2000, 1000}};
    const std::vector<GtInstance> gts = {g};
    auto d = copy_of(g, 100, 0.9);
    for (std::size_t i = 0; i < 3; ++i) {
        const double r = ks_radius(0.6, g.scale(), kSchema.k_constants[i]);
        d.keypoints[i] = {g.keypoints[i].x + r, g.keypoints[i].y};
    }
    const std::vector<Detection> dets = {d};

    const auto matches = match_all(images, gts, dets, kSchema, kConfig);
    const auto labeled = classify_matches(matches, dets, gts, kSchema, kConfig);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(labeled[0].labels[i].kind == ErrorKind::Jitter);
    const double oks_before = labeled[0].oks;
    REQUIRE(oks_before < 0.75);
    REQUIRE(oks_before >= 0.5);

    const auto impacts = separate_impact(dets, gts, matches, labeled, kSchema, kConfig);
    REQUIRE(impacts.size() == 4);
    CHECK(impacts[0].kind == ErrorKind::Jitter);
    CHECK(impacts[0].corrected_keypoints == 3);
    const double want_delta = kConfig.good_threshold - oks_before;
    CHECK(impacts[0].median == Catch::Approx(want_delta).margin(1e-9));
    CHECK(impacts[0].ap_delta_50 == Catch::Approx(0.0).margin(1e-12));
    CHECK(impacts[0].ap_delta_75 == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t k = 1; k < 4; ++k) {
        CHECK(impacts[k].corrected_keypoints == 0);
        CHECK(impacts[k].median == 0.0);
        CHECK(impacts[k].ap_delta_50 == 0.0);
        CHECK(impacts[k].ap_delta_75 == 0.0);
    }
}

TEST_CASE("stage names round-trip and plans are validated") {
    for (Stage s : {Stage::Miss, Stage::Swap, Stage::Inversion, Stage::Jitter, Stage::OptScore,
                    Stage::RemoveBgFP, Stage::RemoveFN})
        CHECK(stage_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(stage_from_string("polish"), validation_error);

    CorrectionPlan plan;
    plan.stages = {Stage::Miss, Stage::Miss};
    CHECK_THROWS_AS(plan.validate(kConfig), validation_error);
    plan.stages = {Stage::Miss};
    plan.threshold = 0.72;  // not on the grid
    CHECK_THROWS_AS(plan.validate(kConfig), validation_error);
    plan.threshold = 0.75;
    CHECK_NOTHROW(plan.validate(kConfig));
}

TEST_CASE("progressive correction walks the PR curve up to exactly 1.0") {
    const auto g1 = person(1, 100.0);
    const auto g2 = person(2, 700.0);
    const auto g3 = person(3, 1300.0);  // never detected
    const std::vector<ImageRecord> images = {{1, 4000, 2000}};
    const std::vector<GtInstance> gts = {g1, g2, g3};

    auto d1 = copy_of(g1, 100, 0.9);
    d1.keypoints[1] = g1.keypoints[2].pos();  // inversion => OKS 2/3
    auto d2 = copy_of(g2, 101, 0.8);
    d2.keypoints[0] = {g2.keypoints[0].x, g2.keypoints[0].y + 900.0};  // miss => OKS 2/3
    Detection d3;  // background false positive
    d3.id = 102;
    d3.image_id = 1;
    d3.score = 0.7;
    d3.keypoints = {{3500.0, 500.0}, {3520.0, 500.0}, {3540.0, 500.0}};
    const std::vector<Detection> dets = {d1, d2, d3};

    CorrectionPlan plan;  // default stage order, threshold .75
    const auto result = progressive_pr(dets, gts, plan, kSchema, kConfig);

    CHECK(result.baseline.threshold == 0.75);
    CHECK(result.baseline.ap == 0.0);  // both matches sit at OKS 2/3 < .75
    REQUIRE(result.stages.size() == 7);

    // after miss: d2 recovers (OKS (0.5+2)/3 = .83); d1 still below .75
    const double ap_one = 17.0 / 101.0;  // recall 1/3 at precision 1/2
    CHECK(result.stages[0].stage == Stage::Miss);
    CHECK(result.stages[0].eval.ap == Catch::Approx(ap_one).margin(testutil::kGoldenTol));
    CHECK(result.stages[1].stage == Stage::Swap);
    CHECK(result.stages[1].auc_gain == 0.0);

    // after inversion: d1 at OKS 1 -> two clean TPs before the background FP
    const double ap_two = 67.0 / 101.0;
    CHECK(result.stages[2].eval.ap == Catch::Approx(ap_two).margin(testutil::kGoldenTol));
    CHECK(result.stages[3].stage == Stage::Jitter);
    CHECK(result.stages[4].stage == Stage::OptScore);

    double prev = result.baseline.ap;
    double gain_sum = 0.0;
    for (const auto& stage : result.stages) {
        CHECK(stage.eval.ap >= prev);
        CHECK(stage.auc_gain == Catch::Approx(stage.eval.ap - prev).margin(1e-15));
        gain_sum += stage.auc_gain;
        prev = stage.eval.ap;
    }
    CHECK(result.stages.back().stage == Stage::RemoveFN);
    CHECK(result.stages.back().eval.ap == 1.0);  // exact: every grid point at precision 1
    CHECK(gain_sum == Catch::Approx(1.0 - result.baseline.ap).margin(1e-12));
}
