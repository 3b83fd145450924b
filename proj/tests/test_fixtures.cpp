#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "test_util.hpp"

using namespace kptdiag;
using Catch::Matchers::ContainsSubstring;

namespace {

const KeypointSchema kMini = testutil::mini_schema();

InjectionSpec mixed_spec(std::uint64_t seed = 7) {
    InjectionSpec spec;
    spec.rates = {{ErrorKind::Jitter, 0.15},
                  {ErrorKind::Inversion, 0.05},
                  {ErrorKind::Swap, 0.05},
                  {ErrorKind::Miss, 0.10}};
    spec.rng_seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("generation is a pure function of spec and seed") {
    const auto spec = mixed_spec(42);
    const auto a = generate(6, 3, spec, kMini);
    const auto b = generate(6, 3, spec, kMini);
    CHECK(a.images == b.images);
    CHECK(a.gts == b.gts);
    CHECK(a.dets == b.dets);
    CHECK(a.fn_gt_ids == b.fn_gt_ids);
    CHECK(a.fp_det_ids == b.fp_det_ids);
    CHECK(a.duplicate_det_ids == b.duplicate_det_ids);
    CHECK(a.degraded == b.degraded);
    REQUIRE(a.truth.size() == b.truth.size());
    for (std::size_t i = 0; i < a.truth.size(); ++i) {
        CHECK(a.truth[i].det_id == b.truth[i].det_id);
        CHECK(a.truth[i].gt_id == b.truth[i].gt_id);
        CHECK(a.truth[i].kinds == b.truth[i].kinds);
    }

    SECTION("a different seed moves the geometry") {
        auto other = spec;
        other.rng_seed = 43;
        const auto c = generate(6, 3, other, kMini);
        CHECK(a.dets != c.dets);
    }
}

TEST_CASE("zero rates produce an all-good dataset") {
    InjectionSpec spec;
    spec.rng_seed = 5;
    const auto data = generate(4, 2, spec, kMini);
    CHECK(data.images.size() == 4);
    CHECK(data.gts.size() == 8);
    CHECK(data.dets.size() == 8);
    CHECK(data.fn_gt_ids.empty());
    CHECK(data.fp_det_ids.empty());
    CHECK(data.duplicate_det_ids.empty());
    CHECK(data.degraded == 0);
    for (const auto& t : data.truth)
        for (ErrorKind k : t.kinds) CHECK(k == ErrorKind::Good);

    // ids follow the documented scheme
    CHECK(data.gts[0].id == 1001);
    CHECK(data.gts[1].id == 1002);
    CHECK(data.dets[0].id == 1001);
    CHECK(data.gts[2].image_id == 2);
}

TEST_CASE("optimal scores equal the best reachable OKS") {
    const auto data = generate(5, 3, mixed_spec(11), kMini);
    for (const auto& d : data.dets) {
        double best = 0.0;
        for (const auto& g : data.gts)
            if (g.image_id == d.image_id) best = std::max(best, oks(d, g, kMini));
        CHECK(d.score == best);
    }
}

TEST_CASE("noisy and random score modes stay in [0,1] and stay deterministic") {
    for (ScoreMode mode : {ScoreMode::NoisyOptimal, ScoreMode::Random}) {
        auto spec = mixed_spec(19);
        spec.score_mode = mode;
        const auto a = generate(4, 2, spec, kMini);
        const auto b = generate(4, 2, spec, kMini);
        CHECK(a.dets == b.dets);
        for (const auto& d : a.dets) {
            CHECK(d.score >= 0.0);
            CHECK(d.score <= 1.0);
        }
    }
}

TEST_CASE("fn, fp, and duplicate injection bookkeeping") {
    auto spec = mixed_spec(23);
    spec.fn_rate = 0.4;
    spec.fp_rate = 0.8;
    spec.duplicate_rate = 0.4;
    const auto data = generate(20, 2, spec, kMini);

    CHECK_FALSE(data.fn_gt_ids.empty());
    CHECK_FALSE(data.fp_det_ids.empty());
    CHECK_FALSE(data.duplicate_det_ids.empty());

    // dropped people have no detection and no truth record
    std::set<std::int64_t> truth_gts;
    for (const auto& t : data.truth) truth_gts.insert(t.gt_id);
    for (auto id : data.fn_gt_ids) CHECK(truth_gts.count(id) == 0);

    // every detection is exactly one of: labeled, duplicate, background
    std::set<std::int64_t> truth_dets, dets_all;
    for (const auto& t : data.truth) truth_dets.insert(t.det_id);
    for (const auto& d : data.dets) dets_all.insert(d.id);
    std::set<std::int64_t> expected = truth_dets;
    expected.insert(data.fp_det_ids.begin(), data.fp_det_ids.end());
    expected.insert(data.duplicate_det_ids.begin(), data.duplicate_det_ids.end());
    CHECK(expected == dets_all);
    CHECK(truth_dets.size() + data.fp_det_ids.size() + data.duplicate_det_ids.size() ==
          dets_all.size());

    // background detections sit on the spare slot: similarity 0 to every person
    std::set<std::int64_t> fp_ids(data.fp_det_ids.begin(), data.fp_det_ids.end());
    std::set<std::int64_t> dup_ids(data.duplicate_det_ids.begin(), data.duplicate_det_ids.end());
    for (const auto& d : data.dets) {
        double best = 0.0;
        for (const auto& g : data.gts)
            if (g.image_id == d.image_id) best = std::max(best, oks(d, g, kMini));
        if (fp_ids.count(d.id)) {
            CHECK(best == 0.0);
        } else if (dup_ids.count(d.id)) {
            CHECK(best <= 0.45);
            CHECK(best >= 0.25);
        } else {
            // primaries overlap their own person; with several injected
            // inversions/misses OKS can sink arbitrarily low, but never to 0
            CHECK(best > 0.0);
        }
    }
}

TEST_CASE("inversion on an unpaired part degrades to jitter") {
    InjectionSpec spec;
    spec.rates = {{ErrorKind::Inversion, 1.0}};
    spec.rng_seed = 3;
    const auto data = generate(3, 2, spec, kMini);
    // mini schema: the head (index 0) has no counterpart
    CHECK(data.degraded == 3 * 2);
    for (const auto& t : data.truth) {
        CHECK(t.kinds[0] == ErrorKind::Jitter);
        CHECK(t.kinds[1] == ErrorKind::Inversion);
        CHECK(t.kinds[2] == ErrorKind::Inversion);
    }
}

TEST_CASE("generator works with the full 17-part schema") {
    const auto schema = coco17_schema();
    auto spec = mixed_spec(31);
    spec.fn_rate = 0.1;
    spec.fp_rate = 0.3;
    const auto data = generate(3, 4, spec, schema);
    CHECK(data.gts.size() == 12);
    for (const auto& d : data.dets) REQUIRE(d.keypoints.size() == 17);

    // the generated labels really classify as intended (spot re-check)
    const EvalConfig config;
    std::size_t checked = 0;
    for (const auto& t : data.truth) {
        const auto det = std::find_if(data.dets.begin(), data.dets.end(),
                                      [&](const Detection& d) { return d.id == t.det_id; });
        const auto gt = std::find_if(data.gts.begin(), data.gts.end(),
                                     [&](const GtInstance& g) { return g.id == t.gt_id; });
        REQUIRE(det != data.dets.end());
        REQUIRE(gt != data.gts.end());
        std::vector<GtInstance> in_image;
        for (const auto& g : data.gts)
            if (g.image_id == gt->image_id) in_image.push_back(g);
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const auto label = classify_keypoint(*det, *gt, in_image, i, schema, config);
            CHECK(label.kind == t.kinds[i]);
            ++checked;
        }
    }
    CHECK(checked == data.truth.size() * 17);
}

TEST_CASE("infeasible layouts are rejected with a reason") {
    const auto spec = mixed_spec();
    SECTION("swap needs company") {
        CHECK_THROWS_WITH(generate(2, 1, spec, kMini),
                          ContainsSubstring("swap injection needs >= 2 people"));
    }
    SECTION("people too close for exact separation") {
        auto tight = spec;
        tight.layout.spacing_factor = 3.0;
        CHECK_THROWS_WITH(generate(2, 2, tight, kMini),
                          ContainsSubstring("spacing_factor too small"));
    }
    SECTION("keypoint grid too dense") {
        auto dense = spec;
        dense.layout.pitch_factor = 1.5;
        CHECK_THROWS_WITH(generate(2, 2, dense, kMini),
                          ContainsSubstring("pitch_factor must be >= 2"));
    }
    SECTION("counts must be positive") {
        CHECK_THROWS_AS(generate(0, 2, spec, kMini), validation_error);
        CHECK_THROWS_AS(generate(2, 0, spec, kMini), validation_error);
    }
}

TEST_CASE("injection spec validation") {
    InjectionSpec spec;
    SECTION("good is not an injectable kind") {
        spec.rates = {{ErrorKind::Good, 0.5}};
        CHECK_THROWS_AS(spec.validate(), validation_error);
    }
    SECTION("rates must sum to at most 1") {
        spec.rates = {{ErrorKind::Jitter, 0.7}, {ErrorKind::Miss, 0.5}};
        CHECK_THROWS_AS(spec.validate(), validation_error);
    }
    SECTION("probabilities live in [0,1]") {
        spec.fn_rate = 1.5;
        CHECK_THROWS_AS(spec.validate(), validation_error);
    }
    SECTION("scales must be ordered") {
        spec.layout.scale_min = 80.0;  // above scale_max
        CHECK_THROWS_AS(spec.validate(), validation_error);
    }
}
