#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "osfuse/datasetio.hpp"
#include "osfuse/errors.hpp"
#include "osfuse/evalkit.hpp"
#include "osfuse/rng.hpp"

using namespace osf;
using namespace osf::eval;
using obb::OrientedBox;

namespace {

Detection det(const std::string& id, int cat, double score, OrientedBox b) {
    return Detection{id, cat, b, score};
}

// Hand-rolled precision-recall envelope evaluated at the 101 recall points.
double ap_oracle(const std::vector<bool>& flags, std::size_t n_gt) {
    std::vector<double> prec, rec;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i]) ++tp;
        prec.push_back(double(tp) / double(i + 1));
        rec.push_back(double(tp) / double(n_gt));
    }
    double ap = 0.0;
    for (int r = 0; r <= 100; ++r) {
        double best = 0.0;
        for (std::size_t i = 0; i < flags.size(); ++i)
            if (rec[i] >= r / 100.0 - 1e-12) best = std::max(best, prec[i]);
        ap += best;
    }
    return ap / 101.0;
}

std::vector<Detection> random_detections(SplitMix64& rng, const GroundTruth& gts,
                                         std::size_t extra_fp) {
    std::vector<Detection> dets;
    for (const auto& [id, insts] : gts)
        for (const auto& g : insts) {
            if (rng.uniform() < 0.8) {
                OrientedBox b = g.box;
                b.cx += rng.uniform(-0.05, 0.05);
                b.cy += rng.uniform(-0.05, 0.05);
                b.w *= rng.uniform(0.8, 1.2);
                b.h *= rng.uniform(0.8, 1.2);
                dets.push_back(det(id, g.category, rng.uniform(0.2, 1.0), b));
            }
        }
    for (std::size_t i = 0; i < extra_fp; ++i) {
        OrientedBox b{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.2),
                      rng.uniform(0.05, 0.2), rng.uniform(0.0, 1.5)};
        dets.push_back(det("img" + std::to_string(rng.next_below(4)),
                           static_cast<int>(rng.next_below(6)), rng.uniform(), b));
    }
    return dets;
}

GroundTruth random_gts(SplitMix64& rng, std::size_t images) {
    GroundTruth gts;
    for (std::size_t i = 0; i < images; ++i) {
        std::vector<GtInstance> insts;
        const std::size_t n = 1 + rng.next_below(4);
        for (std::size_t k = 0; k < n; ++k) {
            GtInstance g;
            g.category = static_cast<int>(rng.next_below(6));
            g.box = OrientedBox{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                                rng.uniform(0.08, 0.3), rng.uniform(0.08, 0.3),
                                rng.uniform(0.0, 1.5)};
            insts.push_back(g);
        }
        gts["img" + std::to_string(i)] = std::move(insts);
    }
    return gts;
}

}  // namespace

TEST_SUITE_BEGIN("evalkit");

TEST_CASE("matching: single detection, single gt") {
    OrientedBox g{0.5, 0.5, 0.2, 0.2, 0.0};
    OrientedBox d = g;
    d.cx += 0.005;  // IoU well above 0.5
    MatchResult m = match_detections({det("a", 0, 0.9, d)}, {g}, 0.5);
    REQUIRE(m.tp.size() == 1);
    CHECK(m.tp[0]);
    CHECK(m.unmatched_gt == 0);
}

TEST_CASE("matching: one gt matched at most once") {
    OrientedBox g{0.5, 0.5, 0.2, 0.2, 0.0};
    OrientedBox near = g;
    near.cx += 0.002;
    OrientedBox nearer = g;
    MatchResult m = match_detections({det("a", 0, 0.9, nearer), det("a", 0, 0.8, near)}, {g}, 0.5);
    CHECK(m.tp[0]);
    CHECK_FALSE(m.tp[1]);
    CHECK(m.unmatched_gt == 0);
}

TEST_CASE("matching: zero detections leave all gts unmatched") {
    OrientedBox g{0.5, 0.5, 0.2, 0.2, 0.0};
    MatchResult m = match_detections({}, {g, g, g}, 0.5);
    CHECK(m.tp.empty());
    CHECK(m.unmatched_gt == 3);
}

TEST_CASE("average precision reference cases") {
    CHECK(average_precision({true}, 1).value() == doctest::Approx(1.0));
    CHECK(average_precision({false}, 1).value() == doctest::Approx(0.0));

    const std::vector<bool> flags = {true, false, true};
    const double ap = average_precision(flags, 2).value();
    CHECK(ap == doctest::Approx(ap_oracle(flags, 2)).epsilon(1e-12));
    CHECK(std::abs(ap - 0.8333) < 2e-3);

    CHECK_FALSE(average_precision({}, 0).has_value());
}

TEST_CASE("evaluate: perfect detections score 100 everywhere") {
    SplitMix64 rng(3);
    GroundTruth gts = random_gts(rng, 4);
    std::vector<Detection> dets;
    for (const auto& [id, insts] : gts)
        for (const auto& g : insts) dets.push_back(det(id, g.category, 0.9, g.box));
    EvalReport rep = evaluate(dets, gts);
    CHECK(rep.ap50 == doctest::Approx(100.0));
    CHECK(rep.ap75 == doctest::Approx(100.0));
    CHECK(rep.map == doctest::Approx(100.0));
}

TEST_CASE("evaluate: empty detections score zero") {
    SplitMix64 rng(4);
    GroundTruth gts = random_gts(rng, 3);
    EvalReport rep = evaluate({}, gts);
    CHECK(rep.ap50 == 0.0);
    CHECK(rep.map == 0.0);
}

TEST_CASE("evaluate: nested thresholds keep map <= ap50 and runs are byte-identical") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        GroundTruth gts = random_gts(rng, 3);
        std::vector<Detection> dets = random_detections(rng, gts, 5);
        EvalReport a = evaluate(dets, gts);
        EvalReport b = evaluate(dets, gts);
        CHECK(a.to_json() == b.to_json());
        CHECK(a.map <= a.ap50 + 1e-9);
        CHECK(a.ap75 <= a.ap50 + 1e-9);
    }
}

TEST_CASE("evaluate: a lower-scored zero-iou detection never raises AP") {
    SplitMix64 rng(6);
    GroundTruth gts = random_gts(rng, 2);
    std::vector<Detection> dets = random_detections(rng, gts, 2);
    EvalReport base = evaluate(dets, gts);
    Detection junk = det("img0", 0, 1e-6, OrientedBox{5.0, 5.0, 0.01, 0.01, 0.0});
    dets.push_back(junk);
    EvalReport with_junk = evaluate(dets, gts);
    CHECK(with_junk.ap50 <= base.ap50 + 1e-9);
    CHECK(with_junk.map <= base.map + 1e-9);
}

TEST_CASE("evaluate rejects unknown categories") {
    GroundTruth gts;
    gts["a"].push_back({7, OrientedBox{0.5, 0.5, 0.1, 0.1, 0.0}});
    CHECK_THROWS_AS(evaluate({}, gts), InputError);
    try {
        evaluate({}, gts);
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
}

TEST_CASE("detection io round trip and parse errors") {
    SplitMix64 rng(7);
    GroundTruth gts = random_gts(rng, 2);
    std::vector<Detection> dets = random_detections(rng, gts, 3);
    std::string text = write_detections(dets);
    std::vector<Detection> back = read_detections(text);
    REQUIRE(back.size() == dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
        CHECK(back[i].image_id == dets[i].image_id);
        CHECK(back[i].category == dets[i].category);
        CHECK(std::abs(back[i].score - dets[i].score) < 1e-6);
        CHECK(std::abs(back[i].box.cx - dets[i].box.cx) < 1e-6);
    }

    CHECK_THROWS_AS(read_detections("img0 0 0.5 0.1 0.1\n"), ParseError);
    try {
        read_detections("img0 0 0.9 0.5 0.5 0.1 0.1 0.0\nimg1 0 0.5 0.1\n");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("golden fixture matches the independent reference evaluator") {
    const std::string dir = OSFUSE_TEST_DATA_DIR;
    std::ifstream detf(dir + "/golden/detections.txt");
    REQUIRE(detf.good());
    std::stringstream detbuf;
    detbuf << detf.rdbuf();
    std::vector<Detection> dets = read_detections(detbuf.str());

    GroundTruth gts;
    std::ifstream listf(dir + "/golden/images.txt");
    REQUIRE(listf.good());
    std::string image_id;
    while (listf >> image_id) {
        std::ifstream lf(dir + "/golden/gt/" + image_id + ".txt");
        REQUIRE(lf.good());
        std::stringstream lbuf;
        lbuf << lf.rdbuf();
        std::vector<GtInstance> insts;
        for (const auto& inst : data::parse_label_file(lbuf.str()))
            insts.push_back({inst.category, inst.box});
        gts[image_id] = std::move(insts);
    }

    EvalReport rep = evaluate(dets, gts);

    std::ifstream expf(dir + "/golden/expected.txt");
    REQUIRE(expf.good());
    double e_ap50, e_ap75, e_map;
    expf >> e_ap50 >> e_ap75 >> e_map;
    CHECK(rep.ap50 == doctest::Approx(e_ap50).epsilon(1e-6));
    CHECK(rep.ap75 == doctest::Approx(e_ap75).epsilon(1e-6));
    CHECK(rep.map == doctest::Approx(e_map).epsilon(1e-6));
    for (int cat = 0; cat < kNumCategories; ++cat) {
        double e_cls;
        expf >> e_cls;
        if (e_cls < 0) {
            CHECK_FALSE(rep.per_class_ap50[cat].has_value());
        } else {
            REQUIRE(rep.per_class_ap50[cat].has_value());
            CHECK(rep.per_class_ap50[cat].value() == doctest::Approx(e_cls).epsilon(1e-6));
        }
    }
}

TEST_SUITE_END();
