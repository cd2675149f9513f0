#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "osfuse/errors.hpp"
#include "osfuse/obbgeom.hpp"
#include "osfuse/rng.hpp"

using namespace osf;
using namespace osf::obb;

namespace {

bool point_in_box(const OrientedBox& b, double px, double py) {
    const double cs = std::cos(b.theta), sn = std::sin(b.theta);
    const double dx = px - b.cx, dy = py - b.cy;
    const double u = cs * dx + sn * dy;
    const double v = -sn * dx + cs * dy;
    return std::abs(u) <= 0.5 * b.w && std::abs(v) <= 0.5 * b.h;
}

// Stratified-jittered membership sampling over the joint bounding box.
double mc_iou(const OrientedBox& a, const OrientedBox& b, std::size_t side, SplitMix64& rng) {
    Quad qa = obb_to_quad(a), qb = obb_to_quad(b);
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (int i = 0; i < 4; ++i) {
        xmin = std::min({xmin, qa.x[i], qb.x[i]});
        xmax = std::max({xmax, qa.x[i], qb.x[i]});
        ymin = std::min({ymin, qa.y[i], qb.y[i]});
        ymax = std::max({ymax, qa.y[i], qb.y[i]});
    }
    std::size_t in_union = 0, in_both = 0;
    for (std::size_t iy = 0; iy < side; ++iy)
        for (std::size_t ix = 0; ix < side; ++ix) {
            const double px = xmin + (xmax - xmin) * (ix + rng.uniform()) / side;
            const double py = ymin + (ymax - ymin) * (iy + rng.uniform()) / side;
            const bool ia = point_in_box(a, px, py);
            const bool ib = point_in_box(b, px, py);
            if (ia || ib) ++in_union;
            if (ia && ib) ++in_both;
        }
    return in_union == 0 ? 0.0 : static_cast<double>(in_both) / static_cast<double>(in_union);
}

OrientedBox random_box(SplitMix64& rng) {
    OrientedBox b;
    b.cx = rng.uniform(0.3, 0.7);
    b.cy = rng.uniform(0.3, 0.7);
    b.w = rng.uniform(0.1, 0.5);
    b.h = rng.uniform(0.1, 0.5);
    b.theta = rng.uniform(0, std::numbers::pi);
    return b;
}

}  // namespace

TEST_SUITE_BEGIN("obbgeom");

TEST_CASE("quad_to_obb on an axis-aligned quad") {
    Quad q;
    q.x = {0.1, 0.3, 0.3, 0.1};
    q.y = {0.2, 0.2, 0.4, 0.4};
    OrientedBox b = quad_to_obb(q);
    CHECK(b.cx == doctest::Approx(0.2));
    CHECK(b.cy == doctest::Approx(0.3));
    CHECK(b.w == doctest::Approx(0.2));
    CHECK(b.h == doctest::Approx(0.2));
    CHECK(b.theta == doctest::Approx(0.0).epsilon(1e-12));

    // the same quad rotated a quarter turn about its center maps to the same box
    Quad r;
    for (int i = 0; i < 4; ++i) {
        r.x[i] = 0.2 - (q.y[i] - 0.3);
        r.y[i] = 0.3 + (q.x[i] - 0.2);
    }
    OrientedBox b2 = quad_to_obb(r);
    CHECK(rotated_iou(b, b2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("quad_to_obb rejects degenerate input") {
    Quad line;
    line.x = {0.1, 0.2, 0.3, 0.4};
    line.y = {0.1, 0.2, 0.3, 0.4};
    CHECK_THROWS_AS(quad_to_obb(line), DegeneracyError);
    Quad dup;
    dup.x = {0.1, 0.1, 0.1, 0.1};
    dup.y = {0.2, 0.2, 0.2, 0.2};
    CHECK_THROWS_AS(quad_to_obb(dup), DegeneracyError);
}

TEST_CASE("obb/quad round trip up to the w/h-theta symmetry") {
    SplitMix64 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        OrientedBox b = normalize_angle(random_box(rng));
        OrientedBox r = quad_to_obb(obb_to_quad(b));
        CHECK(std::abs(r.cx - b.cx) < 1e-9);
        CHECK(std::abs(r.cy - b.cy) < 1e-9);
        CHECK(std::abs(r.w - b.w) < 1e-9);
        CHECK(std::abs(r.h - b.h) < 1e-9);
        CHECK(std::abs(r.theta - b.theta) < 1e-9);
        CHECK(rotated_iou(b, r) > 1.0 - 1e-9);
    }
}

TEST_CASE("obb_to_quad corner positions") {
    OrientedBox sq{0.5, 0.5, 0.2, 0.2, 0.0};
    Quad q = obb_to_quad(sq);
    CHECK(q.x[0] == doctest::Approx(0.4));
    CHECK(q.y[0] == doctest::Approx(0.4));
    CHECK(q.x[2] == doctest::Approx(0.6));
    CHECK(q.y[2] == doctest::Approx(0.6));

    OrientedBox rot{0.0, 0.0, 0.2, 0.2, std::numbers::pi / 4.0};
    Quad qr = obb_to_quad(rot);
    for (int i = 0; i < 4; ++i) {
        const double dist = std::hypot(qr.x[i], qr.y[i]);
        CHECK(dist == doctest::Approx(0.2 / std::sqrt(2.0)));
        CHECK(std::min(std::abs(qr.x[i]), std::abs(qr.y[i])) == doctest::Approx(0.0));
    }
}

TEST_CASE("normalize_angle quarter and half turns") {
    OrientedBox a{0.5, 0.5, 2.0, 1.0, std::numbers::pi / 2.0};
    OrientedBox na = normalize_angle(a);
    CHECK(na.theta == doctest::Approx(0.0));
    CHECK(na.w == doctest::Approx(1.0));
    CHECK(na.h == doctest::Approx(2.0));

    OrientedBox b{0.5, 0.5, 2.0, 1.0, std::numbers::pi};
    OrientedBox nb = normalize_angle(b);
    CHECK(nb.theta == doctest::Approx(0.0));
    CHECK(nb.w == doctest::Approx(2.0));
    CHECK(nb.h == doctest::Approx(1.0));

    SplitMix64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        OrientedBox r = random_box(rng);
        r.theta = rng.uniform(-20, 20);
        OrientedBox nr = normalize_angle(r);
        CHECK(nr.theta >= 0.0);
        CHECK(nr.theta < std::numbers::pi / 2.0);
        CHECK(rotated_iou(r, nr) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("rotated_iou analytic cases") {
    OrientedBox u{0.0, 0.0, 1.0, 1.0, 0.0};
    CHECK(rotated_iou(u, u) == doctest::Approx(1.0));

    OrientedBox far{5.0, 5.0, 1.0, 1.0, 0.3};
    CHECK(rotated_iou(u, far) == 0.0);

    OrientedBox shifted{0.5, 0.0, 1.0, 1.0, 0.0};
    CHECK(rotated_iou(u, shifted) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    OrientedBox diag{0.0, 0.0, 1.0, 1.0, std::numbers::pi / 4.0};
    CHECK(rotated_iou(u, diag) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-9));

    OrientedBox degenerate{0.0, 0.0, 0.0, 1.0, 0.0};
    CHECK(rotated_iou(u, degenerate) == 0.0);
}

TEST_CASE("rotated_iou is symmetric and agrees with membership sampling") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        OrientedBox a = random_box(rng);
        OrientedBox b = random_box(rng);
        const double ab = rotated_iou(a, b);
        const double ba = rotated_iou(b, a);
        CHECK(std::abs(ab - ba) < 1e-12);
        SplitMix64 mc_rng = rng.split(trial);
        CHECK(std::abs(ab - mc_iou(a, b, 400, mc_rng)) < 5e-3);
    }
}

TEST_CASE("gaussian box moments") {
    GaussianBox g = obb_to_gaussian({0.0, 0.0, 2.0, 2.0, 0.0});
    CHECK(g.sigma[0][0] == doctest::Approx(1.0 / 3.0));
    CHECK(g.sigma[1][1] == doctest::Approx(1.0 / 3.0));
    CHECK(g.sigma[0][1] == doctest::Approx(0.0));

    GaussianBox a = obb_to_gaussian({0.1, 0.2, 0.4, 0.2, std::numbers::pi / 2.0});
    GaussianBox b = obb_to_gaussian({0.1, 0.2, 0.2, 0.4, 0.0});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(a.sigma[i][j] == doctest::Approx(b.sigma[i][j]));

    SplitMix64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        GaussianBox g2 = obb_to_gaussian(random_box(rng));
        CHECK(g2.sigma[0][1] == g2.sigma[1][0]);
        const double tr = g2.sigma[0][0] + g2.sigma[1][1];
        const double det = g2.sigma[0][0] * g2.sigma[1][1] - g2.sigma[0][1] * g2.sigma[1][0];
        CHECK(tr > 0.0);
        CHECK(det > 0.0);
    }
}

TEST_CASE("probiou identical, derived and limit cases") {
    OrientedBox a{0.0, 0.0, 2.0, 2.0, 0.0};
    CHECK(probiou_similarity(a, a) == doctest::Approx(1.0));
    CHECK(probiou_hellinger(a, a) == doctest::Approx(0.0));

    OrientedBox b{1.0, 0.0, 2.0, 2.0, 0.0};
    // B = (1/8) * 1 / (1/3) * ... = 0.375 with Sigma = I/3 on both sides
    const double expect = 1.0 - std::sqrt(1.0 - std::exp(-0.375));
    CHECK(probiou_similarity(a, b) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(probiou_similarity(a, b) == doctest::Approx(0.4408).epsilon(1e-3));

    OrientedBox far{2000.0, 0.0, 2.0, 2.0, 0.0};
    CHECK(probiou_similarity(a, far) < 1e-6);

    OrientedBox thin{0.0, 0.0, 0.0, 1.0, 0.0};
    CHECK_THROWS_AS(probiou_similarity(a, thin), DegeneracyError);
}

TEST_CASE("probiou respects the normalize_angle symmetry and stays in [0,1]") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        OrientedBox a = random_box(rng);
        OrientedBox b = random_box(rng);
        const double s = probiou_similarity(a, b);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        OrientedBox a_swapped = a;
        std::swap(a_swapped.w, a_swapped.h);
        a_swapped.theta += std::numbers::pi / 2.0;
        CHECK(probiou_similarity(a_swapped, b) == doctest::Approx(s).epsilon(1e-10));
        // near-coincident perturbation keeps similarity below the identity value
        OrientedBox nudged = a;
        nudged.cx += 0.01;
        CHECK(probiou_similarity(a, nudged) < 1.0);
        const bool nudged_closer =
            probiou_similarity(a, nudged) > probiou_similarity(a, b) || rotated_iou(a, b) > 0.99;
        CHECK(nudged_closer);
    }
}

TEST_CASE("loss terms: zero-loss, BCE and DFL reference values") {
    // near-perfect prediction: logits saturated, boxes identical, side mass
    // on the straddled bins
    std::vector<MatchedTarget> targets = {{{0.5, 0.5, 0.25, 0.5, 0.3}, 1}};
    num::Tensor boxes({1, 5}, {0.5, 0.5, 0.25, 0.5, 0.3});
    num::Tensor logits({1, 2}, {-40.0, 40.0});
    num::Tensor dist({2, 16});
    // w = 0.25 -> y = 4 exactly; h = 0.5 -> y = 8 exactly
    for (int i = 0; i < 16; ++i) {
        dist[i] = i == 4 ? 60.0 : -60.0;
        dist[16 + i] = i == 8 ? 60.0 : -60.0;
    }
    LossTerms t = loss_terms(boxes, dist, logits, targets, 2);
    CHECK(t.reg < 1e-6);
    CHECK(t.cls == doctest::Approx(0.0));
    CHECK(t.dfl == doctest::Approx(0.0));
    CHECK(t.total == t.reg + t.dfl + t.cls);

    // BCE at p = 0.5 for the true class only
    num::Tensor logits2({1, 1}, {0.0});
    std::vector<MatchedTarget> t2 = {{{0.5, 0.5, 0.25, 0.5, 0.3}, 0}};
    LossTerms bce = loss_terms(boxes, dist, logits2, t2, 1);
    CHECK(bce.cls == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // DFL with y = bin + 0.5 and equal mass on the two bins
    std::vector<MatchedTarget> t3 = {{{0.5, 0.5, 4.5 / 16.0, 8.5 / 16.0, 0.3}, 0}};
    num::Tensor boxes3({1, 5}, {0.5, 0.5, 4.5 / 16.0, 8.5 / 16.0, 0.3});
    num::Tensor dist3({2, 16});
    for (int i = 0; i < 16; ++i) {
        dist3[i] = (i == 4 || i == 5) ? 60.0 : -60.0;
        dist3[16 + i] = (i == 8 || i == 9) ? 60.0 : -60.0;
    }
    LossTerms dfl = loss_terms(boxes3, dist3, logits2, t3, 1);
    CHECK(dfl.dfl == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("loss terms: contract errors") {
    std::vector<MatchedTarget> targets = {{{0.5, 0.5, 0.25, 0.5, 0.3}, 0}};
    num::Tensor boxes({1, 5}, {0.5, 0.5, 0.25, 0.5, 0.3});
    num::Tensor dist({2, 16});
    num::Tensor logits_bad({2, 1});
    CHECK_THROWS_AS(loss_terms(boxes, dist, logits_bad, targets, 1), ContractError);
    num::Tensor dist_bad({1, 16});
    num::Tensor logits({1, 1});
    CHECK_THROWS_AS(loss_terms(boxes, dist_bad, logits, targets, 1), ContractError);
}

TEST_CASE("loss gradients match finite differences") {
    SplitMix64 rng(31);
    std::vector<MatchedTarget> targets;
    const std::size_t n = 3;
    for (std::size_t i = 0; i < n; ++i) targets.push_back({random_box(rng), static_cast<int>(i % 2)});

    num::Tensor boxes({n, 5});
    for (std::size_t i = 0; i < n; ++i) {
        OrientedBox b = random_box(rng);
        boxes[i * 5 + 0] = b.cx;
        boxes[i * 5 + 1] = b.cy;
        boxes[i * 5 + 2] = b.w;
        boxes[i * 5 + 3] = b.h;
        boxes[i * 5 + 4] = b.theta;
    }
    num::Tensor dist({2 * n, 16});
    num::Tensor logits({n, 2});
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.uniform(-1, 1);

    num::Var vb = num::parameter(boxes, "boxes");
    num::Var vd = num::parameter(dist, "dist");
    num::Var vl = num::parameter(logits, "logits");
    auto op = [&](const std::vector<num::Var>&) {
        LossGraph g = loss_terms_var(vb, vd, vl, targets, 2);
        return g.total;
    };
    CHECK(num::finite_diff_check(op, {vb, vd, vl}, 1e-5) < 1e-4);
}

TEST_SUITE_END();
