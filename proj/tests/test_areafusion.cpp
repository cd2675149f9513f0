#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "osfuse/areafusion.hpp"
#include "osfuse/errors.hpp"
#include "osfuse/rng.hpp"

using namespace osf;
using namespace osf::afm;
using osf::scan::FeatureMap;

namespace {

FeatureMap random_map(std::size_t r, std::size_t c, std::size_t ch, SplitMix64& rng) {
    FeatureMap fm = FeatureMap::zeros(r, c, ch, 3);
    for (double& v : fm.data) v = rng.uniform(-1, 1);
    return fm;
}

// Brute-force blockwise cross-attention, written against the definition with
// no shared helpers.
FeatureMap oracle_fuse(const FeatureMap& o, const FeatureMap& s, const AreaConfig& cfg,
                       const AFMParams& p) {
    const std::size_t C = o.channels, dh = cfg.head_dim;
    const std::size_t stripes = cfg.k;
    const std::size_t pr = cfg.axis == Axis::Horizontal
                               ? (o.rows + stripes - 1) / stripes * stripes
                               : o.rows;
    const std::size_t pc = cfg.axis == Axis::Vertical
                               ? (o.cols + stripes - 1) / stripes * stripes
                               : o.cols;
    auto val = [&](const FeatureMap& fm, std::size_t r, std::size_t c, std::size_t ch) {
        return (r < fm.rows && c < fm.cols) ? fm.at(r, c, ch) : 0.0;
    };
    FeatureMap out = FeatureMap::zeros(o.rows, o.cols, C, o.level);
    for (std::size_t b = 0; b < stripes; ++b) {
        std::vector<std::pair<std::size_t, std::size_t>> cells;
        if (cfg.axis == Axis::Horizontal) {
            for (std::size_t r = b * (pr / stripes); r < (b + 1) * (pr / stripes); ++r)
                for (std::size_t c = 0; c < pc; ++c) cells.emplace_back(r, c);
        } else {
            for (std::size_t r = 0; r < pr; ++r)
                for (std::size_t c = b * (pc / stripes); c < (b + 1) * (pc / stripes); ++c)
                    cells.emplace_back(r, c);
        }
        const std::size_t L = cells.size();
        auto project = [&](const FeatureMap& fm, const num::Tensor& w, std::size_t i,
                           std::size_t d) {
            double acc = 0.0;
            for (std::size_t ch = 0; ch < C; ++ch)
                acc += val(fm, cells[i].first, cells[i].second, ch) * w[ch * dh + d];
            return acc;
        };
        auto attend = [&](const FeatureMap& qs, const num::Tensor& wq, const FeatureMap& ks,
                          const num::Tensor& wk, const FeatureMap& vs, std::size_t i,
                          std::size_t ch) {
            std::vector<double> score(L);
            double mx = -1e300;
            for (std::size_t j = 0; j < L; ++j) {
                double sc = 0.0;
                for (std::size_t d = 0; d < dh; ++d)
                    sc += project(qs, wq, i, d) * project(ks, wk, j, d);
                score[j] = sc / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, score[j]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < L; ++j) {
                score[j] = std::exp(score[j] - mx);
                sum += score[j];
            }
            double out_v = 0.0;
            for (std::size_t j = 0; j < L; ++j)
                out_v += score[j] / sum * val(vs, cells[j].first, cells[j].second, ch);
            return out_v;
        };
        for (std::size_t i = 0; i < L; ++i) {
            auto [r, c] = cells[i];
            if (r >= o.rows || c >= o.cols) continue;
            for (std::size_t ch = 0; ch < C; ++ch) {
                const double a1 = attend(o, p.wq_os->value, s, p.wk_os->value, s, i, ch);
                const double a2 = attend(s, p.wq_so->value, o, p.wk_so->value, o, i, ch);
                const double mean_in = 0.5 * (o.at(r, c, ch) + s.at(r, c, ch));
                out.at(r, c, ch) = (a1 + a2 + mean_in) / 3.0;
            }
        }
    }
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("areafusion");

TEST_CASE("partition: k=1 returns the map itself") {
    SplitMix64 rng(1);
    FeatureMap fm = random_map(4, 4, 2, rng);
    AreaConfig cfg;
    cfg.k = 1;
    auto blocks = area_partition(fm, cfg);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].data == fm.data);
}

TEST_CASE("partition: 4x4 map with k=2 splits rows {0,1} and {2,3}") {
    SplitMix64 rng(2);
    FeatureMap fm = random_map(4, 4, 1, rng);
    AreaConfig cfg;
    cfg.k = 2;
    cfg.axis = Axis::Horizontal;
    auto blocks = area_partition(fm, cfg);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].rows == 2);
    CHECK(blocks[0].cols == 4);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(blocks[0].at(r, c) == fm.at(r, c));
            CHECK(blocks[1].at(r, c) == fm.at(r + 2, c));
        }
}

TEST_CASE("partition then concat reproduces the map for many shapes") {
    SplitMix64 rng(3);
    for (std::size_t rows : {1, 3, 4, 7})
        for (std::size_t cols : {1, 2, 5, 8})
            for (std::size_t k : {1, 2, 3, 4})
                for (Axis axis : {Axis::Horizontal, Axis::Vertical}) {
                    FeatureMap fm = random_map(rows, cols, 2, rng);
                    AreaConfig cfg;
                    cfg.k = k;
                    cfg.axis = axis;
                    auto blocks = area_partition(fm, cfg);
                    FeatureMap back = area_concat(blocks, cfg, rows, cols);
                    CHECK(back.data == fm.data);
                }
}

TEST_CASE("fuse: constant equal inputs stay constant") {
    AreaConfig cfg;
    cfg.k = 2;
    cfg.head_dim = 3;
    SplitMix64 rng(7);
    AFMParams p = AFMParams::init(2, cfg.head_dim, rng, "afm");
    FeatureMap o = FeatureMap::zeros(4, 4, 2, 3);
    for (double& v : o.data) v = 0.37;
    FeatureMap s = o;
    FeatureMap fused = afm_fuse(o, s, cfg, p);
    for (double v : fused.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("fuse matches the brute-force oracle (k=1 global and k=2)") {
    SplitMix64 rng(11);
    for (std::size_t k : {1, 2}) {
        AreaConfig cfg;
        cfg.k = k;
        cfg.head_dim = 4;
        AFMParams p = AFMParams::init(3, cfg.head_dim, rng, "afm");
        FeatureMap o = random_map(4, 4, 3, rng);
        FeatureMap s = random_map(4, 4, 3, rng);
        FuseStats stats;
        FeatureMap fused = afm_fuse(o, s, cfg, p, &stats);
        FeatureMap expect = oracle_fuse(o, s, cfg, p);
        for (std::size_t i = 0; i < fused.data.size(); ++i)
            CHECK(std::abs(fused.data[i] - expect.data[i]) < 1e-10);
        CHECK(stats.attn_row_sum_min > 1.0 - 1e-12);
        CHECK(stats.attn_row_sum_max < 1.0 + 1e-12);
    }
}

TEST_CASE("fuse handles indivisible dimensions via pad-and-crop") {
    SplitMix64 rng(13);
    AreaConfig cfg;
    cfg.k = 3;
    cfg.head_dim = 2;
    cfg.axis = Axis::Vertical;
    AFMParams p = AFMParams::init(2, cfg.head_dim, rng, "afm");
    FeatureMap o = random_map(4, 5, 2, rng);
    FeatureMap s = random_map(4, 5, 2, rng);
    FeatureMap fused = afm_fuse(o, s, cfg, p);
    CHECK(fused.rows == 4);
    CHECK(fused.cols == 5);
    FeatureMap expect = oracle_fuse(o, s, cfg, p);
    for (std::size_t i = 0; i < fused.data.size(); ++i)
        CHECK(std::abs(fused.data[i] - expect.data[i]) < 1e-10);
}

TEST_CASE("graph fuse equals eager fuse") {
    SplitMix64 rng(17);
    AreaConfig cfg;
    cfg.k = 2;
    cfg.head_dim = 3;
    AFMParams p = AFMParams::init(2, cfg.head_dim, rng, "afm");
    FeatureMap o = random_map(4, 3, 2, rng);
    FeatureMap s = random_map(4, 3, 2, rng);
    num::Var ov = num::constant(num::Tensor({12, 2}, o.data));
    num::Var sv = num::constant(num::Tensor({12, 2}, s.data));
    num::Var fv = afm_fuse_var(ov, sv, 4, 3, cfg, p);
    FeatureMap eager = afm_fuse(o, s, cfg, p);
    for (std::size_t i = 0; i < eager.data.size(); ++i)
        CHECK(fv->value[i] == doctest::Approx(eager.data[i]).epsilon(1e-12));
}

TEST_CASE("perturbing one block leaves other blocks unchanged") {
    SplitMix64 rng(19);
    AreaConfig cfg;
    cfg.k = 2;
    cfg.head_dim = 3;
    AFMParams p = AFMParams::init(1, cfg.head_dim, rng, "afm");
    FeatureMap o = random_map(4, 4, 1, rng);
    FeatureMap s = random_map(4, 4, 1, rng);
    FeatureMap base = afm_fuse(o, s, cfg, p);
    FeatureMap o2 = o;
    o2.at(0, 1) += 0.5;  // block 0 (rows 0-1)
    FeatureMap bumped = afm_fuse(o2, s, cfg, p);
    for (std::size_t r = 2; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) CHECK(bumped.at(r, c) == base.at(r, c));
    bool changed = false;
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            if (bumped.at(r, c) != base.at(r, c)) changed = true;
    CHECK(changed);
}

TEST_CASE("projection gradients match finite differences") {
    SplitMix64 rng(23);
    AreaConfig cfg;
    cfg.k = 2;
    cfg.head_dim = 2;
    AFMParams p = AFMParams::init(2, cfg.head_dim, rng, "afm");
    num::Tensor ot({8, 2}), st({8, 2});
    for (std::size_t i = 0; i < ot.size(); ++i) {
        ot[i] = rng.uniform(-1, 1);
        st[i] = rng.uniform(-1, 1);
    }
    num::Var ov = num::parameter(ot, "o");
    num::Var sv = num::parameter(st, "s");
    auto op = [&](const std::vector<num::Var>&) {
        num::Var f = afm_fuse_var(ov, sv, 4, 2, cfg, p);
        return num::sum(num::mul(f, f));
    };
    std::vector<num::Var> params = p.parameters();
    params.push_back(ov);
    params.push_back(sv);
    CHECK(num::finite_diff_check(op, params, 1e-5) < 1e-4);
}

TEST_CASE("attention cost decreases as k grows") {
    SplitMix64 rng(29);
    AreaConfig cfg;
    cfg.head_dim = 4;
    AFMParams p = AFMParams::init(2, cfg.head_dim, rng, "afm");
    FeatureMap o = random_map(32, 32, 2, rng);
    FeatureMap s = random_map(32, 32, 2, rng);
    std::uint64_t prev = ~0ull;
    for (std::size_t k : {1, 2, 4, 8}) {
        cfg.k = k;
        FuseStats stats;
        afm_fuse(o, s, cfg, p, &stats);
        CHECK(stats.flops < prev);
        prev = stats.flops;
    }
}

TEST_CASE("shape mismatch rejected") {
    SplitMix64 rng(31);
    AreaConfig cfg;
    AFMParams p = AFMParams::init(2, cfg.head_dim, rng, "afm");
    FeatureMap o = random_map(4, 4, 2, rng);
    FeatureMap s = random_map(4, 3, 2, rng);
    CHECK_THROWS_AS(afm_fuse(o, s, cfg, p), ContractError);
}

TEST_SUITE_END();
