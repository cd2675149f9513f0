#include "osfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "osfuse/rng.hpp"

namespace osf::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool inside_box(const obb::OrientedBox& b, double nx, double ny) {
    const double cs = std::cos(b.theta), sn = std::sin(b.theta);
    const double dx = nx - b.cx, dy = ny - b.cy;
    const double u = cs * dx + sn * dy;
    const double v = -sn * dx + cs * dy;
    return std::abs(u) <= 0.5 * b.w && std::abs(v) <= 0.5 * b.h;
}

// dark stripes for category 0, bright checkerboard for category 1; the
// category is carried by both the pattern and its mean level
double target_texture(int category, std::size_t y, std::size_t x) {
    if (category == 0) return (y / 3) % 2 == 0 ? 0.10 : 0.30;
    return ((y / 3) % 2) == ((x / 3) % 2) ? 0.70 : 0.90;
}

SyntheticPair make_pair(std::size_t index, const SynthConfig& cfg, SplitMix64 rng) {
    const std::size_t n = cfg.image_size;
    SyntheticPair pair;
    pair.category = static_cast<int>(index % 2);  // balanced by construction
    pair.a = Image::zeros(n, n, 1);
    pair.b = Image::zeros(n, n, 1);
    pair.occlusion_mask.assign(n * n, 0);

    // shared target geometry; near-constant area so the radar-side fill cue
    // is not confounded by size
    obb::OrientedBox box;
    box.cx = rng.uniform(0.35, 0.65);
    box.cy = rng.uniform(0.35, 0.65);
    box.w = rng.uniform(0.42, 0.48);
    box.h = rng.uniform(0.42, 0.48);
    box.theta = rng.uniform(0.0, kPi / 2.0);

    data::LabeledInstance inst;
    inst.category = pair.category;
    inst.box = obb::normalize_angle(box);
    inst.quad = obb::obb_to_quad(box);
    for (int i = 0; i < 4; ++i) {
        inst.quad.x[i] = std::clamp(inst.quad.x[i], 0.0, 1.0);
        inst.quad.y[i] = std::clamp(inst.quad.y[i], 0.0, 1.0);
    }
    pair.labels.push_back(inst);

    // modality A: textured background, textured target
    const double ph1 = rng.uniform(0.0, 2 * kPi), ph2 = rng.uniform(0.0, 2 * kPi);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double nx = (x + 0.5) / n, ny = (y + 0.5) / n;
            double v = 0.45 + 0.08 * std::sin(2 * kPi * 3 * nx + ph1) +
                       0.08 * std::cos(2 * kPi * 2 * ny + ph2) + 0.04 * rng.normal();
            if (inside_box(box, nx, ny)) v = target_texture(pair.category, y, x);
            pair.a.at(y, x) = std::clamp(v, 0.0, 1.0);
        }

    // occlusion blob: one opaque disk, fraction drawn around the configured
    // mean, placed fully inside when it fits
    const double frac = std::clamp(rng.uniform(0.0, 2.0 * cfg.occlusion_rate), 0.0, 0.85);
    if (frac > 0.0) {
        double radius = std::sqrt(frac * n * n / kPi);
        radius = std::min(radius, n / 2.0 - 1.0);
        const double lo = radius, hi = n - radius;
        const double ocx = hi > lo ? rng.uniform(lo, hi) : n / 2.0;
        const double ocy = hi > lo ? rng.uniform(lo, hi) : n / 2.0;
        // near-background tone: the blob hides content without shifting the
        // global brightness much
        const double fill = rng.uniform(0.40, 0.50);
        std::size_t covered = 0;
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                const double dx = x + 0.5 - ocx, dy = y + 0.5 - ocy;
                if (dx * dx + dy * dy <= radius * radius) {
                    pair.a.at(y, x) = std::clamp(fill + 0.05 * rng.normal(), 0.0, 1.0);
                    pair.occlusion_mask[y * n + x] = 1;
                    ++covered;
                }
            }
        pair.occluded_fraction = static_cast<double>(covered) / static_cast<double>(n * n);
    }

    // modality B: flat target whose level carries the category, speckled.
    // Per-image fill jitter makes the class bands overlap, so the radar-only
    // readout has an irreducible ambiguity even without noise.
    const double fill_b =
        (pair.category == 0 ? 0.40 : 0.60) + rng.uniform(-0.14, 0.14);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double nx = (x + 0.5) / n, ny = (y + 0.5) / n;
            double v = 0.18 + 0.03 * rng.normal();
            if (inside_box(box, nx, ny)) v = fill_b;
            if (cfg.speckle) v *= rng.exponential();
            pair.b.at(y, x) = std::clamp(v, 0.0, 1.0);
        }
    return pair;
}

}  // namespace

std::vector<SyntheticPair> generate_synthetic_pairs(const SynthConfig& cfg) {
    SplitMix64 root(cfg.seed);
    SplitMix64 data = root.split("data");
    std::vector<SyntheticPair> out;
    out.reserve(cfg.pairs);
    for (std::size_t i = 0; i < cfg.pairs; ++i) out.push_back(make_pair(i, cfg, data.split(i)));
    return out;
}

}  // namespace osf::synth
