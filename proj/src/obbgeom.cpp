#include "osfuse/obbgeom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "osfuse/errors.hpp"

namespace osf::obb {

using num::Tensor;
using num::Var;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Pt {
    double x, y;
};

double cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double shoelace(const std::vector<Pt>& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Pt& p = poly[i];
        const Pt& q = poly[(i + 1) % poly.size()];
        s += p.x * q.y - q.x * p.y;
    }
    return 0.5 * s;
}

std::vector<Pt> quad_points(const Quad& q) {
    std::vector<Pt> pts(4);
    for (int i = 0; i < 4; ++i) pts[i] = {q.x[i], q.y[i]};
    if (shoelace(pts) < 0) std::reverse(pts.begin(), pts.end());
    return pts;
}

// Sutherland-Hodgman clip of a convex subject polygon by one half-plane
// (left of edge a->b for counter-clockwise clip polygons).
std::vector<Pt> clip_halfplane(const std::vector<Pt>& poly, const Pt& a, const Pt& b) {
    std::vector<Pt> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Pt& cur = poly[i];
        const Pt& nxt = poly[(i + 1) % n];
        const double dc = cross(a, b, cur);
        const double dn = cross(a, b, nxt);
        if (dc >= 0) out.push_back(cur);
        if ((dc > 0 && dn < 0) || (dc < 0 && dn > 0)) {
            const double t = dc / (dc - dn);
            out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
        }
    }
    return out;
}

std::vector<Pt> convex_hull(std::vector<Pt> pts) {
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Pt& a, const Pt& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const std::size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Pt> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Covariance entries of the uniform distribution over the box.
void gaussian_entries(const OrientedBox& b, double& a, double& bb, double& c) {
    const double cs = std::cos(b.theta), sn = std::sin(b.theta);
    const double vw = b.w * b.w / 12.0, vh = b.h * b.h / 12.0;
    a = vw * cs * cs + vh * sn * sn;
    bb = vw * sn * sn + vh * cs * cs;
    c = (vw - vh) * sn * cs;
}

double bhattacharyya(const OrientedBox& b1, const OrientedBox& b2) {
    double a1, d1, c1, a2, d2, c2;
    gaussian_entries(b1, a1, d1, c1);
    gaussian_entries(b2, a2, d2, c2);
    const double det1 = a1 * d1 - c1 * c1;
    const double det2 = a2 * d2 - c2 * c2;
    if (det1 <= 0.0 || det2 <= 0.0)
        throw DegeneracyError("probiou: singular box covariance (w or h is zero)");
    const double am = 0.5 * (a1 + a2), dm = 0.5 * (d1 + d2), cm = 0.5 * (c1 + c2);
    const double detm = am * dm - cm * cm;
    const double dx = b1.cx - b2.cx, dy = b1.cy - b2.cy;
    const double quad = (dm * dx * dx - 2.0 * cm * dx * dy + am * dy * dy) / detm;
    return 0.125 * quad + 0.5 * std::log(detm / std::sqrt(det1 * det2));
}

}  // namespace

Quad obb_to_quad(const OrientedBox& b) {
    const double cs = std::cos(b.theta), sn = std::sin(b.theta);
    const double hw = 0.5 * b.w, hh = 0.5 * b.h;
    const double ox[4] = {-hw, hw, hw, -hw};
    const double oy[4] = {-hh, -hh, hh, hh};
    Quad q;
    for (int i = 0; i < 4; ++i) {
        q.x[i] = b.cx + cs * ox[i] - sn * oy[i];
        q.y[i] = b.cy + sn * ox[i] + cs * oy[i];
    }
    return q;
}

OrientedBox quad_to_obb(const Quad& q) {
    std::vector<Pt> pts(4);
    for (int i = 0; i < 4; ++i) pts[i] = {q.x[i], q.y[i]};
    std::vector<Pt> hull = convex_hull(pts);
    if (hull.size() < 3 || std::abs(shoelace(hull)) < 1e-16)
        throw DegeneracyError("quad_to_obb: vertices are collinear or duplicated");

    double best_area = 1e300;
    OrientedBox best;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Pt& p0 = hull[i];
        const Pt& p1 = hull[(i + 1) % hull.size()];
        const double ex = p1.x - p0.x, ey = p1.y - p0.y;
        const double len = std::hypot(ex, ey);
        if (len < 1e-300) continue;
        const double ux = ex / len, uy = ey / len;  // edge frame
        double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
        for (const Pt& p : hull) {
            const double u = p.x * ux + p.y * uy;
            const double v = -p.x * uy + p.y * ux;
            umin = std::min(umin, u);
            umax = std::max(umax, u);
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        const double area = (umax - umin) * (vmax - vmin);
        if (area < best_area) {
            best_area = area;
            const double cu = 0.5 * (umin + umax), cv = 0.5 * (vmin + vmax);
            best.cx = cu * ux - cv * uy;
            best.cy = cu * uy + cv * ux;
            best.w = umax - umin;
            best.h = vmax - vmin;
            best.theta = std::atan2(uy, ux);
        }
    }
    return normalize_angle(best);
}

OrientedBox normalize_angle(const OrientedBox& b) {
    OrientedBox out = b;
    out.theta = std::fmod(out.theta, kPi);
    if (out.theta < 0) out.theta += kPi;
    if (out.theta >= kPi / 2.0) {
        out.theta -= kPi / 2.0;
        std::swap(out.w, out.h);
    }
    return out;
}

double rotated_iou(const OrientedBox& a, const OrientedBox& b) {
    const double area_a = a.w * a.h, area_b = b.w * b.h;
    if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
    std::vector<Pt> pa = quad_points(obb_to_quad(a));
    const std::vector<Pt> pb = quad_points(obb_to_quad(b));
    for (std::size_t i = 0; i < pb.size() && !pa.empty(); ++i)
        pa = clip_halfplane(pa, pb[i], pb[(i + 1) % pb.size()]);
    const double inter = pa.size() >= 3 ? std::abs(shoelace(pa)) : 0.0;
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

GaussianBox obb_to_gaussian(const OrientedBox& b) {
    double a, d, c;
    gaussian_entries(b, a, d, c);
    GaussianBox g;
    g.mu = {b.cx, b.cy};
    g.sigma = {{{a, c}, {c, d}}};
    return g;
}

double probiou_hellinger(const OrientedBox& a, const OrientedBox& b) {
    const double bd = bhattacharyya(a, b);
    return std::sqrt(std::max(0.0, 1.0 - std::exp(-bd)));
}

double probiou_similarity(const OrientedBox& a, const OrientedBox& b) {
    return 1.0 - probiou_hellinger(a, b);
}

Var probiou_hellinger_var(const Var& pred, std::size_t offset, const OrientedBox& target) {
    using namespace num;
    Var cx = pick(pred, offset + 0);
    Var cy = pick(pred, offset + 1);
    Var w = pick(pred, offset + 2);
    Var h = pick(pred, offset + 3);
    Var th = pick(pred, offset + 4);

    Var cs = cos(th), sn = sin(th);
    Var vw = scale(mul(w, w), 1.0 / 12.0);
    Var vh = scale(mul(h, h), 1.0 / 12.0);
    Var a1 = add(mul(vw, mul(cs, cs)), mul(vh, mul(sn, sn)));
    Var d1 = add(mul(vw, mul(sn, sn)), mul(vh, mul(cs, cs)));
    Var c1 = mul(sub(vw, vh), mul(sn, cs));
    Var det1 = sub(mul(a1, d1), mul(c1, c1));

    double a2, d2, c2;
    gaussian_entries(target, a2, d2, c2);
    const double det2 = a2 * d2 - c2 * c2;
    if (det2 <= 0.0) throw DegeneracyError("probiou: singular target covariance");

    Var am = scale(add_scalar(a1, a2), 0.5);
    Var dm = scale(add_scalar(d1, d2), 0.5);
    Var cm = scale(add_scalar(c1, c2), 0.5);
    Var detm = sub(mul(am, dm), mul(cm, cm));

    Var dx = add_scalar(cx, -target.cx);
    Var dy = add_scalar(cy, -target.cy);
    Var quad = div(add(sub(mul(dm, mul(dx, dx)), scale(mul(cm, mul(dx, dy)), 2.0)),
                       mul(am, mul(dy, dy))),
                   detm);
    Var logterm = log(div(detm, sqrt(scale(det1, det2))));
    Var bd = add(scale(quad, 0.125), scale(logterm, 0.5));
    // small floor keeps the square root differentiable for near-identical
    // boxes; the eager path stays exact
    return sqrt(add_scalar(neg(exp(neg(bd))), 1.0 + 1e-18));
}

LossGraph loss_terms_var(const Var& pred_boxes, const Var& pred_dist, const Var& pred_logits,
                         const std::vector<MatchedTarget>& targets, int num_classes,
                         int dfl_bins) {
    using namespace num;
    const std::size_t n = targets.size();
    if (n == 0) throw ContractError("loss_terms: no matched pairs");
    if (pred_boxes->value.rank() != 2 || pred_boxes->value.rows() != n ||
        pred_boxes->value.cols() != 5)
        throw ContractError("loss_terms: pred_boxes must be n x 5 with n = " + std::to_string(n));
    if (pred_logits->value.rank() != 2 || pred_logits->value.rows() != n ||
        pred_logits->value.cols() != static_cast<std::size_t>(num_classes))
        throw ContractError("loss_terms: logits/targets length mismatch (" +
                            pred_logits->value.shape_str() + " vs " + std::to_string(n) +
                            " targets)");
    if (pred_dist->value.rank() != 2 || pred_dist->value.rows() != 2 * n ||
        pred_dist->value.cols() != static_cast<std::size_t>(dfl_bins))
        throw ContractError("loss_terms: pred_dist must be 2n x bins");

    // classification: mean binary cross-entropy over all class logits,
    // softplus(z) - y z form
    Tensor onehot({n, static_cast<std::size_t>(num_classes)});
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i].category < 0 || targets[i].category >= num_classes)
            throw ContractError("loss_terms: category out of range: " +
                                std::to_string(targets[i].category));
        onehot[i * num_classes + targets[i].category] = 1.0;
    }
    Var cls = mean(sub(softplus(pred_logits), mul(pred_logits, constant(std::move(onehot)))));

    // regression: mean Hellinger distance over matched pairs
    Var reg;
    for (std::size_t i = 0; i < n; ++i) {
        Var hi = probiou_hellinger_var(pred_boxes, i * 5, targets[i].box);
        reg = i == 0 ? hi : add(reg, hi);
    }
    reg = scale(reg, 1.0 / static_cast<double>(n));

    // distribution focal loss over the discretized side lengths
    Var probs = softmax_lastdim(pred_dist);
    Var dfl;
    bool first = true;
    for (std::size_t i = 0; i < n; ++i) {
        const double sides[2] = {targets[i].box.w, targets[i].box.h};
        for (std::size_t s = 0; s < 2; ++s) {
            double y = sides[s] * dfl_bins;
            y = std::clamp(y, 0.0, static_cast<double>(dfl_bins - 1));
            const std::size_t bin = static_cast<std::size_t>(y) >= static_cast<std::size_t>(dfl_bins - 1)
                                        ? static_cast<std::size_t>(dfl_bins - 2)
                                        : static_cast<std::size_t>(y);
            const double frac = y - static_cast<double>(bin);
            const std::size_t row = 2 * i + s;
            Var term = scale(neg(log(pick(probs, row * dfl_bins + bin))), 1.0 - frac);
            if (frac > 0.0)
                term = add(term,
                           scale(neg(log(pick(probs, row * dfl_bins + bin + 1))), frac));
            dfl = first ? term : add(dfl, term);
            first = false;
        }
    }
    dfl = scale(dfl, 1.0 / static_cast<double>(2 * n));

    LossGraph out;
    out.reg = reg;
    out.dfl = dfl;
    out.cls = cls;
    out.total = add(add(reg, dfl), cls);
    return out;
}

LossTerms loss_terms(const Tensor& pred_boxes, const Tensor& pred_dist, const Tensor& pred_logits,
                     const std::vector<MatchedTarget>& targets, int num_classes, int dfl_bins) {
    LossGraph g = loss_terms_var(num::constant(pred_boxes), num::constant(pred_dist),
                                 num::constant(pred_logits), targets, num_classes, dfl_bins);
    LossTerms t;
    t.reg = g.reg->value[0];
    t.dfl = g.dfl->value[0];
    t.cls = g.cls->value[0];
    t.total = t.reg + t.dfl + t.cls;
    return t;
}

}  // namespace osf::obb
