#include "osfuse/ssmfusion.hpp"

#include <algorithm>
#include <cmath>

#include "osfuse/errors.hpp"

namespace osf::ssm {

using num::Tensor;
using num::Var;

namespace {

double softplus_d(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid_d(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

SSMParams SSMParams::init(std::size_t state_dim, std::size_t channels, SplitMix64& rng,
                          const std::string& prefix) {
    SSMParams p;
    p.state_dim = state_dim;
    p.channels = channels;

    Tensor a_log({state_dim});
    for (std::size_t n = 0; n < state_dim; ++n) a_log[n] = std::log(1.0 + n);
    p.a_log = num::parameter(std::move(a_log), prefix + ".a_log");

    const double wscale = 1.0 / std::sqrt(static_cast<double>(channels));
    Tensor wb({state_dim, channels}), wc({state_dim, channels});
    for (std::size_t i = 0; i < wb.size(); ++i) wb[i] = wscale * rng.normal();
    for (std::size_t i = 0; i < wc.size(); ++i) wc[i] = wscale * rng.normal();
    p.w_b = num::parameter(std::move(wb), prefix + ".w_b");
    p.w_c = num::parameter(std::move(wc), prefix + ".w_c");

    Tensor wd({channels});
    for (std::size_t i = 0; i < channels; ++i) wd[i] = 0.01 * rng.normal();
    p.w_delta = num::parameter(std::move(wd), prefix + ".w_delta");
    // softplus(b_delta) = 0.1
    p.b_delta = num::parameter(Tensor::scalar(std::log(std::expm1(0.1))), prefix + ".b_delta");

    p.d_skip = num::parameter(Tensor::full({channels}, 1.0), prefix + ".d_skip");
    return p;
}

SSMParams SSMParams::passthrough(std::size_t state_dim, std::size_t channels) {
    SSMParams p;
    p.state_dim = state_dim;
    p.channels = channels;
    Tensor a_log({state_dim});
    for (std::size_t n = 0; n < state_dim; ++n) a_log[n] = std::log(1.0 + n);
    p.a_log = num::parameter(std::move(a_log), "pass.a_log");
    p.w_b = num::parameter(Tensor({state_dim, channels}), "pass.w_b");
    p.w_c = num::parameter(Tensor({state_dim, channels}), "pass.w_c");
    p.w_delta = num::parameter(Tensor({channels}), "pass.w_delta");
    p.b_delta = num::parameter(Tensor::scalar(std::log(std::expm1(0.1))), "pass.b_delta");
    p.d_skip = num::parameter(Tensor::full({channels}, 1.0), "pass.d_skip");
    return p;
}

std::vector<Var> SSMParams::parameters() const {
    return {a_log, w_b, w_c, w_delta, b_delta, d_skip};
}

std::size_t SSMParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p->value.size();
    return n;
}

std::vector<double> SSMParams::a_diag() const {
    std::vector<double> a(state_dim);
    for (std::size_t n = 0; n < state_dim; ++n) a[n] = -std::exp(a_log->value[n]);
    return a;
}

Discrete ssm_discretize(const std::vector<double>& a_diag, const std::vector<double>& b_t,
                        double delta) {
    if (delta <= 0.0)
        throw ContractError("ssm_discretize: step must be positive, got " + std::to_string(delta));
    Discrete d;
    d.a_bar.resize(a_diag.size());
    d.b_bar.resize(b_t.size());
    for (std::size_t n = 0; n < a_diag.size(); ++n) d.a_bar[n] = std::exp(delta * a_diag[n]);
    for (std::size_t n = 0; n < b_t.size(); ++n) d.b_bar[n] = delta * b_t[n];
    return d;
}

std::vector<std::vector<double>> scan_recurrence(const std::vector<std::vector<double>>& xs,
                                                 const std::vector<std::vector<double>>& a_bar,
                                                 const std::vector<std::vector<double>>& b_bar,
                                                 const std::vector<std::vector<double>>& c,
                                                 const std::vector<double>& d_skip) {
    const std::size_t T = xs.size();
    if (a_bar.size() != T || b_bar.size() != T || c.size() != T)
        throw ContractError("scan_recurrence: per-step parameter counts must match the sequence");
    if (T == 0) return {};
    const std::size_t C = xs[0].size();
    const std::size_t N = a_bar[0].size();
    std::vector<double> h(C * N, 0.0);
    std::vector<std::vector<double>> ys(T, std::vector<double>(C, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t d = 0; d < C; ++d) {
            const double x = xs[t][d];
            double y = d_skip.empty() ? 0.0 : d_skip[d] * x;
            for (std::size_t n = 0; n < N; ++n) {
                double& hv = h[d * N + n];
                hv = a_bar[t][n] * hv + b_bar[t][n] * x;
                y += c[t][n] * hv;
            }
            ys[t][d] = y;
        }
    }
    return ys;
}

namespace {

// Forward pass with all intermediates kept for the adjoint sweep.
struct ScanWork {
    std::size_t T = 0, C = 0, N = 0;
    std::vector<double> x;      // T*C
    std::vector<double> s;      // T, pre-softplus
    std::vector<double> delta;  // T
    std::vector<double> b;      // T*N
    std::vector<double> c;      // T*N
    std::vector<double> abar;   // T*N
    std::vector<double> h;      // T*C*N
    std::vector<double> y;      // T*C
    std::vector<double> a;      // N, the negative diagonal
    ScanStats stats;
};

ScanWork scan_forward(const double* x_data, std::size_t T, const SSMParams& p) {
    const std::size_t C = p.channels, N = p.state_dim;
    ScanWork w;
    w.T = T;
    w.C = C;
    w.N = N;
    w.x.assign(x_data, x_data + T * C);
    w.s.resize(T);
    w.delta.resize(T);
    w.b.resize(T * N);
    w.c.resize(T * N);
    w.abar.resize(T * N);
    w.h.assign(T * C * N, 0.0);
    w.y.resize(T * C);
    w.a = p.a_diag();

    const Tensor& wb = p.w_b->value;
    const Tensor& wc = p.w_c->value;
    const Tensor& wd = p.w_delta->value;
    const double bd = p.b_delta->value[0];
    const Tensor& dsk = p.d_skip->value;

    std::vector<double> hprev(C * N, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const double* xt = &w.x[t * C];
        double s = bd;
        for (std::size_t d = 0; d < C; ++d) s += wd[d] * xt[d];
        w.s[t] = s;
        const double delta = softplus_d(s);
        w.delta[t] = delta;

        double xmax = 0.0, dbmax = 0.0;
        for (std::size_t d = 0; d < C; ++d) xmax = std::max(xmax, std::abs(xt[d]));
        for (std::size_t n = 0; n < N; ++n) {
            double bn = 0.0, cn = 0.0;
            for (std::size_t d = 0; d < C; ++d) {
                bn += wb[n * C + d] * xt[d];
                cn += wc[n * C + d] * xt[d];
            }
            w.b[t * N + n] = bn;
            w.c[t * N + n] = cn;
            const double ab = std::exp(delta * w.a[n]);
            w.abar[t * N + n] = ab;
            w.stats.a_bar_max = std::max(w.stats.a_bar_max, std::abs(ab));
            dbmax = std::max(dbmax, std::abs(delta * bn));
        }
        w.stats.step_input_max = std::max(w.stats.step_input_max, dbmax * xmax);

        for (std::size_t d = 0; d < C; ++d) {
            const double x = xt[d];
            double y = dsk[d] * x;
            for (std::size_t n = 0; n < N; ++n) {
                const double hv = w.abar[t * N + n] * hprev[d * N + n] +
                                  delta * w.b[t * N + n] * x;
                w.h[(t * C + d) * N + n] = hv;
                y += w.c[t * N + n] * hv;
                w.stats.max_hidden = std::max(w.stats.max_hidden, std::abs(hv));
            }
            w.y[t * C + d] = y;
        }
        std::copy(w.h.begin() + static_cast<long>(t * C * N),
                  w.h.begin() + static_cast<long>((t + 1) * C * N), hprev.begin());
    }
    return w;
}

}  // namespace

scan::PatchSequence selective_scan(const scan::PatchSequence& seq, const SSMParams& params,
                                   ScanStats* stats) {
    if (seq.length() == 0) throw ContractError("selective_scan: empty sequence");
    if (seq.channels != params.channels)
        throw DimensionError("selective_scan: sequence channels " + std::to_string(seq.channels) +
                             " do not match parameter channels " +
                             std::to_string(params.channels));
    std::vector<double> flat(seq.length() * seq.channels);
    for (std::size_t t = 0; t < seq.length(); ++t)
        for (std::size_t d = 0; d < seq.channels; ++d) flat[t * seq.channels + d] =
            seq.entries[t][d];
    ScanWork w = scan_forward(flat.data(), seq.length(), params);
    if (stats) *stats = w.stats;
    scan::PatchSequence out;
    out.channels = seq.channels;
    out.entries.resize(seq.length());
    for (std::size_t t = 0; t < seq.length(); ++t)
        out.entries[t].assign(w.y.begin() + static_cast<long>(t * seq.channels),
                              w.y.begin() + static_cast<long>((t + 1) * seq.channels));
    return out;
}

Var selective_scan_var(const Var& seq, const SSMParams& params) {
    const Tensor& xv = seq->value;
    if (xv.rank() != 2 || xv.cols() != params.channels)
        throw DimensionError("selective_scan_var: expected T x " +
                             std::to_string(params.channels) + " sequence, got " + xv.shape_str());
    const std::size_t T = xv.rows();
    ScanWork w = scan_forward(xv.data().data(), T, params);

    Tensor out({T, params.channels}, w.y);
    std::vector<Var> parents = {seq,          params.a_log,   params.w_b,    params.w_c,
                                params.w_delta, params.b_delta, params.d_skip};

    return num::make_op(std::move(out), std::move(parents), [w = std::move(w)](num::Node& self) {
        const std::size_t T = w.T, C = w.C, N = w.N;
        num::Node& n_seq = *self.parents[0];
        num::Node& n_alog = *self.parents[1];
        num::Node& n_wb = *self.parents[2];
        num::Node& n_wc = *self.parents[3];
        num::Node& n_wd = *self.parents[4];
        num::Node& n_bd = *self.parents[5];
        num::Node& n_d = *self.parents[6];

        Tensor dx({T, C});
        Tensor da({N});
        Tensor dwb({N, C}), dwc({N, C});
        Tensor dwd({C});
        double dbd = 0.0;
        Tensor dd({C});

        const Tensor& wb = n_wb.value;
        const Tensor& wc = n_wc.value;
        const Tensor& wd = n_wd.value;
        const Tensor& dsk = n_d.value;

        std::vector<double> G(C * N, 0.0);  // dL/dH_t carried backward
        std::vector<double> db(N), dc(N), dabar(N);
        for (std::size_t t = T; t-- > 0;) {
            const double* xt = &w.x[t * C];
            const double* ht = &w.h[t * C * N];
            const double* hprev = t > 0 ? &w.h[(t - 1) * C * N] : nullptr;
            const double delta = w.delta[t];

            // y_t contributions
            std::fill(dc.begin(), dc.end(), 0.0);
            for (std::size_t d = 0; d < C; ++d) {
                const double g = self.grad[t * C + d];
                if (g == 0.0) continue;
                dd[d] += g * xt[d];
                dx[t * C + d] += g * dsk[d];
                for (std::size_t n = 0; n < N; ++n) {
                    dc[n] += g * ht[d * N + n];
                    G[d * N + n] += g * w.c[t * N + n];
                }
            }

            // recurrence H_t = abar ⊙ H_{t-1} + delta b ⊗ x
            std::fill(dabar.begin(), dabar.end(), 0.0);
            std::fill(db.begin(), db.end(), 0.0);
            double ddelta = 0.0;
            for (std::size_t d = 0; d < C; ++d) {
                const double x = xt[d];
                double acc = 0.0;
                for (std::size_t n = 0; n < N; ++n) {
                    const double g = G[d * N + n];
                    if (hprev) dabar[n] += g * hprev[d * N + n];
                    const double bn = w.b[t * N + n];
                    ddelta += g * bn * x;
                    db[n] += g * x;
                    acc += g * bn;
                }
                dx[t * C + d] += delta * acc;
            }
            for (std::size_t n = 0; n < N; ++n) {
                db[n] *= delta;
                const double ab = w.abar[t * N + n];
                ddelta += dabar[n] * ab * w.a[n];
                da[n] += dabar[n] * ab * delta;
            }

            // projections b_t = W_B x, c_t = W_C x
            for (std::size_t n = 0; n < N; ++n) {
                const double gb = db[n], gc = dc[n];
                if (gb != 0.0 || gc != 0.0)
                    for (std::size_t d = 0; d < C; ++d) {
                        dwb[n * C + d] += gb * xt[d];
                        dwc[n * C + d] += gc * xt[d];
                        dx[t * C + d] += gb * wb[n * C + d] + gc * wc[n * C + d];
                    }
            }

            // delta = softplus(w_delta . x + b_delta)
            const double ds = ddelta * sigmoid_d(w.s[t]);
            dbd += ds;
            for (std::size_t d = 0; d < C; ++d) {
                dwd[d] += ds * xt[d];
                dx[t * C + d] += ds * wd[d];
            }

            // carry to H_{t-1}
            for (std::size_t d = 0; d < C; ++d)
                for (std::size_t n = 0; n < N; ++n) G[d * N + n] *= w.abar[t * N + n];
        }

        if (n_seq.requires_grad) n_seq.add_grad(dx);
        if (n_alog.requires_grad) {
            // A = -exp(a_log) so da_log = dA * A
            Tensor dal({N});
            for (std::size_t n = 0; n < N; ++n) dal[n] = da[n] * w.a[n];
            n_alog.add_grad(dal);
        }
        if (n_wb.requires_grad) n_wb.add_grad(dwb);
        if (n_wc.requires_grad) n_wc.add_grad(dwc);
        if (n_wd.requires_grad) n_wd.add_grad(dwd);
        if (n_bd.requires_grad) n_bd.add_grad(Tensor::scalar(dbd));
        if (n_d.requires_grad) n_d.add_grad(dd);
    });
}

void CMIMConfig::validate() const {
    if (levels.empty()) throw ContractError("CMIMConfig: levels must be nonempty");
    for (int j : levels)
        if (j < 3 || j > 5)
            throw ContractError("CMIMConfig: level " + std::to_string(j) + " outside {3,4,5}");
    if (state_dim == 0) throw ContractError("CMIMConfig: state_dim must be positive");
    if (hilbert_direction < 0 || hilbert_direction > 7)
        throw ContractError("CMIMConfig: hilbert direction must be in 0..7");
}

CMIMBlock CMIMBlock::init(const CMIMConfig& cfg, std::size_t channels, SplitMix64& rng,
                          const std::string& prefix) {
    cfg.validate();
    CMIMBlock b;
    b.cfg = cfg;
    SplitMix64 r1 = rng.split("h_fwd"), r2 = rng.split("v_fwd");
    b.h_fwd = SSMParams::init(cfg.state_dim, channels, r1, prefix + ".h_fwd");
    b.v_fwd = SSMParams::init(cfg.state_dim, channels, r2, prefix + ".v_fwd");
    if (cfg.kind == scan::ScanKind::Bidirectional) {
        SplitMix64 r3 = rng.split("h_bwd"), r4 = rng.split("v_bwd");
        b.h_bwd = SSMParams::init(cfg.state_dim, channels, r3, prefix + ".h_bwd");
        b.v_bwd = SSMParams::init(cfg.state_dim, channels, r4, prefix + ".v_bwd");
    }
    return b;
}

std::vector<Var> CMIMBlock::parameters() const {
    std::vector<Var> out = h_fwd.parameters();
    auto v = v_fwd.parameters();
    out.insert(out.end(), v.begin(), v.end());
    if (bidirectional()) {
        auto hb = h_bwd.parameters();
        auto vb = v_bwd.parameters();
        out.insert(out.end(), hb.begin(), hb.end());
        out.insert(out.end(), vb.begin(), vb.end());
    }
    return out;
}

std::size_t CMIMBlock::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p->value.size();
    return n;
}

namespace {

// Scan-kind cell order of the transposed grid, mapped back to the original
// grid's flat indexing.
std::vector<std::size_t> transposed_cell_order(const scan::ScanPermutation& pt,
                                               std::size_t rows, std::size_t cols,
                                               bool use_paired) {
    const std::vector<std::size_t>& src = use_paired ? pt.paired_reverse : pt.order;
    std::vector<std::size_t> out;
    out.reserve(src.size());
    for (std::size_t f : src) {
        const std::size_t rt = f / rows;  // transposed grid has `rows` columns
        const std::size_t ct = f % rows;
        out.push_back(ct * cols + rt);
    }
    return out;
}

Var scan_along(const Var& z, const std::vector<std::size_t>& cell_order,
               const SSMParams& params) {
    const std::vector<std::size_t> sigma = scan::pairwise_expand(cell_order);
    Var permuted = num::gather_rows(z, sigma);
    Var scanned = selective_scan_var(permuted, params);
    return num::gather_rows(scanned, scan::invert_order(sigma));
}

}  // namespace

std::pair<Var, Var> cmim_forward_var(const Var& o_cells, const Var& s_cells, std::size_t rows,
                                     std::size_t cols, const CMIMBlock& block) {
    block.cfg.validate();
    const Tensor& ov = o_cells->value;
    const Tensor& sv = s_cells->value;
    if (!ov.same_shape(sv))
        throw ContractError("cmim_forward: modality shapes differ: " + ov.shape_str() + " vs " +
                            sv.shape_str());
    if (ov.rows() != rows * cols)
        throw ContractError("cmim_forward: cell count does not match the grid");

    const std::size_t n = rows * cols;
    std::vector<std::size_t> riffle(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        riffle[2 * i] = i;
        riffle[2 * i + 1] = n + i;
    }
    Var z = num::gather_rows(num::concat_rows({o_cells, s_cells}), riffle);

    scan::ScanPermutation ph = scan::scan_permutation(block.cfg.kind, rows, cols,
                                                      block.cfg.hilbert_direction);
    scan::ScanPermutation pv = scan::scan_permutation(block.cfg.kind, cols, rows,
                                                      block.cfg.hilbert_direction);

    Var y = num::add(scan_along(z, ph.order, block.h_fwd),
                     scan_along(z, transposed_cell_order(pv, rows, cols, false), block.v_fwd));
    if (block.bidirectional()) {
        y = num::add(y, scan_along(z, ph.paired_reverse, block.h_bwd));
        y = num::add(y, scan_along(z, transposed_cell_order(pv, rows, cols, true), block.v_bwd));
    }

    std::vector<std::size_t> evens(n), odds(n);
    for (std::size_t i = 0; i < n; ++i) {
        evens[i] = 2 * i;
        odds[i] = 2 * i + 1;
    }
    return {num::gather_rows(y, evens), num::gather_rows(y, odds)};
}

std::pair<scan::FeatureMap, scan::FeatureMap> cmim_forward(const scan::FeatureMap& f_o,
                                                           const scan::FeatureMap& f_s,
                                                           const CMIMBlock& block) {
    scan::validate(f_o, "cmim_forward");
    scan::validate(f_s, "cmim_forward");
    if (f_o.rows != f_s.rows || f_o.cols != f_s.cols || f_o.channels != f_s.channels ||
        f_o.level != f_s.level)
        throw ContractError("cmim_forward: modality feature maps must have identical shapes");

    Tensor ot({f_o.cells(), f_o.channels}, f_o.data);
    Tensor st({f_s.cells(), f_s.channels}, f_s.data);
    auto [o2, s2] = cmim_forward_var(num::constant(std::move(ot)), num::constant(std::move(st)),
                                     f_o.rows, f_o.cols, block);

    scan::FeatureMap out_o = scan::FeatureMap::zeros(f_o.rows, f_o.cols, f_o.channels, f_o.level);
    scan::FeatureMap out_s = scan::FeatureMap::zeros(f_s.rows, f_s.cols, f_s.channels, f_s.level);
    out_o.data = o2->value.data();
    out_s.data = s2->value.data();
    return {std::move(out_o), std::move(out_s)};
}

}  // namespace osf::ssm
