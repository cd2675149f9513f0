#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "osfuse/autodiff.hpp"
#include "osfuse/rng.hpp"
#include "osfuse/scanorders.hpp"

namespace osf::ssm {

// Diagonal selective-scan parameter set. The continuous state diagonal is
// stored as a_log with A = -exp(a_log), so it stays strictly negative and the
// discretized factors stay inside the unit circle for any positive step.
struct SSMParams {
    std::size_t state_dim = 0;  // N
    std::size_t channels = 0;   // C
    num::Var a_log;             // {N}
    num::Var w_b;               // {N, C}, B_t = w_b x_t
    num::Var w_c;               // {N, C}, C_t = w_c x_t
    num::Var w_delta;           // {C}
    num::Var b_delta;           // {1}, delta_t = softplus(w_delta . x_t + b_delta)
    num::Var d_skip;            // {C}

    static SSMParams init(std::size_t state_dim, std::size_t channels, SplitMix64& rng,
                          const std::string& prefix);
    // W_B = W_C = 0 and D = 1: the scan reproduces its input exactly.
    static SSMParams passthrough(std::size_t state_dim, std::size_t channels);

    std::vector<num::Var> parameters() const;
    std::size_t parameter_count() const;
    std::vector<double> a_diag() const;  // -exp(a_log)
};

struct Discrete {
    std::vector<double> a_bar;  // exp(delta * a_diag)
    std::vector<double> b_bar;  // delta * b_t
};

// Zero-order-hold discretization of one step. delta must be positive.
Discrete ssm_discretize(const std::vector<double>& a_diag, const std::vector<double>& b_t,
                        double delta);

// Fixed-parameter linear recurrence: h_t[d,n] = a_bar[t][n] h_{t-1}[d,n] +
// b_bar[t][n] x_t[d]; y_t[d] = sum_n c[t][n] h_t[d,n] + d_skip[d] x_t[d].
std::vector<std::vector<double>> scan_recurrence(const std::vector<std::vector<double>>& xs,
                                                 const std::vector<std::vector<double>>& a_bar,
                                                 const std::vector<std::vector<double>>& b_bar,
                                                 const std::vector<std::vector<double>>& c,
                                                 const std::vector<double>& d_skip);

struct ScanStats {
    double max_hidden = 0.0;
    double a_bar_max = 0.0;
    double step_input_max = 0.0;  // max_t max_n |delta_t b_t[n]| * max_d |x_t[d]|
};

// Input-dependent scan over one sequence (projections derived per step).
scan::PatchSequence selective_scan(const scan::PatchSequence& seq, const SSMParams& params,
                                   ScanStats* stats = nullptr);

// Graph form: one fused node over a T-by-C sequence with a hand-derived
// adjoint; gradients reach the sequence and every parameter.
num::Var selective_scan_var(const num::Var& seq, const SSMParams& params);

struct CMIMConfig {
    scan::ScanKind kind = scan::ScanKind::Hilbert;
    int hilbert_direction = 0;
    std::size_t state_dim = 4;
    std::vector<int> levels = {3};

    void validate() const;
};

// Parameter bundle for one CMIM block: independent sets for the horizontal
// and vertical (transposed-grid) scans, plus reversed-order sets when the
// scan kind is Bidirectional.
struct CMIMBlock {
    CMIMConfig cfg;
    SSMParams h_fwd, v_fwd;
    SSMParams h_bwd, v_bwd;  // engaged for Bidirectional only

    static CMIMBlock init(const CMIMConfig& cfg, std::size_t channels, SplitMix64& rng,
                          const std::string& prefix);
    std::vector<num::Var> parameters() const;
    std::size_t parameter_count() const;
    bool bidirectional() const { return cfg.kind == scan::ScanKind::Bidirectional; }
};

// Interleave -> pairwise scan permutation -> horizontal and vertical scans
// (summed) -> inverse permutation -> deinterleave -> reshape. The residual of
// the fusion equation is applied by the caller.
std::pair<scan::FeatureMap, scan::FeatureMap> cmim_forward(const scan::FeatureMap& f_o,
                                                           const scan::FeatureMap& f_s,
                                                           const CMIMBlock& block);

// Graph form over row-major cell matrices (cells x channels).
std::pair<num::Var, num::Var> cmim_forward_var(const num::Var& o_cells, const num::Var& s_cells,
                                               std::size_t rows, std::size_t cols,
                                               const CMIMBlock& block);

}  // namespace osf::ssm
