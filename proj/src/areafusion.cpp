#include "osfuse/areafusion.hpp"

#include <algorithm>
#include <cmath>

#include "osfuse/errors.hpp"

namespace osf::afm {

using num::Tensor;
using num::Var;

void AreaConfig::validate() const {
    if (k == 0) throw ContractError("AreaConfig: k must be at least 1");
    if (head_dim == 0) throw ContractError("AreaConfig: head_dim must be positive");
}

AFMParams AFMParams::init(std::size_t channels, std::size_t head_dim, SplitMix64& rng,
                          const std::string& prefix) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(channels));
    auto make = [&](const char* name) {
        Tensor w({channels, head_dim});
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = scale * rng.normal();
        return num::parameter(std::move(w), prefix + "." + name);
    };
    AFMParams p;
    p.wq_os = make("wq_os");
    p.wk_os = make("wk_os");
    p.wq_so = make("wq_so");
    p.wk_so = make("wk_so");
    return p;
}

std::vector<Var> AFMParams::parameters() const { return {wq_os, wk_os, wq_so, wk_so}; }

std::size_t AFMParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p->value.size();
    return n;
}

namespace {

// Cell index lists per block over the zero-padded grid; padded cells carry
// the sentinel npos.
struct Partition {
    std::size_t padded_rows, padded_cols;
    std::vector<std::vector<std::size_t>> block_cells;  // indices into the padded grid
};

Partition make_partition(std::size_t rows, std::size_t cols, const AreaConfig& cfg) {
    Partition part;
    const std::size_t k = cfg.k;
    if (cfg.axis == Axis::Horizontal) {
        const std::size_t pr = (rows + k - 1) / k * k;
        part.padded_rows = pr;
        part.padded_cols = cols;
        const std::size_t stripe = pr / k;
        for (std::size_t b = 0; b < k; ++b) {
            std::vector<std::size_t> cells;
            for (std::size_t r = b * stripe; r < (b + 1) * stripe; ++r)
                for (std::size_t c = 0; c < cols; ++c) cells.push_back(r * cols + c);
            part.block_cells.push_back(std::move(cells));
        }
    } else {
        const std::size_t pc = (cols + k - 1) / k * k;
        part.padded_rows = rows;
        part.padded_cols = pc;
        const std::size_t stripe = pc / k;
        for (std::size_t b = 0; b < k; ++b) {
            std::vector<std::size_t> cells;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = b * stripe; c < (b + 1) * stripe; ++c)
                    cells.push_back(r * pc + c);
            part.block_cells.push_back(std::move(cells));
        }
    }
    return part;
}

// padded-grid flat index -> original flat index, or npos for padding
std::size_t to_original(std::size_t padded_idx, std::size_t padded_cols, std::size_t rows,
                        std::size_t cols) {
    const std::size_t r = padded_idx / padded_cols, c = padded_idx % padded_cols;
    if (r >= rows || c >= cols) return static_cast<std::size_t>(-1);
    return r * cols + c;
}

}  // namespace

std::vector<scan::FeatureMap> area_partition(const scan::FeatureMap& fm, const AreaConfig& cfg) {
    scan::validate(fm, "area_partition");
    cfg.validate();
    Partition part = make_partition(fm.rows, fm.cols, cfg);
    std::vector<scan::FeatureMap> blocks;
    const std::size_t brows = cfg.axis == Axis::Horizontal ? part.padded_rows / cfg.k : fm.rows;
    const std::size_t bcols = cfg.axis == Axis::Horizontal ? fm.cols : part.padded_cols / cfg.k;
    for (const auto& cells : part.block_cells) {
        scan::FeatureMap blk = scan::FeatureMap::zeros(brows, bcols, fm.channels, fm.level);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::size_t orig = to_original(cells[i], part.padded_cols, fm.rows, fm.cols);
            if (orig == static_cast<std::size_t>(-1)) continue;
            for (std::size_t ch = 0; ch < fm.channels; ++ch)
                blk.data[i * fm.channels + ch] = fm.data[orig * fm.channels + ch];
        }
        blocks.push_back(std::move(blk));
    }
    return blocks;
}

scan::FeatureMap area_concat(const std::vector<scan::FeatureMap>& blocks, const AreaConfig& cfg,
                             std::size_t rows, std::size_t cols) {
    if (blocks.empty()) throw ContractError("area_concat: no blocks");
    cfg.validate();
    if (blocks.size() != cfg.k) throw ContractError("area_concat: block count does not match k");
    const std::size_t ch = blocks[0].channels;
    scan::FeatureMap out = scan::FeatureMap::zeros(rows, cols, ch, blocks[0].level);
    Partition part = make_partition(rows, cols, cfg);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& cells = part.block_cells[b];
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::size_t orig = to_original(cells[i], part.padded_cols, rows, cols);
            if (orig == static_cast<std::size_t>(-1)) continue;
            for (std::size_t c = 0; c < ch; ++c)
                out.data[orig * ch + c] = blocks[b].data[i * ch + c];
        }
    }
    return out;
}

scan::FeatureMap afm_fuse(const scan::FeatureMap& o, const scan::FeatureMap& s,
                          const AreaConfig& cfg, const AFMParams& params, FuseStats* stats) {
    scan::validate(o, "afm_fuse");
    scan::validate(s, "afm_fuse");
    cfg.validate();
    if (o.rows != s.rows || o.cols != s.cols || o.channels != s.channels)
        throw ContractError("afm_fuse: modality shapes differ");

    const std::size_t C = o.channels, dh = cfg.head_dim;
    const Tensor& wq1 = params.wq_os->value;
    const Tensor& wk1 = params.wk_os->value;
    const Tensor& wq2 = params.wq_so->value;
    const Tensor& wk2 = params.wk_so->value;
    if (wq1.rows() != C)
        throw ContractError("afm_fuse: projection width does not match channel count");

    FuseStats local;
    Partition part = make_partition(o.rows, o.cols, cfg);
    scan::FeatureMap fused = scan::FeatureMap::zeros(o.rows, o.cols, C, o.level);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    auto cell_value = [&](const scan::FeatureMap& fm, std::size_t padded_idx, std::size_t ch) {
        const std::size_t orig = to_original(padded_idx, part.padded_cols, fm.rows, fm.cols);
        return orig == static_cast<std::size_t>(-1) ? 0.0 : fm.data[orig * fm.channels + ch];
    };

    for (const auto& cells : part.block_cells) {
        const std::size_t L = cells.size();
        // projections
        std::vector<double> q1(L * dh, 0.0), k1(L * dh, 0.0), q2(L * dh, 0.0), k2(L * dh, 0.0);
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t c = 0; c < C; ++c) {
                const double xo = cell_value(o, cells[i], c);
                const double xs = cell_value(s, cells[i], c);
                for (std::size_t d = 0; d < dh; ++d) {
                    q1[i * dh + d] += xo * wq1[c * dh + d];
                    k1[i * dh + d] += xs * wk1[c * dh + d];
                    q2[i * dh + d] += xs * wq2[c * dh + d];
                    k2[i * dh + d] += xo * wk2[c * dh + d];
                    local.flops += 4;
                }
            }

        auto attend = [&](const std::vector<double>& q, const std::vector<double>& kk,
                          const scan::FeatureMap& values, std::vector<double>& out) {
            std::vector<double> row(L);
            for (std::size_t i = 0; i < L; ++i) {
                double mx = -1e300;
                for (std::size_t j = 0; j < L; ++j) {
                    double sc = 0.0;
                    for (std::size_t d = 0; d < dh; ++d) {
                        sc += q[i * dh + d] * kk[j * dh + d];
                        ++local.flops;
                    }
                    row[j] = sc * inv_sqrt;
                    mx = std::max(mx, row[j]);
                }
                double sum = 0.0;
                for (std::size_t j = 0; j < L; ++j) {
                    row[j] = std::exp(row[j] - mx);
                    sum += row[j];
                    ++local.flops;
                }
                double check = 0.0;
                for (std::size_t j = 0; j < L; ++j) {
                    row[j] /= sum;
                    check += row[j];
                }
                local.attn_row_sum_min = std::min(local.attn_row_sum_min, check);
                local.attn_row_sum_max = std::max(local.attn_row_sum_max, check);
                for (std::size_t j = 0; j < L; ++j)
                    for (std::size_t c = 0; c < C; ++c) {
                        out[i * C + c] += row[j] * cell_value(values, cells[j], c);
                        ++local.flops;
                    }
            }
        };

        std::vector<double> att1(L * C, 0.0), att2(L * C, 0.0);
        attend(q1, k1, s, att1);  // queries from O, values from S
        attend(q2, k2, o, att2);  // queries from S, values from O

        for (std::size_t i = 0; i < L; ++i) {
            const std::size_t orig = to_original(cells[i], part.padded_cols, o.rows, o.cols);
            if (orig == static_cast<std::size_t>(-1)) continue;
            for (std::size_t c = 0; c < C; ++c) {
                const double mean_in = 0.5 * (o.data[orig * C + c] + s.data[orig * C + c]);
                fused.data[orig * C + c] = (att1[i * C + c] + att2[i * C + c] + mean_in) / 3.0;
            }
        }
    }
    if (stats) *stats = local;
    return fused;
}

Var afm_fuse_var(const Var& o_cells, const Var& s_cells, std::size_t rows, std::size_t cols,
                 const AreaConfig& cfg, const AFMParams& params) {
    cfg.validate();
    const Tensor& ov = o_cells->value;
    if (!ov.same_shape(s_cells->value))
        throw ContractError("afm_fuse_var: modality shapes differ");
    if (ov.rows() != rows * cols)
        throw ContractError("afm_fuse_var: cell count does not match the grid");
    const std::size_t C = ov.cols();

    Partition part = make_partition(rows, cols, cfg);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));

    // Map padded cells onto rows of an extended matrix whose last row is a
    // shared zero pad; per-block work is gathered from there.
    Var zero_row = num::constant(Tensor({1, C}));
    Var o_ext = num::concat_rows({o_cells, zero_row});
    Var s_ext = num::concat_rows({s_cells, zero_row});
    const std::size_t pad_row = rows * cols;

    std::vector<Var> fused_blocks;
    std::vector<std::size_t> scatter(rows * cols);
    std::size_t cursor = 0;
    for (const auto& cells : part.block_cells) {
        std::vector<std::size_t> idx;
        idx.reserve(cells.size());
        for (std::size_t cell : cells) {
            const std::size_t orig = to_original(cell, part.padded_cols, rows, cols);
            if (orig != static_cast<std::size_t>(-1)) scatter[orig] = cursor;
            idx.push_back(orig == static_cast<std::size_t>(-1) ? pad_row : orig);
            ++cursor;
        }
        Var xo = num::gather_rows(o_ext, idx);
        Var xs = num::gather_rows(s_ext, idx);

        Var a1 = num::softmax_lastdim(num::scale(
            num::matmul(num::matmul(xo, params.wq_os), num::transpose(num::matmul(xs, params.wk_os))),
            inv_sqrt));
        Var a2 = num::softmax_lastdim(num::scale(
            num::matmul(num::matmul(xs, params.wq_so), num::transpose(num::matmul(xo, params.wk_so))),
            inv_sqrt));
        Var att1 = num::matmul(a1, xs);
        Var att2 = num::matmul(a2, xo);
        Var mean_in = num::scale(num::add(xo, xs), 0.5);
        fused_blocks.push_back(num::scale(num::add(num::add(att1, att2), mean_in), 1.0 / 3.0));
    }
    return num::gather_rows(num::concat_rows(fused_blocks), scatter);
}

}  // namespace osf::afm
