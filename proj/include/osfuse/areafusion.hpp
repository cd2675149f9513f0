#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "osfuse/autodiff.hpp"
#include "osfuse/rng.hpp"
#include "osfuse/scanorders.hpp"

namespace osf::afm {

enum class Axis { Horizontal, Vertical };  // blocks of (H/k, W) or (H, W/k)

struct AreaConfig {
    std::size_t k = 4;
    Axis axis = Axis::Horizontal;
    std::size_t head_dim = 8;

    void validate() const;
};

// Similarity projections for the two cross-attention directions; values are
// the raw modality features, so a constant map attends to itself exactly.
struct AFMParams {
    num::Var wq_os, wk_os;  // queries from O against keys from S
    num::Var wq_so, wk_so;  // queries from S against keys from O

    static AFMParams init(std::size_t channels, std::size_t head_dim, SplitMix64& rng,
                          const std::string& prefix);
    std::vector<num::Var> parameters() const;
    std::size_t parameter_count() const;
};

// k blocks of the zero-padded map; concatenating along the partition axis and
// cropping reproduces the input exactly.
std::vector<scan::FeatureMap> area_partition(const scan::FeatureMap& fm, const AreaConfig& cfg);
scan::FeatureMap area_concat(const std::vector<scan::FeatureMap>& blocks, const AreaConfig& cfg,
                             std::size_t rows, std::size_t cols);

struct FuseStats {
    std::uint64_t flops = 0;  // multiply-accumulate count of the attention path
    double attn_row_sum_min = 1.0;
    double attn_row_sum_max = 1.0;
};

// Bidirectional cross-attention inside each block; the two attended maps are
// averaged with the blockwise mean input. Inputs are the residual-enhanced
// modality features; shapes must match.
scan::FeatureMap afm_fuse(const scan::FeatureMap& o, const scan::FeatureMap& s,
                          const AreaConfig& cfg, const AFMParams& params,
                          FuseStats* stats = nullptr);

// Graph form over row-major cell matrices (cells x channels).
num::Var afm_fuse_var(const num::Var& o_cells, const num::Var& s_cells, std::size_t rows,
                      std::size_t cols, const AreaConfig& cfg, const AFMParams& params);

}  // namespace osf::afm
