#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

namespace osf::scan {

// Per-patch feature vectors in one dimension; the unit the cross-modal
// sequence machinery operates on.
struct PatchSequence {
    std::size_t channels = 0;
    std::vector<std::vector<double>> entries;

    std::size_t length() const { return entries.size(); }
};

// Activation grid at pyramid level j (H/2^j by W/2^j cells).
struct FeatureMap {
    std::size_t rows = 0, cols = 0, channels = 1;
    int level = 3;  // one of 3, 4, 5
    std::vector<double> data;  // (r*cols + c)*channels + ch

    static FeatureMap zeros(std::size_t r, std::size_t c, std::size_t ch, int level = 3) {
        return FeatureMap{r, c, ch, level, std::vector<double>(r * c * ch, 0.0)};
    }
    double at(std::size_t r, std::size_t c, std::size_t ch = 0) const {
        return data[(r * cols + c) * channels + ch];
    }
    double& at(std::size_t r, std::size_t c, std::size_t ch = 0) {
        return data[(r * cols + c) * channels + ch];
    }
    std::size_t cells() const { return rows * cols; }
};

void validate(const FeatureMap& fm, const char* who);

enum class ScanKind { Bidirectional, ZOrder, Zigzag, Hilbert };

ScanKind scan_kind_from_string(std::string_view s);
const char* to_string(ScanKind k);

// Visit order over the rows*cols grid cells: order[i] is the flat index
// (r*cols + c) of the i-th visited cell. Bidirectional carries the paired
// reversed order consumed by the dual scan.
struct ScanPermutation {
    ScanKind kind = ScanKind::Bidirectional;
    std::size_t rows = 0, cols = 0;
    std::vector<std::size_t> order;
    std::vector<std::size_t> paired_reverse;  // nonempty only for Bidirectional
};

// hilbert_direction selects one of the 8 symmetries (rotations x transpose)
// of the canonical curve; ignored by the other kinds.
ScanPermutation scan_permutation(ScanKind kind, std::size_t rows, std::size_t cols,
                                 int hilbert_direction = 0);

PatchSequence flatten_row_major(const FeatureMap& fm);
FeatureMap sequence_to_map(const PatchSequence& seq, std::size_t rows, std::size_t cols,
                           int level = 3);

PatchSequence concat_traditional(const PatchSequence& x, const PatchSequence& y);
PatchSequence interleave_iir(const PatchSequence& x, const PatchSequence& y);
std::pair<PatchSequence, PatchSequence> deinterleave(const PatchSequence& z);

// Gather semantics: forward yields out[i] = seq[order[i]]; inverse undoes it.
PatchSequence apply_permutation(const PatchSequence& seq, const ScanPermutation& p, bool inverse);

// Cell-level order expanded to the interleaved sequence: pair (x_i, y_i)
// moves jointly, so the modality adjacency of the interleaving survives any
// scan. Result has length 2 * order.size().
std::vector<std::size_t> pairwise_expand(const std::vector<std::size_t>& cell_order);

std::vector<std::size_t> invert_order(const std::vector<std::size_t>& order);

}  // namespace osf::scan
