#include "osfuse/scanorders.hpp"

#include <algorithm>
#include <string>

#include "osfuse/errors.hpp"

namespace osf::scan {

void validate(const FeatureMap& fm, const char* who) {
    if (fm.rows == 0 || fm.cols == 0 || fm.channels == 0 ||
        fm.data.size() != fm.rows * fm.cols * fm.channels)
        throw DimensionError(std::string(who) + ": empty or inconsistent feature map");
    if (fm.level < 3 || fm.level > 5)
        throw ContractError(std::string(who) + ": level must be 3, 4 or 5, got " +
                            std::to_string(fm.level));
}

ScanKind scan_kind_from_string(std::string_view s) {
    if (s == "bidirectional" || s == "bid") return ScanKind::Bidirectional;
    if (s == "zorder" || s == "z-order") return ScanKind::ZOrder;
    if (s == "zigzag") return ScanKind::Zigzag;
    if (s == "hilbert") return ScanKind::Hilbert;
    throw InputError("unknown scan kind: " + std::string(s));
}

const char* to_string(ScanKind k) {
    switch (k) {
        case ScanKind::Bidirectional: return "bidirectional";
        case ScanKind::ZOrder: return "zorder";
        case ScanKind::Zigzag: return "zigzag";
        case ScanKind::Hilbert: return "hilbert";
    }
    return "?";
}

namespace {

std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v) p <<= 1;
    return p;
}

// Classic iterative index-to-coordinate walk on a 2^k square.
void hilbert_d2xy(std::size_t n, std::size_t d, std::size_t& x, std::size_t& y) {
    x = y = 0;
    std::size_t t = d;
    for (std::size_t s = 1; s < n; s <<= 1) {
        const std::size_t rx = 1 & (t / 2);
        const std::size_t ry = 1 & (t ^ rx);
        if (ry == 0) {
            if (rx == 1) {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::swap(x, y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
    }
}

// direction = rotation (low two bits) plus transpose (bit 2); all eight are
// grid symmetries, so adjacency along the curve is preserved.
void apply_direction(std::size_t n, int direction, std::size_t& x, std::size_t& y) {
    if (direction & 4) std::swap(x, y);
    const int rot = direction & 3;
    for (int r = 0; r < rot; ++r) {
        const std::size_t nx = n - 1 - y;
        y = x;
        x = nx;
    }
}

std::size_t compact_even_bits(std::size_t v) {
    std::size_t out = 0;
    for (std::size_t bit = 0; bit < 32; ++bit) out |= ((v >> (2 * bit)) & 1) << bit;
    return out;
}

}  // namespace

ScanPermutation scan_permutation(ScanKind kind, std::size_t rows, std::size_t cols,
                                 int hilbert_direction) {
    if (rows == 0 || cols == 0)
        throw ContractError("scan_permutation: grid must be at least 1x1");
    if (hilbert_direction < 0 || hilbert_direction > 7)
        throw ContractError("scan_permutation: hilbert direction must be in 0..7");

    ScanPermutation p;
    p.kind = kind;
    p.rows = rows;
    p.cols = cols;
    p.order.reserve(rows * cols);

    switch (kind) {
        case ScanKind::Bidirectional: {
            for (std::size_t i = 0; i < rows * cols; ++i) p.order.push_back(i);
            p.paired_reverse.assign(p.order.rbegin(), p.order.rend());
            break;
        }
        case ScanKind::Zigzag: {
            // boustrophedon rows: even rows left-to-right, odd rows reversed
            for (std::size_t r = 0; r < rows; ++r) {
                if (r % 2 == 0)
                    for (std::size_t c = 0; c < cols; ++c) p.order.push_back(r * cols + c);
                else
                    for (std::size_t c = cols; c-- > 0;) p.order.push_back(r * cols + c);
            }
            break;
        }
        case ScanKind::ZOrder: {
            // Morton codes with the column index in the low interleaved bit;
            // the grid is embedded in the enclosing power-of-two square and
            // out-of-grid cells are skipped.
            const std::size_t n = next_pow2(std::max(rows, cols));
            for (std::size_t d = 0; d < n * n; ++d) {
                const std::size_t x = compact_even_bits(d);
                const std::size_t y = compact_even_bits(d >> 1);
                if (y < rows && x < cols) p.order.push_back(y * cols + x);
            }
            break;
        }
        case ScanKind::Hilbert: {
            const std::size_t n = next_pow2(std::max(rows, cols));
            for (std::size_t d = 0; d < n * n; ++d) {
                std::size_t x, y;
                hilbert_d2xy(n, d, x, y);
                apply_direction(n, hilbert_direction, x, y);
                if (y < rows && x < cols) p.order.push_back(y * cols + x);
            }
            break;
        }
    }
    return p;
}

PatchSequence flatten_row_major(const FeatureMap& fm) {
    validate(fm, "flatten_row_major");
    PatchSequence seq;
    seq.channels = fm.channels;
    seq.entries.reserve(fm.cells());
    for (std::size_t r = 0; r < fm.rows; ++r)
        for (std::size_t c = 0; c < fm.cols; ++c) {
            std::vector<double> e(fm.channels);
            for (std::size_t ch = 0; ch < fm.channels; ++ch) e[ch] = fm.at(r, c, ch);
            seq.entries.push_back(std::move(e));
        }
    return seq;
}

FeatureMap sequence_to_map(const PatchSequence& seq, std::size_t rows, std::size_t cols,
                           int level) {
    if (seq.length() != rows * cols)
        throw ContractError("sequence_to_map: length " + std::to_string(seq.length()) +
                            " does not fill a " + std::to_string(rows) + "x" +
                            std::to_string(cols) + " grid");
    FeatureMap fm = FeatureMap::zeros(rows, cols, seq.channels, level);
    for (std::size_t i = 0; i < seq.length(); ++i)
        for (std::size_t ch = 0; ch < seq.channels; ++ch) fm.data[i * seq.channels + ch] =
            seq.entries[i][ch];
    return fm;
}

PatchSequence concat_traditional(const PatchSequence& x, const PatchSequence& y) {
    if (x.length() > 0 && y.length() > 0 && x.channels != y.channels)
        throw DimensionError("concat_traditional: channel mismatch " +
                             std::to_string(x.channels) + " vs " + std::to_string(y.channels));
    PatchSequence out;
    out.channels = x.length() > 0 ? x.channels : y.channels;
    out.entries = x.entries;
    out.entries.insert(out.entries.end(), y.entries.begin(), y.entries.end());
    return out;
}

PatchSequence interleave_iir(const PatchSequence& x, const PatchSequence& y) {
    if (x.length() != y.length())
        throw ContractError("interleave_iir: length mismatch " + std::to_string(x.length()) +
                            " vs " + std::to_string(y.length()));
    if (x.length() > 0 && x.channels != y.channels)
        throw DimensionError("interleave_iir: channel mismatch " + std::to_string(x.channels) +
                             " vs " + std::to_string(y.channels));
    PatchSequence out;
    out.channels = x.channels;
    out.entries.reserve(2 * x.length());
    for (std::size_t i = 0; i < x.length(); ++i) {
        out.entries.push_back(x.entries[i]);
        out.entries.push_back(y.entries[i]);
    }
    return out;
}

std::pair<PatchSequence, PatchSequence> deinterleave(const PatchSequence& z) {
    if (z.length() % 2 != 0)
        throw ContractError("deinterleave: odd length " + std::to_string(z.length()));
    PatchSequence x, y;
    x.channels = y.channels = z.channels;
    x.entries.reserve(z.length() / 2);
    y.entries.reserve(z.length() / 2);
    for (std::size_t i = 0; i < z.length(); i += 2) {
        x.entries.push_back(z.entries[i]);
        y.entries.push_back(z.entries[i + 1]);
    }
    return {std::move(x), std::move(y)};
}

PatchSequence apply_permutation(const PatchSequence& seq, const ScanPermutation& p, bool inverse) {
    if (seq.length() != p.order.size())
        throw ContractError("apply_permutation: sequence length " + std::to_string(seq.length()) +
                            " does not match order length " + std::to_string(p.order.size()));
    PatchSequence out;
    out.channels = seq.channels;
    out.entries.resize(seq.length());
    for (std::size_t i = 0; i < p.order.size(); ++i) {
        if (inverse)
            out.entries[p.order[i]] = seq.entries[i];
        else
            out.entries[i] = seq.entries[p.order[i]];
    }
    return out;
}

std::vector<std::size_t> pairwise_expand(const std::vector<std::size_t>& cell_order) {
    std::vector<std::size_t> out;
    out.reserve(2 * cell_order.size());
    for (std::size_t cell : cell_order) {
        out.push_back(2 * cell);
        out.push_back(2 * cell + 1);
    }
    return out;
}

std::vector<std::size_t> invert_order(const std::vector<std::size_t>& order) {
    std::vector<std::size_t> inv(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) inv[order[i]] = i;
    return inv;
}

}  // namespace osf::scan
