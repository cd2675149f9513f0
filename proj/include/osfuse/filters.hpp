#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "osfuse/autodiff.hpp"
#include "osfuse/image.hpp"

namespace osf::filters {

enum class FilterKind { WST, Canny, Haar, HOG, Grad };

FilterKind filter_kind_from_string(std::string_view s);
const char* to_string(FilterKind k);

// Learnable residual weight of the augmentation; starts at zero so the
// augmented image equals the input until trained.
struct FilterAugmentParams {
    num::Var alpha;

    static FilterAugmentParams identity_init(std::string name = "alpha") {
        return FilterAugmentParams{num::parameter(num::Tensor::scalar(0.0), std::move(name))};
    }
};

// Runs one handcrafted descriptor. Output is single-channel, same H×W as the
// input, min-max normalized to [0,1]; a constant response maps to all zeros.
Image apply_filter(FilterKind kind, const Image& img);

// img + alpha * filter(img); single-channel responses broadcast across the
// input channels. No clipping.
Image filter_augment(const Image& img, FilterKind kind, const FilterAugmentParams& params);

// Graph form for training: returns a column vector of length H*W*C whose
// value is the augmented image; gradient flows to alpha only (the descriptor
// response is constant with respect to alpha).
num::Var filter_augment_var(const Image& img, FilterKind kind, const num::Var& alpha);

// --- descriptor internals exposed for oracle tests ---

enum class HaarKernel { HorizontalEdge, VerticalEdge, CenterSurround };

// Raw |mean(A) - mean(B)| box response before averaging/normalization.
Image haar_kernel_response(const Image& gray, HaarKernel k);

// Per-cell orientation histograms before block normalization; one row per
// cell (row-major cells), nine unsigned bins with centers at i*20 degrees.
num::Tensor hog_cell_histograms(const Image& gray);

// Pooled scattering coefficient maps: S0, then first-order maps, then
// second-order maps. The stack is non-expansive in L2 by construction.
std::vector<Image> wst_stack(const Image& gray);

}  // namespace osf::filters
