#pragma once

#include <cstdint>
#include <vector>

#include "osfuse/datasetio.hpp"
#include "osfuse/image.hpp"

namespace osf::synth {

// Desk-scale stand-in for complementary sensing corruptions: modality A
// carries the category in target texture but suffers random opaque
// occlusions; modality B is occlusion-free with flattened target texture,
// category encoded in fill level, and multiplicative speckle.
struct SynthConfig {
    std::size_t pairs = 240;
    std::size_t image_size = 64;
    double occlusion_rate = 0.3;  // mean blob fraction of the A image; per
                                  // image drawn uniform in [0, 2*rate]
    bool speckle = true;
    std::uint64_t seed = 0;
};

struct SyntheticPair {
    Image a, b;
    std::vector<data::LabeledInstance> labels;
    int category = 0;                          // the toy classification label
    double occluded_fraction = 0.0;            // realized blob fraction in A
    std::vector<std::uint8_t> occlusion_mask;  // H*W
};

std::vector<SyntheticPair> generate_synthetic_pairs(const SynthConfig& cfg);

}  // namespace osf::synth
