#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osfuse/toytrain.hpp"

namespace osf::cli {

// User-facing run configuration; JSON file fields overridable by CLI flags.
// A fixed seed makes every downstream artifact byte-identical across runs.
struct RunConfig {
    std::string filter = "grad";
    double alpha_init = 0.0;
    std::string scan = "hilbert";
    int hilbert_direction = 0;
    std::size_t state_dim = 4;
    std::size_t area_k = 4;
    std::string area_axis = "horizontal";
    std::size_t head_dim = 8;
    std::vector<int> levels = {3};
    std::uint64_t seed = 0;
    std::size_t epochs = 40;
    double lr = 0.01;
    double momentum = 0.937;
    std::size_t batch = 8;
    std::size_t train_pairs = 160;
    std::size_t test_pairs = 80;
    double occlusion_rate = 0.3;
    bool speckle = true;
    std::size_t image_size = 64;
    std::size_t channels = 8;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_json_file(const std::string& path);
    std::string to_json() const;

    toy::ToyConfig to_toy() const;  // resolves enum names, validates
};

}  // namespace osf::cli
