#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "osfuse/areafusion.hpp"
#include "osfuse/filters.hpp"
#include "osfuse/ssmfusion.hpp"
#include "osfuse/synthetic.hpp"

namespace osf::toy {

// Patch-classification stand-in for the detection pipeline: a tiny patch
// embedding per modality, the fusion stack in the middle, a linear head on
// the pooled features. Identical training budget for every model.
struct ToyConfig {
    filters::FilterKind filter = filters::FilterKind::Grad;
    double alpha_init = 0.0;
    ssm::CMIMConfig cmim;
    afm::AreaConfig area;
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

    std::string name() const;
};

struct ModelReport {
    std::string model;
    double accuracy = 0.0;
    double untrained_accuracy = 0.0;
    std::size_t param_total = 0;
    std::vector<std::pair<std::string, std::size_t>> param_breakdown;
    std::vector<double> epoch_loss;
    std::vector<double> epoch_accuracy;
    std::vector<double> alphas;  // trained FAM weights, one per branch
};

struct ExperimentReport {
    ToyConfig cfg;
    ModelReport a_only, b_only, fused;
    double margin = 0.0;                   // fused minus best single accuracy
    std::size_t fusion_extra_params = 0;   // CMIM + AFM additions

    std::string to_json() const;  // fixed precision, deterministic bytes
    std::string to_text() const;
};

ExperimentReport toy_fusion_experiment(const ToyConfig& cfg);

}  // namespace osf::toy
