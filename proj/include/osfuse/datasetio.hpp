#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "osfuse/image.hpp"
#include "osfuse/obbgeom.hpp"

namespace osf::data {

// One annotation line: category plus the four normalized quad vertices; the
// oriented box is derived on parse.
struct LabeledInstance {
    int category = 0;
    obb::Quad quad;
    obb::OrientedBox box;
};

// Nine whitespace-separated fields per nonempty line: category then the
// eight vertex coordinates, all in [0,1].
std::vector<LabeledInstance> parse_label_file(const std::string& text);
std::string write_label_file(const std::vector<LabeledInstance>& instances);

// Binary PGM (P5) / PPM (P6), 8-bit, maxval 255.
Image decode_pnm(const std::string& bytes);
std::string encode_pnm(const Image& img);
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);

struct DatasetStats {
    std::size_t total_instances = 0;
    std::size_t total_images = 0;
    double instances_per_image = 0.0;
    std::array<std::size_t, 6> category_counts{};
    std::array<double, 6> category_percent{};
    std::array<double, 6> mean_pixel_area{};  // w*h*(image_size_px)^2
    std::array<std::size_t, 18> aspect_histogram{};  // [1,10), last bin catches larger
    std::array<std::size_t, 18> angle_histogram{};   // [0, pi/2)

    std::string to_json() const;
    std::string to_table() const;
};

DatasetStats dataset_stats(const std::vector<std::vector<LabeledInstance>>& per_image_labels,
                           double image_size_px);

struct PairMetrics {
    double mse = 0.0;
    double ssim = 0.0;
    double mi = 0.0;  // bits
};

// MSE, mean local SSIM over 8x8 sliding windows (uniform weights, C1=1e-4,
// C2=9e-4), and mutual information from a 64x64 joint histogram. Three-channel
// inputs are reduced to luma first.
PairMetrics pair_metrics(const Image& a, const Image& b);

}  // namespace osf::data
