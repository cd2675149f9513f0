#pragma once

#include <cstddef>
#include <vector>

namespace osf {

// H×W×C raster, channel-interleaved row-major. Values are expected in [0,1]
// on ingestion; downstream ops (residual augmentation) may leave that range.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<double> pix;

    static Image zeros(std::size_t h, std::size_t w, std::size_t c = 1) {
        return Image{h, w, c, std::vector<double>(h * w * c, 0.0)};
    }
    static Image constant(std::size_t h, std::size_t w, double v, std::size_t c = 1) {
        return Image{h, w, c, std::vector<double>(h * w * c, v)};
    }

    double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
        return pix[(y * width + x) * channels + c];
    }
    double& at(std::size_t y, std::size_t x, std::size_t c = 0) {
        return pix[(y * width + x) * channels + c];
    }
    std::size_t size() const { return pix.size(); }
};

// Luma conversion (0.299 R + 0.587 G + 0.114 B); identity for 1-channel.
Image to_gray(const Image& img);

// Throws DimensionError for empty images; names the caller in the message.
void require_nonempty(const Image& img, const char* who);

// In-place min-max rescale to [0,1]; a constant signal maps to all zeros.
void minmax01(std::vector<double>& v);

}  // namespace osf
