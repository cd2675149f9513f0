#include "osfuse/image.hpp"

#include <algorithm>
#include <string>

#include "osfuse/errors.hpp"

namespace osf {

Image to_gray(const Image& img) {
    if (img.channels == 1) return img;
    Image out = Image::zeros(img.height, img.width, 1);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            out.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                           0.114 * img.at(y, x, 2);
    return out;
}

void require_nonempty(const Image& img, const char* who) {
    if (img.height == 0 || img.width == 0 || img.pix.size() != img.height * img.width * img.channels)
        throw DimensionError(std::string(who) + ": empty or inconsistent image (" +
                             std::to_string(img.height) + "x" + std::to_string(img.width) + "x" +
                             std::to_string(img.channels) + ")");
    if (img.channels != 1 && img.channels != 3)
        throw DimensionError(std::string(who) + ": channel count must be 1 or 3, got " +
                             std::to_string(img.channels));
}

void minmax01(std::vector<double>& v) {
    if (v.empty()) return;
    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn, hi = *mx;
    // Ranges at rounding-noise scale count as constant; otherwise noise from
    // cancellation in the box/convolution sums gets stretched to full scale.
    if (hi - lo <= 1e-12) {
        std::fill(v.begin(), v.end(), 0.0);
        return;
    }
    const double inv = 1.0 / (hi - lo);
    for (double& x : v) x = (x - lo) * inv;
}

}  // namespace osf
