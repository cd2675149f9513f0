#include "osfuse/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "osfuse/errors.hpp"

namespace osf::filters {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Replicate-border convolution, odd-sized kernels, anchor at the center.
Image conv2_replicate(const Image& g, const std::vector<double>& k, int kh, int kw) {
    const int H = static_cast<int>(g.height), W = static_cast<int>(g.width);
    const int ay = kh / 2, ax = kw / 2;
    Image out = Image::zeros(g.height, g.width, 1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = 0; i < kh; ++i)
                for (int j = 0; j < kw; ++j) {
                    int yy = std::clamp(y + i - ay, 0, H - 1);
                    int xx = std::clamp(x + j - ax, 0, W - 1);
                    s += k[i * kw + j] * g.at(yy, xx);
                }
            out.at(y, x) = s;
        }
    return out;
}

// ---------------------------------------------------------------- Canny ---

Image gaussian5(const Image& g) {
    // sigma = 1.0, 5x5 separable
    double w[5];
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        w[i] = std::exp(-0.5 * (i - 2) * (i - 2));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    std::vector<double> k(25);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) k[i * 5 + j] = w[i] * w[j];
    return conv2_replicate(g, k, 5, 5);
}

Image canny_map(const Image& gray) {
    const int H = static_cast<int>(gray.height), W = static_cast<int>(gray.width);
    Image sm = gaussian5(gray);
    static const std::vector<double> kx = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    static const std::vector<double> ky = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    Image gx = conv2_replicate(sm, kx, 3, 3);
    Image gy = conv2_replicate(sm, ky, 3, 3);

    Image mag = Image::zeros(gray.height, gray.width, 1);
    double max_mag = 0.0;
    for (std::size_t i = 0; i < mag.pix.size(); ++i) {
        mag.pix[i] = std::hypot(gx.pix[i], gy.pix[i]);
        max_mag = std::max(max_mag, mag.pix[i]);
    }
    // Floor keeps cancellation residue in the Sobel sums from being promoted
    // to edges by the max-relative thresholds.
    if (max_mag <= 1e-9) return Image::zeros(gray.height, gray.width, 1);

    // Non-maximum suppression along the quantized gradient direction. Ties
    // resolve toward the earlier pixel so a symmetric step keeps one line.
    Image nms = Image::zeros(gray.height, gray.width, 1);
    auto m_at = [&](int y, int x) -> double {
        if (y < 0 || y >= H || x < 0 || x >= W) return 0.0;
        return mag.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double m = mag.at(y, x);
            if (m == 0.0) continue;
            double ang = std::atan2(gy.at(y, x), gx.at(y, x));
            if (ang < 0) ang += kPi;
            if (ang >= kPi) ang -= kPi;
            const double deg = ang * 180.0 / kPi;
            int dy, dx;
            if (deg < 22.5 || deg >= 157.5) {
                dy = 0; dx = 1;
            } else if (deg < 67.5) {
                dy = 1; dx = 1;
            } else if (deg < 112.5) {
                dy = 1; dx = 0;
            } else {
                dy = 1; dx = -1;
            }
            const double back = m_at(y - dy, x - dx);
            const double fwd = m_at(y + dy, x + dx);
            if (m > back && m >= fwd) nms.at(y, x) = m;
        }

    const double hi = 0.2 * max_mag;
    const double lo = 0.1 * max_mag;
    Image out = Image::zeros(gray.height, gray.width, 1);
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (nms.at(y, x) >= hi) {
                out.at(y, x) = 1.0;
                stack.emplace_back(y, x);
            }
    // 8-connected hysteresis from the strong set through weak pixels.
    while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                if (out.at(yy, xx) == 0.0 && nms.at(yy, xx) >= lo) {
                    out.at(yy, xx) = 1.0;
                    stack.emplace_back(yy, xx);
                }
            }
    }
    return out;
}

// ----------------------------------------------------------------- Grad ---

// Ratio of exponentially weighted means over 4-pixel half-windows. The image
// is pre-scaled by its global mean so the log-ratio response is exactly
// invariant to positive multiplicative rescaling even with the epsilon guard.
Image grad_map(const Image& gray) {
    const int H = static_cast<int>(gray.height), W = static_cast<int>(gray.width);
    double mean = 0.0;
    for (double v : gray.pix) mean += v;
    mean /= static_cast<double>(gray.pix.size());
    if (mean <= 0.0) return Image::zeros(gray.height, gray.width, 1);

    const double eps = 1e-6;
    double w[4];
    double wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
        w[k] = std::exp(-0.5 * k);
        wsum += w[k];
    }

    auto side_mean = [&](int y, int x, int dy, int dx) {
        double s = 0.0;
        for (int k = 1; k <= 4; ++k) {
            int yy = std::clamp(y + dy * k, 0, H - 1);
            int xx = std::clamp(x + dx * k, 0, W - 1);
            s += w[k - 1] * gray.at(yy, xx) / mean;
        }
        return s / wsum;
    };

    Image out = Image::zeros(gray.height, gray.width, 1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double rh = (side_mean(y, x, 0, 1) + eps) / (side_mean(y, x, 0, -1) + eps);
            const double rv = (side_mean(y, x, 1, 0) + eps) / (side_mean(y, x, -1, 0) + eps);
            const double lh = std::log(rh), lv = std::log(rv);
            out.at(y, x) = std::sqrt(lh * lh + lv * lv);
        }
    return out;
}

// ----------------------------------------------------------------- Haar ---

struct IntegralImage {
    std::size_t H, W;
    std::vector<double> s;  // (H+1) x (W+1)

    explicit IntegralImage(const Image& g) : H(g.height), W(g.width), s((H + 1) * (W + 1), 0.0) {
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x)
                s[(y + 1) * (W + 1) + (x + 1)] = g.at(y, x) + s[y * (W + 1) + (x + 1)] +
                                                 s[(y + 1) * (W + 1) + x] - s[y * (W + 1) + x];
    }

    // Mean over the inclusive box clipped to the image; 0 for an empty box.
    double box_mean(int y0, int x0, int y1, int x1) const {
        y0 = std::max(y0, 0);
        x0 = std::max(x0, 0);
        y1 = std::min(y1, static_cast<int>(H) - 1);
        x1 = std::min(x1, static_cast<int>(W) - 1);
        if (y0 > y1 || x0 > x1) return 0.0;
        const double sum = s[(y1 + 1) * (W + 1) + (x1 + 1)] - s[y0 * (W + 1) + (x1 + 1)] -
                           s[(y1 + 1) * (W + 1) + x0] + s[y0 * (W + 1) + x0];
        return sum / static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
    }

    double box_sum_area(int y0, int x0, int y1, int x1, double& area) const {
        y0 = std::max(y0, 0);
        x0 = std::max(x0, 0);
        y1 = std::min(y1, static_cast<int>(H) - 1);
        x1 = std::min(x1, static_cast<int>(W) - 1);
        if (y0 > y1 || x0 > x1) {
            area = 0.0;
            return 0.0;
        }
        area = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
        return s[(y1 + 1) * (W + 1) + (x1 + 1)] - s[y0 * (W + 1) + (x1 + 1)] -
               s[(y1 + 1) * (W + 1) + x0] + s[y0 * (W + 1) + x0];
    }
};

}  // namespace

Image haar_kernel_response(const Image& gray_in, HaarKernel k) {
    require_nonempty(gray_in, "haar_kernel_response");
    Image gray = to_gray(gray_in);
    const int H = static_cast<int>(gray.height), W = static_cast<int>(gray.width);
    IntegralImage ii(gray);
    Image out = Image::zeros(gray.height, gray.width, 1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double r = 0.0;
            switch (k) {
                case HaarKernel::HorizontalEdge:
                    // one-pixel-thick sign cells spanning 4 columns
                    if (y > 0)
                        r = ii.box_mean(y - 1, x - 2, y - 1, x + 1) -
                            ii.box_mean(y, x - 2, y, x + 1);
                    break;
                case HaarKernel::VerticalEdge:
                    if (x > 0)
                        r = ii.box_mean(y - 2, x - 1, y + 1, x - 1) -
                            ii.box_mean(y - 2, x, y + 1, x);
                    break;
                case HaarKernel::CenterSurround: {
                    double inner_area = 0.0, outer_area = 0.0;
                    const double inner = ii.box_sum_area(y - 1, x - 1, y, x, inner_area);
                    const double outer = ii.box_sum_area(y - 2, x - 2, y + 1, x + 1, outer_area);
                    const double ring_area = outer_area - inner_area;
                    if (inner_area > 0.0 && ring_area > 0.0)
                        r = inner / inner_area - (outer - inner) / ring_area;
                    break;
                }
            }
            out.at(y, x) = std::abs(r);
        }
    return out;
}

namespace {

Image haar_map(const Image& gray) {
    Image h = haar_kernel_response(gray, HaarKernel::HorizontalEdge);
    Image v = haar_kernel_response(gray, HaarKernel::VerticalEdge);
    Image c = haar_kernel_response(gray, HaarKernel::CenterSurround);
    Image out = Image::zeros(gray.height, gray.width, 1);
    for (std::size_t i = 0; i < out.pix.size(); ++i)
        out.pix[i] = (h.pix[i] + v.pix[i] + c.pix[i]) / 3.0;
    return out;
}

// ------------------------------------------------------------------ HOG ---

constexpr int kHogCell = 8;
constexpr int kHogBins = 9;

void hog_gradient(const Image& g, std::size_t y, std::size_t x, double& m, double& ang) {
    const int H = static_cast<int>(g.height), W = static_cast<int>(g.width);
    const double gx = g.at(y, std::min<std::size_t>(x + 1, W - 1)) -
                      g.at(y, x == 0 ? 0 : x - 1);
    const double gy = g.at(std::min<std::size_t>(y + 1, H - 1), x) -
                      g.at(y == 0 ? 0 : y - 1, x);
    m = std::hypot(gx, gy);
    ang = std::atan2(gy, gx);
    if (ang < 0) ang += kPi;
    if (ang >= kPi) ang -= kPi;
}

}  // namespace

num::Tensor hog_cell_histograms(const Image& gray_in) {
    require_nonempty(gray_in, "hog_cell_histograms");
    Image gray = to_gray(gray_in);
    const std::size_t H = gray.height, W = gray.width;
    const std::size_t cy = (H + kHogCell - 1) / kHogCell;
    const std::size_t cx = (W + kHogCell - 1) / kHogCell;
    num::Tensor hist({cy * cx, kHogBins});
    const double bin_width = kPi / kHogBins;
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            double m, ang;
            hog_gradient(gray, y, x, m, ang);
            if (m == 0.0) continue;
            const double t = ang / bin_width;  // bin centers at i * 20 degrees
            const int i0 = static_cast<int>(std::floor(t)) % kHogBins;
            const double f = t - std::floor(t);
            const int i1 = (i0 + 1) % kHogBins;
            const std::size_t cell = (y / kHogCell) * cx + (x / kHogCell);
            hist[cell * kHogBins + i0] += (1.0 - f) * m;
            hist[cell * kHogBins + i1] += f * m;
        }
    return hist;
}

namespace {

Image hog_map(const Image& gray) {
    const std::size_t H = gray.height, W = gray.width;
    const std::size_t cy = (H + kHogCell - 1) / kHogCell;
    const std::size_t cx = (W + kHogCell - 1) / kHogCell;
    num::Tensor hist = hog_cell_histograms(gray);

    // 2x2-cell blocks, L2-hys normalization, cell energy averaged over the
    // blocks containing the cell.
    const std::size_t by = cy > 1 ? cy - 1 : 1;
    const std::size_t bx = cx > 1 ? cx - 1 : 1;
    std::vector<double> energy(cy * cx, 0.0);
    std::vector<int> count(cy * cx, 0);
    const double eps = 1e-12;
    for (std::size_t b0 = 0; b0 < by; ++b0)
        for (std::size_t b1 = 0; b1 < bx; ++b1) {
            std::vector<std::size_t> cells;
            for (std::size_t dy = 0; dy < 2; ++dy)
                for (std::size_t dx = 0; dx < 2; ++dx) {
                    std::size_t yy = b0 + dy, xx = b1 + dx;
                    if (yy < cy && xx < cx) cells.push_back(yy * cx + xx);
                }
            std::vector<double> v;
            v.reserve(cells.size() * kHogBins);
            for (std::size_t c : cells)
                for (int k = 0; k < kHogBins; ++k) v.push_back(hist[c * kHogBins + k]);
            double n2 = eps;
            for (double q : v) n2 += q * q;
            double inv = 1.0 / std::sqrt(n2);
            for (double& q : v) q = std::min(q * inv, 0.2);
            n2 = eps;
            for (double q : v) n2 += q * q;
            inv = 1.0 / std::sqrt(n2);
            for (std::size_t ci = 0; ci < cells.size(); ++ci) {
                double e = 0.0;
                for (int k = 0; k < kHogBins; ++k) {
                    const double q = v[ci * kHogBins + k] * inv;
                    e += q * q;
                }
                energy[cells[ci]] += std::sqrt(e);
                count[cells[ci]] += 1;
            }
        }

    Image out = Image::zeros(H, W, 1);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t cell = (y / kHogCell) * cx + (x / kHogCell);
            out.at(y, x) = count[cell] ? energy[cell] / count[cell] : 0.0;
        }
    return out;
}

// ------------------------------------------------------------------ WST ---

struct WstKernel {
    int size;
    std::vector<double> w;  // size*size taps, offsets in [-size/2, size/2-1]
};

// Circular convolution keeps translations exact isometries, which is what
// makes the Young-normalized banks non-expansive.
Image conv_circular(const Image& g, const WstKernel& k) {
    const int H = static_cast<int>(g.height), W = static_cast<int>(g.width);
    const int off = k.size / 2;
    Image out = Image::zeros(g.height, g.width, 1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = 0; i < k.size; ++i)
                for (int j = 0; j < k.size; ++j) {
                    int yy = (y + i - off) % H;
                    int xx = (x + j - off) % W;
                    if (yy < 0) yy += H;
                    if (xx < 0) xx += W;
                    s += k.w[i * k.size + j] * g.at(yy, xx);
                }
            out.at(y, x) = s;
        }
    return out;
}

WstKernel oriented_haar(int size, double theta_deg) {
    WstKernel k{size, std::vector<double>(size * size, 0.0)};
    const double th = theta_deg * kPi / 180.0;
    const double nx = std::cos(th), ny = std::sin(th);
    const double c = (size - 1) / 2.0;
    double mean = 0.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double d = (j - c) * nx + (i - c) * ny;
            double v = 0.0;
            if (d > 1e-12) v = 1.0;
            else if (d < -1e-12) v = -1.0;
            k.w[i * size + j] = v;
            mean += v;
        }
    mean /= static_cast<double>(size * size);
    double l1 = 0.0;
    for (double& v : k.w) {
        v -= mean;
        l1 += std::abs(v);
    }
    if (l1 > 0)
        for (double& v : k.w) v /= l1;
    return k;
}

WstKernel box_kernel(int size) {
    WstKernel k{size, std::vector<double>(size * size, 1.0 / (size * size))};
    return k;
}

WstKernel scaled(WstKernel k, double s) {
    for (double& v : k.w) v *= s;
    return k;
}

Image modulus(Image a) {
    for (double& v : a.pix) v = std::abs(v);
    return a;
}

Image pool4(const Image& g) {
    const std::size_t H = g.height, W = g.width;
    const std::size_t oh = (H + 3) / 4, ow = (W + 3) / 4;
    Image out = Image::zeros(oh, ow, 1);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            int n = 0;
            for (std::size_t dy = 0; dy < 4; ++dy)
                for (std::size_t dx = 0; dx < 4; ++dx) {
                    std::size_t yy = y * 4 + dy, xx = x * 4 + dx;
                    if (yy < H && xx < W) {
                        s += g.at(yy, xx);
                        ++n;
                    }
                }
            out.at(y, x) = s / n;
        }
    return out;
}

Image upsample_bilinear(const Image& g, std::size_t H, std::size_t W) {
    Image out = Image::zeros(H, W, 1);
    const double sy = static_cast<double>(g.height) / H;
    const double sx = static_cast<double>(g.width) / W;
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            double fy = (y + 0.5) * sy - 0.5;
            double fx = (x + 0.5) * sx - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(g.height - 1));
            fx = std::clamp(fx, 0.0, static_cast<double>(g.width - 1));
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t y1 = std::min(y0 + 1, g.height - 1);
            const std::size_t x1 = std::min(x0 + 1, g.width - 1);
            const double ty = fy - y0, tx = fx - x0;
            out.at(y, x) = (1 - ty) * ((1 - tx) * g.at(y0, x0) + tx * g.at(y0, x1)) +
                           ty * ((1 - tx) * g.at(y1, x0) + tx * g.at(y1, x1));
        }
    return out;
}

}  // namespace

std::vector<Image> wst_stack(const Image& gray_in) {
    require_nonempty(gray_in, "wst_stack");
    Image gray = to_gray(gray_in);

    // Depth-2 scattering: 2 scales (4px, 8px supports), 4 orientations.
    // Each filter bank is scaled so the sum of squared L1 norms is 1, which
    // bounds the stacked operator norm by 1 (Young's inequality).
    static const double orientations[4] = {0.0, 45.0, 90.0, 135.0};
    std::vector<WstKernel> psi0, psi1;
    for (double th : orientations) {
        psi0.push_back(oriented_haar(4, th));
        psi1.push_back(oriented_haar(8, th));
    }
    const WstKernel phi = box_kernel(4);

    const double g1 = 1.0 / 3.0;               // bank of phi + 8 wavelets
    const double g2 = 1.0 / std::sqrt(5.0);    // bank of phi + 4 wavelets

    std::vector<Image> stack;
    stack.push_back(pool4(conv_circular(gray, scaled(phi, g1))));  // S0

    std::vector<Image> u1_lo, u1_hi;
    for (int o = 0; o < 4; ++o)
        u1_lo.push_back(modulus(conv_circular(gray, scaled(psi0[o], g1))));
    for (int o = 0; o < 4; ++o)
        u1_hi.push_back(modulus(conv_circular(gray, scaled(psi1[o], g1))));

    for (int o = 0; o < 4; ++o)
        stack.push_back(pool4(conv_circular(u1_lo[o], scaled(phi, g2))));   // S1 scale 0
    for (int o = 0; o < 4; ++o)
        stack.push_back(pool4(conv_circular(u1_hi[o], phi)));               // S1 scale 1

    // Frequency-decreasing second order: scale-0 envelopes through scale-1
    // wavelets only.
    for (int o = 0; o < 4; ++o)
        for (int o2 = 0; o2 < 4; ++o2) {
            Image u2 = modulus(conv_circular(u1_lo[o], scaled(psi1[o2], g2)));
            stack.push_back(pool4(conv_circular(u2, phi)));
        }
    return stack;
}

namespace {

Image wst_map(const Image& gray) {
    std::vector<Image> stack = wst_stack(gray);
    // Average the first- and second-order energy maps (S0 carries the DC).
    Image acc = Image::zeros(stack[1].height, stack[1].width, 1);
    for (std::size_t m = 1; m < stack.size(); ++m)
        for (std::size_t i = 0; i < acc.pix.size(); ++i) acc.pix[i] += stack[m].pix[i];
    for (double& v : acc.pix) v /= static_cast<double>(stack.size() - 1);
    return upsample_bilinear(acc, gray.height, gray.width);
}

}  // namespace

FilterKind filter_kind_from_string(std::string_view s) {
    if (s == "wst") return FilterKind::WST;
    if (s == "canny") return FilterKind::Canny;
    if (s == "haar") return FilterKind::Haar;
    if (s == "hog") return FilterKind::HOG;
    if (s == "grad") return FilterKind::Grad;
    throw InputError("unknown filter kind: " + std::string(s));
}

const char* to_string(FilterKind k) {
    switch (k) {
        case FilterKind::WST: return "wst";
        case FilterKind::Canny: return "canny";
        case FilterKind::Haar: return "haar";
        case FilterKind::HOG: return "hog";
        case FilterKind::Grad: return "grad";
    }
    return "?";
}

Image apply_filter(FilterKind kind, const Image& img) {
    require_nonempty(img, "apply_filter");
    Image gray = to_gray(img);
    Image out;
    switch (kind) {
        case FilterKind::Canny: out = canny_map(gray); break;
        case FilterKind::Grad: out = grad_map(gray); break;
        case FilterKind::Haar: out = haar_map(gray); break;
        case FilterKind::HOG: out = hog_map(gray); break;
        case FilterKind::WST: out = wst_map(gray); break;
    }
    minmax01(out.pix);
    return out;
}

Image filter_augment(const Image& img, FilterKind kind, const FilterAugmentParams& params) {
    require_nonempty(img, "filter_augment");
    const Image f = apply_filter(kind, img);
    const double alpha = params.alpha->value[0];
    Image out = img;
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) += alpha * f.at(y, x);
    return out;
}

num::Var filter_augment_var(const Image& img, FilterKind kind, const num::Var& alpha) {
    require_nonempty(img, "filter_augment_var");
    const Image f = apply_filter(kind, img);
    const std::size_t n = img.pix.size();
    num::Tensor base({n, 1}, img.pix);
    num::Tensor resp({n, 1});
    std::size_t i = 0;
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < img.channels; ++c) resp[i++] = f.at(y, x);
    return num::add(num::constant(std::move(base)),
                    num::mul(num::constant(std::move(resp)), alpha));
}

}  // namespace osf::filters
