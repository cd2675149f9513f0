#include "osfuse/datasetio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "osfuse/errors.hpp"

namespace osf::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string printable_magic(const std::string& bytes) {
    std::string out;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, bytes.size()); ++i) {
        const unsigned char c = static_cast<unsigned char>(bytes[i]);
        if (c >= 32 && c < 127) {
            out += static_cast<char>(c);
        } else {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\x%02x", c);
            out += buf;
        }
    }
    return out;
}

}  // namespace

std::vector<LabeledInstance> parse_label_file(const std::string& text) {
    std::vector<LabeledInstance> out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        std::vector<std::string> fields;
        std::string f;
        while (ls >> f) fields.push_back(f);
        if (fields.size() != 9)
            throw ParseError("labels: line " + std::to_string(lineno) + ": expected 9 fields, got " +
                             std::to_string(fields.size()));
        LabeledInstance inst;
        try {
            inst.category = std::stoi(fields[0]);
            for (int i = 0; i < 4; ++i) {
                inst.quad.x[i] = std::stod(fields[1 + 2 * i]);
                inst.quad.y[i] = std::stod(fields[2 + 2 * i]);
            }
        } catch (const std::exception&) {
            throw ParseError("labels: line " + std::to_string(lineno) + ": non-numeric field");
        }
        if (inst.category < 0 || inst.category > 5)
            throw InputError("labels: line " + std::to_string(lineno) + ": category " +
                             std::to_string(inst.category) + " outside 0..5");
        for (int i = 0; i < 4; ++i) {
            for (double v : {inst.quad.x[i], inst.quad.y[i]})
                if (!(v >= 0.0 && v <= 1.0))
                    throw InputError("labels: line " + std::to_string(lineno) + ": coordinate " +
                                     std::to_string(v) + " outside [0,1]");
        }
        inst.box = obb::normalize_angle(obb::quad_to_obb(inst.quad));
        out.push_back(inst);
    }
    return out;
}

std::string write_label_file(const std::vector<LabeledInstance>& instances) {
    std::ostringstream os;
    for (const auto& inst : instances) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n",
                      inst.category, inst.quad.x[0], inst.quad.y[0], inst.quad.x[1],
                      inst.quad.y[1], inst.quad.x[2], inst.quad.y[2], inst.quad.x[3],
                      inst.quad.y[3]);
        os << buf;
    }
    return os.str();
}

Image decode_pnm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw FormatError("pnm: unsupported magic `" + printable_magic(bytes) +
                          "` (expected P5 or P6)");
    const std::size_t channels = bytes[1] == '5' ? 1 : 3;

    // header: magic, width, height, maxval; '#' comments allowed
    std::size_t pos = 2;
    auto next_int = [&]() -> long {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
            throw FormatError("pnm: truncated or malformed header");
        long v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
        }
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    if (w <= 0 || h <= 0) throw FormatError("pnm: non-positive dimensions");
    if (maxval != 255)
        throw FormatError("pnm: unsupported maxval " + std::to_string(maxval) +
                          " (only 8-bit 255)");
    ++pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    if (bytes.size() < pos + need)
        throw FormatError("pnm: truncated payload (need " + std::to_string(need) + " bytes, have " +
                          std::to_string(bytes.size() - pos) + ")");
    Image img = Image::zeros(static_cast<std::size_t>(h), static_cast<std::size_t>(w), channels);
    for (std::size_t i = 0; i < need; ++i)
        img.pix[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
    return img;
}

std::string encode_pnm(const Image& img) {
    require_nonempty(img, "encode_pnm");
    std::ostringstream os;
    os << (img.channels == 1 ? "P5" : "P6") << "\n"
       << img.width << " " << img.height << "\n255\n";
    std::string payload;
    payload.reserve(img.pix.size());
    for (double v : img.pix) {
        const int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        payload += static_cast<char>(static_cast<unsigned char>(q));
    }
    os << payload;
    return os.str();
}

Image read_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw InputError("cannot open image file: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return decode_pnm(buf.str());
}

void write_image(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f.good()) throw InputError("cannot open for writing: " + path);
    const std::string bytes = encode_pnm(img);
    f.write(bytes.data(), static_cast<long>(bytes.size()));
}

DatasetStats dataset_stats(const std::vector<std::vector<LabeledInstance>>& per_image_labels,
                           double image_size_px) {
    DatasetStats st;
    st.total_images = per_image_labels.size();
    std::array<double, 6> area_sum{};
    for (const auto& labels : per_image_labels)
        for (const auto& inst : labels) {
            ++st.total_instances;
            ++st.category_counts[static_cast<std::size_t>(inst.category)];
            const double w = inst.box.w, h = inst.box.h;
            const double aspect = std::max(w, h) / std::max(1e-12, std::min(w, h));
            const double bin_width = 0.5;  // 18 bins over [1, 10)
            std::size_t abin = aspect < 1.0 ? 0
                                            : static_cast<std::size_t>((aspect - 1.0) / bin_width);
            st.aspect_histogram[std::min<std::size_t>(abin, 17)]++;
            const double theta_bw = (kPi / 2.0) / 18.0;
            std::size_t tbin = static_cast<std::size_t>(inst.box.theta / theta_bw);
            st.angle_histogram[std::min<std::size_t>(tbin, 17)]++;
            area_sum[static_cast<std::size_t>(inst.category)] +=
                w * h * image_size_px * image_size_px;
        }
    if (st.total_instances == 0) throw ContractError("dataset_stats: empty label set");
    st.instances_per_image =
        st.total_images ? static_cast<double>(st.total_instances) / st.total_images : 0.0;
    for (std::size_t c = 0; c < 6; ++c) {
        st.category_percent[c] =
            100.0 * static_cast<double>(st.category_counts[c]) / st.total_instances;
        st.mean_pixel_area[c] =
            st.category_counts[c] ? area_sum[c] / st.category_counts[c] : 0.0;
    }
    return st;
}

namespace {

const char* kCatNames[6] = {"bridge", "harbor", "oil_tank", "playground", "airport",
                            "wind_turbine"};

}  // namespace

std::string DatasetStats::to_json() const {
    std::ostringstream os;
    os << "{\n  \"total_instances\": " << total_instances
       << ",\n  \"total_images\": " << total_images << ",\n  \"instances_per_image\": ";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", instances_per_image);
    os << buf << ",\n  \"categories\": {";
    for (std::size_t c = 0; c < 6; ++c) {
        std::snprintf(buf, sizeof(buf), "%.6f", category_percent[c]);
        os << (c ? ", " : "") << "\"" << kCatNames[c] << "\": {\"count\": " << category_counts[c]
           << ", \"percent\": " << buf;
        std::snprintf(buf, sizeof(buf), "%.3f", mean_pixel_area[c]);
        os << ", \"mean_pixel_area\": " << buf << "}";
    }
    os << "},\n  \"aspect_histogram\": [";
    for (std::size_t i = 0; i < aspect_histogram.size(); ++i)
        os << (i ? ", " : "") << aspect_histogram[i];
    os << "],\n  \"angle_histogram\": [";
    for (std::size_t i = 0; i < angle_histogram.size(); ++i)
        os << (i ? ", " : "") << angle_histogram[i];
    os << "]\n}\n";
    return os.str();
}

std::string DatasetStats::to_table() const {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "images %zu  instances %zu  ins/img %.2f\n", total_images,
                  total_instances, instances_per_image);
    os << buf;
    os << "category        count  percent  mean_px_area\n";
    for (std::size_t c = 0; c < 6; ++c) {
        std::snprintf(buf, sizeof(buf), "%-14s %6zu %7.2f%% %12.1f\n", kCatNames[c],
                      category_counts[c], category_percent[c], mean_pixel_area[c]);
        os << buf;
    }
    return os.str();
}

PairMetrics pair_metrics(const Image& a_in, const Image& b_in) {
    require_nonempty(a_in, "pair_metrics");
    require_nonempty(b_in, "pair_metrics");
    if (a_in.height != b_in.height || a_in.width != b_in.width ||
        a_in.channels != b_in.channels)
        throw ContractError("pair_metrics: shape mismatch");
    const Image a = to_gray(a_in);
    const Image b = to_gray(b_in);
    const std::size_t H = a.height, W = a.width, n = H * W;

    PairMetrics m;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a.pix[i] - b.pix[i];
        m.mse += d * d;
    }
    m.mse /= static_cast<double>(n);

    // mean local SSIM over fully-contained sliding windows
    const std::size_t win = std::min<std::size_t>({8, H, W});
    const double c1 = 1e-4, c2 = 9e-4;
    double ssim_sum = 0.0;
    std::size_t windows = 0;
    for (std::size_t y = 0; y + win <= H; ++y)
        for (std::size_t x = 0; x + win <= W; ++x) {
            double mx = 0, my = 0;
            for (std::size_t dy = 0; dy < win; ++dy)
                for (std::size_t dx = 0; dx < win; ++dx) {
                    mx += a.at(y + dy, x + dx);
                    my += b.at(y + dy, x + dx);
                }
            const double inv = 1.0 / static_cast<double>(win * win);
            mx *= inv;
            my *= inv;
            double vx = 0, vy = 0, cov = 0;
            for (std::size_t dy = 0; dy < win; ++dy)
                for (std::size_t dx = 0; dx < win; ++dx) {
                    const double da = a.at(y + dy, x + dx) - mx;
                    const double db = b.at(y + dy, x + dx) - my;
                    vx += da * da;
                    vy += db * db;
                    cov += da * db;
                }
            vx *= inv;
            vy *= inv;
            cov *= inv;
            ssim_sum += ((2 * mx * my + c1) * (2 * cov + c2)) /
                        ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++windows;
        }
    m.ssim = windows ? ssim_sum / windows : 1.0;

    // mutual information from a 64x64 joint histogram, log base 2
    constexpr std::size_t bins = 64;
    std::vector<double> joint(bins * bins, 0.0);
    std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
    auto binof = [&](double v) {
        const long q = static_cast<long>(std::clamp(v, 0.0, 1.0) * bins);
        return static_cast<std::size_t>(std::min<long>(q, bins - 1));
    };
    const double w1 = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ba = binof(a.pix[i]), bb = binof(b.pix[i]);
        joint[ba * bins + bb] += w1;
        pa[ba] += w1;
        pb[bb] += w1;
    }
    double mi = 0.0;
    for (std::size_t i = 0; i < bins; ++i)
        for (std::size_t j = 0; j < bins; ++j) {
            const double p = joint[i * bins + j];
            if (p > 0.0) mi += p * std::log2(p / (pa[i] * pb[j]));
        }
    m.mi = std::max(0.0, mi);
    return m;
}

}  // namespace osf::data
