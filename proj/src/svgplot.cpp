#include "osfuse/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace osf::svg {

namespace {

constexpr int kW = 640, kH = 360;
constexpr int kLeft = 56, kRight = 16, kTop = 36, kBottom = 40;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void header(std::ostringstream& os, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
       << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\""
       << " font-size=\"14\">" << title << "</text>\n";
}

void axes(std::ostringstream& os, double ymin, double ymax, const std::string& y_label) {
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
       << kH - kBottom << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
       << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = ymin + (ymax - ymin) * i / 4.0;
        const double y = kH - kBottom - (kH - kTop - kBottom) * i / 4.0;
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(v)
           << "</text>\n";
        os << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kW - kRight << "\" y2=\""
           << y << "\" stroke=\"#dddddd\"/>\n";
    }
    os << "<text x=\"14\" y=\"" << (kTop + kH - kBottom) / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\""
       << "rotate(-90 14 " << (kTop + kH - kBottom) / 2 << ")\">" << y_label << "</text>\n";
}

}  // namespace

std::string line_chart(const std::string& title, const std::vector<Series>& series,
                       const std::string& x_label, const std::string& y_label) {
    double ymin = 1e300, ymax = -1e300;
    std::size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (n == 0) {
        ymin = 0;
        ymax = 1;
    }
    if (ymax - ymin < 1e-12) {
        ymax += 0.5;
        ymin -= 0.5;
    }

    std::ostringstream os;
    header(os, title);
    axes(os, ymin, ymax, y_label);
    const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        if (s.values.empty()) continue;
        os << "<polyline fill=\"none\" stroke=\"" << kColors[si % 6]
           << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const double x = kLeft + (n > 1 ? plot_w * i / (n - 1) : plot_w / 2);
            const double y = kH - kBottom - plot_h * (s.values[i] - ymin) / (ymax - ymin);
            os << num(x) << "," << num(y) << " ";
        }
        os << "\"/>\n";
        os << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 14 * (si + 1)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
           << kColors[si % 6] << "\">" << s.label << "</text>\n";
    }
    os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << x_label
       << "</text>\n</svg>\n";
    return os.str();
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values, const std::string& y_label) {
    double ymax = 0.0;
    for (double v : values) ymax = std::max(ymax, v);
    if (ymax <= 0) ymax = 1.0;

    std::ostringstream os;
    header(os, title);
    axes(os, 0.0, ymax, y_label);
    const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
    const std::size_t n = values.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double bw = plot_w / (n * 1.5 + 0.5);
        const double x = kLeft + bw * (0.5 + 1.5 * i);
        const double h = plot_h * values[i] / ymax;
        os << "<rect x=\"" << num(x) << "\" y=\"" << num(kH - kBottom - h) << "\" width=\""
           << num(bw) << "\" height=\"" << num(h) << "\" fill=\"" << kColors[i % 6] << "\"/>\n";
        os << "<text x=\"" << num(x + bw / 2) << "\" y=\"" << kH - kBottom + 14
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
           << (i < labels.size() ? labels[i] : "") << "</text>\n";
        os << "<text x=\"" << num(x + bw / 2) << "\" y=\"" << num(kH - kBottom - h - 4)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
           << num(values[i]) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace osf::svg
