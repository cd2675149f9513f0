#pragma once

#include <string>
#include <vector>

namespace osf::svg {

// Minimal self-contained SVG emitters for the report plots.

struct Series {
    std::string label;
    std::vector<double> values;
};

std::string line_chart(const std::string& title, const std::vector<Series>& series,
                       const std::string& x_label = "epoch",
                       const std::string& y_label = "value");

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values, const std::string& y_label = "value");

}  // namespace osf::svg
