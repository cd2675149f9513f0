#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osfuse/obbgeom.hpp"

namespace osf::eval {

inline constexpr int kNumCategories = 6;
inline constexpr std::array<const char*, kNumCategories> kCategoryNames = {
    "bridge", "harbor", "oil_tank", "playground", "airport", "wind_turbine"};

struct Detection {
    std::string image_id;
    int category = 0;
    obb::OrientedBox box;
    double score = 0.0;
};

struct GtInstance {
    int category = 0;
    obb::OrientedBox box;
};

using GroundTruth = std::map<std::string, std::vector<GtInstance>>;

struct MatchResult {
    std::vector<bool> tp;  // aligned with the score-ranked detections
    std::size_t unmatched_gt = 0;
};

// Greedy per-category matching: detections in descending score order take
// their best remaining ground-truth box when its overlap clears the
// threshold; IoU ties resolve to the lower ground-truth index.
MatchResult match_detections(std::vector<Detection> dets, const std::vector<obb::OrientedBox>& gts,
                             double iou_thresh);

// 101-point interpolated average precision; empty when the class has no
// ground truth (excluded from class means).
std::optional<double> average_precision(const std::vector<bool>& ranked_tp, std::size_t n_gt);

struct EvalReport {
    std::array<std::optional<double>, kNumCategories> per_class_ap50;  // percent
    double ap50 = 0.0;  // class mean, percent
    double ap75 = 0.0;
    double map = 0.0;  // mean over IoU 0.50:0.05:0.95

    std::string to_json() const;   // fixed precision, deterministic bytes
    std::string to_table() const;
};

EvalReport evaluate(const std::vector<Detection>& dets, const GroundTruth& gts);

// One record per line: image_id category score cx cy w h theta.
std::vector<Detection> read_detections(const std::string& text);
std::string write_detections(const std::vector<Detection>& dets);

}  // namespace osf::eval
