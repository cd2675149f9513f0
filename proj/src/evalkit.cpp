#include "osfuse/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "osfuse/errors.hpp"

namespace osf::eval {

namespace {

bool score_order(const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return false;  // stable sort keeps insertion order for full ties
}

void check_category(int category) {
    if (category < 0 || category >= kNumCategories)
        throw InputError("unknown category id: " + std::to_string(category));
}

std::string format_fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

MatchResult match_detections(std::vector<Detection> dets, const std::vector<obb::OrientedBox>& gts,
                             double iou_thresh) {
    std::stable_sort(dets.begin(), dets.end(), score_order);
    MatchResult res;
    res.tp.assign(dets.size(), false);
    std::vector<bool> taken(gts.size(), false);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        double best = 0.0;
        std::size_t best_g = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) continue;
            const double iou = obb::rotated_iou(dets[i].box, gts[g]);
            if (iou > best) {  // strict: ties keep the lower index
                best = iou;
                best_g = g;
            }
        }
        if (best_g < gts.size() && best >= iou_thresh) {
            res.tp[i] = true;
            taken[best_g] = true;
        }
    }
    res.unmatched_gt = 0;
    for (bool t : taken)
        if (!t) ++res.unmatched_gt;
    return res;
}

std::optional<double> average_precision(const std::vector<bool>& ranked_tp, std::size_t n_gt) {
    if (n_gt == 0) return std::nullopt;
    // precision at each rank, then the monotone envelope from the right
    std::vector<double> precision(ranked_tp.size());
    std::vector<double> recall(ranked_tp.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
        if (ranked_tp[i]) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    }
    for (std::size_t i = precision.size(); i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double ap = 0.0;
    for (int r = 0; r <= 100; ++r) {
        const double target = r / 100.0;
        // first rank whose recall reaches the target
        double p = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i)
            if (recall[i] >= target - 1e-12) {
                p = precision[i];
                break;
            }
        ap += p;
    }
    return ap / 101.0;
}

EvalReport evaluate(const std::vector<Detection>& dets, const GroundTruth& gts) {
    for (const auto& d : dets) check_category(d.category);
    for (const auto& [id, insts] : gts)
        for (const auto& g : insts) check_category(g.category);

    // image ids in deterministic order (map is sorted); detections grouped
    // per (image, category) but ranked globally per category
    std::vector<Detection> sorted = dets;
    std::stable_sort(sorted.begin(), sorted.end(), score_order);

    const std::array<double, 10> thresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                               0.75, 0.80, 0.85, 0.90, 0.95};
    // ap[cat][threshold]
    std::array<std::array<std::optional<double>, 10>, kNumCategories> ap{};

    for (int cat = 0; cat < kNumCategories; ++cat) {
        std::size_t n_gt = 0;
        for (const auto& [id, insts] : gts)
            for (const auto& g : insts)
                if (g.category == cat) ++n_gt;

        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            // per-image greedy matching, flags assembled in global score order
            std::vector<bool> flags;
            std::map<std::string, std::vector<bool>> taken;
            for (const auto& [id, insts] : gts) {
                std::size_t count = 0;
                for (const auto& g : insts)
                    if (g.category == cat) ++count;
                taken[id].assign(count, false);
            }
            for (const auto& d : sorted) {
                if (d.category != cat) continue;
                auto it = gts.find(d.image_id);
                bool matched = false;
                if (it != gts.end()) {
                    double best = 0.0;
                    std::size_t best_g = static_cast<std::size_t>(-1);
                    std::size_t gi = 0;
                    auto& taken_flags = taken[d.image_id];
                    for (const auto& g : it->second) {
                        if (g.category != cat) continue;
                        if (!taken_flags[gi]) {
                            const double iou = obb::rotated_iou(d.box, g.box);
                            if (iou > best) {
                                best = iou;
                                best_g = gi;
                            }
                        }
                        ++gi;
                    }
                    if (best_g != static_cast<std::size_t>(-1) && best >= thresholds[t]) {
                        taken[d.image_id][best_g] = true;
                        matched = true;
                    }
                }
                flags.push_back(matched);
            }
            ap[cat][t] = average_precision(flags, n_gt);
        }
    }

    EvalReport rep;
    double sum50 = 0, sum75 = 0, summ = 0;
    int present = 0;
    for (int cat = 0; cat < kNumCategories; ++cat) {
        if (!ap[cat][0].has_value()) continue;
        ++present;
        rep.per_class_ap50[cat] = 100.0 * ap[cat][0].value();
        sum50 += ap[cat][0].value();
        sum75 += ap[cat][5].value();
        double m = 0;
        for (std::size_t t = 0; t < 10; ++t) m += ap[cat][t].value();
        summ += m / 10.0;
    }
    if (present > 0) {
        rep.ap50 = 100.0 * sum50 / present;
        rep.ap75 = 100.0 * sum75 / present;
        rep.map = 100.0 * summ / present;
    }
    return rep;
}

std::string EvalReport::to_json() const {
    std::ostringstream os;
    os << "{\n  \"per_class_ap50\": {";
    bool first = true;
    for (int cat = 0; cat < kNumCategories; ++cat) {
        if (!first) os << ", ";
        first = false;
        os << "\"" << kCategoryNames[cat] << "\": ";
        if (per_class_ap50[cat].has_value())
            os << format_fixed(per_class_ap50[cat].value());
        else
            os << "null";
    }
    os << "},\n";
    os << "  \"ap50\": " << format_fixed(ap50) << ",\n";
    os << "  \"ap75\": " << format_fixed(ap75) << ",\n";
    os << "  \"map\": " << format_fixed(map) << "\n}\n";
    return os.str();
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << "category        AP50\n";
    for (int cat = 0; cat < kNumCategories; ++cat) {
        char line[64];
        if (per_class_ap50[cat].has_value())
            std::snprintf(line, sizeof(line), "%-14s %7.2f\n", kCategoryNames[cat],
                          per_class_ap50[cat].value());
        else
            std::snprintf(line, sizeof(line), "%-14s %7s\n", kCategoryNames[cat], "-");
        os << line;
    }
    char tail[96];
    std::snprintf(tail, sizeof(tail), "ALL   AP50 %7.2f  AP75 %7.2f  mAP %7.2f\n", ap50, ap75,
                  map);
    os << tail;
    return os.str();
}

std::vector<Detection> read_detections(const std::string& text) {
    std::vector<Detection> out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        Detection d;
        double cx, cy, w, h, theta;
        if (!(ls >> d.image_id >> d.category >> d.score >> cx >> cy >> w >> h >> theta))
            throw ParseError("detections: line " + std::to_string(lineno) +
                             ": expected 8 fields `image_id category score cx cy w h theta`");
        std::string extra;
        if (ls >> extra)
            throw ParseError("detections: line " + std::to_string(lineno) + ": trailing field `" +
                             extra + "`");
        if (d.score < 0.0 || d.score > 1.0)
            throw ParseError("detections: line " + std::to_string(lineno) + ": score " +
                             std::to_string(d.score) + " outside [0,1]");
        check_category(d.category);
        d.box = obb::OrientedBox{cx, cy, w, h, theta};
        out.push_back(std::move(d));
    }
    return out;
}

std::string write_detections(const std::vector<Detection>& dets) {
    std::ostringstream os;
    for (const auto& d : dets) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s %d %.6f %.6f %.6f %.6f %.6f %.6f\n",
                      d.image_id.c_str(), d.category, d.score, d.box.cx, d.box.cy, d.box.w,
                      d.box.h, d.box.theta);
        os << buf;
    }
    return os.str();
}

}  // namespace osf::eval
