#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "osfuse/autodiff.hpp"

namespace osf::obb {

// Rotated rectangle in normalized image units; theta in radians, canonical
// range [0, pi/2) after normalize_angle.
struct OrientedBox {
    double cx = 0, cy = 0, w = 0, h = 0, theta = 0;
};

struct Quad {
    std::array<double, 4> x{};
    std::array<double, 4> y{};
};

struct GaussianBox {
    std::array<double, 2> mu{};
    std::array<std::array<double, 2>, 2> sigma{};
};

struct LossTerms {
    double reg = 0, dfl = 0, cls = 0, total = 0;
};

Quad obb_to_quad(const OrientedBox& b);  // counter-clockwise corners

// Minimum-area enclosing rotated rectangle of the quad (rotating calipers on
// the convex hull); throws DegeneracyError for collinear or duplicate input.
OrientedBox quad_to_obb(const Quad& q);

// Same point set, theta reduced into [0, pi/2) with w/h swapped as needed.
OrientedBox normalize_angle(const OrientedBox& b);

// Convex polygon intersection over union; degenerate boxes give 0.
double rotated_iou(const OrientedBox& a, const OrientedBox& b);

// Uniform-rectangle second moments: Sigma = R diag(w^2, h^2)/12 R^T.
GaussianBox obb_to_gaussian(const OrientedBox& b);

// Bhattacharyya coefficient -> Hellinger distance; similarity = 1 - H.
double probiou_hellinger(const OrientedBox& a, const OrientedBox& b);
double probiou_similarity(const OrientedBox& a, const OrientedBox& b);

// Graph Hellinger distance of one predicted box (5 consecutive entries of
// pred starting at offset) against a fixed target.
num::Var probiou_hellinger_var(const num::Var& pred, std::size_t offset, const OrientedBox& target);

struct MatchedTarget {
    OrientedBox box;
    int category = 0;
};

struct LossGraph {
    num::Var reg, dfl, cls, total;
};

constexpr int kDflBins = 16;

// pred_boxes: {n,5} rows (cx,cy,w,h,theta); pred_dist: {2n,bins} logits for
// the width and height distributions; pred_logits: {n,num_classes}. Targets
// must align one to one with predictions (assignment is the caller's job).
LossGraph loss_terms_var(const num::Var& pred_boxes, const num::Var& pred_dist,
                         const num::Var& pred_logits, const std::vector<MatchedTarget>& targets,
                         int num_classes, int dfl_bins = kDflBins);

LossTerms loss_terms(const num::Tensor& pred_boxes, const num::Tensor& pred_dist,
                     const num::Tensor& pred_logits, const std::vector<MatchedTarget>& targets,
                     int num_classes, int dfl_bins = kDflBins);

}  // namespace osf::obb
