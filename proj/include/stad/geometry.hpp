#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "stad/errors.hpp"
#include "stad/types.hpp"

namespace stad {

// Coordinate convention for the squared-diagonal denominator of MPDIoU.
// `normalized` keeps everything in unit coordinates (w = h = 1, denominator 2);
// `pixel` converts corner distances to pixels and divides by W^2 + H^2.
enum class MpdConvention { normalized, pixel };

enum class GradientPolicy { error_on_kink, subgradient };

template <typename Scalar>
struct MpdIouResult {
    Scalar iou{0};
    Scalar d1_sq{0};        // squared top-left corner distance
    Scalar d2_sq{0};        // squared bottom-right corner distance
    Scalar mpdiou{0};       // iou - (d1_sq + d2_sq) / denominator
    Scalar denominator{0};  // w^2 + h^2 in the chosen convention
};

using MpdIouResultd = MpdIouResult<double>;

template <typename Scalar>
Scalar intersection_area(const Box<Scalar>& a, const Box<Scalar>& b) {
    const Scalar iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const Scalar ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= Scalar(0) || ih <= Scalar(0)) return Scalar(0);
    return iw * ih;
}

// Intersection over union. Degenerate boxes give 0 unless both are degenerate
// and identical, which counts as a perfect match.
template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
    const Scalar inter = intersection_area(a, b);
    const Scalar uni = a.area() + b.area() - inter;
    if (uni <= Scalar(0)) return a == b ? Scalar(1) : Scalar(0);
    return inter / uni;
}

template <typename Scalar>
MpdIouResult<Scalar> mpd_iou(const Box<Scalar>& pred, const Box<Scalar>& gt,
                             const ImageSize& size,
                             MpdConvention convention = MpdConvention::normalized) {
    require_valid(size);
    MpdIouResult<Scalar> r;
    r.iou = iou(pred, gt);
    if (convention == MpdConvention::normalized) {
        r.d1_sq = (pred.top_left() - gt.top_left()).squaredNorm();
        r.d2_sq = (pred.bottom_right() - gt.bottom_right()).squaredNorm();
        r.denominator = Scalar(2);
    } else {
        const Scalar w = Scalar(size.width);
        const Scalar h = Scalar(size.height);
        const Eigen::Matrix<Scalar, 2, 1> px{w, h};
        r.d1_sq = (pred.top_left() - gt.top_left()).cwiseProduct(px).squaredNorm();
        r.d2_sq = (pred.bottom_right() - gt.bottom_right()).cwiseProduct(px).squaredNorm();
        r.denominator = w * w + h * h;
    }
    r.mpdiou = r.iou - r.d1_sq / r.denominator - r.d2_sq / r.denominator;
    return r;
}

template <typename Scalar>
Scalar mpd_iou_loss(const Box<Scalar>& pred, const Box<Scalar>& gt,
                    const ImageSize& size,
                    MpdConvention convention = MpdConvention::normalized) {
    return Scalar(1) - mpd_iou(pred, gt, size, convention).mpdiou;
}

// Conservative distance from (pred, gt) to the nearest kink of the IoU
// surface: edge ties and touching-edge configurations. Useful for keeping
// finite-difference stencils on smooth ground.
template <typename Scalar>
Scalar kink_distance(const Box<Scalar>& pred, const Box<Scalar>& gt) {
    const Scalar iw = std::min(pred.x2, gt.x2) - std::max(pred.x1, gt.x1);
    const Scalar ih = std::min(pred.y2, gt.y2) - std::max(pred.y1, gt.y1);
    Scalar d = std::min(std::abs(iw), std::abs(ih));
    d = std::min(d, std::abs(pred.x1 - gt.x1));
    d = std::min(d, std::abs(pred.y1 - gt.y1));
    d = std::min(d, std::abs(pred.x2 - gt.x2));
    d = std::min(d, std::abs(pred.y2 - gt.y2));
    return d;
}

// Gradient of mpd_iou_loss with respect to (x1, y1, x2, y2) of `pred`.
//
// At kinks of the IoU surface (an intersection edge coinciding with a box
// edge, or exactly touching boxes) the loss is not differentiable. The
// default policy reports that; GradientPolicy::subgradient instead resolves
// ties as if the predicted edge were the binding one, and uses the
// disjoint-side (zero) derivative at touching edges.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> mpd_iou_grad(const Box<Scalar>& pred, const Box<Scalar>& gt,
                                         const ImageSize& size,
                                         MpdConvention convention = MpdConvention::normalized,
                                         GradientPolicy policy = GradientPolicy::error_on_kink,
                                         Scalar kink_tol = Scalar(1e-8)) {
    require_valid(size);
    Eigen::Matrix<Scalar, 4, 1> grad;

    // Corner-distance terms: d/dp of (d1_sq + d2_sq) / denominator.
    Scalar wx = Scalar(1), wy = Scalar(1), denom = Scalar(2);
    if (convention == MpdConvention::pixel) {
        const Scalar w = Scalar(size.width);
        const Scalar h = Scalar(size.height);
        wx = w * w;
        wy = h * h;
        denom = wx + wy;
    }
    grad[0] = Scalar(2) * wx * (pred.x1 - gt.x1) / denom;
    grad[1] = Scalar(2) * wy * (pred.y1 - gt.y1) / denom;
    grad[2] = Scalar(2) * wx * (pred.x2 - gt.x2) / denom;
    grad[3] = Scalar(2) * wy * (pred.y2 - gt.y2) / denom;

    const Scalar iw = std::min(pred.x2, gt.x2) - std::max(pred.x1, gt.x1);
    const Scalar ih = std::min(pred.y2, gt.y2) - std::max(pred.y1, gt.y1);

    const bool touching_x = std::abs(iw) <= kink_tol && ih > -kink_tol;
    const bool touching_y = std::abs(ih) <= kink_tol && iw > -kink_tol;
    const bool overlapping = iw > kink_tol && ih > kink_tol;
    const bool edge_tie = overlapping &&
                          (std::abs(pred.x1 - gt.x1) <= kink_tol ||
                           std::abs(pred.y1 - gt.y1) <= kink_tol ||
                           std::abs(pred.x2 - gt.x2) <= kink_tol ||
                           std::abs(pred.y2 - gt.y2) <= kink_tol);

    if (touching_x || touching_y || edge_tie) {
        if (policy == GradientPolicy::error_on_kink)
            throw NonDifferentiableError(
                "IoU has a kink here (coinciding or touching box edges); "
                "request subgradient behavior to proceed");
        if (!overlapping) return grad;  // touching: take the disjoint-side derivative
    }

    if (iw > Scalar(0) && ih > Scalar(0)) {
        // d/dp of -IoU = -(dI * U - I * (dAp - dI)) / U^2.
        const Scalar inter = iw * ih;
        const Scalar uni = pred.area() + gt.area() - inter;
        const Scalar pw = pred.width();
        const Scalar ph = pred.height();

        // Ties resolve toward the predicted edge being the binding one.
        const Scalar diw_dx1 = pred.x1 >= gt.x1 ? Scalar(-1) : Scalar(0);
        const Scalar diw_dx2 = pred.x2 <= gt.x2 ? Scalar(1) : Scalar(0);
        const Scalar dih_dy1 = pred.y1 >= gt.y1 ? Scalar(-1) : Scalar(0);
        const Scalar dih_dy2 = pred.y2 <= gt.y2 ? Scalar(1) : Scalar(0);

        const Scalar dI[4] = {diw_dx1 * ih, dih_dy1 * iw, diw_dx2 * ih, dih_dy2 * iw};
        const Scalar dAp[4] = {-ph, -pw, ph, pw};
        for (int i = 0; i < 4; ++i) {
            const Scalar diou = (dI[i] * uni - inter * (dAp[i] - dI[i])) / (uni * uni);
            grad[i] -= diou;
        }
    }
    return grad;
}

}  // namespace stad
