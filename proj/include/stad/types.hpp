#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

#include "stad/errors.hpp"

namespace stad {

using CategoryId = int;

// Axis-aligned rectangle in normalized image coordinates: x is a fraction of
// the image width, y of the height. Valid boxes satisfy
// 0 <= x1 <= x2 <= 1 and 0 <= y1 <= y2 <= 1; zero-area boxes are permitted
// as degenerate values.
template <typename Scalar>
struct Box {
    Scalar x1{0}, y1{0}, x2{0}, y2{0};

    Scalar width() const { return x2 - x1; }
    Scalar height() const { return y2 - y1; }
    Scalar area() const { return width() * height(); }
    bool degenerate() const { return x1 >= x2 || y1 >= y2; }

    Eigen::Matrix<Scalar, 2, 1> top_left() const { return {x1, y1}; }
    Eigen::Matrix<Scalar, 2, 1> bottom_right() const { return {x2, y2}; }

    friend bool operator==(const Box& a, const Box& b) {
        return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
    }
};

using Boxd = Box<double>;
using Boxf = Box<float>;

template <typename Scalar>
bool box_valid(const Box<Scalar>& b) {
    return Scalar(0) <= b.x1 && b.x1 <= b.x2 && b.x2 <= Scalar(1) &&
           Scalar(0) <= b.y1 && b.y1 <= b.y2 && b.y2 <= Scalar(1);
}

// Clamps coordinates that overshoot [0,1] by at most `slack`; anything worse
// is the caller's error to report.
template <typename Scalar>
bool box_clamp_to_unit(Box<Scalar>& b, Scalar slack) {
    auto snap = [slack](Scalar& v) {
        if (v < Scalar(0)) {
            if (v < -slack) return false;
            v = Scalar(0);
        } else if (v > Scalar(1)) {
            if (v > Scalar(1) + slack) return false;
            v = Scalar(1);
        }
        return true;
    };
    return snap(b.x1) && snap(b.y1) && snap(b.x2) && snap(b.y2) &&
           b.x1 <= b.x2 && b.y1 <= b.y2;
}

struct ImageSize {
    int width{0};
    int height{0};

    friend bool operator==(const ImageSize& a, const ImageSize& b) {
        return a.width == b.width && a.height == b.height;
    }
};

inline void require_valid(const ImageSize& s) {
    if (s.width < 1 || s.height < 1)
        throw ValidationError("image size must be positive, got " +
                              std::to_string(s.width) + "x" + std::to_string(s.height));
}

// One frame-level box with category and confidence.
struct Detection {
    int frame_index{0};
    Boxd box;
    CategoryId category{0};
    double score{0.0};

    friend bool operator==(const Detection& a, const Detection& b) {
        return a.frame_index == b.frame_index && a.box == b.box &&
               a.category == b.category && a.score == b.score;
    }
};

}  // namespace stad
