#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "kptdiag/types.hpp"

namespace kptdiag {

struct Box {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

    double area() const { return w * h; }
    double x2() const { return x + w; }
    double y2() const { return y + h; }
};

inline Box to_box(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

inline double box_iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Tight axis-aligned box around a detection's keypoints.
inline Box keypoint_bbox(const std::vector<Point>& pts) {
    if (pts.empty()) return {};
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    for (const Point& p : pts) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

/// Even-odd test against a polygon given as flat [x0,y0,x1,y1,...].
inline bool point_in_polygon(double px, double py, const std::vector<double>& ring) {
    const std::size_t n = ring.size() / 2;
    if (n < 3) return false;
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = ring[2 * i], yi = ring[2 * i + 1];
        const double xj = ring[2 * j], yj = ring[2 * j + 1];
        const bool crosses = (yi > py) != (yj > py);
        if (crosses && px < (xj - xi) * (py - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

inline bool point_in_mask(double px, double py, const PolygonMask& polys) {
    bool inside = false;
    for (const auto& ring : polys)
        if (point_in_polygon(px, py, ring)) inside = !inside;
    return inside;
}

/// COCO uncompressed RLE: column-major runs starting with background.
inline bool point_in_mask(int col, int row, const RleMask& rle) {
    if (col < 0 || row < 0 || col >= rle.width || row >= rle.height) return false;
    const std::uint64_t pos = static_cast<std::uint64_t>(col) * rle.height + row;
    std::uint64_t acc = 0;
    bool value = false;
    for (std::uint64_t run : rle.counts) {
        acc += run;
        if (pos < acc) return value;
        value = !value;
    }
    return false;
}

}  // namespace kptdiag
