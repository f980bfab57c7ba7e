#include "crowdmot/geometry.hpp"

#include <cmath>
#include <numbers>
#include <tuple>
#include <algorithm>
#include <vector>

#include <fmt/format.h>

namespace crowdmot {

namespace {

// Ratios within this relative distance below an integer are snapped up, so
// that e.g. 96 / 0.075 lands on 1280 rather than 1279.
constexpr double kSnapTolerance = 1e-9;

bool finite_all(std::initializer_list<double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

int cell_count_along(double lo, double hi, double step) {
    return static_cast<int>(std::llround((hi - lo) / step));
}

}  // namespace

GridSpec GridSpec::make(double x_min, double x_max, double y_min, double y_max, double dx, double dy) {
    GridSpec g{x_min, x_max, y_min, y_max, dx, dy};
    g.validate();
    return g;
}

void GridSpec::validate() const {
    if (!finite_all({x_min, x_max, y_min, y_max, dx, dy})) {
        throw std::invalid_argument("grid: non-finite parameter");
    }
    if (!(x_max > x_min) || !(y_max > y_min)) {
        throw std::invalid_argument(fmt::format("grid: empty extents x=[{}, {}) y=[{}, {})", x_min, x_max, y_min, y_max));
    }
    if (!(dx > 0.0) || !(dy > 0.0)) {
        throw std::invalid_argument(fmt::format("grid: cell size must be positive (dx={}, dy={})", dx, dy));
    }
    if (nx() <= 0 || ny() <= 0) {
        throw std::invalid_argument("grid: cell size larger than extents");
    }
}

int GridSpec::nx() const { return cell_count_along(x_min, x_max, dx); }
int GridSpec::ny() const { return cell_count_along(y_min, y_max, dy); }

int snapped_floor_index(double v, double lo, double step) {
    const double ratio = (v - lo) / step;
    double index = std::floor(ratio);
    if (index + 1.0 - ratio < kSnapTolerance * std::max(1.0, std::abs(ratio))) {
        index += 1.0;
    }
    return static_cast<int>(index);
}

CellIndex quantize_to_grid(double x, double y, const GridSpec& grid) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw OutOfBounds("quantize_to_grid: non-finite coordinate");
    }
    const CellIndex cell{snapped_floor_index(x, grid.x_min, grid.dx), snapped_floor_index(y, grid.y_min, grid.dy)};
    if (x < grid.x_min || y < grid.y_min || cell.j < 0 || cell.k < 0 || cell.j >= grid.nx() || cell.k >= grid.ny()) {
        throw OutOfBounds(fmt::format("quantize_to_grid: ({}, {}) outside x=[{}, {}) y=[{}, {})", x, y, grid.x_min,
                                      grid.x_max, grid.y_min, grid.y_max));
    }
    return cell;
}

Point2 cell_center(int j, int k, const GridSpec& grid, CellAnchor anchor) {
    if (j < 0 || k < 0 || j >= grid.nx() || k >= grid.ny()) {
        throw OutOfBounds(fmt::format("cell_center: index ({}, {}) outside {}x{} grid", j, k, grid.nx(), grid.ny()));
    }
    const double shift = anchor == CellAnchor::Center ? 0.5 : 0.0;
    return {grid.x_min + (j + shift) * grid.dx, grid.y_min + (k + shift) * grid.dy};
}

double normalize_yaw(double yaw) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double wrapped = std::fmod(yaw + std::numbers::pi, two_pi);
    if (wrapped < 0.0) wrapped += two_pi;
    wrapped -= std::numbers::pi;
    // fmod can return exactly two_pi - tiny; keep the half-open interval
    if (wrapped >= std::numbers::pi) wrapped -= two_pi;
    return wrapped;
}

BoxBEV BoxBEV::make(double cx, double cy, double length, double width, double yaw) {
    if (!finite_all({cx, cy, length, width, yaw})) throw std::invalid_argument("box: non-finite field");
    if (!(length > 0.0) || !(width > 0.0)) {
        throw std::invalid_argument(fmt::format("box: sizes must be positive (l={}, w={})", length, width));
    }
    return BoxBEV{cx, cy, length, width, normalize_yaw(yaw)};
}

std::array<Point2, 4> BoxBEV::corners() const {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    const double hl = 0.5 * length;
    const double hw = 0.5 * width;
    // local (±hl, ±hw) in counter-clockwise order
    const std::array<Point2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    std::array<Point2, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) {
        out[i] = {cx + c * local[i].x - s * local[i].y, cy + s * local[i].x + c * local[i].y};
    }
    return out;
}

Box3D Box3D::make(double cx, double cy, double cz, double length, double height, double width, double yaw) {
    if (!finite_all({cx, cy, cz, length, height, width, yaw})) throw std::invalid_argument("box: non-finite field");
    if (!(length > 0.0) || !(height > 0.0) || !(width > 0.0)) {
        throw std::invalid_argument(fmt::format("box: sizes must be positive (l={}, h={}, w={})", length, height, width));
    }
    return Box3D{cx, cy, cz, length, height, width, normalize_yaw(yaw)};
}

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double polygon_area(const std::vector<Point2>& poly) {
    double twice = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2& p = poly[i];
        const Point2& q = poly[(i + 1) % poly.size()];
        twice += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(twice);
}

// Sutherland-Hodgman: clip `subject` against the convex counter-clockwise `clip` polygon.
std::vector<Point2> clip_convex(std::vector<Point2> subject, const std::array<Point2, 4>& clip) {
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Point2& a = clip[e];
        const Point2& b = clip[(e + 1) % clip.size()];
        std::vector<Point2> input = std::move(subject);
        subject.clear();
        for (std::size_t i = 0; i < input.size(); ++i) {
            const Point2& cur = input[i];
            const Point2& prev = input[(i + input.size() - 1) % input.size()];
            const double d_cur = cross(a, b, cur);
            const double d_prev = cross(a, b, prev);
            const bool cur_in = d_cur >= 0.0;
            const bool prev_in = d_prev >= 0.0;
            if (cur_in != prev_in) {
                const double t = d_prev / (d_prev - d_cur);
                subject.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
            }
            if (cur_in) subject.push_back(cur);
        }
    }
    return subject;
}

}  // namespace

double bev_iou(const BoxBEV& first, const BoxBEV& second) {
    // canonical argument order makes the result exactly symmetric
    const auto key = [](const BoxBEV& box) { return std::tie(box.cx, box.cy, box.length, box.width, box.yaw); };
    if (key(first) == key(second)) return 1.0;
    const bool swap = key(second) < key(first);
    const BoxBEV& a = swap ? second : first;
    const BoxBEV& b = swap ? first : second;

    // bounding-circle rejection
    const double ra = 0.5 * std::hypot(a.length, a.width);
    const double rb = 0.5 * std::hypot(b.length, b.width);
    if (bev_distance(a.cx, a.cy, b.cx, b.cy) > ra + rb) return 0.0;

    const auto ca = a.corners();
    const auto cb = b.corners();
    const auto overlap = clip_convex(std::vector<Point2>(ca.begin(), ca.end()), cb);
    if (overlap.size() < 3) return 0.0;
    const double inter = polygon_area(overlap);
    if (inter <= kIouAreaEpsilon) return 0.0;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double bev_distance(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

}  // namespace crowdmot
