#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace crowdmot {

// Thrown when a coordinate or cell index falls outside a grid. Never clamped.
class OutOfBounds : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct CellIndex {
    int j = 0;  // x direction
    int k = 0;  // y direction

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

// Which point of a cell stands for the cell in distance computations.
// Origin is x_min + j*dx (the literal BEV distance formula); Center adds half a cell.
enum class CellAnchor { Origin, Center };

/// BEV heatmap grid geometry. Cells are [x_min + j*dx, x_min + (j+1)*dx).
struct GridSpec {
    double x_min = -96.0;
    double x_max = 96.0;
    double y_min = -48.0;
    double y_max = 48.0;
    double dx = 0.6;
    double dy = 0.6;

    /// Validates extents and cell sizes; throws std::invalid_argument.
    static GridSpec make(double x_min, double x_max, double y_min, double y_max, double dx, double dy);

    int nx() const;
    int ny() const;
    std::size_t cell_count() const { return static_cast<std::size_t>(nx()) * static_cast<std::size_t>(ny()); }
    bool contains(double x, double y) const { return x >= x_min && x < x_max && y >= y_min && y < y_max; }

    void validate() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// floor((v - lo) / step), tolerant to ratios that land a few ulps below an integer.
int snapped_floor_index(double v, double lo, double step);

CellIndex quantize_to_grid(double x, double y, const GridSpec& grid);
Point2 cell_center(int j, int k, const GridSpec& grid, CellAnchor anchor = CellAnchor::Origin);

// Wraps to [-pi, pi).
double normalize_yaw(double yaw);

struct BoxBEV {
    double cx = 0.0;
    double cy = 0.0;
    double length = 1.0;  // along heading
    double width = 1.0;
    double yaw = 0.0;

    static BoxBEV make(double cx, double cy, double length, double width, double yaw);

    double area() const { return length * width; }
    std::array<Point2, 4> corners() const;  // counter-clockwise
};

struct Box3D {
    double cx = 0.0;
    double cy = 0.0;
    double cz = 0.0;
    double length = 1.0;
    double height = 1.0;
    double width = 1.0;
    double yaw = 0.0;

    static Box3D make(double cx, double cy, double cz, double length, double height, double width, double yaw);

    BoxBEV bev() const { return BoxBEV{cx, cy, length, width, yaw}; }
};

// Area of intersection below this is treated as no overlap.
inline constexpr double kIouAreaEpsilon = 1e-12;

double bev_iou(const BoxBEV& a, const BoxBEV& b);

// Euclidean distance between BEV centers.
double bev_distance(double ax, double ay, double bx, double by);

}  // namespace crowdmot
