#pragma once

#include <vector>

#include "crowdmot/targets.hpp"

namespace crowdmot {

struct Extents {
    double x_min = -20.0;
    double x_max = 20.0;
    double y_min = -20.0;
    double y_max = 20.0;

    double width() const { return x_max - x_min; }
    double depth() const { return y_max - y_min; }
    double area() const { return width() * depth(); }
    bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
    void validate() const;

    friend bool operator==(const Extents&, const Extents&) = default;
};

/// Ground-truth sequence: one object list per frame, identities persistent across frames.
struct SceneSequence {
    double frame_rate = 10.0;
    Extents area;
    std::vector<double> timestamps;
    std::vector<std::vector<GtObject>> frames;

    std::size_t frame_count() const { return frames.size(); }
};

}  // namespace crowdmot
