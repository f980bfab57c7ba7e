#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "crowdmot/geometry.hpp"

namespace crowdmot {

using InstanceId = std::int64_t;

/// Dense nx-by-ny array over a GridSpec, stored row-major in y (index k*nx + j).
class DenseGrid2D {
public:
    DenseGrid2D() = default;
    explicit DenseGrid2D(const GridSpec& grid, double fill = 0.0);

    const GridSpec& grid() const { return grid_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return values_.size(); }

    double& at(int j, int k) { return values_[index(j, k)]; }
    double at(int j, int k) const { return values_[index(j, k)]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    double max_value() const;
    bool same_shape(const DenseGrid2D& other) const { return grid_ == other.grid_; }

private:
    std::size_t index(int j, int k) const;

    GridSpec grid_;
    int nx_ = 0;
    int ny_ = 0;
    std::vector<double> values_;
};

struct GtObject {
    InstanceId instance_id = 0;
    Box3D box;
    int frame = 0;
};

struct MotionOffset {
    double ox = 0.0;
    double oy = 0.0;
    double oz = 0.0;

    friend bool operator==(const MotionOffset&, const MotionOffset&) = default;
};

struct MotionTarget {
    MotionOffset offset;
    bool newborn = false;  // no previous-frame match; offset is zero
};

struct RelationshipOffset {
    double rx = 0.0;
    double ry = 0.0;
    bool defined = false;

    friend bool operator==(const RelationshipOffset&, const RelationshipOffset&) = default;
};

enum class HeatmapCombine { Max, Sum };

struct LossParams {
    double alpha = 2.0;
    double gamma = 4.0;
    double weight_floor = 1.0;
    double sigma = 1.0;  // heatmap spread, in cells
    double th = 2.0;     // density radius, meters

    void validate() const;
};

// Predictions are clamped to [kProbEpsilon, 1 - kProbEpsilon] before the loss.
inline constexpr double kProbEpsilon = 1e-7;
inline constexpr double kDefaultNeighborRadius = 3.0;

/// Center heatmap: each object contributes exp(-((j-j*)^2 + (k-k*)^2) / sigma^2)
/// around its quantized cell. Max keeps object centers at exactly 1; Sum is the
/// literal superposition and can exceed 1 near adjacent objects.
DenseGrid2D make_heatmap(std::span<const GtObject> objects, const GridSpec& grid, double sigma,
                         HeatmapCombine combine = HeatmapCombine::Max);

/// Density-aware weights: per cell, the number of objects whose BEV distance to
/// the cell anchor is strictly below `th`.
DenseGrid2D make_daw(std::span<const GtObject> objects, const GridSpec& grid, double th,
                     CellAnchor anchor = CellAnchor::Origin);

struct LossResult {
    double loss = 0.0;
    DenseGrid2D grad;  // d loss / d pred, zero where the clamp is active
    int positives = 0;
};

/// Density-weighted focal loss over the heatmap. Cells with gt == 1 use the
/// positive branch; every other cell is penalized by (1 - gt)^gamma. The sum is
/// divided by max(1, positives).
LossResult focal_daw_loss(const DenseGrid2D& pred, const DenseGrid2D& gt, const DenseGrid2D& weights,
                          const LossParams& params);

/// Per instance id: displacement from the current to the previous-frame position.
std::map<InstanceId, MotionTarget> make_motion_offsets(std::span<const GtObject> curr, std::span<const GtObject> prev);

/// Per instance id: vector to the nearest other object, defined only when that
/// neighbor lies within `radius`. Ties go to the smallest instance id.
std::map<InstanceId, RelationshipOffset> make_relationship_offsets(std::span<const GtObject> objects,
                                                                   double radius = kDefaultNeighborRadius);

}  // namespace crowdmot
