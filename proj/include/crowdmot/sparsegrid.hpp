#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace crowdmot {

struct VoxelSpec {
    double x_min = -96.0, x_max = 96.0;
    double y_min = -48.0, y_max = 48.0;
    double z_min = -5.0, z_max = 3.0;
    double dx = 0.075, dy = 0.075, dz = 0.20;

    void validate() const;
    /// Cells per axis at the given stride (x, y, z).
    std::array<int, 3> bound(int stride = 1) const;
    double bev_resolution(int stride) const { return dx * stride; }
};

struct Point {
    double x = 0.0, y = 0.0, z = 0.0;
    double intensity = 0.0;
    int time_flag = 0;  // 0 = current frame, 1 = previous frame
};

struct PointCloud {
    std::vector<Point> points;

    void validate() const;
};

/// Concatenates two sweeps, tagging the current one 0 and the previous one 1.
PointCloud stack_frames(const PointCloud& current, const PointCloud& previous);

struct VoxelCoord {
    int x = 0, y = 0, z = 0;

    friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

class SparseGrid {
public:
    using Features = std::vector<double>;

    SparseGrid(int stride, int channels);

    int stride() const { return stride_; }
    int channels() const { return channels_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    void set(VoxelCoord c, Features f);
    bool contains(VoxelCoord c) const { return entries_.count(c) != 0; }
    const Features& at(VoxelCoord c) const;
    const std::map<VoxelCoord, Features>& entries() const { return entries_; }
    std::vector<VoxelCoord> occupancy() const;

private:
    int stride_;
    int channels_;
    std::map<VoxelCoord, Features> entries_;
};

struct VoxelizeResult {
    SparseGrid grid{1, 3};
    std::size_t dropped = 0;  // points outside the extents
};

/// Features per voxel: (point count, mean intensity, mean time flag).
VoxelizeResult voxelize(const PointCloud& pc, const VoxelSpec& spec);

/// Fixed pseudo-random linear map standing in for a learned convolution kernel.
class ChannelMap {
public:
    ChannelMap(int in, int out, std::uint64_t seed);

    int in() const { return in_; }
    int out() const { return out_; }
    std::vector<double> apply(std::span<const double> x) const;

private:
    int in_;
    int out_;
    std::vector<double> weights_;  // out x in, row-major
};

/// Halves every coordinate (floor), averages children, then applies the map.
SparseGrid downsample(const SparseGrid& g, const ChannelMap& mix);

/// Moves a grid to another stride without changing channels. Coarsening averages
/// children; refining replicates the parent into each cell of `gate` that lies under it.
SparseGrid resample(const SparseGrid& g, int target_stride, const SparseGrid& gate);

struct EncoderConfig {
    std::array<int, 4> widths{16, 32, 64, 128};
    int fusion_width = 128;
    std::uint64_t seed = 0;

    void validate() const;
};

/// SF1..SF4 at strides 1, 2, 4, 8.
std::array<SparseGrid, 4> encode(const SparseGrid& voxels, const EncoderConfig& cfg);

/// High-resolution fusion of SF2 and SF4 at stride 4.
SparseGrid fuse_hr(const SparseGrid& sf2, const SparseGrid& sf4, const EncoderConfig& cfg);

/// Multi-scale fusion at stride 4 with two exchange rounds across all four scales.
SparseGrid fuse_ms(std::span<const SparseGrid, 4> sf, const EncoderConfig& cfg);

enum class Topology { Baseline, HighRes, MultiScale };

Topology parse_topology(const std::string& name);  // "a", "b", "c"

struct StageRow {
    std::string stage;
    int stride = 1;
    double resolution = 0.0;  // meters per BEV cell
    std::array<int, 3> bound{};
    std::size_t occupied = 0;
    int channels = 0;
};

std::vector<StageRow> topology_report(const SparseGrid& voxels, const VoxelSpec& spec, Topology topology,
                                      const EncoderConfig& cfg);

}  // namespace crowdmot
