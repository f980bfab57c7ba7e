#include "crowdmot/sparsegrid.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "crowdmot/geometry.hpp"

namespace crowdmot {

namespace {

constexpr double kWholeCellTolerance = 1e-9;

bool valid_stride(int s) { return s == 1 || s == 2 || s == 4 || s == 8; }

void check_stride(int s, const char* what) {
    if (!valid_stride(s)) throw std::invalid_argument(fmt::format("{}: stride {} not in {{1, 2, 4, 8}}", what, s));
}

int cells(double lo, double hi, double step, const char* axis) {
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument(fmt::format("voxel spec: d{} must be > 0", axis));
    if (!(hi > lo)) throw std::invalid_argument(fmt::format("voxel spec: empty {} extent", axis));
    const double ratio = (hi - lo) / step;
    const double whole = std::round(ratio);
    if (std::abs(ratio - whole) > kWholeCellTolerance * std::max(1.0, ratio)) {
        throw std::invalid_argument(
            fmt::format("voxel spec: {} extent {} is not a whole number of {} m cells", axis, hi - lo, step));
    }
    return static_cast<int>(whole);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

SparseGrid map_features(const SparseGrid& g, const ChannelMap& mix) {
    if (mix.in() != g.channels()) {
        throw std::invalid_argument(fmt::format("channel map expects {} channels, grid has {}", mix.in(), g.channels()));
    }
    SparseGrid out(g.stride(), mix.out());
    for (const auto& [c, f] : g.entries()) out.set(c, mix.apply(f));
    return out;
}

// stride-1 .. stride-8 chain, SF1 first
void check_chain(std::span<const SparseGrid, 4> sf, const char* what) {
    for (int i = 0; i < 4; ++i) {
        if (sf[i].stride() != (1 << i)) {
            throw std::invalid_argument(fmt::format("{}: SF{} has stride {}, expected {}", what, i + 1, sf[i].stride(), 1 << i));
        }
    }
}

}  // namespace

void VoxelSpec::validate() const {
    for (double v : {x_min, x_max, y_min, y_max, z_min, z_max}) {
        if (!std::isfinite(v)) throw std::invalid_argument("voxel spec: non-finite extent");
    }
    cells(x_min, x_max, dx, "x");
    cells(y_min, y_max, dy, "y");
    cells(z_min, z_max, dz, "z");
}

std::array<int, 3> VoxelSpec::bound(int stride) const {
    check_stride(stride, "VoxelSpec::bound");
    const std::array<int, 3> base{cells(x_min, x_max, dx, "x"), cells(y_min, y_max, dy, "y"), cells(z_min, z_max, dz, "z")};
    return {(base[0] + stride - 1) / stride, (base[1] + stride - 1) / stride, (base[2] + stride - 1) / stride};
}

void PointCloud::validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].time_flag != 0 && points[i].time_flag != 1) {
            throw std::invalid_argument(fmt::format("point {}: time_flag {} not in {{0, 1}}", i, points[i].time_flag));
        }
    }
}

PointCloud stack_frames(const PointCloud& current, const PointCloud& previous) {
    PointCloud out;
    out.points.reserve(current.points.size() + previous.points.size());
    for (Point p : current.points) {
        p.time_flag = 0;
        out.points.push_back(p);
    }
    for (Point p : previous.points) {
        p.time_flag = 1;
        out.points.push_back(p);
    }
    return out;
}

SparseGrid::SparseGrid(int stride, int channels) : stride_(stride), channels_(channels) {
    check_stride(stride, "SparseGrid");
    if (channels <= 0) throw std::invalid_argument("SparseGrid: channels must be > 0");
}

void SparseGrid::set(VoxelCoord c, Features f) {
    if (static_cast<int>(f.size()) != channels_) {
        throw std::invalid_argument(fmt::format("SparseGrid: feature has {} channels, grid has {}", f.size(), channels_));
    }
    entries_[c] = std::move(f);
}

const SparseGrid::Features& SparseGrid::at(VoxelCoord c) const {
    const auto it = entries_.find(c);
    if (it == entries_.end()) throw std::out_of_range(fmt::format("SparseGrid: ({}, {}, {}) not occupied", c.x, c.y, c.z));
    return it->second;
}

std::vector<VoxelCoord> SparseGrid::occupancy() const {
    std::vector<VoxelCoord> out;
    out.reserve(entries_.size());
    for (const auto& kv : entries_) out.push_back(kv.first);
    return out;
}

VoxelizeResult voxelize(const PointCloud& pc, const VoxelSpec& spec) {
    spec.validate();
    pc.validate();
    const auto b = spec.bound(1);
    struct Acc {
        double n = 0.0, intensity = 0.0, time = 0.0;
    };
    std::map<VoxelCoord, Acc> acc;
    VoxelizeResult result;
    for (const auto& p : pc.points) {
        if (!(p.x >= spec.x_min && p.x < spec.x_max && p.y >= spec.y_min && p.y < spec.y_max && p.z >= spec.z_min &&
              p.z < spec.z_max)) {
            ++result.dropped;
            continue;
        }
        const VoxelCoord c{snapped_floor_index(p.x, spec.x_min, spec.dx), snapped_floor_index(p.y, spec.y_min, spec.dy),
                           snapped_floor_index(p.z, spec.z_min, spec.dz)};
        if (c.x >= b[0] || c.y >= b[1] || c.z >= b[2]) {
            ++result.dropped;
            continue;
        }
        Acc& a = acc[c];
        a.n += 1.0;
        a.intensity += p.intensity;
        a.time += p.time_flag;
    }
    for (const auto& [c, a] : acc) result.grid.set(c, {a.n, a.intensity / a.n, a.time / a.n});
    return result;
}

ChannelMap::ChannelMap(int in, int out, std::uint64_t seed) : in_(in), out_(out) {
    if (in <= 0 || out <= 0) throw std::invalid_argument("ChannelMap: widths must be > 0");
    std::mt19937_64 rng(seed);
    const double scale = std::sqrt(3.0 / in);  // unit gain on average
    std::uniform_real_distribution<double> u(-scale, scale);
    weights_.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    for (double& w : weights_) w = u(rng);
}

std::vector<double> ChannelMap::apply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != in_) {
        throw std::invalid_argument(fmt::format("ChannelMap: input has {} channels, expected {}", x.size(), in_));
    }
    std::vector<double> y(static_cast<std::size_t>(out_), 0.0);
    for (int o = 0; o < out_; ++o) {
        const double* row = weights_.data() + static_cast<std::size_t>(o) * in_;
        double s = 0.0;
        for (int i = 0; i < in_; ++i) s += row[i] * x[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(o)] = s;
    }
    return y;
}

SparseGrid resample(const SparseGrid& g, int target_stride, const SparseGrid& gate) {
    check_stride(target_stride, "resample");
    if (target_stride == g.stride()) return g;
    if (target_stride > g.stride()) {
        const int shift = std::countr_zero(static_cast<unsigned>(target_stride / g.stride()));
        std::map<VoxelCoord, std::pair<std::vector<double>, int>> acc;
        for (const auto& [c, f] : g.entries()) {
            auto& [sum, n] = acc[{c.x >> shift, c.y >> shift, c.z >> shift}];
            if (sum.empty()) sum.assign(f.size(), 0.0);
            for (std::size_t i = 0; i < f.size(); ++i) sum[i] += f[i];
            ++n;
        }
        SparseGrid out(target_stride, g.channels());
        for (auto& [c, sn] : acc) {
            for (double& v : sn.first) v /= sn.second;
            out.set(c, std::move(sn.first));
        }
        return out;
    }
    if (gate.stride() != target_stride) {
        throw std::invalid_argument(
            fmt::format("resample: gate stride {} does not match target stride {}", gate.stride(), target_stride));
    }
    const int shift = std::countr_zero(static_cast<unsigned>(g.stride() / target_stride));
    SparseGrid out(target_stride, g.channels());
    for (const auto& [c, unused] : gate.entries()) {
        const auto it = g.entries().find({c.x >> shift, c.y >> shift, c.z >> shift});
        if (it != g.entries().end()) out.set(c, it->second);
    }
    return out;
}

SparseGrid downsample(const SparseGrid& g, const ChannelMap& mix) {
    if (g.stride() > 4) throw std::invalid_argument(fmt::format("downsample: stride {} cannot be doubled", g.stride()));
    return map_features(resample(g, g.stride() * 2, g), mix);
}

void EncoderConfig::validate() const {
    for (int w : widths) {
        if (w <= 0) throw std::invalid_argument("encoder: widths must be > 0");
    }
    if (fusion_width <= 0) throw std::invalid_argument("encoder: fusion_width must be > 0");
}

std::array<SparseGrid, 4> encode(const SparseGrid& voxels, const EncoderConfig& cfg) {
    cfg.validate();
    if (voxels.stride() != 1) throw std::invalid_argument("encode: voxels must be at stride 1");
    SparseGrid sf1 = map_features(voxels, ChannelMap(voxels.channels(), cfg.widths[0], derive_seed(cfg.seed, 100)));
    SparseGrid sf2 = downsample(sf1, ChannelMap(cfg.widths[0], cfg.widths[1], derive_seed(cfg.seed, 101)));
    SparseGrid sf3 = downsample(sf2, ChannelMap(cfg.widths[1], cfg.widths[2], derive_seed(cfg.seed, 102)));
    SparseGrid sf4 = downsample(sf3, ChannelMap(cfg.widths[2], cfg.widths[3], derive_seed(cfg.seed, 103)));
    return {std::move(sf1), std::move(sf2), std::move(sf3), std::move(sf4)};
}

SparseGrid fuse_hr(const SparseGrid& sf2, const SparseGrid& sf4, const EncoderConfig& cfg) {
    cfg.validate();
    if (sf2.stride() != 2 || sf4.stride() != 8) {
        throw std::invalid_argument(
            fmt::format("fuse_hr: expected strides 2 and 8, got {} and {}", sf2.stride(), sf4.stride()));
    }
    const SparseGrid down = downsample(sf2, ChannelMap(sf2.channels(), sf2.channels(), derive_seed(cfg.seed, 200)));
    const SparseGrid up = resample(sf4, 4, down);
    SparseGrid out(4, sf2.channels() + sf4.channels());
    for (const auto& [c, f] : down.entries()) {
        std::vector<double> cat = f;
        if (up.contains(c)) {
            const auto& g = up.at(c);
            cat.insert(cat.end(), g.begin(), g.end());
        } else {
            cat.resize(cat.size() + static_cast<std::size_t>(sf4.channels()), 0.0);
        }
        out.set(c, std::move(cat));
    }
    return out;
}

SparseGrid fuse_ms(std::span<const SparseGrid, 4> sf, const EncoderConfig& cfg) {
    cfg.validate();
    check_chain(sf, "fuse_ms");
    std::vector<SparseGrid> scales(sf.begin(), sf.end());

    for (std::uint32_t round = 0; round < 2; ++round) {
        std::vector<SparseGrid> next;
        for (int t = 0; t < 4; ++t) {
            const SparseGrid& target = scales[static_cast<std::size_t>(t)];
            const int width = target.channels();
            std::map<VoxelCoord, std::vector<double>> acc;
            for (const auto& [c, f] : target.entries()) acc[c] = f;
            for (int s = 0; s < 4; ++s) {
                if (s == t) continue;
                const SparseGrid& source = scales[static_cast<std::size_t>(s)];
                const ChannelMap proj(source.channels(), width, derive_seed(cfg.seed, 1000 + round * 100 + s * 10 + t));
                const SparseGrid moved = resample(source, target.stride(), target);
                for (const auto& [c, f] : moved.entries()) {
                    // coarsened cells outside the target footprint are dropped
                    const auto it = acc.find(c);
                    if (it == acc.end()) continue;
                    const auto p = proj.apply(f);
                    for (int i = 0; i < width; ++i) it->second[static_cast<std::size_t>(i)] += p[static_cast<std::size_t>(i)];
                }
            }
            const ChannelMap mix(width, width, derive_seed(cfg.seed, 2000 + round * 10 + t));
            SparseGrid updated(target.stride(), width);
            for (auto& [c, f] : acc) updated.set(c, mix.apply(f));
            next.push_back(std::move(updated));
        }
        scales = std::move(next);
    }

    const SparseGrid& anchor = scales[2];
    int total = 0;
    for (const auto& g : scales) total += g.channels();
    std::vector<SparseGrid> at4;
    for (const auto& g : scales) at4.push_back(resample(g, 4, anchor));
    const ChannelMap head(total, cfg.fusion_width, derive_seed(cfg.seed, 3000));
    SparseGrid out(4, cfg.fusion_width);
    for (const auto& [c, unused] : anchor.entries()) {
        std::vector<double> cat;
        cat.reserve(static_cast<std::size_t>(total));
        for (const auto& g : at4) {
            if (g.contains(c)) {
                const auto& f = g.at(c);
                cat.insert(cat.end(), f.begin(), f.end());
            } else {
                cat.resize(cat.size() + static_cast<std::size_t>(g.channels()), 0.0);
            }
        }
        out.set(c, head.apply(cat));
    }
    return out;
}

Topology parse_topology(const std::string& name) {
    if (name == "a") return Topology::Baseline;
    if (name == "b") return Topology::HighRes;
    if (name == "c") return Topology::MultiScale;
    throw std::invalid_argument(fmt::format("unknown topology '{}' (expected a, b or c)", name));
}

std::vector<StageRow> topology_report(const SparseGrid& voxels, const VoxelSpec& spec, Topology topology,
                                      const EncoderConfig& cfg) {
    const auto row = [&](std::string name, const SparseGrid& g) {
        return StageRow{std::move(name), g.stride(), spec.bev_resolution(g.stride()), spec.bound(g.stride()), g.size(),
                        g.channels()};
    };
    const auto sf = encode(voxels, cfg);
    std::vector<StageRow> rows{row("voxels", voxels)};
    for (int i = 0; i < 4; ++i) rows.push_back(row(fmt::format("SF{}", i + 1), sf[static_cast<std::size_t>(i)]));
    switch (topology) {
        case Topology::Baseline:
            rows.push_back(row("bev", sf[3]));
            break;
        case Topology::HighRes:
            rows.push_back(row("bev", fuse_hr(sf[1], sf[3], cfg)));
            break;
        case Topology::MultiScale:
            rows.push_back(row("bev", fuse_ms(sf, cfg)));
            break;
    }
    return rows;
}

}  // namespace crowdmot
