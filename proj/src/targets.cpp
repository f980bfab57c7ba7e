#include "crowdmot/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace crowdmot {

DenseGrid2D::DenseGrid2D(const GridSpec& grid, double fill)
    : grid_(grid), nx_(grid.nx()), ny_(grid.ny()), values_(grid.cell_count(), fill) {
    grid.validate();
}

std::size_t DenseGrid2D::index(int j, int k) const {
    if (j < 0 || k < 0 || j >= nx_ || k >= ny_) {
        throw OutOfBounds(fmt::format("grid index ({}, {}) outside {}x{}", j, k, nx_, ny_));
    }
    return static_cast<std::size_t>(k) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(j);
}

double DenseGrid2D::max_value() const {
    if (values_.empty()) return 0.0;
    return *std::max_element(values_.begin(), values_.end());
}

void LossParams::validate() const {
    if (!(alpha >= 0.0) || !(gamma >= 0.0)) throw std::invalid_argument("loss: alpha and gamma must be >= 0");
    if (!(weight_floor >= 0.0)) throw std::invalid_argument("loss: weight_floor must be >= 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("loss: sigma must be > 0");
    if (!(th > 0.0)) throw std::invalid_argument("loss: th must be > 0");
}

namespace {

void require_unique_ids(std::span<const GtObject> objects, const char* what) {
    std::set<InstanceId> seen;
    for (const auto& obj : objects) {
        if (!seen.insert(obj.instance_id).second) {
            throw std::invalid_argument(fmt::format("{}: duplicate instance id {}", what, obj.instance_id));
        }
    }
}

}  // namespace

DenseGrid2D make_heatmap(std::span<const GtObject> objects, const GridSpec& grid, double sigma,
                         HeatmapCombine combine) {
    if (!(sigma > 0.0)) throw std::invalid_argument("make_heatmap: sigma must be > 0");
    DenseGrid2D heat(grid);
    const double sigma2 = sigma * sigma;
    // exp(-x) is exactly 0 in double for x > ~745.2, so cells beyond this radius never contribute
    const int reach = static_cast<int>(std::ceil(sigma * std::sqrt(746.0))) + 1;

    for (const auto& obj : objects) {
        const CellIndex center = quantize_to_grid(obj.box.cx, obj.box.cy, grid);
        const int j0 = std::max(0, center.j - reach), j1 = std::min(heat.nx() - 1, center.j + reach);
        const int k0 = std::max(0, center.k - reach), k1 = std::min(heat.ny() - 1, center.k + reach);
        for (int k = k0; k <= k1; ++k) {
            for (int j = j0; j <= j1; ++j) {
                const double dj = j - center.j;
                const double dk = k - center.k;
                const double g = std::exp(-(dj * dj + dk * dk) / sigma2);
                double& cell = heat.at(j, k);
                cell = combine == HeatmapCombine::Max ? std::max(cell, g) : cell + g;
            }
        }
    }
    return heat;
}

DenseGrid2D make_daw(std::span<const GtObject> objects, const GridSpec& grid, double th, CellAnchor anchor) {
    if (!(th > 0.0)) throw std::invalid_argument("make_daw: th must be > 0");
    DenseGrid2D weights(grid);
    const double shift = anchor == CellAnchor::Center ? 0.5 : 0.0;

    for (const auto& obj : objects) {
        const double x = obj.box.cx;
        const double y = obj.box.cy;
        quantize_to_grid(x, y, grid);  // validates extents

        // candidate index window, one cell of slack on each side
        const int j0 = std::max(0, static_cast<int>(std::floor((x - th - grid.x_min) / grid.dx - shift)) - 1);
        const int j1 = std::min(weights.nx() - 1, static_cast<int>(std::ceil((x + th - grid.x_min) / grid.dx - shift)) + 1);
        const int k0 = std::max(0, static_cast<int>(std::floor((y - th - grid.y_min) / grid.dy - shift)) - 1);
        const int k1 = std::min(weights.ny() - 1, static_cast<int>(std::ceil((y + th - grid.y_min) / grid.dy - shift)) + 1);
        for (int k = k0; k <= k1; ++k) {
            for (int j = j0; j <= j1; ++j) {
                const Point2 p = cell_center(j, k, grid, anchor);
                const double dist = std::sqrt((p.x - x) * (p.x - x) + (p.y - y) * (p.y - y));
                if (dist < th) weights.at(j, k) += 1.0;
            }
        }
    }
    return weights;
}

LossResult focal_daw_loss(const DenseGrid2D& pred, const DenseGrid2D& gt, const DenseGrid2D& weights,
                          const LossParams& params) {
    params.validate();
    if (!pred.same_shape(gt) || !pred.same_shape(weights)) {
        throw std::invalid_argument("focal_daw_loss: pred, gt and weights must share one grid");
    }

    LossResult result{0.0, DenseGrid2D(pred.grid()), 0};
    const auto p_raw = pred.values();
    const auto c_all = gt.values();
    const auto w_all = weights.values();
    auto grad = result.grad.values();
    const double alpha = params.alpha;
    const double gamma = params.gamma;

    double total = 0.0;
    for (std::size_t i = 0; i < p_raw.size(); ++i) {
        const bool clamped = !(p_raw[i] >= kProbEpsilon && p_raw[i] <= 1.0 - kProbEpsilon);
        const double p = std::clamp(p_raw[i], kProbEpsilon, 1.0 - kProbEpsilon);
        const double c = c_all[i];
        const double w = std::max(w_all[i], params.weight_floor);

        double term = 0.0;
        double slope = 0.0;
        if (c == 1.0) {
            ++result.positives;
            const double q = 1.0 - p;
            const double log_p = std::log(p);
            term = -w * std::pow(q, alpha) * log_p;
            slope = w * (alpha * std::pow(q, alpha - 1.0) * log_p - std::pow(q, alpha) / p);
        } else {
            const double neg_w = w * std::pow(1.0 - c, gamma);
            const double log_q = std::log(1.0 - p);
            term = -neg_w * std::pow(p, alpha) * log_q;
            slope = -neg_w * (alpha * std::pow(p, alpha - 1.0) * log_q - std::pow(p, alpha) / (1.0 - p));
        }
        total += term;
        grad[i] = clamped ? 0.0 : slope;
    }

    const double norm = std::max(1, result.positives);
    result.loss = total / norm;
    for (double& g : grad) g /= norm;
    return result;
}

std::map<InstanceId, MotionTarget> make_motion_offsets(std::span<const GtObject> curr, std::span<const GtObject> prev) {
    require_unique_ids(curr, "make_motion_offsets(curr)");
    require_unique_ids(prev, "make_motion_offsets(prev)");
    std::unordered_map<InstanceId, const Box3D*> previous;
    for (const auto& obj : prev) previous.emplace(obj.instance_id, &obj.box);

    std::map<InstanceId, MotionTarget> out;
    for (const auto& obj : curr) {
        MotionTarget target;
        if (auto it = previous.find(obj.instance_id); it != previous.end()) {
            const Box3D& before = *it->second;
            target.offset = {before.cx - obj.box.cx, before.cy - obj.box.cy, before.cz - obj.box.cz};
        } else {
            target.newborn = true;
        }
        out.emplace(obj.instance_id, target);
    }
    return out;
}

std::map<InstanceId, RelationshipOffset> make_relationship_offsets(std::span<const GtObject> objects, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("make_relationship_offsets: radius must be > 0");
    require_unique_ids(objects, "make_relationship_offsets");

    // Bucket by cells of side `radius`; any neighbor within radius sits in the 3x3 block.
    using Bucket = std::pair<std::int64_t, std::int64_t>;
    struct BucketHash {
        std::size_t operator()(const Bucket& b) const {
            return std::hash<std::int64_t>{}(b.first * 73856093LL ^ b.second * 19349663LL);
        }
    };
    const double side = radius * (1.0 + 1e-6);
    const auto bucket_of = [side](const Box3D& box) {
        return Bucket{static_cast<std::int64_t>(std::floor(box.cx / side)),
                      static_cast<std::int64_t>(std::floor(box.cy / side))};
    };
    std::unordered_map<Bucket, std::vector<std::size_t>, BucketHash> buckets;
    for (std::size_t i = 0; i < objects.size(); ++i) buckets[bucket_of(objects[i].box)].push_back(i);

    const double radius2 = radius * radius;
    std::map<InstanceId, RelationshipOffset> out;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& self = objects[i];
        const Bucket home = bucket_of(self.box);
        double best_d2 = std::numeric_limits<double>::infinity();
        const GtObject* best = nullptr;
        for (std::int64_t bx = home.first - 1; bx <= home.first + 1; ++bx) {
            for (std::int64_t by = home.second - 1; by <= home.second + 1; ++by) {
                auto it = buckets.find({bx, by});
                if (it == buckets.end()) continue;
                for (std::size_t other : it->second) {
                    if (other == i) continue;
                    const auto& cand = objects[other];
                    const double ddx = cand.box.cx - self.box.cx;
                    const double ddy = cand.box.cy - self.box.cy;
                    const double d2 = ddx * ddx + ddy * ddy;
                    if (d2 < best_d2 || (d2 == best_d2 && best && cand.instance_id < best->instance_id)) {
                        best_d2 = d2;
                        best = &cand;
                    }
                }
            }
        }
        RelationshipOffset rel;
        if (best && best_d2 <= radius2) {
            rel = {best->box.cx - self.box.cx, best->box.cy - self.box.cy, true};
        }
        out.emplace(self.instance_id, rel);
    }
    return out;
}

}  // namespace crowdmot
