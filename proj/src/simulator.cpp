#include "crowdmot/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "crowdmot/evaluator.hpp"

namespace crowdmot {

void Extents::validate() const {
    if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(y_min) || !std::isfinite(y_max)) {
        throw std::invalid_argument("area: non-finite extent");
    }
    if (!(x_max > x_min) || !(y_max > y_min)) {
        throw std::invalid_argument(fmt::format("area: empty extents x=[{}, {}] y=[{}, {}]", x_min, x_max, y_min, y_max));
    }
}

void SimConfig::validate() const {
    area.validate();
    if (n_pedestrians < 0) throw std::invalid_argument("scene: n_pedestrians must be >= 0");
    if (n_frames <= 0) throw std::invalid_argument("scene: n_frames must be > 0");
    if (!(target_density2 >= 0.0)) throw std::invalid_argument("scene: target_density2 must be >= 0");
    if (!(speed_min >= 0.0) || !(speed_max >= speed_min)) throw std::invalid_argument("scene: need 0 <= speed_min <= speed_max");
    if (!(frame_rate > 0.0)) throw std::invalid_argument("scene: frame_rate must be > 0");
    if (!(min_separation >= 0.0)) throw std::invalid_argument("scene: min_separation must be >= 0");
    if (!(heading_hold_min > 0.0) || !(heading_hold_max >= heading_hold_min)) {
        throw std::invalid_argument("scene: need 0 < heading_hold_min <= heading_hold_max");
    }
}

void NoiseConfig::validate() const {
    const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_miss)) throw std::invalid_argument("noise: p_miss must be in [0, 1]");
    if (!(pos_sigma >= 0.0) || !(offset_sigma >= 0.0)) throw std::invalid_argument("noise: sigmas must be >= 0");
    if (!(miss_per_meter >= 0.0)) throw std::invalid_argument("noise: miss_per_meter must be >= 0");
    if (!(clutter_rate >= 0.0)) throw std::invalid_argument("noise: clutter_rate must be >= 0");
    if (!prob(tp_score_mean) || !prob(fp_score_mean)) throw std::invalid_argument("noise: score means must be in [0, 1]");
    if (!(tp_score_sigma >= 0.0) || !(fp_score_sigma >= 0.0)) throw std::invalid_argument("noise: score sigmas must be >= 0");
}

namespace {

constexpr double kDensityRadius2 = 2.0;
constexpr double kSpreadMin = 0.4;
constexpr int kBisectSteps = 24;
constexpr int kMemberAttempts = 200;
constexpr int kParentAttempts = 50;
constexpr int kHeadingRetries = 8;

// independent RNG stream per (seed, purpose)
std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

enum Stream : std::uint32_t { kPlacement = 1, kSizes = 2, kMotion = 3, kNoise = 11 };

std::vector<int> split_sizes(int n, int clusters) {
    std::vector<int> sizes(static_cast<std::size_t>(clusters), n / clusters);
    for (int i = 0; i < n % clusters; ++i) ++sizes[static_cast<std::size_t>(i)];
    return sizes;
}

double uniform_background(int n, double area) {
    return n <= 1 ? 0.0 : (n - 1) * std::numbers::pi * kDensityRadius2 * kDensityRadius2 / area;
}

struct Placement {
    std::vector<double> x, y;
    std::vector<int> group;
};

Placement place(const SimConfig& cfg, std::span<const int> sizes, double spread) {
    auto rng = make_rng(cfg.seed, kPlacement);
    const Extents& a = cfg.area;
    const double margin = std::min({2.0 * spread, 0.25 * a.width(), 0.25 * a.depth()});
    std::uniform_real_distribution<double> px(a.x_min + margin, a.x_max - margin), py(a.y_min + margin, a.y_max - margin);
    std::normal_distribution<double> member(0.0, spread);

    Placement out;
    const auto clear = [&](double x, double y) {
        if (!a.contains(x, y)) return false;
        for (std::size_t i = 0; i < out.x.size(); ++i) {
            if (std::hypot(out.x[i] - x, out.y[i] - y) < cfg.min_separation) return false;
        }
        return true;
    };

    for (std::size_t c = 0; c < sizes.size(); ++c) {
        bool placed_cluster = false;
        for (int parent_try = 0; parent_try < kParentAttempts && !placed_cluster; ++parent_try) {
            const double cx = px(rng), cy = py(rng);
            const std::size_t start = out.x.size();
            bool ok = true;
            for (int m = 0; m < sizes[c] && ok; ++m) {
                ok = false;
                for (int attempt = 0; attempt < kMemberAttempts; ++attempt) {
                    // singletons sit on their parent point
                    const double x = sizes[c] == 1 ? cx : cx + member(rng);
                    const double y = sizes[c] == 1 ? cy : cy + member(rng);
                    if (clear(x, y)) {
                        out.x.push_back(x);
                        out.y.push_back(y);
                        out.group.push_back(static_cast<int>(c));
                        ok = true;
                        break;
                    }
                    if (sizes[c] == 1) break;
                }
            }
            if (ok) {
                placed_cluster = true;
            } else {
                out.x.resize(start);
                out.y.resize(start);
                out.group.resize(start);
            }
        }
        if (!placed_cluster) {
            throw InfeasibleScene(fmt::format(
                "cannot place a group of {} pedestrians {} m apart (spread {:.2f} m) in a {}x{} m area; "
                "enlarge the area or lower n_pedestrians / target_density2",
                sizes[c], cfg.min_separation, spread, a.width(), a.depth()));
        }
    }
    return out;
}

double frame_density(const Placement& p) {
    std::vector<GtObject> objs;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        objs.push_back({static_cast<InstanceId>(i), Box3D{p.x[i], p.y[i], 0.0, 1.0, 1.0, 1.0, 0.0}, 0});
    }
    const std::vector<std::vector<GtObject>> frames{objs};
    return density_stats(frames, kDensityRadius2);
}

struct Refined {
    Placement placement;
    ClusterPlan plan;
};

// Adjust cluster count and spread until the first frame's measured density matches the target.
Refined refine_placement(const SimConfig& cfg, ClusterPlan plan) {
    const int n = cfg.n_pedestrians;
    const double target = cfg.target_density2;
    const double spread_max = std::max(cfg.area.width(), cfg.area.depth());
    std::vector<int> visited;

    for (;;) {
        visited.push_back(plan.clusters);
        const auto sizes = split_sizes(n, plan.clusters);
        if (plan.clusters == n) {
            plan.spread = spread_max;
            auto p = place(cfg, sizes, plan.spread);
            return {std::move(p), plan};
        }
        const auto at = [&](double s) {
            auto p = place(cfg, sizes, s);
            const double d = frame_density(p);
            return std::make_pair(std::move(p), d);
        };
        auto tight = at(kSpreadMin);
        auto loose = at(spread_max);
        int next = plan.clusters;
        if (tight.second < target) {
            next = plan.clusters - 1;
        } else if (loose.second > target) {
            next = plan.clusters + 1;
        }
        if (next != plan.clusters) {
            if (next < 1) {
                throw InfeasibleScene(fmt::format("target density {} unreachable with {} pedestrians (max {:.2f})",
                                                  target, n, tight.second));
            }
            if (std::find(visited.begin(), visited.end(), next) == visited.end() && next <= n) {
                plan.clusters = next;
                continue;
            }
        }

        // bisection on the spread; density falls as the spread grows
        double lo = kSpreadMin, hi = spread_max;
        auto best = std::abs(tight.second - target) <= std::abs(loose.second - target) ? std::move(tight) : std::move(loose);
        double best_spread = best.second == tight.second ? lo : hi;
        for (int step = 0; step < kBisectSteps; ++step) {
            const double mid = std::sqrt(lo * hi);
            auto probe = at(mid);
            if (std::abs(probe.second - target) < std::abs(best.second - target)) {
                best_spread = mid;
                best = probe;
            }
            if (probe.second > target) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        plan.spread = best_spread;
        return {std::move(best.first), plan};
    }
}

}  // namespace

double expected_cluster_density(std::span<const int> cluster_sizes, double spread, double area, double radius) {
    int n = 0;
    for (int s : cluster_sizes) n += s;
    if (n == 0) return 0.0;
    // difference of two members ~ N(0, 2 spread^2 I): P(|d| < r) = 1 - exp(-r^2 / (4 spread^2))
    const double within = 1.0 - std::exp(-radius * radius / (4.0 * spread * spread));
    const double disk = std::numbers::pi * radius * radius / area;
    double pairs = 0.0;
    for (int s : cluster_sizes) pairs += s * ((s - 1) * within + (n - s) * disk);
    return pairs / n;
}

ClusterPlan plan_clusters(const SimConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_pedestrians;
    const double area = cfg.area.area();
    const double target = cfg.target_density2;
    if (n == 0) return {0, 0.0, 0.0};

    const double background = uniform_background(n, area);
    if (target <= background) {
        if (target > 0.0 && target < 0.5 * background) {
            throw InfeasibleScene(fmt::format(
                "target density {} is below half the uniform background {:.3f} of {} pedestrians in {:.0f} m^2; "
                "enlarge the area or reduce n_pedestrians",
                target, background, n, area));
        }
        return {n, std::max(cfg.area.width(), cfg.area.depth()), background};
    }

    const double spread_max = std::max(cfg.area.width(), cfg.area.depth());
    for (int m = n; m >= 1; --m) {
        const auto sizes = split_sizes(n, m);
        if (expected_cluster_density(sizes, kSpreadMin, area, kDensityRadius2) < target) continue;
        double lo = kSpreadMin, hi = spread_max;
        for (int step = 0; step < 60; ++step) {
            const double mid = 0.5 * (lo + hi);
            (expected_cluster_density(sizes, mid, area, kDensityRadius2) > target ? lo : hi) = mid;
        }
        const double s = 0.5 * (lo + hi);
        return {m, s, expected_cluster_density(sizes, s, area, kDensityRadius2)};
    }
    throw InfeasibleScene(fmt::format("target density {} exceeds what {} pedestrians can reach (at most {})", target, n,
                                      n - 1));
}

SceneSequence gen_scene(const SimConfig& cfg) {
    cfg.validate();
    SceneSequence scene;
    scene.frame_rate = cfg.frame_rate;
    scene.area = cfg.area;
    for (int f = 0; f < cfg.n_frames; ++f) scene.timestamps.push_back(f / cfg.frame_rate);
    scene.frames.assign(static_cast<std::size_t>(cfg.n_frames), {});
    const int n = cfg.n_pedestrians;
    if (n == 0) return scene;

    const ClusterPlan initial = plan_clusters(cfg);
    auto [placement, plan] = refine_placement(cfg, initial);
    const int groups = plan.clusters;

    // per-pedestrian box sizes: 0.6 x 0.6 x 1.7 m with +-10% jitter
    auto size_rng = make_rng(cfg.seed, kSizes);
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    std::vector<double> length(n), width(n), height(n);
    for (int i = 0; i < n; ++i) {
        length[i] = 0.6 * jitter(size_rng);
        width[i] = 0.6 * jitter(size_rng);
        height[i] = 1.7 * jitter(size_rng);
    }

    auto motion = make_rng(cfg.seed, kMotion);
    std::uniform_real_distribution<double> heading_dist(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> speed_dist(cfg.speed_min, cfg.speed_max);
    std::uniform_real_distribution<double> hold_dist(cfg.heading_hold_min, cfg.heading_hold_max);
    struct Group {
        double heading, speed, hold;
    };
    std::vector<Group> state(static_cast<std::size_t>(groups));
    const auto resample = [&](Group& g) {
        g.heading = heading_dist(motion);
        g.speed = speed_dist(motion);
        g.hold = hold_dist(motion);
    };
    for (auto& g : state) resample(g);

    std::vector<double>& x = placement.x;
    std::vector<double>& y = placement.y;
    const double dt = 1.0 / cfg.frame_rate;

    const auto move_ok = [&](int g, double dx, double dy) {
        for (int i = 0; i < n; ++i) {
            if (placement.group[i] != g) continue;
            const double nx = x[i] + dx, ny = y[i] + dy;
            if (!cfg.area.contains(nx, ny)) return false;
            for (int j = 0; j < n; ++j) {
                if (placement.group[j] == g) continue;
                if (std::hypot(x[j] - nx, y[j] - ny) < cfg.min_separation) return false;
            }
        }
        return true;
    };

    for (int f = 0; f < cfg.n_frames; ++f) {
        if (f > 0) {
            for (int g = 0; g < groups; ++g) {
                Group& gs = state[static_cast<std::size_t>(g)];
                gs.hold -= dt;
                if (gs.hold <= 0.0) resample(gs);
                bool moved = false;
                for (int attempt = 0; attempt <= kHeadingRetries && !moved; ++attempt) {
                    if (attempt > 0) resample(gs);
                    const double dx = gs.speed * dt * std::cos(gs.heading);
                    const double dy = gs.speed * dt * std::sin(gs.heading);
                    if (move_ok(g, dx, dy)) {
                        for (int i = 0; i < n; ++i) {
                            if (placement.group[i] != g) continue;
                            x[i] += dx;
                            y[i] += dy;
                        }
                        moved = true;
                    }
                }
                // a blocked group waits in place this frame
            }
        }
        auto& objs = scene.frames[static_cast<std::size_t>(f)];
        objs.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const double yaw = normalize_yaw(state[static_cast<std::size_t>(placement.group[i])].heading);
            objs.push_back({static_cast<InstanceId>(i + 1),
                            Box3D{x[i], y[i], 0.5 * height[i], length[i], height[i], width[i], yaw}, f});
        }
    }
    return scene;
}

std::vector<FrameDetections> corrupt(const SceneSequence& scene, const NoiseConfig& noise) {
    noise.validate();
    auto rng = make_rng(noise.seed, kNoise);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> ux(scene.area.x_min, scene.area.x_max), uy(scene.area.y_min, scene.area.y_max);
    std::uniform_real_distribution<double> uyaw(-std::numbers::pi, std::numbers::pi);
    const auto score = [&](double mean, double sigma) {
        return sigma > 0.0 ? std::clamp(mean + sigma * gauss(rng), 0.0, 1.0) : mean;
    };

    std::vector<FrameDetections> out;
    out.reserve(scene.frames.size());
    static const std::vector<GtObject> kNone;
    for (std::size_t f = 0; f < scene.frames.size(); ++f) {
        const auto& curr = scene.frames[f];
        const auto& prev = f > 0 ? scene.frames[f - 1] : kNone;
        const auto offsets = make_motion_offsets(curr, prev);
        FrameDetections frame{static_cast<int>(f), {}};

        for (const auto& obj : curr) {
            const double range = std::hypot(obj.box.cx, obj.box.cy);
            const double p_miss = std::clamp(noise.p_miss + noise.miss_per_meter * range, 0.0, 1.0);
            if (unit(rng) < p_miss) continue;
            Detection det;
            det.box = obj.box;
            det.frame = static_cast<int>(f);
            det.offset = offsets.at(obj.instance_id).offset;
            if (noise.pos_sigma > 0.0) {
                // the predicted previous-frame position stays on the jittered center
                const double ex = noise.pos_sigma * gauss(rng), ey = noise.pos_sigma * gauss(rng);
                det.box.cx += ex;
                det.box.cy += ey;
            }
            if (noise.offset_sigma > 0.0) {
                det.offset.ox += noise.offset_sigma * gauss(rng);
                det.offset.oy += noise.offset_sigma * gauss(rng);
                det.offset.oz += noise.offset_sigma * gauss(rng);
            }
            det.score = score(noise.tp_score_mean, noise.tp_score_sigma);
            frame.detections.push_back(det);
        }

        if (noise.clutter_rate > 0.0) {
            std::poisson_distribution<int> clutter(noise.clutter_rate);
            const int k = clutter(rng);
            for (int c = 0; c < k; ++c) {
                Detection det;
                const double h = 1.7 * (0.9 + 0.2 * unit(rng));
                det.box = Box3D{ux(rng), uy(rng), 0.5 * h, 0.6, h, 0.6, uyaw(rng)};
                det.frame = static_cast<int>(f);
                if (noise.offset_sigma > 0.0) {
                    det.offset = {noise.offset_sigma * gauss(rng), noise.offset_sigma * gauss(rng), 0.0};
                }
                det.score = score(noise.fp_score_mean, noise.fp_score_sigma);
                frame.detections.push_back(det);
            }
        }
        out.push_back(std::move(frame));
    }
    return out;
}

std::vector<SceneSequence> density_sweep(const SimConfig& base, std::span<const double> densities) {
    std::vector<SceneSequence> scenes;
    scenes.reserve(densities.size());
    for (double d : densities) {
        SimConfig cfg = base;
        cfg.target_density2 = d;
        scenes.push_back(gen_scene(cfg));
    }
    return scenes;
}

}  // namespace crowdmot
