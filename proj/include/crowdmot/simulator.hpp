#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "crowdmot/scene.hpp"
#include "crowdmot/tracker.hpp"

namespace crowdmot {

// The requested density cannot be produced inside the given area.
class InfeasibleScene : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SimConfig {
    int n_pedestrians = 30;
    Extents area{-20.0, 20.0, -20.0, 20.0};
    double target_density2 = 1.0;  // mean neighbors within 2 m
    double speed_min = 0.5;        // m/s
    double speed_max = 1.5;
    double frame_rate = 10.0;  // Hz
    int n_frames = 100;
    std::uint64_t seed = 0;
    double min_separation = 0.3;  // meters between centers
    double heading_hold_min = 2.0;  // seconds between heading changes
    double heading_hold_max = 5.0;

    void validate() const;
};

struct NoiseConfig {
    double pos_sigma = 0.0;     // meters, per axis
    double offset_sigma = 0.0;  // meters, per axis
    double p_miss = 0.0;
    double miss_per_meter = 0.0;  // added miss probability per meter of range from the origin
    double clutter_rate = 0.0;    // expected false detections per frame
    double tp_score_mean = 0.9;
    double tp_score_sigma = 0.0;
    double fp_score_mean = 0.4;
    double fp_score_sigma = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// How clustered placement was parameterized for a scene.
struct ClusterPlan {
    int clusters = 0;
    double spread = 0.0;  // per-axis standard deviation of members around the cluster center
    double predicted_density = 0.0;
};

/// Closed-form expected Density-2 for clusters of the given sizes with Gaussian
/// spread, plus a uniform background from the other clusters.
double expected_cluster_density(std::span<const int> cluster_sizes, double spread, double area, double radius);

/// Cluster count and spread that the closed form predicts will hit the target.
ClusterPlan plan_clusters(const SimConfig& cfg);

/// Clustered pedestrians moving as rigid groups with piecewise-constant velocity.
/// Deterministic per seed.
SceneSequence gen_scene(const SimConfig& cfg);

/// Noisy per-frame detections (jitter, misses, predicted offsets, clutter).
std::vector<FrameDetections> corrupt(const SceneSequence& scene, const NoiseConfig& noise);

/// One scene per density target, all sharing the base seed.
std::vector<SceneSequence> density_sweep(const SimConfig& base, std::span<const double> densities);

}  // namespace crowdmot
