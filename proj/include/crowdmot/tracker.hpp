#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crowdmot/geometry.hpp"
#include "crowdmot/targets.hpp"

namespace crowdmot {

using TrackId = std::int64_t;

struct Detection {
    Box3D box;
    double score = 1.0;
    MotionOffset offset;  // predicted displacement to the previous frame
    std::optional<RelationshipOffset> relationship;
    int frame = 0;

    // Regressed attributes per proposal: location(3) + size(3) + yaw + offset(3),
    // plus the 2D relationship vector when present.
    int attribute_count() const { return relationship ? 12 : 10; }
};

struct TrackerConfig {
    double max_match_dist = 1.0;  // meters, BEV
    int max_age = 3;              // frames a track may go unmatched
    double birth_score_min = 0.3;

    void validate() const;
};

struct TrackCenter {
    TrackId track_id = 0;
    double x = 0.0;
    double y = 0.0;
};

struct TrackEntry {
    int frame = 0;
    Box3D box;
    double score = 0.0;
};

struct Trajectory {
    TrackId track_id = 0;
    std::vector<TrackEntry> entries;
    int birth_frame = 0;
    int last_matched_frame = 0;

    std::size_t length() const { return entries.size(); }
};

struct TrackOutput {
    TrackId track_id = 0;
    Box3D box;
    double score = 0.0;
};

struct Assignment {
    std::size_t detection = 0;
    std::optional<TrackId> track;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Greedy offset-compensated association. Detections are visited by descending
/// score (ties: lower index first); each takes the nearest free track center
/// within max_match_dist of (cx + ox, cy + oy). Result is indexed by detection.
std::vector<Assignment> associate(std::span<const Detection> dets, std::span<const TrackCenter> tracks,
                                  const TrackerConfig& cfg);

/// Sequence-local tracking state. Frames must arrive in strictly increasing order.
class Tracker {
public:
    explicit Tracker(TrackerConfig cfg = {});

    std::vector<TrackOutput> step(int frame, std::span<const Detection> dets);

    /// Live and retired trajectories, ordered by track id.
    std::vector<Trajectory> trajectories() const;

    const std::vector<Trajectory>& live() const { return live_; }
    const std::vector<Trajectory>& dead() const { return dead_; }
    const TrackerConfig& config() const { return cfg_; }

private:
    TrackerConfig cfg_;
    std::vector<Trajectory> live_;
    std::vector<Trajectory> dead_;
    TrackId next_id_ = 1;
    std::optional<int> last_frame_;
};

struct FrameDetections {
    int frame = 0;
    std::vector<Detection> detections;
};

std::vector<Trajectory> run_sequence(std::span<const FrameDetections> frames, const TrackerConfig& cfg);

}  // namespace crowdmot
