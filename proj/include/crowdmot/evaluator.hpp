#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "crowdmot/geometry.hpp"
#include "crowdmot/scene.hpp"
#include "crowdmot/tracker.hpp"

namespace crowdmot {

// A metric whose denominator is empty (no GT boxes, no GT trajectories, ...).
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

using ObjectId = std::int64_t;

struct TrackedBox {
    ObjectId id = 0;
    BoxBEV box;
};

struct FrameBoxes {
    int frame = 0;
    std::vector<TrackedBox> boxes;
};

struct MatchConfig {
    double iou_threshold = 0.5;

    void validate() const;
};

struct EvalCounts {
    long ids = 0;
    long fp = 0;
    long fn = 0;
    long p = 0;  // number of GT boxes

    EvalCounts& operator+=(const EvalCounts& other);
    friend bool operator==(const EvalCounts&, const EvalCounts&) = default;
};

// GT id -> track id. `previous_frame` holds only the pairs of the last processed
// frame; `last_match` remembers the most recent partner of every GT ever matched.
struct MatchHistory {
    std::map<ObjectId, ObjectId> previous_frame;
    std::map<ObjectId, ObjectId> last_match;
};

struct FrameMatch {
    std::vector<std::pair<ObjectId, ObjectId>> matches;  // (gt id, track id), sorted by gt id
    int fp = 0;
    int fn = 0;
    int ids = 0;
    MatchHistory history;
};

/// CLEAR-MOT correspondence for one frame. Pairs from the previous frame that
/// still clear the IoU threshold are kept; the rest are assigned by Hungarian
/// matching on total IoU over pairs that clear the threshold.
FrameMatch match_frame(std::span<const TrackedBox> gts, std::span<const TrackedBox> preds, const MatchHistory& prev,
                       const MatchConfig& cfg);

double mota(const EvalCounts& counts);

struct TrackQuality {
    double mtr = 0.0;  // mostly tracked: coverage >= 0.8
    double mlr = 0.0;  // mostly lost: coverage <= 0.2
};

inline constexpr double kMostlyTracked = 0.8;
inline constexpr double kMostlyLost = 0.2;

TrackQuality mtr_mlr(std::span<const double> coverage);

struct SequenceReport {
    EvalCounts counts;
    double mota = 0.0;
    TrackQuality quality;
    std::map<ObjectId, double> coverage;  // per GT trajectory
    std::size_t frames = 0;
};

/// Frames are aligned by frame index; a frame missing on either side counts as empty.
SequenceReport evaluate_sequence(std::span<const FrameBoxes> gt, std::span<const FrameBoxes> pred,
                                 const MatchConfig& cfg);

/// BEV boxes per frame, keyed by instance id.
std::vector<FrameBoxes> scene_frame_boxes(const SceneSequence& scene);

/// BEV boxes per frame for frames [0, n_frames), keyed by track id.
std::vector<FrameBoxes> trajectory_frame_boxes(std::span<const Trajectory> trajectories, int n_frames);

/// Mean number of other objects strictly within `radius` (BEV), over all object-frames.
double density_stats(const SceneSequence& scene, double radius);
double density_stats(std::span<const std::vector<GtObject>> frames, double radius);

inline constexpr double kDensityRadius = 2.0;

}  // namespace crowdmot
