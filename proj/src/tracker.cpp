#include "crowdmot/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace crowdmot {

void TrackerConfig::validate() const {
    if (!(max_match_dist > 0.0)) throw std::invalid_argument("tracker: max_match_dist must be > 0");
    if (max_age <= 0) throw std::invalid_argument("tracker: max_age must be > 0");
    if (!(birth_score_min > 0.0)) throw std::invalid_argument("tracker: birth_score_min must be > 0");
}

std::vector<Assignment> associate(std::span<const Detection> dets, std::span<const TrackCenter> tracks,
                                  const TrackerConfig& cfg) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    std::vector<Assignment> result(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) result[i].detection = i;
    std::vector<bool> taken(tracks.size(), false);

    for (std::size_t d : order) {
        const Detection& det = dets[d];
        const double px = det.box.cx + det.offset.ox;
        const double py = det.box.cy + det.offset.oy;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_track = tracks.size();
        for (std::size_t t = 0; t < tracks.size(); ++t) {
            if (taken[t]) continue;
            const double dist = bev_distance(px, py, tracks[t].x, tracks[t].y);
            if (dist > cfg.max_match_dist) continue;
            if (dist < best || (dist == best && tracks[t].track_id < tracks[best_track].track_id)) {
                best = dist;
                best_track = t;
            }
        }
        if (best_track < tracks.size()) {
            taken[best_track] = true;
            result[d].track = tracks[best_track].track_id;
        }
    }
    return result;
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<TrackOutput> Tracker::step(int frame, std::span<const Detection> dets) {
    if (last_frame_ && frame <= *last_frame_) {
        throw std::invalid_argument(fmt::format("tracker: frame {} arrived after frame {}", frame, *last_frame_));
    }
    for (const auto& det : dets) {
        if (!(det.score >= 0.0 && det.score <= 1.0)) {
            throw std::invalid_argument(fmt::format("tracker: detection score {} outside [0, 1]", det.score));
        }
    }
    last_frame_ = frame;

    std::vector<TrackCenter> centers;
    centers.reserve(live_.size());
    for (const auto& t : live_) {
        const Box3D& last = t.entries.back().box;
        centers.push_back({t.track_id, last.cx, last.cy});
    }
    const auto matches = associate(dets, centers, cfg_);

    std::vector<TrackOutput> out;
    for (const auto& m : matches) {
        const Detection& det = dets[m.detection];
        if (m.track) {
            auto it = std::find_if(live_.begin(), live_.end(), [&](const Trajectory& t) { return t.track_id == *m.track; });
            it->entries.push_back({frame, det.box, det.score});
            it->last_matched_frame = frame;
            out.push_back({it->track_id, det.box, det.score});
        } else if (det.score >= cfg_.birth_score_min) {
            Trajectory born;
            born.track_id = next_id_++;
            born.birth_frame = frame;
            born.last_matched_frame = frame;
            born.entries.push_back({frame, det.box, det.score});
            out.push_back({born.track_id, det.box, det.score});
            live_.push_back(std::move(born));
        }
    }

    // retire tracks unmatched for more than max_age frames
    auto expired = std::stable_partition(live_.begin(), live_.end(), [&](const Trajectory& t) {
        return frame - t.last_matched_frame <= cfg_.max_age;
    });
    std::move(expired, live_.end(), std::back_inserter(dead_));
    live_.erase(expired, live_.end());

    std::sort(out.begin(), out.end(), [](const TrackOutput& a, const TrackOutput& b) { return a.track_id < b.track_id; });
    return out;
}

std::vector<Trajectory> Tracker::trajectories() const {
    std::vector<Trajectory> all = dead_;
    all.insert(all.end(), live_.begin(), live_.end());
    std::sort(all.begin(), all.end(), [](const Trajectory& a, const Trajectory& b) { return a.track_id < b.track_id; });
    return all;
}

std::vector<Trajectory> run_sequence(std::span<const FrameDetections> frames, const TrackerConfig& cfg) {
    Tracker tracker(cfg);
    for (const auto& f : frames) tracker.step(f.frame, f.detections);
    return tracker.trajectories();
}

}  // namespace crowdmot
