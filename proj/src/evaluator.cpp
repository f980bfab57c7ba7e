#include "crowdmot/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "crowdmot/hungarian.hpp"

namespace crowdmot {

void MatchConfig::validate() const {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
        throw std::invalid_argument(fmt::format("match: iou_threshold {} outside (0, 1]", iou_threshold));
    }
}

EvalCounts& EvalCounts::operator+=(const EvalCounts& other) {
    ids += other.ids;
    fp += other.fp;
    fn += other.fn;
    p += other.p;
    return *this;
}

namespace {

void require_unique(std::span<const TrackedBox> boxes, const char* side) {
    std::set<ObjectId> seen;
    for (const auto& b : boxes) {
        if (!seen.insert(b.id).second) throw std::invalid_argument(fmt::format("match_frame: duplicate {} id {}", side, b.id));
    }
}

}  // namespace

FrameMatch match_frame(std::span<const TrackedBox> gts, std::span<const TrackedBox> preds, const MatchHistory& prev,
                       const MatchConfig& cfg) {
    cfg.validate();
    require_unique(gts, "gt");
    require_unique(preds, "prediction");

    const std::size_t n = gts.size();
    const std::size_t m = preds.size();
    std::vector<double> iou(n * m);
    for (std::size_t g = 0; g < n; ++g) {
        for (std::size_t t = 0; t < m; ++t) iou[g * m + t] = bev_iou(gts[g].box, preds[t].box);
    }
    const auto valid = [&](std::size_t g, std::size_t t) { return iou[g * m + t] >= cfg.iou_threshold; };

    std::vector<int> gt_to_pred(n, -1);
    std::vector<bool> pred_taken(m, false);

    // keep last frame's correspondences that still hold
    for (std::size_t g = 0; g < n; ++g) {
        auto it = prev.previous_frame.find(gts[g].id);
        if (it == prev.previous_frame.end()) continue;
        for (std::size_t t = 0; t < m; ++t) {
            if (preds[t].id == it->second && !pred_taken[t] && valid(g, t)) {
                gt_to_pred[g] = static_cast<int>(t);
                pred_taken[t] = true;
                break;
            }
        }
    }

    // optimal assignment over what is left
    std::vector<std::size_t> rows, cols;
    for (std::size_t g = 0; g < n; ++g) {
        if (gt_to_pred[g] < 0) rows.push_back(g);
    }
    for (std::size_t t = 0; t < m; ++t) {
        if (!pred_taken[t]) cols.push_back(t);
    }
    if (!rows.empty() && !cols.empty()) {
        std::vector<double> cost(rows.size() * cols.size(), 0.0);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (valid(rows[r], cols[c])) cost[r * cols.size() + c] = -iou[rows[r] * m + cols[c]];
            }
        }
        const auto assigned = min_cost_assignment(cost, static_cast<int>(rows.size()), static_cast<int>(cols.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (assigned[r] < 0) continue;
            const std::size_t t = cols[static_cast<std::size_t>(assigned[r])];
            if (valid(rows[r], t)) gt_to_pred[rows[r]] = static_cast<int>(t);
        }
    }

    FrameMatch out;
    out.history.last_match = prev.last_match;
    for (std::size_t g = 0; g < n; ++g) {
        if (gt_to_pred[g] < 0) continue;
        const ObjectId gt_id = gts[g].id;
        const ObjectId track_id = preds[static_cast<std::size_t>(gt_to_pred[g])].id;
        out.matches.emplace_back(gt_id, track_id);
        if (auto it = prev.last_match.find(gt_id); it != prev.last_match.end() && it->second != track_id) ++out.ids;
        out.history.previous_frame[gt_id] = track_id;
        out.history.last_match[gt_id] = track_id;
    }
    std::sort(out.matches.begin(), out.matches.end());
    out.fn = static_cast<int>(n - out.matches.size());
    out.fp = static_cast<int>(m - out.matches.size());
    return out;
}

double mota(const EvalCounts& counts) {
    if (counts.p <= 0) throw UndefinedMetric("MOTA undefined: no ground-truth boxes");
    if (counts.ids < 0 || counts.fp < 0 || counts.fn < 0 || counts.fn > counts.p) {
        throw std::invalid_argument("MOTA: inconsistent counts");
    }
    return 1.0 - static_cast<double>(counts.ids + counts.fp + counts.fn) / static_cast<double>(counts.p);
}

TrackQuality mtr_mlr(std::span<const double> coverage) {
    if (coverage.empty()) throw UndefinedMetric("MTR/MLR undefined: no ground-truth trajectories");
    std::size_t tracked = 0, lost = 0;
    for (double c : coverage) {
        if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument(fmt::format("coverage {} outside [0, 1]", c));
        tracked += c >= kMostlyTracked;
        lost += c <= kMostlyLost;
    }
    const double total = static_cast<double>(coverage.size());
    return {static_cast<double>(tracked) / total, static_cast<double>(lost) / total};
}

SequenceReport evaluate_sequence(std::span<const FrameBoxes> gt, std::span<const FrameBoxes> pred,
                                 const MatchConfig& cfg) {
    std::map<int, std::pair<const FrameBoxes*, const FrameBoxes*>> aligned;
    for (const auto& f : gt) {
        auto& slot = aligned[f.frame].first;
        if (slot) throw std::invalid_argument(fmt::format("evaluate: duplicate GT frame {}", f.frame));
        slot = &f;
    }
    for (const auto& f : pred) {
        auto& slot = aligned[f.frame].second;
        if (slot) throw std::invalid_argument(fmt::format("evaluate: duplicate prediction frame {}", f.frame));
        slot = &f;
    }

    SequenceReport report;
    MatchHistory history;
    std::map<ObjectId, std::pair<long, long>> seen;  // gt id -> (frames present, frames matched)
    const std::vector<TrackedBox> none;
    for (const auto& [frame, pair] : aligned) {
        const std::span<const TrackedBox> g = pair.first ? std::span<const TrackedBox>(pair.first->boxes) : none;
        const std::span<const TrackedBox> p = pair.second ? std::span<const TrackedBox>(pair.second->boxes) : none;
        auto fm = match_frame(g, p, history, cfg);
        report.counts.ids += fm.ids;
        report.counts.fp += fm.fp;
        report.counts.fn += fm.fn;
        report.counts.p += static_cast<long>(g.size());
        for (const auto& b : g) ++seen[b.id].first;
        for (const auto& [gt_id, track_id] : fm.matches) ++seen[gt_id].second;
        history = std::move(fm.history);
        ++report.frames;
    }

    std::vector<double> coverage;
    for (const auto& [id, counts] : seen) {
        const double c = static_cast<double>(counts.second) / static_cast<double>(counts.first);
        report.coverage[id] = c;
        coverage.push_back(c);
    }
    report.mota = mota(report.counts);
    report.quality = mtr_mlr(coverage);
    return report;
}

double density_stats(std::span<const std::vector<GtObject>> frames, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("density_stats: radius must be > 0");
    long samples = 0;
    long neighbors = 0;
    for (const auto& objs : frames) {
        for (std::size_t i = 0; i < objs.size(); ++i) {
            for (std::size_t j = 0; j < objs.size(); ++j) {
                if (i == j) continue;
                neighbors += bev_distance(objs[i].box.cx, objs[i].box.cy, objs[j].box.cx, objs[j].box.cy) < radius;
            }
        }
        samples += static_cast<long>(objs.size());
    }
    if (samples == 0) throw UndefinedMetric("density undefined: scene has no objects");
    return static_cast<double>(neighbors) / static_cast<double>(samples);
}

double density_stats(const SceneSequence& scene, double radius) { return density_stats(scene.frames, radius); }

std::vector<FrameBoxes> scene_frame_boxes(const SceneSequence& scene) {
    std::vector<FrameBoxes> out;
    out.reserve(scene.frames.size());
    for (std::size_t f = 0; f < scene.frames.size(); ++f) {
        FrameBoxes fb{static_cast<int>(f), {}};
        for (const auto& obj : scene.frames[f]) fb.boxes.push_back({obj.instance_id, obj.box.bev()});
        out.push_back(std::move(fb));
    }
    return out;
}

std::vector<FrameBoxes> trajectory_frame_boxes(std::span<const Trajectory> trajectories, int n_frames) {
    if (n_frames < 0) throw std::invalid_argument("trajectory_frame_boxes: n_frames must be >= 0");
    std::vector<FrameBoxes> out(static_cast<std::size_t>(n_frames));
    for (int f = 0; f < n_frames; ++f) out[static_cast<std::size_t>(f)].frame = f;
    for (const auto& t : trajectories) {
        for (const auto& e : t.entries) {
            if (e.frame < 0 || e.frame >= n_frames) continue;
            out[static_cast<std::size_t>(e.frame)].boxes.push_back({t.track_id, e.box.bev()});
        }
    }
    return out;
}

}  // namespace crowdmot
