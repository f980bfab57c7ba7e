#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdmot/evaluator.hpp"
#include "crowdmot/scene.hpp"
#include "crowdmot/tracker.hpp"

namespace crowdmot::io {

// One JSON Lines record per frame:
// {"frame", "timestamp", "objects": [{"id", "cx", "cy", "cz", "l", "w", "h", "yaw", "score"?, "offset"?, "rel"?}]}
struct ObjectRecord {
    std::int64_t id = 0;
    Box3D box;
    std::optional<double> score;
    std::optional<MotionOffset> offset;
    std::optional<RelationshipOffset> rel;
};

struct FrameRecord {
    int frame = 0;
    double timestamp = 0.0;
    std::vector<ObjectRecord> objects;
};

std::string to_jsonl(std::span<const FrameRecord> frames);
/// Throws std::runtime_error naming `source` and the line on malformed input.
std::vector<FrameRecord> parse_jsonl(std::istream& in, const std::string& source);
std::vector<FrameRecord> read_jsonl(const std::filesystem::path& path);

std::vector<FrameRecord> records_from_scene(const SceneSequence& scene);
std::vector<FrameRecord> records_from_detections(std::span<const FrameDetections> dets, std::span<const double> timestamps);
std::vector<FrameRecord> records_from_trajectories(std::span<const Trajectory> trajectories,
                                                   std::span<const double> timestamps);

/// Frames are placed by their frame index; gaps become empty frames.
std::vector<std::vector<GtObject>> gt_frames(std::span<const FrameRecord> records);
std::vector<FrameDetections> detection_frames(std::span<const FrameRecord> records);
std::vector<FrameBoxes> frame_boxes(std::span<const FrameRecord> records);
std::vector<double> timestamps(std::span<const FrameRecord> records);

/// Text grid: header lines "nx", "ny", "dx", "dy", "origin", then ny rows of nx values (row k = y index).
std::string grid_to_text(const DenseGrid2D& grid);
DenseGrid2D grid_from_text(std::istream& in, const std::string& source);

/// 8-bit binary PGM, scaled by the grid maximum, +y up.
std::string grid_to_pgm(const DenseGrid2D& grid);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

/// Collects named files and publishes them together: everything is written to a
/// sibling staging directory which then replaces `dir` in one rename.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir);

    void add(const std::string& name, std::string bytes);
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }
    void commit() const;

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace crowdmot::io
