#include "crowdmot/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

#include <json.hpp>

namespace crowdmot::io {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ojson object_json(const ObjectRecord& o) {
    ojson j;
    j["id"] = o.id;
    j["cx"] = o.box.cx;
    j["cy"] = o.box.cy;
    j["cz"] = o.box.cz;
    j["l"] = o.box.length;
    j["w"] = o.box.width;
    j["h"] = o.box.height;
    j["yaw"] = o.box.yaw;
    if (o.score) j["score"] = *o.score;
    if (o.offset) j["offset"] = {o.offset->ox, o.offset->oy, o.offset->oz};
    if (o.rel) j["rel"] = o.rel->defined ? ojson{o.rel->rx, o.rel->ry} : ojson(nullptr);
    return j;
}

double number(const ojson& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) throw std::runtime_error(fmt::format("{}: missing field '{}'", where, key));
    if (!it->is_number()) throw std::runtime_error(fmt::format("{}: field '{}' must be a number", where, key));
    return it->get<double>();
}

ObjectRecord parse_object(const ojson& j, const std::string& where) {
    if (!j.is_object()) throw std::runtime_error(fmt::format("{}: object entry must be a JSON object", where));
    ObjectRecord o;
    const auto id = j.find("id");
    if (id == j.end() || !id->is_number_integer()) throw std::runtime_error(fmt::format("{}: 'id' must be an integer", where));
    o.id = id->get<std::int64_t>();
    o.box = Box3D{number(j, "cx", where), number(j, "cy", where), number(j, "cz", where), number(j, "l", where),
                  number(j, "h", where),  number(j, "w", where),  number(j, "yaw", where)};
    if (j.contains("score")) o.score = number(j, "score", where);
    if (const auto it = j.find("offset"); it != j.end()) {
        if (!it->is_array() || it->size() != 3) throw std::runtime_error(fmt::format("{}: 'offset' must be [ox, oy, oz]", where));
        o.offset = MotionOffset{(*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>()};
    }
    if (const auto it = j.find("rel"); it != j.end()) {
        if (it->is_null()) {
            o.rel = RelationshipOffset{};
        } else if (it->is_array() && it->size() == 2) {
            o.rel = RelationshipOffset{(*it)[0].get<double>(), (*it)[1].get<double>(), true};
        } else {
            throw std::runtime_error(fmt::format("{}: 'rel' must be [rx, ry] or null", where));
        }
    }
    return o;
}

double timestamp_of(std::span<const double> timestamps, int frame) {
    if (frame < 0 || static_cast<std::size_t>(frame) >= timestamps.size()) {
        throw std::invalid_argument(fmt::format("no timestamp for frame {}", frame));
    }
    return timestamps[static_cast<std::size_t>(frame)];
}

std::size_t frame_slots(std::span<const FrameRecord> records) {
    int last = -1;
    for (const auto& r : records) {
        if (r.frame < 0) throw std::invalid_argument(fmt::format("negative frame index {}", r.frame));
        last = std::max(last, r.frame);
    }
    return static_cast<std::size_t>(last + 1);
}

}  // namespace

std::string to_jsonl(std::span<const FrameRecord> frames) {
    std::string out;
    for (const auto& f : frames) {
        ojson j;
        j["frame"] = f.frame;
        j["timestamp"] = f.timestamp;
        j["objects"] = ojson::array();
        for (const auto& o : f.objects) j["objects"].push_back(object_json(o));
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<FrameRecord> parse_jsonl(std::istream& in, const std::string& source) {
    std::vector<FrameRecord> out;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = fmt::format("{}:{}", source, lineno);
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const ojson::parse_error& e) {
            throw std::runtime_error(fmt::format("{}: invalid JSON ({})", where, e.what()));
        }
        if (!j.is_object()) throw std::runtime_error(fmt::format("{}: record must be a JSON object", where));
        FrameRecord f;
        const auto frame = j.find("frame");
        if (frame == j.end() || !frame->is_number_integer()) {
            throw std::runtime_error(fmt::format("{}: 'frame' must be an integer", where));
        }
        f.frame = frame->get<int>();
        f.timestamp = number(j, "timestamp", where);
        const auto objects = j.find("objects");
        if (objects == j.end() || !objects->is_array()) throw std::runtime_error(fmt::format("{}: 'objects' must be an array", where));
        for (const auto& o : *objects) f.objects.push_back(parse_object(o, where));
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<FrameRecord> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
    return parse_jsonl(in, path.string());
}

std::vector<FrameRecord> records_from_scene(const SceneSequence& scene) {
    std::vector<FrameRecord> out;
    for (std::size_t f = 0; f < scene.frames.size(); ++f) {
        FrameRecord r{static_cast<int>(f), timestamp_of(scene.timestamps, static_cast<int>(f)), {}};
        for (const auto& o : scene.frames[f]) r.objects.push_back({o.instance_id, o.box, std::nullopt, std::nullopt, std::nullopt});
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<FrameRecord> records_from_detections(std::span<const FrameDetections> dets, std::span<const double> timestamps) {
    std::vector<FrameRecord> out;
    for (const auto& f : dets) {
        FrameRecord r{f.frame, timestamp_of(timestamps, f.frame), {}};
        for (std::size_t i = 0; i < f.detections.size(); ++i) {
            const auto& d = f.detections[i];
            r.objects.push_back({static_cast<std::int64_t>(i), d.box, d.score, d.offset, d.relationship});
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<FrameRecord> records_from_trajectories(std::span<const Trajectory> trajectories,
                                                   std::span<const double> timestamps) {
    std::vector<FrameRecord> out;
    for (std::size_t f = 0; f < timestamps.size(); ++f) out.push_back({static_cast<int>(f), timestamps[f], {}});
    for (const auto& t : trajectories) {
        for (const auto& e : t.entries) {
            if (e.frame < 0 || static_cast<std::size_t>(e.frame) >= out.size()) {
                throw std::invalid_argument(fmt::format("track {} has an entry at frame {} outside the sequence", t.track_id, e.frame));
            }
            out[static_cast<std::size_t>(e.frame)].objects.push_back({t.track_id, e.box, e.score, std::nullopt, std::nullopt});
        }
    }
    for (auto& r : out) {
        std::sort(r.objects.begin(), r.objects.end(), [](const ObjectRecord& a, const ObjectRecord& b) { return a.id < b.id; });
    }
    return out;
}

std::vector<std::vector<GtObject>> gt_frames(std::span<const FrameRecord> records) {
    std::vector<std::vector<GtObject>> out(frame_slots(records));
    std::vector<bool> seen(out.size(), false);
    for (const auto& r : records) {
        const auto slot = static_cast<std::size_t>(r.frame);
        if (seen[slot]) throw std::invalid_argument(fmt::format("frame {} appears twice", r.frame));
        seen[slot] = true;
        for (const auto& o : r.objects) out[slot].push_back({o.id, o.box, r.frame});
    }
    return out;
}

std::vector<FrameDetections> detection_frames(std::span<const FrameRecord> records) {
    std::vector<FrameDetections> out;
    for (const auto& r : records) {
        FrameDetections f{r.frame, {}};
        for (const auto& o : r.objects) {
            Detection d;
            d.box = o.box;
            d.score = o.score.value_or(1.0);
            d.offset = o.offset.value_or(MotionOffset{});
            d.relationship = o.rel;
            d.frame = r.frame;
            f.detections.push_back(d);
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<FrameBoxes> frame_boxes(std::span<const FrameRecord> records) {
    std::vector<FrameBoxes> out;
    for (const auto& r : records) {
        FrameBoxes f{r.frame, {}};
        for (const auto& o : r.objects) f.boxes.push_back({o.id, o.box.bev()});
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<double> timestamps(std::span<const FrameRecord> records) {
    std::vector<double> out(frame_slots(records), 0.0);
    for (const auto& r : records) out[static_cast<std::size_t>(r.frame)] = r.timestamp;
    return out;
}

std::string grid_to_text(const DenseGrid2D& grid) {
    const GridSpec& g = grid.grid();
    std::string out = fmt::format("crowdmot-grid 1\nnx {}\nny {}\ndx {}\ndy {}\norigin {} {}\n", grid.nx(), grid.ny(), g.dx,
                                  g.dy, g.x_min, g.y_min);
    for (int k = 0; k < grid.ny(); ++k) {
        for (int j = 0; j < grid.nx(); ++j) {
            if (j > 0) out += ' ';
            out += fmt::format("{}", grid.at(j, k));
        }
        out += '\n';
    }
    return out;
}

DenseGrid2D grid_from_text(std::istream& in, const std::string& source) {
    std::string magic, key;
    int version = 0, nx = 0, ny = 0;
    double dx = 0, dy = 0, ox = 0, oy = 0;
    const auto expect = [&](const char* name) {
        if (!(in >> key) || key != name) throw std::runtime_error(fmt::format("{}: expected header field '{}'", source, name));
    };
    if (!(in >> magic >> version) || magic != "crowdmot-grid" || version != 1) {
        throw std::runtime_error(fmt::format("{}: not a crowdmot grid file", source));
    }
    expect("nx");
    in >> nx;
    expect("ny");
    in >> ny;
    expect("dx");
    in >> dx;
    expect("dy");
    in >> dy;
    expect("origin");
    in >> ox >> oy;
    if (!in || nx <= 0 || ny <= 0) throw std::runtime_error(fmt::format("{}: malformed grid header", source));
    DenseGrid2D grid(GridSpec::make(ox, ox + nx * dx, oy, oy + ny * dy, dx, dy));
    if (grid.nx() != nx || grid.ny() != ny) throw std::runtime_error(fmt::format("{}: inconsistent grid header", source));
    for (int k = 0; k < ny; ++k) {
        for (int j = 0; j < nx; ++j) {
            if (!(in >> grid.at(j, k))) throw std::runtime_error(fmt::format("{}: truncated grid data at row {}", source, k));
        }
    }
    return grid;
}

std::string grid_to_pgm(const DenseGrid2D& grid) {
    std::string out = fmt::format("P5\n{} {}\n255\n", grid.nx(), grid.ny());
    const double peak = grid.size() == 0 ? 0.0 : grid.max_value();
    for (int k = grid.ny() - 1; k >= 0; --k) {
        for (int j = 0; j < grid.nx(); ++j) {
            const double v = peak > 0.0 ? std::clamp(grid.at(j, k) / peak, 0.0, 1.0) : 0.0;
            out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
        }
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

OutputDir::OutputDir(fs::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) throw std::invalid_argument("output directory must not be empty");
}

void OutputDir::add(const std::string& name, std::string bytes) {
    for (const auto& f : files_) {
        if (f.first == name) throw std::invalid_argument(fmt::format("output file '{}' added twice", name));
    }
    files_.emplace_back(name, std::move(bytes));
}

void OutputDir::commit() const {
    const fs::path target = fs::absolute(dir_).lexically_normal();
    const fs::path parent = target.parent_path();
    const std::string base = target.filename().string();
    fs::create_directories(parent);
    const fs::path staging = parent / fmt::format(".{}.staging-{}", base, ::getpid());
    fs::remove_all(staging);
    try {
        fs::create_directory(staging);
        for (const auto& [name, bytes] : files_) {
            std::ofstream out(staging / name, std::ios::binary);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            out.close();
            if (!out) throw std::runtime_error(fmt::format("failed writing {}", (staging / name).string()));
        }
        if (fs::exists(target)) {
            if (!fs::is_directory(target)) throw std::runtime_error(fmt::format("{} exists and is not a directory", target.string()));
            const fs::path old = parent / fmt::format(".{}.old-{}", base, ::getpid());
            fs::remove_all(old);
            fs::rename(target, old);
            fs::rename(staging, target);
            fs::remove_all(old);
        } else {
            fs::rename(staging, target);
        }
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
}

}  // namespace crowdmot::io
