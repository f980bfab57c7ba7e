#include "crowdmot/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "crowdmot/evaluator.hpp"
#include "crowdmot/io.hpp"
#include "crowdmot/simulator.hpp"
#include "crowdmot/sparsegrid.hpp"
#include "crowdmot/targets.hpp"
#include "crowdmot/tracker.hpp"

namespace crowdmot::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- logging

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
    const char* v = std::getenv("CROWDMOT_LOG");
    if (v == nullptr) return LogLevel::Quiet;
    const std::string s(v);
    if (s == "info") return LogLevel::Info;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Quiet;
}

struct Log {
    std::ostream& err;
    LogLevel level = log_level();

    template <class... A>
    void info(fmt::format_string<A...> f, A&&... a) const {
        if (level != LogLevel::Quiet) err << "[info] " << fmt::format(f, std::forward<A>(a)...) << '\n';
    }
    template <class... A>
    void debug(fmt::format_string<A...> f, A&&... a) const {
        if (level == LogLevel::Debug) err << "[debug] " << fmt::format(f, std::forward<A>(a)...) << '\n';
    }
};

// ---------------------------------------------------------------- config

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"scene",
         {"n_pedestrians", "n_frames", "target_density2", "x_min", "x_max", "y_min", "y_max", "speed_min", "speed_max",
          "frame_rate", "min_separation", "heading_hold_min", "heading_hold_max", "seed"}},
        {"noise",
         {"pos_sigma", "offset_sigma", "p_miss", "miss_per_meter", "clutter_rate", "tp_score_mean", "tp_score_sigma",
          "fp_score_mean", "fp_score_sigma", "seed"}},
        {"tracker", {"max_match_dist", "max_age", "birth_score_min"}},
        {"grid", {"x_min", "x_max", "y_min", "y_max", "dx", "dy"}},
        {"targets", {"sigma", "th", "combine", "anchor", "neighbor_radius"}},
        {"eval", {"iou_threshold", "density_radius"}},
        {"voxel", {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max", "dx", "dy", "dz"}},
        {"encoder", {"widths", "fusion_width", "seed", "topology"}},
    };
    return s;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
std::optional<T> parse_value(const std::string& s) {
    if constexpr (std::is_same_v<T, std::string>) {
        return s;
    } else {
        T v{};
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(v)) return std::nullopt;
        }
        return v;
    }
}

template <class T>
const char* type_name() {
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_unsigned_v<T>) return "a non-negative integer";
    else return "an integer";
}

class Config {
public:
    Config() = default;

    static Config load(const std::optional<std::string>& path) {
        Config c;
        if (!path) return c;
        c.source_ = *path;
        std::ifstream in(*path);
        if (!in) throw std::runtime_error(fmt::format("cannot open config {}", *path));
        std::stringstream buf;
        buf << in.rdbuf();
        c.text_ = buf.str();
        std::istringstream parse_in(c.text_);
        try {
            boost::property_tree::ini_parser::read_ini(parse_in, c.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw std::runtime_error(fmt::format("{}:{}: {}", *path, e.line(), e.message()));
        }
        c.check_schema();
        return c;
    }

    template <class T>
    T get(const std::string& section, const std::string& key, T fallback) {
        const auto raw = lookup(section, key);
        T v = raw ? convert<T>(section, key, *raw) : fallback;
        echo_[section][key] = v;
        return v;
    }

    template <class T>
    T require(const std::string& section, const std::string& key) {
        const auto raw = lookup(section, key);
        if (!raw) {
            throw std::runtime_error(fmt::format("{}: missing required field [{}] {}", source_or_default(), section, key));
        }
        T v = convert<T>(section, key, *raw);
        echo_[section][key] = v;
        return v;
    }

    template <class T>
    void set(const std::string& section, const std::string& key, T value) {
        echo_[section][key] = value;
    }

    const ojson& echo() const { return echo_; }

private:
    std::string source_or_default() const { return source_.empty() ? "config" : source_; }

    std::optional<std::string> lookup(const std::string& section, const std::string& key) const {
        const auto child = tree_.get_child_optional(boost::property_tree::ptree::path_type(section, '\0'));
        if (!child) return std::nullopt;
        const auto v = child->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
        if (!v) return std::nullopt;
        return trim(*v);
    }

    // line of `key` inside `[section]`, 0 when not found
    int line_of(const std::string& section, const std::string& key) const {
        std::istringstream in(text_);
        std::string line, current;
        for (int n = 1; std::getline(in, line); ++n) {
            const std::string t = trim(line);
            if (t.empty() || t[0] == ';' || t[0] == '#') continue;
            if (t.front() == '[' && t.back() == ']') {
                current = trim(t.substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (current == section && eq != std::string::npos && trim(t.substr(0, eq)) == key) return n;
        }
        return 0;
    }

    std::string where(const std::string& section, const std::string& key) const {
        const int line = line_of(section, key);
        return line > 0 ? fmt::format("{}:{}", source_or_default(), line) : source_or_default();
    }

    template <class T>
    T convert(const std::string& section, const std::string& key, const std::string& raw) const {
        const auto v = parse_value<T>(raw);
        if (!v) {
            throw std::runtime_error(
                fmt::format("{}: [{}] {}: expected {}, got '{}'", where(section, key), section, key, type_name<T>(), raw));
        }
        return *v;
    }

    void check_schema() const {
        for (const auto& [section, child] : tree_) {
            const auto it = schema().find(section);
            if (it == schema().end()) {
                if (child.empty() && !child.data().empty()) {
                    throw std::runtime_error(fmt::format("{}: field '{}' must be inside a [section]", source_, section));
                }
                throw std::runtime_error(fmt::format("{}: unknown section [{}]", source_, section));
            }
            for (const auto& [key, unused] : child) {
                if (it->second.count(key) == 0) {
                    throw std::runtime_error(fmt::format("{}: unknown field [{}] {}", where(section, key), section, key));
                }
            }
        }
    }

    std::string source_;
    std::string text_;
    boost::property_tree::ptree tree_;
    ojson echo_ = ojson::object();
};

SimConfig scene_config(Config& c, bool required) {
    SimConfig s;
    if (required) {
        s.n_pedestrians = c.require<int>("scene", "n_pedestrians");
        s.n_frames = c.require<int>("scene", "n_frames");
        s.target_density2 = c.require<double>("scene", "target_density2");
    } else {
        s.n_pedestrians = c.get("scene", "n_pedestrians", s.n_pedestrians);
        s.n_frames = c.get("scene", "n_frames", s.n_frames);
        s.target_density2 = c.get("scene", "target_density2", s.target_density2);
    }
    s.area.x_min = c.get("scene", "x_min", s.area.x_min);
    s.area.x_max = c.get("scene", "x_max", s.area.x_max);
    s.area.y_min = c.get("scene", "y_min", s.area.y_min);
    s.area.y_max = c.get("scene", "y_max", s.area.y_max);
    s.speed_min = c.get("scene", "speed_min", s.speed_min);
    s.speed_max = c.get("scene", "speed_max", s.speed_max);
    s.frame_rate = c.get("scene", "frame_rate", s.frame_rate);
    s.min_separation = c.get("scene", "min_separation", s.min_separation);
    s.heading_hold_min = c.get("scene", "heading_hold_min", s.heading_hold_min);
    s.heading_hold_max = c.get("scene", "heading_hold_max", s.heading_hold_max);
    s.seed = c.get<std::uint64_t>("scene", "seed", s.seed);
    return s;
}

NoiseConfig noise_config(Config& c, std::uint64_t default_seed) {
    NoiseConfig n;
    n.pos_sigma = c.get("noise", "pos_sigma", n.pos_sigma);
    n.offset_sigma = c.get("noise", "offset_sigma", n.offset_sigma);
    n.p_miss = c.get("noise", "p_miss", n.p_miss);
    n.miss_per_meter = c.get("noise", "miss_per_meter", n.miss_per_meter);
    n.clutter_rate = c.get("noise", "clutter_rate", n.clutter_rate);
    n.tp_score_mean = c.get("noise", "tp_score_mean", n.tp_score_mean);
    n.tp_score_sigma = c.get("noise", "tp_score_sigma", n.tp_score_sigma);
    n.fp_score_mean = c.get("noise", "fp_score_mean", n.fp_score_mean);
    n.fp_score_sigma = c.get("noise", "fp_score_sigma", n.fp_score_sigma);
    n.seed = c.get<std::uint64_t>("noise", "seed", default_seed);
    return n;
}

TrackerConfig tracker_config(Config& c) {
    TrackerConfig t;
    t.max_match_dist = c.get("tracker", "max_match_dist", t.max_match_dist);
    t.max_age = c.get("tracker", "max_age", t.max_age);
    t.birth_score_min = c.get("tracker", "birth_score_min", t.birth_score_min);
    t.validate();
    return t;
}

GridSpec grid_config(Config& c) {
    GridSpec g;
    g.x_min = c.get("grid", "x_min", g.x_min);
    g.x_max = c.get("grid", "x_max", g.x_max);
    g.y_min = c.get("grid", "y_min", g.y_min);
    g.y_max = c.get("grid", "y_max", g.y_max);
    g.dx = c.get("grid", "dx", g.dx);
    g.dy = c.get("grid", "dy", g.dy);
    return g;
}

VoxelSpec voxel_config(Config& c) {
    VoxelSpec v;
    v.x_min = c.get("voxel", "x_min", v.x_min);
    v.x_max = c.get("voxel", "x_max", v.x_max);
    v.y_min = c.get("voxel", "y_min", v.y_min);
    v.y_max = c.get("voxel", "y_max", v.y_max);
    v.z_min = c.get("voxel", "z_min", v.z_min);
    v.z_max = c.get("voxel", "z_max", v.z_max);
    v.dx = c.get("voxel", "dx", v.dx);
    v.dy = c.get("voxel", "dy", v.dy);
    v.dz = c.get("voxel", "dz", v.dz);
    v.validate();
    return v;
}

EncoderConfig encoder_config(Config& c) {
    EncoderConfig e;
    const std::string widths = c.get<std::string>("encoder", "widths", "16,32,64,128");
    std::istringstream in(widths);
    std::string part;
    std::size_t i = 0;
    while (std::getline(in, part, ',')) {
        const auto v = parse_value<int>(trim(part));
        if (!v || i >= 4) throw std::runtime_error(fmt::format("[encoder] widths: expected four integers, got '{}'", widths));
        e.widths[i++] = *v;
    }
    if (i != 4) throw std::runtime_error(fmt::format("[encoder] widths: expected four integers, got '{}'", widths));
    e.fusion_width = c.get("encoder", "fusion_width", e.fusion_width);
    e.seed = c.get<std::uint64_t>("encoder", "seed", e.seed);
    e.validate();
    return e;
}

// ---------------------------------------------------------------- outputs

struct Input {
    std::string path;
    std::string sha256;
};

Input input_file(const std::string& path) { return {path, io::sha256_file(path)}; }

void publish(io::OutputDir& dir, const std::string& command, const Config& cfg, const ojson& seeds,
             const std::vector<Input>& inputs) {
    ojson m;
    m["tool"] = "crowdmot";
    m["version"] = kToolVersion;
    m["command"] = command;
    m["config"] = cfg.echo();
    m["seeds"] = seeds;
    m["inputs"] = ojson::array();
    for (const auto& in : inputs) m["inputs"].push_back({{"path", in.path}, {"sha256", in.sha256}});
    m["outputs"] = ojson::array();
    for (const auto& [name, bytes] : dir.files()) m["outputs"].push_back({{"path", name}, {"sha256", io::sha256_hex(bytes)}});
    dir.add("manifest.json", m.dump(2) + "\n");
    dir.commit();
}

std::pair<double, double> parse_grid_flag(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw std::runtime_error(fmt::format("--grid: expected dx,dy, got '{}'", s));
    const auto dx = parse_value<double>(trim(s.substr(0, comma)));
    const auto dy = parse_value<double>(trim(s.substr(comma + 1)));
    if (!dx || !dy) throw std::runtime_error(fmt::format("--grid: expected dx,dy, got '{}'", s));
    return {*dx, *dy};
}

ojson nullable(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

// ---------------------------------------------------------------- commands

struct Common {
    std::optional<std::string> config;
    std::string out;
};

int cmd_gen(const Common& common, std::optional<std::uint64_t> seed, std::ostream& out, const Log& log) {
    Config cfg = Config::load(common.config);
    SimConfig scene_cfg = scene_config(cfg, true);
    if (seed) {
        scene_cfg.seed = *seed;
        cfg.set("scene", "seed", *seed);
    }
    NoiseConfig noise = noise_config(cfg, scene_cfg.seed);
    if (seed) {
        noise.seed = *seed;
        cfg.set("noise", "seed", *seed);
    }
    log.info("generating {} pedestrians over {} frames, target density {}", scene_cfg.n_pedestrians, scene_cfg.n_frames,
             scene_cfg.target_density2);
    const SceneSequence scene = gen_scene(scene_cfg);
    const auto dets = corrupt(scene, noise);

    io::OutputDir dir(common.out);
    dir.add("gt.jsonl", io::to_jsonl(io::records_from_scene(scene)));
    dir.add("det.jsonl", io::to_jsonl(io::records_from_detections(dets, scene.timestamps)));
    publish(dir, "gen", cfg, {{"scene", scene_cfg.seed}, {"noise", noise.seed}},
            common.config ? std::vector<Input>{input_file(*common.config)} : std::vector<Input>{});

    std::size_t n_det = 0;
    for (const auto& f : dets) n_det += f.detections.size();
    out << fmt::format("gen: {} frames, {} pedestrians, {} detections -> {}\n", scene.frame_count(),
                       scene_cfg.n_pedestrians, n_det, common.out);
    return 0;
}

int cmd_targets(const Common& common, const std::string& gt_path, int frame, const std::optional<std::string>& grid_flag,
                bool dump_pgm, std::ostream& out, const Log& log) {
    Config cfg = Config::load(common.config);
    GridSpec grid = grid_config(cfg);
    if (grid_flag) {
        const auto [dx, dy] = parse_grid_flag(*grid_flag);
        grid.dx = dx;
        grid.dy = dy;
        cfg.set("grid", "dx", dx);
        cfg.set("grid", "dy", dy);
    }
    grid.validate();
    const double sigma = cfg.get("targets", "sigma", 1.0);
    const double th = cfg.get("targets", "th", 2.0);
    const std::string combine_name = cfg.get<std::string>("targets", "combine", "max");
    const std::string anchor_name = cfg.get<std::string>("targets", "anchor", "origin");
    const double neighbor_radius = cfg.get("targets", "neighbor_radius", kDefaultNeighborRadius);
    cfg.set("targets", "frame", frame);
    if (combine_name != "max" && combine_name != "sum") {
        throw std::runtime_error(fmt::format("[targets] combine: expected max or sum, got '{}'", combine_name));
    }
    if (anchor_name != "origin" && anchor_name != "center") {
        throw std::runtime_error(fmt::format("[targets] anchor: expected origin or center, got '{}'", anchor_name));
    }
    const auto combine = combine_name == "max" ? HeatmapCombine::Max : HeatmapCombine::Sum;
    const auto anchor = anchor_name == "origin" ? CellAnchor::Origin : CellAnchor::Center;

    const auto records = io::read_jsonl(gt_path);
    const auto frames = io::gt_frames(records);
    const auto stamps = io::timestamps(records);
    if (frame < 0 || static_cast<std::size_t>(frame) >= frames.size()) {
        throw std::runtime_error(fmt::format("--frame {} outside the {} frames of {}", frame, frames.size(), gt_path));
    }
    const auto& objs = frames[static_cast<std::size_t>(frame)];
    const std::vector<GtObject> none;
    const auto& prev = frame > 0 ? frames[static_cast<std::size_t>(frame) - 1] : none;
    log.info("targets for frame {} ({} objects) on a {}x{} grid", frame, objs.size(), grid.nx(), grid.ny());

    const DenseGrid2D heat = make_heatmap(objs, grid, sigma, combine);
    const DenseGrid2D daw = make_daw(objs, grid, th, anchor);
    const auto motion = make_motion_offsets(objs, prev);
    const auto rel = make_relationship_offsets(objs, neighbor_radius);

    io::FrameRecord rec{frame, stamps[static_cast<std::size_t>(frame)], {}};
    for (const auto& o : objs) {
        rec.objects.push_back({o.instance_id, o.box, std::nullopt, motion.at(o.instance_id).offset, rel.at(o.instance_id)});
    }

    io::OutputDir dir(common.out);
    dir.add("heatmap.grid", io::grid_to_text(heat));
    dir.add("daw.grid", io::grid_to_text(daw));
    dir.add("offsets.jsonl", io::to_jsonl(std::span<const io::FrameRecord>(&rec, 1)));
    if (dump_pgm) {
        dir.add("heatmap.pgm", io::grid_to_pgm(heat));
        dir.add("daw.pgm", io::grid_to_pgm(daw));
    }
    publish(dir, "targets", cfg, ojson::object(), {input_file(gt_path)});
    out << fmt::format("targets: frame {}, {} objects, heatmap max {}, daw max {} -> {}\n", frame, objs.size(),
                       heat.max_value(), daw.max_value(), common.out);
    return 0;
}

int cmd_track(const Common& common, const std::string& det_path, std::ostream& out, const Log& log) {
    Config cfg = Config::load(common.config);
    const TrackerConfig tcfg = tracker_config(cfg);
    const auto records = io::read_jsonl(det_path);
    const auto frames = io::detection_frames(records);
    log.info("tracking {} frames", frames.size());
    const auto trajectories = run_sequence(frames, tcfg);
    const auto stamps = io::timestamps(records);

    io::OutputDir dir(common.out);
    dir.add("traj.jsonl", io::to_jsonl(io::records_from_trajectories(trajectories, stamps)));
    publish(dir, "track", cfg, ojson::object(), {input_file(det_path)});
    out << fmt::format("track: {} frames, {} trajectories -> {}\n", frames.size(), trajectories.size(), common.out);
    return 0;
}

std::optional<double> density_or_null(std::span<const std::vector<GtObject>> frames, double radius) {
    try {
        return density_stats(frames, radius);
    } catch (const UndefinedMetric&) {
        return std::nullopt;
    }
}

int cmd_eval(const Common& common, const std::string& gt_path, const std::string& traj_path,
             std::optional<double> iou_flag, std::optional<double> radius_flag, std::ostream& out, const Log& log) {
    Config cfg = Config::load(common.config);
    MatchConfig mcfg;
    mcfg.iou_threshold = cfg.get("eval", "iou_threshold", mcfg.iou_threshold);
    double radius = cfg.get("eval", "density_radius", kDensityRadius);
    if (iou_flag) {
        mcfg.iou_threshold = *iou_flag;
        cfg.set("eval", "iou_threshold", *iou_flag);
    }
    if (radius_flag) {
        radius = *radius_flag;
        cfg.set("eval", "density_radius", radius);
    }
    mcfg.validate();

    const auto gt_records = io::read_jsonl(gt_path);
    const auto traj_records = io::read_jsonl(traj_path);
    const auto gt = io::frame_boxes(gt_records);
    const auto pred = io::frame_boxes(traj_records);
    log.info("evaluating {} GT frames against {} tracked frames", gt.size(), pred.size());
    const SequenceReport rep = evaluate_sequence(gt, pred, mcfg);
    const auto density = density_or_null(io::gt_frames(gt_records), radius);

    ojson r;
    r["frames"] = rep.frames;
    r["p"] = rep.counts.p;
    r["fp"] = rep.counts.fp;
    r["fn"] = rep.counts.fn;
    r["ids"] = rep.counts.ids;
    r["mota"] = rep.mota;
    r["mtr"] = rep.quality.mtr;
    r["mlr"] = rep.quality.mlr;
    r["gt_trajectories"] = rep.coverage.size();
    r["density"] = {{"radius", radius}, {"value", nullable(density)}};

    io::OutputDir dir(common.out);
    dir.add("report.json", r.dump(2) + "\n");
    publish(dir, "eval", cfg, ojson::object(), {input_file(gt_path), input_file(traj_path)});
    out << fmt::format("eval: MOTA {:.4f} IDS {} FP {} FN {} P {} MTR {:.3f} MLR {:.3f} density2 {}\n", rep.mota,
                       rep.counts.ids, rep.counts.fp, rep.counts.fn, rep.counts.p, rep.quality.mtr, rep.quality.mlr,
                       density ? fmt::format("{:.3f}", *density) : std::string("undefined"));
    return 0;
}

int cmd_density(const Common& common, const std::string& gt_path, std::optional<double> radius_flag, std::ostream& out,
                const Log& log) {
    Config cfg = Config::load(common.config);
    double radius = cfg.get("eval", "density_radius", kDensityRadius);
    if (radius_flag) {
        radius = *radius_flag;
        cfg.set("eval", "density_radius", radius);
    }
    if (!(radius > 0.0)) throw std::runtime_error("--radius must be > 0");
    const auto records = io::read_jsonl(gt_path);
    const auto frames = io::gt_frames(records);
    std::size_t objects = 0;
    for (const auto& f : frames) objects += f.size();
    log.info("density over {} frames, {} object-frames", frames.size(), objects);
    const auto density = density_or_null(frames, radius);

    ojson r;
    r["radius"] = radius;
    r["frames"] = frames.size();
    r["object_frames"] = objects;
    r["density"] = nullable(density);
    io::OutputDir dir(common.out);
    dir.add("density.json", r.dump(2) + "\n");
    publish(dir, "density", cfg, ojson::object(), {input_file(gt_path)});
    out << fmt::format("density: radius {} m, {} object-frames, mean neighbors {}\n", radius, objects,
                       density ? fmt::format("{:.4f}", *density) : std::string("undefined"));
    return 0;
}

PointCloud read_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open cloud {}", path));
    PointCloud pc;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream ls(t);
        Point p;
        if (!(ls >> p.x >> p.y >> p.z >> p.intensity >> p.time_flag)) {
            throw std::runtime_error(fmt::format("{}:{}: expected 'x y z intensity time_flag'", path, n));
        }
        pc.points.push_back(p);
    }
    pc.validate();
    return pc;
}

// Two sweeps of points sampled inside simulated pedestrian boxes.
PointCloud demo_cloud(std::uint64_t seed, int points_per_object) {
    SimConfig s;
    s.n_frames = 2;
    s.seed = seed;
    const SceneSequence scene = gen_scene(s);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5), unit(0.0, 1.0);
    const auto sweep = [&](const std::vector<GtObject>& objs) {
        PointCloud pc;
        for (const auto& o : objs) {
            const double c = std::cos(o.box.yaw), sn = std::sin(o.box.yaw);
            for (int i = 0; i < points_per_object; ++i) {
                const double lx = u(rng) * o.box.length, ly = u(rng) * o.box.width, lz = u(rng) * o.box.height;
                pc.points.push_back({o.box.cx + c * lx - sn * ly, o.box.cy + sn * lx + c * ly, o.box.cz + lz, unit(rng), 0});
            }
        }
        return pc;
    };
    return stack_frames(sweep(scene.frames[1]), sweep(scene.frames[0]));
}

int cmd_voxelshapes(const Common& common, const std::optional<std::string>& cloud_path, const std::string& topology_flag,
                    std::uint64_t seed, int points_per_object, std::ostream& out, const Log& log) {
    Config cfg = Config::load(common.config);
    const VoxelSpec spec = voxel_config(cfg);
    EncoderConfig enc = encoder_config(cfg);
    std::string topo = cfg.get<std::string>("encoder", "topology", "a");
    if (!topology_flag.empty()) {
        topo = topology_flag;
        cfg.set("encoder", "topology", topo);
    }
    const Topology topology = parse_topology(topo);
    if (points_per_object <= 0) throw std::runtime_error("--points-per-object must be > 0");

    PointCloud pc;
    std::vector<Input> inputs;
    if (cloud_path) {
        pc = read_cloud(*cloud_path);
        inputs.push_back(input_file(*cloud_path));
    } else {
        pc = demo_cloud(seed, points_per_object);
        cfg.set("cloud", "seed", seed);
        cfg.set("cloud", "points_per_object", points_per_object);
    }
    const auto vox = voxelize(pc, spec);
    log.info("{} points, {} voxels, {} dropped", pc.points.size(), vox.grid.size(), vox.dropped);
    const auto rows = topology_report(vox.grid, spec, topology, enc);

    std::string table = fmt::format("# points {} dropped {}\n", pc.points.size(), vox.dropped);
    table += fmt::format("{:<8} {:>6} {:>10} {:>16} {:>9} {:>8}\n", "stage", "stride", "bev_res_m", "bound", "occupied",
                         "channels");
    for (const auto& r : rows) {
        table += fmt::format("{:<8} {:>6} {:>10} {:>16} {:>9} {:>8}\n", r.stage, r.stride, r.resolution,
                             fmt::format("{}x{}x{}", r.bound[0], r.bound[1], r.bound[2]), r.occupied, r.channels);
    }
    io::OutputDir dir(common.out);
    dir.add("shapes.txt", table);
    publish(dir, "voxelshapes", cfg, cloud_path ? ojson::object() : ojson{{"cloud", seed}, {"encoder", enc.seed}}, inputs);
    out << table;
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const Log log{err};
    CLI::App app{"Crowded-pedestrian 3D multi-object tracking workbench", "crowdmot"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Common common;
    const auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", common.config, "INI config file");
        if (config_required) opt->required();
        sub->add_option("--out", common.out, "output directory (replaced atomically)")->required();
    };

    std::optional<std::uint64_t> seed;
    auto* gen = app.add_subcommand("gen", "simulate a crowded scene and noisy detections");
    add_common(gen, true);
    gen->add_option("--seed", seed, "override scene and noise seeds");

    std::string gt_path, det_path, traj_path;
    int frame = 0;
    std::optional<std::string> grid_flag;
    bool dump_pgm = false;
    auto* targets = app.add_subcommand("targets", "heatmap, density-aware weights and offsets for one GT frame");
    add_common(targets, false);
    targets->add_option("--gt", gt_path, "ground-truth JSONL")->required();
    targets->add_option("--frame", frame, "frame index")->capture_default_str();
    targets->add_option("--grid", grid_flag, "BEV cell size dx,dy in meters");
    targets->add_flag("--dump-pgm", dump_pgm, "also write grayscale PGM images");

    auto* track = app.add_subcommand("track", "link detections into trajectories");
    add_common(track, false);
    track->add_option("--det", det_path, "detection JSONL")->required();

    std::optional<double> iou_flag, radius_flag;
    auto* eval = app.add_subcommand("eval", "CLEAR-MOT metrics of trajectories against GT");
    add_common(eval, false);
    eval->add_option("--gt", gt_path, "ground-truth JSONL")->required();
    eval->add_option("--traj", traj_path, "trajectory JSONL")->required();
    eval->add_option("--iou-th", iou_flag, "BEV IoU match threshold");
    eval->add_option("--radius", radius_flag, "density radius in meters");

    auto* density = app.add_subcommand("density", "mean number of neighbors within a radius");
    add_common(density, false);
    density->add_option("--gt", gt_path, "ground-truth JSONL")->required();
    density->add_option("--radius", radius_flag, "radius in meters");

    std::optional<std::string> cloud_path;
    std::string topology;
    std::uint64_t cloud_seed = 0;
    int points_per_object = 64;
    auto* shapes = app.add_subcommand("voxelshapes", "stride/resolution/occupancy table of an encoder topology");
    add_common(shapes, false);
    shapes->add_option("--cloud", cloud_path, "point file: x y z intensity time_flag per line");
    shapes->add_option("--topology", topology, "a (baseline), b (high resolution) or c (multi-scale)");
    shapes->add_option("--seed", cloud_seed, "seed of the simulated cloud when --cloud is absent");
    shapes->add_option("--points-per-object", points_per_object, "points per pedestrian in the simulated cloud");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (gen->parsed()) return cmd_gen(common, seed, out, log);
        if (targets->parsed()) return cmd_targets(common, gt_path, frame, grid_flag, dump_pgm, out, log);
        if (track->parsed()) return cmd_track(common, det_path, out, log);
        if (eval->parsed()) return cmd_eval(common, gt_path, traj_path, iou_flag, radius_flag, out, log);
        if (density->parsed()) return cmd_density(common, gt_path, radius_flag, out, log);
        if (shapes->parsed()) {
            return cmd_voxelshapes(common, cloud_path, topology, cloud_seed, points_per_object, out, log);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

int main_entry(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace crowdmot::cli
