#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "crowdmot/cli.hpp"
#include "crowdmot/evaluator.hpp"
#include "crowdmot/io.hpp"

using namespace crowdmot;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("crowdmot_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "crowdmot");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void write(const std::string& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

const char* kMinimalConfig = "[scene]\nn_pedestrians = 12\nn_frames = 20\ntarget_density2 = 1.0\n";

std::string box_line(int frame, std::vector<std::tuple<int, double, double>> objs) {
    std::string s = "{\"frame\":" + std::to_string(frame) + ",\"timestamp\":" + std::to_string(frame * 0.1) + ",\"objects\":[";
    for (std::size_t i = 0; i < objs.size(); ++i) {
        const auto [id, x, y] = objs[i];
        if (i > 0) s += ",";
        s += "{\"id\":" + std::to_string(id) + ",\"cx\":" + std::to_string(x) + ",\"cy\":" + std::to_string(y) +
             ",\"cz\":0.85,\"l\":0.6,\"w\":0.6,\"h\":1.7,\"yaw\":0.0}";
    }
    return s + "]}\n";
}

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(io::read_file(path)); }

}  // namespace

TEST_CASE("gen writes GT, detections and one manifest") {
    TempDir t;
    write(t / "c.ini", kMinimalConfig);
    const auto r = run({"gen", "--config", t / "c.ini", "--out", t / "run"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::file_size(t / "run/gt.jsonl") > 0);
    CHECK(fs::file_size(t / "run/det.jsonl") > 0);
    const auto m = read_json(t / "run/manifest.json");
    CHECK(m["command"] == "gen");
    CHECK(m["config"]["scene"]["n_pedestrians"] == 12);
    CHECK(m["config"]["noise"]["p_miss"] == 0.0);
    CHECK(m["outputs"].size() == 2);
    for (const auto& o : m["outputs"]) {
        CHECK(o["sha256"] == io::sha256_file(t / ("run/" + o["path"].get<std::string>())));
    }
    CHECK(m["inputs"][0]["sha256"] == io::sha256_file(t / "c.ini"));
    int manifests = 0;
    for (const auto& e : fs::directory_iterator(t.path / "run")) manifests += e.path().filename() == "manifest.json";
    CHECK(manifests == 1);
}

TEST_CASE("gen is byte-identical on rerun and seed changes the output") {
    TempDir t;
    write(t / "c.ini", kMinimalConfig);
    REQUIRE(run({"gen", "--config", t / "c.ini", "--out", t / "a", "--seed", "4"}).code == 0);
    REQUIRE(run({"gen", "--config", t / "c.ini", "--out", t / "b", "--seed", "4"}).code == 0);
    REQUIRE(run({"gen", "--config", t / "c.ini", "--out", t / "c", "--seed", "5"}).code == 0);
    for (const char* f : {"gt.jsonl", "det.jsonl", "manifest.json"}) {
        CHECK(io::read_file(t / (std::string("a/") + f)) == io::read_file(t / (std::string("b/") + f)));
    }
    CHECK(io::read_file(t / "a/gt.jsonl") != io::read_file(t / "c/gt.jsonl"));
    CHECK(read_json(t / "a/manifest.json")["seeds"]["scene"] == 4);
}

TEST_CASE("config errors name the field and leave no output") {
    TempDir t;
    SUBCASE("missing required field") {
        write(t / "c.ini", "[scene]\nn_frames = 5\ntarget_density2 = 1\n");
        const auto r = run({"gen", "--config", t / "c.ini", "--out", t / "run"});
        CHECK(r.code != 0);
        CHECK(r.err.find("n_pedestrians") != std::string::npos);
        CHECK_FALSE(fs::exists(t / "run"));
    }
    SUBCASE("bad value reports the line") {
        write(t / "c.ini", "[scene]\nn_pedestrians = 5\nn_frames = ten\ntarget_density2 = 1\n");
        const auto r = run({"gen", "--config", t / "c.ini", "--out", t / "run"});
        CHECK(r.code != 0);
        CHECK(r.err.find("c.ini:3") != std::string::npos);
        CHECK(r.err.find("n_frames") != std::string::npos);
    }
    SUBCASE("unknown field") {
        write(t / "c.ini", std::string(kMinimalConfig) + "speed = 3\n");
        const auto r = run({"gen", "--config", t / "c.ini", "--out", t / "run"});
        CHECK(r.code != 0);
        CHECK(r.err.find("speed") != std::string::npos);
    }
    SUBCASE("failed run keeps the previous output") {
        write(t / "c.ini", kMinimalConfig);
        REQUIRE(run({"gen", "--config", t / "c.ini", "--out", t / "run"}).code == 0);
        const std::string before = io::read_file(t / "run/gt.jsonl");
        write(t / "bad.ini", "[scene]\nn_pedestrians = 12\nn_frames = 20\ntarget_density2 = 500\n");
        CHECK(run({"gen", "--config", t / "bad.ini", "--out", t / "run"}).code != 0);
        CHECK(io::read_file(t / "run/gt.jsonl") == before);
    }
    SUBCASE("usage error") {
        CHECK(run({"gen", "--out", t / "run"}).code != 0);
        CHECK(run({"frobnicate"}).code != 0);
    }
}

TEST_CASE("targets") {
    TempDir t;
    write(t / "gt.jsonl", box_line(0, {}) + box_line(1, {{7, 0.1, 0.1}}) + box_line(2, {{7, 0.2, 0.1}, {8, 1.0, 0.1}}));
    SUBCASE("empty frame gives a zero heatmap") {
        REQUIRE(run({"targets", "--gt", t / "gt.jsonl", "--frame", "0", "--out", t / "o"}).code == 0);
        std::ifstream in(t / "o/heatmap.grid");
        const auto g = io::grid_from_text(in, "heatmap");
        CHECK(g.nx() == 320);
        CHECK(g.ny() == 160);
        CHECK(g.max_value() == 0.0);
    }
    SUBCASE("one object peaks at its cell") {
        REQUIRE(run({"targets", "--gt", t / "gt.jsonl", "--frame", "1", "--out", t / "o", "--dump-pgm"}).code == 0);
        std::ifstream in(t / "o/heatmap.grid");
        const auto g = io::grid_from_text(in, "heatmap");
        const auto cell = quantize_to_grid(0.1, 0.1, g.grid());
        CHECK(g.at(cell.j, cell.k) == 1.0);
        CHECK(g.max_value() == 1.0);
        CHECK(fs::exists(t / "o/heatmap.pgm"));
        CHECK(io::read_file(t / "o/daw.pgm").rfind("P5\n320 160\n255\n", 0) == 0);
    }
    SUBCASE("grid flag and offsets") {
        REQUIRE(run({"targets", "--gt", t / "gt.jsonl", "--frame", "2", "--grid", "0.3,0.3", "--out", t / "o"}).code == 0);
        std::ifstream in(t / "o/daw.grid");
        const auto daw = io::grid_from_text(in, "daw");
        CHECK(daw.nx() == 640);
        CHECK(daw.max_value() == 2.0);
        std::ifstream off(t / "o/offsets.jsonl");
        const auto rec = io::parse_jsonl(off, "offsets");
        REQUIRE(rec.size() == 1);
        REQUIRE(rec[0].objects.size() == 2);
        const auto& a = rec[0].objects[0];
        CHECK(a.offset->ox == doctest::Approx(-0.1));
        CHECK(a.rel->defined);
        CHECK(a.rel->rx == doctest::Approx(0.8));
        CHECK(rec[0].objects[1].offset->ox == 0.0);  // newborn
    }
    SUBCASE("frame out of range") {
        CHECK(run({"targets", "--gt", t / "gt.jsonl", "--frame", "9", "--out", t / "o"}).code != 0);
    }
}

TEST_CASE("track") {
    TempDir t;
    SUBCASE("empty detections give an empty trajectory file") {
        write(t / "det.jsonl", "");
        REQUIRE(run({"track", "--det", t / "det.jsonl", "--out", t / "o"}).code == 0);
        CHECK(fs::file_size(t / "o/traj.jsonl") == 0);
    }
    SUBCASE("zero-noise detections give one trajectory per pedestrian") {
        write(t / "c.ini", kMinimalConfig);
        REQUIRE(run({"gen", "--config", t / "c.ini", "--out", t / "g"}).code == 0);
        REQUIRE(run({"track", "--det", t / "g/det.jsonl", "--out", t / "o"}).code == 0);
        REQUIRE(run({"track", "--det", t / "g/det.jsonl", "--out", t / "o2"}).code == 0);
        std::set<std::int64_t> ids;
        for (const auto& f : io::read_jsonl(t / "o/traj.jsonl")) {
            for (const auto& o : f.objects) ids.insert(o.id);
        }
        CHECK(ids.size() == 12);
        CHECK(io::read_file(t / "o/traj.jsonl") == io::read_file(t / "o2/traj.jsonl"));
    }
    SUBCASE("malformed input names the line") {
        write(t / "det.jsonl", box_line(0, {}) + "{not json\n");
        const auto r = run({"track", "--det", t / "det.jsonl", "--out", t / "o"});
        CHECK(r.code != 0);
        CHECK(r.err.find("det.jsonl:2") != std::string::npos);
    }
}

TEST_CASE("eval") {
    TempDir t;
    SUBCASE("trajectories equal to GT score 1") {
        write(t / "c.ini", kMinimalConfig);
        REQUIRE(run({"gen", "--config", t / "c.ini", "--out", t / "g"}).code == 0);
        REQUIRE(run({"eval", "--gt", t / "g/gt.jsonl", "--traj", t / "g/gt.jsonl", "--out", t / "e"}).code == 0);
        const auto r = read_json(t / "e/report.json");
        CHECK(r["mota"] == 1.0);
        CHECK(r["ids"] == 0);
        CHECK(r["density"]["radius"] == 2.0);
        CHECK(r["density"]["value"].is_number());
    }
    SUBCASE("arithmetic fixture") {
        // A tracked by 1 then 2 (one switch), B lost for two frames, one stray box: 1 - (1+1+2)/10
        std::string gt, tr;
        for (int f = 0; f < 5; ++f) {
            gt += box_line(f, {{1, 0.0, 0.0}, {2, 5.0, 0.0}});
            std::vector<std::tuple<int, double, double>> boxes{{f < 2 ? 1 : 2, 0.0, 0.0}};
            if (f < 3) boxes.emplace_back(3, 5.0, 0.0);
            if (f == 0) boxes.emplace_back(4, 10.0, 10.0);
            tr += box_line(f, boxes);
        }
        write(t / "gt.jsonl", gt);
        write(t / "tr.jsonl", tr);
        REQUIRE(run({"eval", "--gt", t / "gt.jsonl", "--traj", t / "tr.jsonl", "--out", t / "e", "--iou-th", "0.5"}).code == 0);
        const auto r = read_json(t / "e/report.json");
        CHECK(r["ids"] == 1);
        CHECK(r["fp"] == 1);
        CHECK(r["fn"] == 2);
        CHECK(r["p"] == 10);
        CHECK(r["mota"] == 0.6);
        CHECK(r["density"]["value"] == 0.0);
    }
}

TEST_CASE("density") {
    TempDir t;
    SUBCASE("empty input is undefined") {
        write(t / "gt.jsonl", box_line(0, {}));
        REQUIRE(run({"density", "--gt", t / "gt.jsonl", "--out", t / "d"}).code == 0);
        CHECK(read_json(t / "d/density.json")["density"].is_null());
    }
    SUBCASE("single object has no neighbors") {
        write(t / "gt.jsonl", box_line(0, {{1, 0.0, 0.0}}));
        REQUIRE(run({"density", "--gt", t / "gt.jsonl", "--out", t / "d"}).code == 0);
        CHECK(read_json(t / "d/density.json")["density"] == 0.0);
    }
    SUBCASE("seeded scene matches the library") {
        write(t / "c.ini", kMinimalConfig);
        REQUIRE(run({"gen", "--config", t / "c.ini", "--out", t / "g"}).code == 0);
        REQUIRE(run({"density", "--gt", t / "g/gt.jsonl", "--radius", "2", "--out", t / "d"}).code == 0);
        const auto frames = io::gt_frames(io::read_jsonl(t / "g/gt.jsonl"));
        CHECK(read_json(t / "d/density.json")["density"] == density_stats(frames, 2.0));
    }
    SUBCASE("bad radius") {
        write(t / "gt.jsonl", box_line(0, {{1, 0.0, 0.0}}));
        CHECK(run({"density", "--gt", t / "gt.jsonl", "--radius", "0", "--out", t / "d"}).code != 0);
    }
}

TEST_CASE("voxelshapes") {
    TempDir t;
    SUBCASE("empty cloud") {
        write(t / "cloud.txt", "# nothing\n");
        const auto r = run({"voxelshapes", "--cloud", t / "cloud.txt", "--topology", "a", "--out", t / "v"});
        REQUIRE(r.code == 0);
        CHECK(r.out ==
              "# points 0 dropped 0\n"
              "stage    stride  bev_res_m            bound  occupied channels\n"
              "voxels        1      0.075     2560x1280x40         0        3\n"
              "SF1           1      0.075     2560x1280x40         0       16\n"
              "SF2           2       0.15      1280x640x20         0       32\n"
              "SF3           4        0.3       640x320x10         0       64\n"
              "SF4           8        0.6        320x160x5         0      128\n"
              "bev           8        0.6        320x160x5         0      128\n");
    }
    SUBCASE("single point under the high-resolution topology") {
        write(t / "cloud.txt", "0 0 0 0.5 0\n100 0 0 1 0\n");
        const auto r = run({"voxelshapes", "--cloud", t / "cloud.txt", "--topology", "b", "--out", t / "v"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("# points 2 dropped 1\n") == 0);
        CHECK(r.out.find("bev           4        0.3       640x320x10         1      160\n") != std::string::npos);
    }
    SUBCASE("seeded simulated cloud is reproducible") {
        const auto a = run({"voxelshapes", "--seed", "3", "--topology", "c", "--out", t / "v1"});
        const auto b = run({"voxelshapes", "--seed", "3", "--topology", "c", "--out", t / "v2"});
        REQUIRE(a.code == 0);
        CHECK(a.out == b.out);
        CHECK(io::read_file(t / "v1/manifest.json") == io::read_file(t / "v2/manifest.json"));
    }
    SUBCASE("bad inputs") {
        write(t / "cloud.txt", "0 0 0 0.5 3\n");
        CHECK(run({"voxelshapes", "--cloud", t / "cloud.txt", "--out", t / "v"}).code != 0);
        CHECK(run({"voxelshapes", "--topology", "z", "--out", t / "v"}).code != 0);
    }
}

TEST_CASE("JSONL and grid round trips") {
    io::FrameRecord f{3, 0.3, {}};
    f.objects.push_back({5, Box3D{1.0 / 3.0, -2.5, 0.85, 0.6, 1.7, 0.55, 0.1}, 0.75, MotionOffset{0.1, -0.2, 0.0},
                         RelationshipOffset{1.0, 2.0, true}});
    f.objects.push_back({6, Box3D{0, 0, 0, 1, 1, 1, 0}, std::nullopt, std::nullopt, RelationshipOffset{}});
    const std::vector<io::FrameRecord> frames{f};
    const std::string text = io::to_jsonl(frames);
    std::istringstream in(text);
    const auto back = io::parse_jsonl(in, "mem");
    REQUIRE(back.size() == 1);
    CHECK(io::to_jsonl(back) == text);
    CHECK(back[0].objects[0].box.cx == 1.0 / 3.0);
    CHECK_FALSE(back[0].objects[1].rel->defined);
    CHECK_FALSE(back[0].objects[1].score.has_value());

    DenseGrid2D g(GridSpec::make(-1.0, 1.0, -0.5, 0.5, 0.5, 0.25));
    g.at(1, 2) = 0.123456789012345;
    std::istringstream gin(io::grid_to_text(g));
    const auto gb = io::grid_from_text(gin, "mem");
    CHECK(gb.same_shape(g));
    CHECK(gb.at(1, 2) == g.at(1, 2));
}

TEST_CASE("sha256 known digest") {
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
