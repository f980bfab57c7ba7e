#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "crowdmot/targets.hpp"
#include "oracles.hpp"

using namespace crowdmot;

namespace {

GtObject at(InstanceId id, double x, double y, double z = 0.85) {
    return GtObject{id, Box3D::make(x, y, z, 0.6, 1.7, 0.6, 0.0), 0};
}

const GridSpec kSmall = GridSpec::make(-10.0, 10.0, -10.0, 10.0, 0.5, 0.5);

std::vector<GtObject> random_objects(std::mt19937_64& rng, int n, double half_extent) {
    std::uniform_real_distribution<double> pos(-half_extent, half_extent);
    std::vector<GtObject> objs;
    for (int i = 0; i < n; ++i) objs.push_back(at(100 + i, pos(rng), pos(rng)));
    return objs;
}

}  // namespace

TEST_CASE("heatmap examples") {
    const auto empty = make_heatmap({}, kSmall, 1.0);
    CHECK(empty.max_value() == 0.0);

    const std::vector<GtObject> one{at(1, 0.1, 0.1)};
    const auto heat = make_heatmap(one, kSmall, 2.0);
    const auto c = quantize_to_grid(0.1, 0.1, kSmall);
    CHECK(heat.at(c.j, c.k) == 1.0);
    CHECK(heat.at(c.j + 1, c.k) == doctest::Approx(std::exp(-1.0 / 4.0)).epsilon(1e-15));
    CHECK(heat.at(c.j, c.k - 1) == doctest::Approx(std::exp(-1.0 / 4.0)).epsilon(1e-15));

    const std::vector<GtObject> twice{at(1, 0.1, 0.1), at(2, 0.2, 0.2)};
    const auto doubled = make_heatmap(twice, kSmall, 2.0);
    CHECK(std::equal(heat.values().begin(), heat.values().end(), doubled.values().begin()));

    const auto summed = make_heatmap(twice, kSmall, 2.0, HeatmapCombine::Sum);
    CHECK(summed.at(c.j, c.k) == 2.0);

    CHECK_THROWS_AS(make_heatmap(std::vector<GtObject>{at(1, 50, 0)}, kSmall, 1.0), OutOfBounds);
    CHECK_THROWS_AS(make_heatmap(one, kSmall, 0.0), std::invalid_argument);
}

TEST_CASE("heatmap window matches an untruncated evaluation") {
    std::mt19937_64 rng(2);
    const auto objs = random_objects(rng, 15, 9.0);
    const auto heat = make_heatmap(objs, kSmall, 1.5);
    for (int k = 0; k < heat.ny(); ++k) {
        for (int j = 0; j < heat.nx(); ++j) {
            double expected = 0.0;
            for (const auto& o : objs) {
                const auto c = quantize_to_grid(o.box.cx, o.box.cy, kSmall);
                expected = std::max(expected, std::exp(-((j - c.j) * (j - c.j) + (k - c.k) * (k - c.k)) / 2.25));
            }
            REQUIRE(heat.at(j, k) == expected);
        }
    }
}

TEST_CASE("heatmap has one unit cell per distinct object cell") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto objs = random_objects(rng, 30, 9.5);
        const auto heat = make_heatmap(objs, kSmall, 1.0);
        std::set<std::pair<int, int>> cells;
        for (const auto& o : objs) {
            const auto c = quantize_to_grid(o.box.cx, o.box.cy, kSmall);
            cells.insert({c.j, c.k});
        }
        const auto ones = std::count(heat.values().begin(), heat.values().end(), 1.0);
        CHECK(static_cast<std::size_t>(ones) == cells.size());
        for (double v : heat.values()) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
}

TEST_CASE("density-aware weights") {
    CHECK(make_daw({}, kSmall, 2.0).max_value() == 0.0);

    const std::vector<GtObject> pair{at(1, 1.0, 1.0), at(2, 1.0, 1.0)};
    const auto w = make_daw(pair, kSmall, 2.0);
    for (int k = 0; k < w.ny(); ++k) {
        for (int j = 0; j < w.nx(); ++j) {
            const auto p = cell_center(j, k, kSmall);
            const bool near = std::sqrt((p.x - 1.0) * (p.x - 1.0) + (p.y - 1.0) * (p.y - 1.0)) < 2.0;
            REQUIRE(w.at(j, k) == (near ? 2.0 : 0.0));
        }
    }

    // weights are larger where more objects appear
    const std::vector<GtObject> scene{at(1, -5, -5), at(2, 5, 5), at(3, 5.5, 5), at(4, 5, 5.5)};
    const auto dense = make_daw(scene, kSmall, 2.0);
    const auto lone = quantize_to_grid(-5, -5, kSmall);
    const auto crowd = quantize_to_grid(5, 5, kSmall);
    CHECK(dense.at(lone.j, lone.k) == 1.0);
    CHECK(dense.at(crowd.j, crowd.k) == 3.0);
}

TEST_CASE("density-aware weights are monotone as objects are added") {
    std::mt19937_64 rng(8);
    auto objs = random_objects(rng, 25, 9.0);
    DenseGrid2D previous(kSmall);
    for (std::size_t n = 1; n <= objs.size(); ++n) {
        const auto w = make_daw(std::span(objs).first(n), kSmall, 2.0);
        for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(w.values()[i] >= previous.values()[i]);
        for (double v : w.values()) REQUIRE(v == std::floor(v));
        previous = w;
    }
}

TEST_CASE("density-aware weights anchor conventions differ by half a cell") {
    const std::vector<GtObject> one{at(1, 0.25, 0.25)};
    const auto origin = make_daw(one, kSmall, 0.3, CellAnchor::Origin);
    const auto center = make_daw(one, kSmall, 0.3, CellAnchor::Center);
    const auto c = quantize_to_grid(0.25, 0.25, kSmall);
    CHECK(origin.at(c.j, c.k) == 0.0);  // origin at (0,0), 0.354 away
    CHECK(center.at(c.j, c.k) == 1.0);  // midpoint at (0.25,0.25)
}

TEST_CASE("focal loss scalar and perfect-prediction examples") {
    const GridSpec single = GridSpec::make(0, 1, 0, 1, 1, 1);
    DenseGrid2D pred(single, 0.5), gt(single, 1.0), w(single, 1.0);
    const auto r = focal_daw_loss(pred, gt, w, LossParams{});
    CHECK(r.loss == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-15));
    CHECK(r.loss == doctest::Approx(0.17329).epsilon(1e-5));

    const std::vector<GtObject> one{at(1, 0.1, 0.1)};
    const auto heat = make_heatmap(one, kSmall, 1.0);
    DenseGrid2D perfect(kSmall, 0.0);
    const auto c = quantize_to_grid(0.1, 0.1, kSmall);
    perfect.at(c.j, c.k) = 1.0;
    const auto ideal = focal_daw_loss(perfect, heat, make_daw(one, kSmall, 2.0), LossParams{});
    CHECK(ideal.loss < 1e-10);
    CHECK(ideal.loss >= 0.0);
    CHECK(ideal.positives == 1);
}

TEST_CASE("focal loss rejects mismatched grids and bad params") {
    DenseGrid2D a(kSmall), b(GridSpec::make(0, 1, 0, 1, 0.5, 0.5));
    CHECK_THROWS_AS(focal_daw_loss(a, b, a, LossParams{}), std::invalid_argument);
    LossParams bad;
    bad.alpha = -1;
    CHECK_THROWS_AS(focal_daw_loss(a, a, a, bad), std::invalid_argument);
}

TEST_CASE("focal loss properties on random grids") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> prob(0.01, 0.99);
    const GridSpec grid = GridSpec::make(0, 32, 0, 32, 1, 1);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_real_distribution<double> pos(0.0, 31.99);
        std::vector<GtObject> objs;
        for (int i = 0; i < 12; ++i) objs.push_back(at(i, pos(rng), pos(rng)));
        const auto heat = make_heatmap(objs, grid, 2.0);
        const auto w = make_daw(objs, grid, 3.0);
        DenseGrid2D pred(grid);
        for (double& v : pred.values()) v = prob(rng);

        LossParams params;
        const auto base = focal_daw_loss(pred, heat, DenseGrid2D(grid, 1.0), params);
        CHECK(base.loss == oracle::reference_focal_loss(pred, heat, params.alpha, params.gamma));

        const auto weighted = focal_daw_loss(pred, heat, w, params);
        CHECK(weighted.loss >= base.loss);  // w_eff >= 1 everywhere

        // linear in the weights when the floor is off
        params.weight_floor = 0.0;
        DenseGrid2D doubled = w;
        for (double& v : doubled.values()) v *= 2.0;
        const double once = focal_daw_loss(pred, heat, w, params).loss;
        const double twice = focal_daw_loss(pred, heat, doubled, params).loss;
        CHECK(twice == doctest::Approx(2.0 * once).epsilon(1e-14));
        CHECK(once >= 0.0);
    }
}

TEST_CASE("focal loss gradient matches full-grid central differences") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> prob(0.02, 0.98);
    const GridSpec grid = GridSpec::make(0, 16, 0, 16, 1, 1);
    std::vector<GtObject> objs{at(1, 3.2, 4.1), at(2, 3.9, 4.4), at(3, 10.5, 12.2)};
    const auto heat = make_heatmap(objs, grid, 1.5);
    const auto w = make_daw(objs, grid, 2.0);
    DenseGrid2D pred(grid);
    for (double& v : pred.values()) v = prob(rng);
    const auto r = focal_daw_loss(pred, heat, w, LossParams{});
    const double h = 1e-5;
    for (std::size_t i = 0; i < pred.size(); i += 3) {
        DenseGrid2D up = pred, down = pred;
        up.values()[i] += h;
        down.values()[i] -= h;
        const double numeric = (focal_daw_loss(up, heat, w, LossParams{}).loss -
                                focal_daw_loss(down, heat, w, LossParams{}).loss) / (2 * h);
        const double analytic = r.grad.values()[i];
        CHECK(std::abs(numeric - analytic) <= 1e-4 * std::max(std::abs(numeric), std::abs(analytic)) + 1e-9);
    }
}

TEST_CASE("focal loss gradient is zero where the clamp is active") {
    const GridSpec single = GridSpec::make(0, 2, 0, 1, 1, 1);
    DenseGrid2D pred(single), gt(single, 0.0), w(single, 1.0);
    pred.at(0, 0) = 0.0;
    pred.at(1, 0) = 1.0;
    const auto r = focal_daw_loss(pred, gt, w, LossParams{});
    CHECK(r.grad.at(0, 0) == 0.0);
    CHECK(r.grad.at(1, 0) == 0.0);
    CHECK(std::isfinite(r.loss));
}

TEST_CASE("motion offsets") {
    const std::vector<GtObject> prev{at(1, 0, 0), at(2, 5, 5)};
    const std::vector<GtObject> curr{at(1, 0, 0), at(2, 6, 5), at(3, 1, 1)};
    const auto off = make_motion_offsets(curr, prev);
    CHECK(off.at(1).offset == MotionOffset{0, 0, 0});
    CHECK_FALSE(off.at(1).newborn);
    CHECK(off.at(2).offset == MotionOffset{-1, 0, 0});
    CHECK(off.at(3).newborn);
    CHECK(off.at(3).offset == MotionOffset{});
    CHECK(off.size() == 3);

    const std::vector<GtObject> dup{at(1, 0, 0), at(1, 1, 1)};
    CHECK_THROWS_AS(make_motion_offsets(dup, prev), std::invalid_argument);
}

TEST_CASE("relationship offsets examples") {
    const std::vector<GtObject> line{at(1, 0, 0), at(2, 1, 0), at(3, 3, 0)};
    const auto rel = make_relationship_offsets(line);
    CHECK(rel.at(1) == RelationshipOffset{1, 0, true});
    CHECK(rel.at(2) == RelationshipOffset{-1, 0, true});
    CHECK(rel.at(3) == RelationshipOffset{-2, 0, true});

    const std::vector<GtObject> apart{at(1, 0, 0), at(2, 3.5, 0)};
    const auto lone = make_relationship_offsets(apart);
    CHECK_FALSE(lone.at(1).defined);
    CHECK(lone.at(1).rx == 0.0);
    CHECK_FALSE(lone.at(2).defined);

    CHECK(make_relationship_offsets({}).empty());
    const std::vector<GtObject> single{at(9, 0, 0)};
    CHECK_FALSE(make_relationship_offsets(single).at(9).defined);

    // equidistant neighbors resolve to the smaller id
    const std::vector<GtObject> tie{at(5, 0, 0), at(7, 1, 0), at(6, -1, 0)};
    CHECK(make_relationship_offsets(tie).at(5) == RelationshipOffset{-1, 0, true});
}

TEST_CASE("relationship offsets agree with brute force and are antisymmetric") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 60);
        const auto objs = random_objects(rng, n, 12.0);
        const auto fast = make_relationship_offsets(objs);
        REQUIRE(fast == oracle::brute_relationships(objs, kDefaultNeighborRadius));
        for (const auto& [id, r] : fast) {
            if (!r.defined) continue;
            REQUIRE(std::hypot(r.rx, r.ry) <= kDefaultNeighborRadius);
        }
    }
}
