#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "dfedsat/topology.hpp"

using namespace dfedsat;

namespace {

ConstellationConfig make_config(int m, int k) {
    ConstellationConfig cfg;
    cfg.num_planes = m;
    cfg.sats_per_plane = k;
    return cfg;
}

std::map<std::pair<int, int>, int> degree_count(const ConstellationGraph& g) {
    std::map<std::pair<int, int>, int> deg;
    auto bump = [&](const SatelliteId& s) { deg[{s.plane, s.slot}]++; };
    for (const auto& [a, b] : g.intra_edges) {
        bump(a);
        bump(b);
    }
    for (const auto& [a, b] : g.inter_edges) {
        bump(a);
        bump(b);
    }
    return deg;
}

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("torus edge counts match M*K each") {
    const auto g = build_constellation(make_config(10, 10));
    CHECK(g.config.total_satellites() == 100);
    CHECK(g.intra_edges.size() == 100);
    CHECK(g.inter_edges.size() == 100);
}

TEST_CASE("single plane has no inter-plane links") {
    const auto g = build_constellation(make_config(1, 4));
    CHECK(g.config.total_satellites() == 4);
    CHECK(g.intra_edges.size() == 4);
    CHECK(g.inter_edges.size() == 0);
}

TEST_CASE("one satellite per plane forms a ring of planes") {
    const auto g = build_constellation(make_config(3, 1));
    CHECK(g.config.total_satellites() == 3);
    CHECK(g.intra_edges.size() == 0);
    CHECK(g.inter_edges.size() == 3);
}

TEST_CASE("degenerate planes avoid parallel edges") {
    CHECK(build_constellation(make_config(1, 2)).intra_edges.size() == 1);
    CHECK(build_constellation(make_config(2, 3)).inter_edges.size() == 3);
}

TEST_CASE("invalid sizes are rejected") {
    CHECK_THROWS_AS(build_constellation(make_config(0, 4)), std::invalid_argument);
    CHECK_THROWS_AS(build_constellation(make_config(4, 0)), std::invalid_argument);
}

TEST_CASE("every node has degree 4 on a proper torus") {
    for (auto [m, k] : {std::pair{3, 3}, {4, 5}, {6, 3}}) {
        const auto g = build_constellation(make_config(m, k));
        const auto deg = degree_count(g);
        REQUIRE(static_cast<int>(deg.size()) == m * k);
        for (const auto& [sat, d] : deg) CHECK(d == 4);
    }
}

TEST_CASE("neighbors follow left/right plane and ring slots") {
    const auto g = build_constellation(make_config(5, 4));
    const auto n = neighbors(g, {2, 1});
    REQUIRE(n.inter_left.has_value());
    REQUIRE(n.inter_right.has_value());
    CHECK(*n.inter_left == SatelliteId{1, 1});
    CHECK(*n.inter_right == SatelliteId{3, 1});
    CHECK(*n.intra_prev == SatelliteId{2, 0});
    CHECK(*n.intra_next == SatelliteId{2, 2});
}

TEST_CASE("M=2 inter neighbor is reported once") {
    const auto g = build_constellation(make_config(2, 3));
    const auto n = neighbors(g, {0, 0});
    CHECK(*n.inter_left == SatelliteId{1, 0});
    CHECK(*n.inter_right == SatelliteId{1, 0});
    CHECK(n.inter_unique().size() == 1);
}

TEST_CASE("M=1 has no inter neighbors, K=1 no intra neighbors") {
    const auto g1 = build_constellation(make_config(1, 3));
    CHECK_FALSE(neighbors(g1, {0, 1}).inter_left.has_value());
    CHECK(neighbors(g1, {0, 1}).inter_unique().empty());
    const auto g2 = build_constellation(make_config(3, 1));
    CHECK(neighbors(g2, {1, 0}).intra_unique().empty());
}

TEST_CASE("neighbor relation is symmetric") {
    const auto g = build_constellation(make_config(4, 5));
    for (int m = 0; m < 4; ++m) {
        for (int k = 0; k < 5; ++k) {
            const SatelliteId self{m, k};
            const auto nb = neighbors(g, self);
            for (const auto& other : nb.intra_unique()) {
                const auto back = neighbors(g, other).intra_unique();
                CHECK(std::find(back.begin(), back.end(), self) != back.end());
            }
            for (const auto& other : nb.inter_unique()) {
                const auto back = neighbors(g, other).inter_unique();
                CHECK(std::find(back.begin(), back.end(), self) != back.end());
            }
        }
    }
}

TEST_CASE("unknown satellite ids are rejected") {
    const auto g = build_constellation(make_config(2, 2));
    CHECK_THROWS_AS(neighbors(g, {2, 0}), std::out_of_range);
    CHECK_THROWS_AS(neighbors(g, {0, 5}), std::out_of_range);
}

TEST_CASE("positions stay on the orbital sphere") {
    auto cfg = make_config(3, 5);
    cfg.inclination_rad = 0.7;
    cfg.phase_offset_rad = 0.3;
    const double r = cfg.orbit_radius_m();
    CHECK(r == doctest::Approx(6975e3));
    for (int m = 0; m < 3; ++m) {
        for (int k = 0; k < 5; ++k) {
            const auto p = satellite_position(cfg, {m, k});
            const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            CHECK(std::abs(norm - r) < 1e-6 * r);
        }
    }
}

TEST_CASE("two satellites in one plane are antipodal") {
    auto cfg = make_config(1, 2);
    cfg.inclination_rad = 0.0;
    const auto a = satellite_position(cfg, {0, 0});
    const auto b = satellite_position(cfg, {0, 1});
    for (int i = 0; i < 3; ++i) CHECK(std::abs(a[i] + b[i]) < 1e-6);
}

TEST_CASE("plane rotation composition matches the rotation-matrix oracle") {
    // Independent oracle: Rz(pi/2) * Rx(pi/2) applied to [r,0,0] vs [r,0,0];
    // the two unit position vectors are orthogonal (angle pi/2).
    auto cfg = make_config(2, 1);
    cfg.raan_spread_rad = M_PI;
    cfg.inclination_rad = M_PI / 2.0;
    const auto a = satellite_position(cfg, {0, 0});
    const auto b = satellite_position(cfg, {1, 0});
    const double r = cfg.orbit_radius_m();
    const double cosang = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (r * r);
    CHECK(std::acos(std::clamp(cosang, -1.0, 1.0)) ==
          doctest::Approx(1.5707963267948966).epsilon(1e-12));
}

TEST_CASE("adjacent intra-plane distance equals the ring chord") {
    auto cfg = make_config(1, 10);
    const double expected = 2.0 * 6975e3 * std::sin(M_PI / 10.0);  // 4310787.0715305163
    CHECK(link_distance(cfg, {0, 0}, {0, 1}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(link_distance(cfg, {0, 3}, {0, 4}) == doctest::Approx(4310787.0715305163));
}

TEST_CASE("antipodal distance is the orbit diameter") {
    auto cfg = make_config(1, 2);
    CHECK(link_distance(cfg, {0, 0}, {0, 1}) == doctest::Approx(2.0 * 6975e3));
}

TEST_CASE("distance is symmetric") {
    auto cfg = make_config(5, 6);
    cfg.inclination_rad = 1.1;
    cfg.phase_offset_rad = 0.17;
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> pm(0, 4), pk(0, 5);
    for (int i = 0; i < 100; ++i) {
        SatelliteId a{pm(rng), pk(rng)};
        SatelliteId b{pm(rng), pk(rng)};
        if (a == b) continue;
        CHECK(link_distance(cfg, a, b) == doctest::Approx(link_distance(cfg, b, a)));
    }
}

TEST_CASE("distance override takes precedence and self-distance throws") {
    auto cfg = make_config(2, 2);
    cfg.link_distance_override_m = 1234.5;
    CHECK(link_distance(cfg, {0, 0}, {1, 0}) == 1234.5);
    CHECK_THROWS_AS(link_distance(cfg, {0, 0}, {0, 0}), std::invalid_argument);
}

}  // TEST_SUITE
