#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dfedsat {

// Identifies the k-th satellite in the m-th orbital plane.
struct SatelliteId {
    int plane = 0;
    int slot = 0;

    friend bool operator==(const SatelliteId& a, const SatelliteId& b) {
        return a.plane == b.plane && a.slot == b.slot;
    }
    friend bool operator!=(const SatelliteId& a, const SatelliteId& b) { return !(a == b); }
    friend bool operator<(const SatelliteId& a, const SatelliteId& b) {
        return a.plane != b.plane ? a.plane < b.plane : a.slot < b.slot;
    }
};

struct ConstellationConfig {
    int num_planes = 1;        // M
    int sats_per_plane = 1;    // K
    double altitude_m = 604e3;
    double inclination_rad = 0.0;
    double raan_spread_rad = 2.0 * M_PI;  // total RAAN span across planes
    double phase_offset_rad = 0.0;        // inter-plane slot phasing
    double earth_radius_m = 6371e3;
    // When set, every ISL uses this distance instead of the geometric one.
    std::optional<double> link_distance_override_m;

    int total_satellites() const { return num_planes * sats_per_plane; }
    double orbit_radius_m() const { return earth_radius_m + altitude_m; }

    void validate() const {
        if (num_planes < 1) throw std::invalid_argument("num_planes must be >= 1");
        if (sats_per_plane < 1) throw std::invalid_argument("sats_per_plane must be >= 1");
        if (altitude_m <= 0.0) throw std::invalid_argument("altitude_m must be > 0");
        if (raan_spread_rad <= 0.0 || raan_spread_rad > 2.0 * M_PI + 1e-12)
            throw std::invalid_argument("raan_spread_rad must be in (0, 2*pi]");
    }
};

// Flat index used by mixing matrices and model stacks: plane-major.
inline int sat_index(const ConstellationConfig& cfg, const SatelliteId& s) {
    return s.plane * cfg.sats_per_plane + s.slot;
}
inline SatelliteId sat_from_index(const ConstellationConfig& cfg, int idx) {
    return SatelliteId{idx / cfg.sats_per_plane, idx % cfg.sats_per_plane};
}

struct ConstellationGraph {
    ConstellationConfig config;
    // Unordered pairs, stored with the lexicographically smaller id first.
    std::vector<std::pair<SatelliteId, SatelliteId>> intra_edges;
    std::vector<std::pair<SatelliteId, SatelliteId>> inter_edges;

    bool contains(const SatelliteId& s) const {
        return s.plane >= 0 && s.plane < config.num_planes && s.slot >= 0 &&
               s.slot < config.sats_per_plane;
    }
};

// Ring/torus neighborhood of one satellite. intra_prev/intra_next coincide for
// K = 2 and are absent for K = 1; inter_left/inter_right coincide for M = 2
// and are absent for M = 1.
struct Neighborhood {
    std::optional<SatelliteId> intra_prev;
    std::optional<SatelliteId> intra_next;
    std::optional<SatelliteId> inter_left;
    std::optional<SatelliteId> inter_right;

    // Deduplicated neighbor lists (the physical links).
    std::vector<SatelliteId> intra_unique() const {
        std::vector<SatelliteId> out;
        if (intra_prev) out.push_back(*intra_prev);
        if (intra_next && !(intra_prev && *intra_next == *intra_prev)) out.push_back(*intra_next);
        return out;
    }
    std::vector<SatelliteId> inter_unique() const {
        std::vector<SatelliteId> out;
        if (inter_left) out.push_back(*inter_left);
        if (inter_right && !(inter_left && *inter_right == *inter_left)) out.push_back(*inter_right);
        return out;
    }
};

inline ConstellationGraph build_constellation(const ConstellationConfig& config) {
    config.validate();
    const int M = config.num_planes;
    const int K = config.sats_per_plane;

    ConstellationGraph g;
    g.config = config;

    auto add_edge = [](std::vector<std::pair<SatelliteId, SatelliteId>>& edges, SatelliteId a,
                       SatelliteId b) {
        if (b < a) std::swap(a, b);
        edges.emplace_back(a, b);
    };

    // Intra-plane ring per plane. K=2 degenerates to a single edge, K=1 to none.
    for (int m = 0; m < M; ++m) {
        if (K == 2) {
            add_edge(g.intra_edges, {m, 0}, {m, 1});
        } else if (K >= 3) {
            for (int k = 0; k < K; ++k) {
                add_edge(g.intra_edges, {m, k}, {m, (k + 1) % K});
            }
        }
    }
    // Inter-plane links join same-slot satellites of adjacent planes.
    // M=2 degenerates to one edge per slot, M=1 to none.
    for (int k = 0; k < K; ++k) {
        if (M == 2) {
            add_edge(g.inter_edges, {0, k}, {1, k});
        } else if (M >= 3) {
            for (int m = 0; m < M; ++m) {
                add_edge(g.inter_edges, {m, k}, {(m + 1) % M, k});
            }
        }
    }
    return g;
}

inline Neighborhood neighbors(const ConstellationGraph& graph, const SatelliteId& sat) {
    if (!graph.contains(sat)) throw std::out_of_range("unknown satellite id");
    const int M = graph.config.num_planes;
    const int K = graph.config.sats_per_plane;

    Neighborhood n;
    if (K >= 2) {
        n.intra_prev = SatelliteId{sat.plane, (sat.slot + K - 1) % K};
        n.intra_next = SatelliteId{sat.plane, (sat.slot + 1) % K};
    }
    if (M >= 2) {
        n.inter_left = SatelliteId{(sat.plane + M - 1) % M, sat.slot};
        n.inter_right = SatelliteId{(sat.plane + 1) % M, sat.slot};
    }
    return n;
}

// Earth-centered position on a circular orbit at a fixed epoch. Plane m is
// rotated by RAAN = m * raan_spread / M about z, tilted by the inclination
// about x; slot k sits at in-plane anomaly 2*pi*k/K + m * phase_offset.
inline std::array<double, 3> satellite_position(const ConstellationConfig& config,
                                                const SatelliteId& sat) {
    config.validate();
    if (sat.plane < 0 || sat.plane >= config.num_planes || sat.slot < 0 ||
        sat.slot >= config.sats_per_plane)
        throw std::out_of_range("unknown satellite id");

    const double r = config.orbit_radius_m();
    const double raan = sat.plane * config.raan_spread_rad / config.num_planes;
    const double u = 2.0 * M_PI * sat.slot / config.sats_per_plane +
                     sat.plane * config.phase_offset_rad;
    const double inc = config.inclination_rad;

    // In-plane point, then Rx(inclination), then Rz(raan).
    const double x0 = r * std::cos(u);
    const double y0 = r * std::sin(u);
    const double y1 = y0 * std::cos(inc);
    const double z1 = y0 * std::sin(inc);
    return {x0 * std::cos(raan) - y1 * std::sin(raan),
            x0 * std::sin(raan) + y1 * std::cos(raan), z1};
}

inline double link_distance(const ConstellationConfig& config, const SatelliteId& a,
                            const SatelliteId& b) {
    if (a == b) throw std::invalid_argument("link_distance requires distinct satellites");
    if (config.link_distance_override_m) return *config.link_distance_override_m;
    const auto pa = satellite_position(config, a);
    const auto pb = satellite_position(config, b);
    const double dx = pa[0] - pb[0];
    const double dy = pa[1] - pb[1];
    const double dz = pa[2] - pb[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace dfedsat
