#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dfedsat/link_model.hpp"
#include "dfedsat/mixing.hpp"
#include "dfedsat/rng.hpp"
#include "dfedsat/training.hpp"

namespace dfedsat {

// Fixed-length packet view of a flat model; the last packet is zero-padded.
struct PacketizedModel {
    std::vector<Eigen::VectorXd> packets;
    int packet_len = 0;
    int original_len = 0;

    int num_packets() const { return static_cast<int>(packets.size()); }
};

enum class LinkSampler { Physical, Pinned, Reliable };

struct ConsensusConfig {
    int gossip_rounds = 1;    // C
    int packet_len = 150000;  // parameters per packet; 1.2 MB at 8 bytes each
    LinkSampler links = LinkSampler::Reliable;
    double pinned_p = 1.0;

    void validate() const {
        if (gossip_rounds < 0) throw std::invalid_argument("gossip_rounds must be >= 0");
        if (packet_len < 1) throw std::invalid_argument("packet_len must be >= 1");
        if (pinned_p < 0.0 || pinned_p > 1.0)
            throw std::invalid_argument("pinned_p must lie in [0, 1]");
    }
};

// Communication accounting, in parameters and discrete events. Bytes are
// derived downstream at 8 bytes per parameter.
struct CommCounters {
    std::int64_t intra_segments = 0;   // ring segment transmissions
    std::int64_t intra_params = 0;     // parameters moved within planes
    std::int64_t inter_messages = 0;   // whole-model transmissions across planes
    std::int64_t inter_packets = 0;    // packets carried by those messages
    std::int64_t packet_failures = 0;  // packets lost to the erasure channel
    std::int64_t retransmissions = 0;  // extra attempts (retransmitting baselines only)
};

inline PacketizedModel packetize(const ModelVector& model, int packet_len) {
    if (packet_len < 1) throw std::invalid_argument("packet_len must be >= 1");
    PacketizedModel out;
    out.packet_len = packet_len;
    out.original_len = static_cast<int>(model.size());
    const int d = (out.original_len + packet_len - 1) / packet_len;
    out.packets.reserve(d);
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd packet = Eigen::VectorXd::Zero(packet_len);
        const int off = j * packet_len;
        const int len = std::min(packet_len, out.original_len - off);
        packet.head(len) = model.segment(off, len);
        out.packets.push_back(std::move(packet));
    }
    return out;
}

inline ModelVector depacketize(const PacketizedModel& pm) {
    ModelVector out(pm.original_len);
    for (int j = 0; j < pm.num_packets(); ++j) {
        const int off = j * pm.packet_len;
        const int len = std::min(pm.packet_len, pm.original_len - off);
        out.segment(off, len) = pm.packets[j].head(len);
    }
    return out;
}

// Packet-level compensation: keep received packets where the mask is 1, fill
// the rest from the receiver's own model.
inline PacketizedModel self_compensate(const PacketizedModel& received,
                                       const std::vector<std::uint8_t>& mask,
                                       const PacketizedModel& own) {
    if (received.num_packets() != own.num_packets() ||
        static_cast<int>(mask.size()) != received.num_packets() ||
        received.packet_len != own.packet_len)
        throw std::invalid_argument("self_compensate: packet layout mismatch");
    PacketizedModel out = own;
    for (int j = 0; j < received.num_packets(); ++j)
        if (mask[j]) out.packets[j] = received.packets[j];
    return out;
}

struct OrbitReduceStats {
    std::vector<int> segments_sent;           // per satellite, expect 2K-2
    std::vector<std::int64_t> params_sent;    // per satellite
};

// Ring all-reduce within one plane: K-segment scatter-reduce (K-1 iterations
// of weighted accumulation) followed by an all-gather (K-1 iterations).
// Every output equals sum_j weights[j] * models[j]; each satellite transmits
// exactly 2K-2 segments totalling less than two model sizes.
inline std::vector<ModelVector> orbit_reduce(const std::vector<ModelVector>& models,
                                             const std::vector<double>& weights,
                                             OrbitReduceStats* stats = nullptr,
                                             CommCounters* counters = nullptr) {
    const int K = static_cast<int>(models.size());
    if (K == 0) throw std::invalid_argument("orbit_reduce: empty plane");
    if (static_cast<int>(weights.size()) != K)
        throw std::invalid_argument("orbit_reduce: weight/model count mismatch");
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("orbit_reduce: weights must sum to 1");
    const int d_w = static_cast<int>(models[0].size());
    for (const auto& m : models)
        if (m.size() != d_w) throw std::invalid_argument("orbit_reduce: model size mismatch");

    if (stats) {
        stats->segments_sent.assign(K, 0);
        stats->params_sent.assign(K, 0);
    }
    if (K == 1) return {models[0]};

    // Segment layout: first (d_w % K) segments get one extra parameter.
    std::vector<int> seg_len(K), seg_off(K);
    {
        const int base = d_w / K, extra = d_w % K;
        int off = 0;
        for (int s = 0; s < K; ++s) {
            seg_len[s] = base + (s < extra ? 1 : 0);
            seg_off[s] = off;
            off += seg_len[s];
        }
    }
    auto mod = [K](int v) { return ((v % K) + K) % K; };

    // Each satellite contributes its own pre-scaled model, so the plain-sum
    // ring yields the weighted average directly.
    std::vector<ModelVector> x(models.begin(), models.end());
    for (int j = 0; j < K; ++j) x[j] *= weights[j];

    auto record_send = [&](int j, int seg) {
        if (stats) {
            stats->segments_sent[j] += 1;
            stats->params_sent[j] += seg_len[seg];
        }
        if (counters) {
            counters->intra_segments += 1;
            counters->intra_params += seg_len[seg];
        }
    };

    std::vector<Eigen::VectorXd> payload(K);
    // Scatter-reduce: after K-1 iterations node j holds the complete sum of
    // segment (j+1) mod K.
    for (int it = 0; it < K - 1; ++it) {
        for (int j = 0; j < K; ++j) {
            const int seg = mod(j - it);
            payload[j] = x[j].segment(seg_off[seg], seg_len[seg]);
            record_send(j, seg);
        }
        for (int j = 0; j < K; ++j) {
            const int from = mod(j - 1);
            const int seg = mod(j - 1 - it);
            x[j].segment(seg_off[seg], seg_len[seg]) += payload[from];
        }
    }
    // All-gather: received segments replace local ones.
    for (int it = 0; it < K - 1; ++it) {
        for (int j = 0; j < K; ++j) {
            const int seg = mod(j + 1 - it);
            payload[j] = x[j].segment(seg_off[seg], seg_len[seg]);
            record_send(j, seg);
        }
        for (int j = 0; j < K; ++j) {
            const int from = mod(j - 1);
            const int seg = mod(j - it);
            x[j].segment(seg_off[seg], seg_len[seg]) = payload[from];
        }
    }
    return x;
}

// One synchronous gossip round over the inter-plane rings. Every satellite
// packetizes its current model, each directed link draws an independent
// erasure mask, receivers self-compensate and aggregate with the Q_r row
// weights. link_prob(from, to) gives the per-link success probability over
// flat plane-major indices; mask_seed must already be scoped to (round t, c).
template <typename LinkProb>
inline std::vector<ModelVector> gossip_round(const std::vector<ModelVector>& models,
                                             const MixingMatrix& q_r, int packet_len,
                                             LinkProb&& link_prob, std::uint64_t mask_seed,
                                             CommCounters* counters = nullptr) {
    const int n = q_r.size();
    if (static_cast<int>(models.size()) != n)
        throw std::invalid_argument("gossip_round: model count mismatch");
    if (q_r.planes == 1) return models;  // single plane: gossip is skipped

    std::vector<PacketizedModel> packets;
    packets.reserve(models.size());
    for (const auto& m : models) packets.push_back(packetize(m, packet_len));
    const int d = packets.front().num_packets();

    std::vector<ModelVector> next(models.size());
    for (int i = 0; i < n; ++i) {
        ModelVector agg = q_r.weights(i, i) * models[i];
        for (int j = 0; j < n; ++j) {
            const double w = q_r.weights(i, j);
            if (j == i || w == 0.0) continue;
            const double p = link_prob(j, i);
            Rng rng = substream(mask_seed, {kStreamGossipMask, static_cast<std::uint64_t>(j),
                                            static_cast<std::uint64_t>(i)});
            const auto mask = sample_packet_mask(p, d, rng);
            const PacketizedModel patched = self_compensate(packets[j], mask, packets[i]);
            agg += w * depacketize(patched);
            if (counters) {
                counters->inter_messages += 1;
                counters->inter_packets += d;
                for (auto m : mask) counters->packet_failures += (m == 0);
            }
        }
        next[i] = std::move(agg);
    }
    return next;
}

// Full model-consensus phase: per-plane orbit reduce, then C gossip rounds.
// Under reliable links the stacked result equals Q_r^C * Q_a * W.
template <typename LinkProb>
inline std::vector<ModelVector> model_consensus(const std::vector<ModelVector>& models,
                                                const std::vector<double>& data_sizes, int planes,
                                                int sats_per_plane, const ConsensusConfig& cfg,
                                                LinkProb&& link_prob, std::uint64_t mask_seed,
                                                CommCounters* counters = nullptr) {
    cfg.validate();
    const int M = planes, K = sats_per_plane;
    if (static_cast<int>(models.size()) != M * K || static_cast<int>(data_sizes.size()) != M * K)
        throw std::invalid_argument("model_consensus: size mismatch");

    std::vector<ModelVector> current(models.begin(), models.end());
    for (int m = 0; m < M; ++m) {
        std::vector<ModelVector> plane(current.begin() + m * K, current.begin() + (m + 1) * K);
        std::vector<double> w(data_sizes.begin() + m * K, data_sizes.begin() + (m + 1) * K);
        double mass = 0.0;
        for (double v : w) mass += v;
        for (double& v : w) v /= mass;
        auto reduced = orbit_reduce(plane, w, nullptr, counters);
        std::move(reduced.begin(), reduced.end(), current.begin() + m * K);
    }

    if (M >= 2 && cfg.gossip_rounds > 0) {
        const MixingMatrix q_r = inter_plane_matrix(data_sizes, M, K);
        for (int c = 0; c < cfg.gossip_rounds; ++c) {
            current = gossip_round(current, q_r, cfg.packet_len, link_prob,
                                   derive_seed(mask_seed, {static_cast<std::uint64_t>(c)}),
                                   counters);
        }
    }
    return current;
}

inline auto reliable_links() {
    return [](int, int) { return 1.0; };
}

}  // namespace dfedsat
