#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfedsat/consensus.hpp"
#include "dfedsat/mixing.hpp"
#include "dfedsat/topology.hpp"
#include "dfedsat/training.hpp"

namespace dfedsat {

enum class Algorithm { DFedSat, Dsgd, DFedAvg, DFedSam };

inline Algorithm algorithm_from_string(const std::string& name) {
    if (name == "dfedsat") return Algorithm::DFedSat;
    if (name == "dsgd") return Algorithm::Dsgd;
    if (name == "dfedavg") return Algorithm::DFedAvg;
    if (name == "dfedsam") return Algorithm::DFedSam;
    throw std::invalid_argument("unknown algorithm: " + name);
}

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::DFedSat: return "dfedsat";
        case Algorithm::Dsgd: return "dsgd";
        case Algorithm::DFedAvg: return "dfedavg";
        case Algorithm::DFedSam: return "dfedsam";
    }
    return "?";
}

struct BaselineConfig {
    Algorithm algorithm = Algorithm::DFedSat;
    int max_retransmissions = 3;

    void validate() const {
        if (max_retransmissions < 0)
            throw std::invalid_argument("max_retransmissions must be >= 0");
    }
};

// Single-matrix consensus operator over the full 2D torus: row (m,k) mixes
// over itself and its (deduplicated) intra and inter neighbors, weighted by
// data mass.
inline MixingMatrix torus_mixing_matrix(const std::vector<double>& data_sizes, int planes,
                                        int sats_per_plane) {
    detail::check_sizes(data_sizes, planes, sats_per_plane);
    const int M = planes, K = sats_per_plane;
    const int n = M * K;

    ConstellationConfig cfg;
    cfg.num_planes = M;
    cfg.sats_per_plane = K;
    const ConstellationGraph graph = build_constellation(cfg);

    MixingMatrix q{MatrixKind::FullTorus, M, K, Eigen::MatrixXd::Zero(n, n)};
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            const SatelliteId self{m, k};
            const Neighborhood nb = neighbors(graph, self);
            std::vector<SatelliteId> group{self};
            for (const auto& s : nb.intra_unique()) group.push_back(s);
            for (const auto& s : nb.inter_unique()) group.push_back(s);
            double mass = 0.0;
            for (const auto& s : group) mass += data_sizes[sat_index(cfg, s)];
            const int row = sat_index(cfg, self);
            for (const auto& s : group)
                q.weights(row, sat_index(cfg, s)) = data_sizes[sat_index(cfg, s)] / mass;
        }
    }
    return q;
}

struct RetransmissionResult {
    PacketizedModel delivered;
    std::vector<int> attempts;  // transmissions per packet, capped at 1+max_retries
    int residual_failures = 0;  // packets that exhausted every attempt
};

// Per-packet stop-and-wait retransmission: each packet is retried until it
// gets through or 1+max_retries attempts are spent; packets that still fail
// are filled from the receiver's own model.
inline RetransmissionResult transmit_with_retransmission(const PacketizedModel& sent,
                                                         const PacketizedModel& receiver_own,
                                                         double p, int max_retries, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("probability must lie in [0, 1]");
    if (sent.num_packets() != receiver_own.num_packets() ||
        sent.packet_len != receiver_own.packet_len)
        throw std::invalid_argument("packet layout mismatch");

    std::bernoulli_distribution coin(p);
    RetransmissionResult out;
    out.delivered = receiver_own;
    out.attempts.resize(sent.num_packets());
    const int cap = 1 + max_retries;
    for (int j = 0; j < sent.num_packets(); ++j) {
        bool ok = false;
        int used = 0;
        while (used < cap) {
            ++used;
            if (coin(rng)) {
                ok = true;
                break;
            }
        }
        out.attempts[j] = used;
        if (ok) {
            out.delivered.packets[j] = sent.packets[j];
        } else {
            ++out.residual_failures;
        }
    }
    return out;
}

// One baseline round: local updates followed by single-matrix torus consensus
// where every edge carries the whole packetized model. Intra-plane links are
// reliable; inter-plane links retransmit per packet up to the configured cap.
template <typename LinkProb>
inline std::vector<ModelVector> baseline_round(const std::vector<ModelVector>& models,
                                               const std::vector<Task>& tasks,
                                               const MixingMatrix& q_torus,
                                               const BaselineConfig& baseline_cfg,
                                               const TrainingConfig& training_cfg, double eta,
                                               int packet_len, LinkProb&& link_prob,
                                               std::uint64_t round_seed,
                                               CommCounters* counters = nullptr) {
    baseline_cfg.validate();
    const int n = q_torus.size();
    const int K = q_torus.sats_per_plane;
    if (static_cast<int>(models.size()) != n || static_cast<int>(tasks.size()) != n)
        throw std::invalid_argument("baseline_round: size mismatch");

    // Local phase. DSGD performs exactly one plain SGD step.
    std::vector<ModelVector> local(n);
    for (int i = 0; i < n; ++i) {
        Rng rng = substream(round_seed, {kStreamLocalUpdate, static_cast<std::uint64_t>(i)});
        switch (baseline_cfg.algorithm) {
            case Algorithm::Dsgd:
                local[i] = local_sgd(models[i], tasks[i], 1, eta, training_cfg.batch_size, rng);
                break;
            case Algorithm::DFedAvg:
                local[i] = local_sgd(models[i], tasks[i], training_cfg.local_epochs, eta,
                                     training_cfg.batch_size, rng);
                break;
            case Algorithm::DFedSam:
                local[i] = local_sam(models[i], tasks[i], training_cfg.local_epochs, eta,
                                     training_cfg.sam_radius, training_cfg.batch_size, rng);
                break;
            case Algorithm::DFedSat:
                throw std::invalid_argument("baseline_round does not run dfedsat");
        }
    }

    // Consensus phase, bulk-synchronous over the pre-consensus models.
    std::vector<PacketizedModel> packets;
    packets.reserve(local.size());
    for (const auto& m : local) packets.push_back(packetize(m, packet_len));
    const int d = packets.front().num_packets();

    std::vector<ModelVector> next(n);
    for (int i = 0; i < n; ++i) {
        ModelVector agg = q_torus.weights(i, i) * local[i];
        for (int j = 0; j < n; ++j) {
            const double w = q_torus.weights(i, j);
            if (j == i || w == 0.0) continue;
            const bool intra = (j / K) == (i / K);
            if (intra) {
                agg += w * local[j];
                if (counters) counters->intra_params += static_cast<std::int64_t>(d) * packet_len;
            } else {
                Rng rng = substream(round_seed, {kStreamRetransmit, static_cast<std::uint64_t>(j),
                                                 static_cast<std::uint64_t>(i)});
                const auto res = transmit_with_retransmission(packets[j], packets[i],
                                                              link_prob(j, i),
                                                              baseline_cfg.max_retransmissions, rng);
                agg += w * depacketize(res.delivered);
                if (counters) {
                    std::int64_t attempts = 0;
                    for (int a : res.attempts) attempts += a;
                    counters->inter_messages += 1;
                    counters->inter_packets += attempts;
                    counters->retransmissions += attempts - d;
                    counters->packet_failures += res.residual_failures;
                }
            }
        }
        next[i] = std::move(agg);
    }
    return next;
}

}  // namespace dfedsat
