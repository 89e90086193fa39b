#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfedsat/baselines.hpp"
#include "dfedsat/consensus.hpp"
#include "dfedsat/link_model.hpp"
#include "dfedsat/mixing.hpp"
#include "dfedsat/rng.hpp"
#include "dfedsat/topology.hpp"
#include "dfedsat/training.hpp"

namespace dfedsat {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    int round;
    explicit NumericError(int r)
        : std::runtime_error("non-finite model detected at round " + std::to_string(r)),
          round(r) {}
};

// Per-round record. Byte counters are cumulative across rounds.
struct RoundMetrics {
    int round = 0;
    double global_loss = 0.0;       // pooled loss at the satellite-average model
    double grad_norm_sq = 0.0;      // ||grad F(w_bar)||^2 on the full dataset
    double consensus_error = 0.0;   // mean squared deviation from w_bar
    double test_metric = 0.0;       // accuracy (logistic) or held-out loss (regression)
    std::int64_t bytes_intra = 0;
    std::int64_t bytes_inter = 0;
    std::int64_t retransmissions = 0;
    std::int64_t packet_failures = 0;
    // Data-weighted average loss, tracked alongside when sizes are non-uniform.
    double global_loss_weighted = 0.0;
};

struct ExperimentConfig {
    ConstellationConfig constellation;
    LinkBudgetParams link;
    std::optional<double> link_success_override;

    TaskKind task_kind = TaskKind::LeastSquares;
    int n_samples = 1024;
    int dim = 16;
    double noise = 0.1;
    PartitionMode partition = PartitionMode::Iid;
    double alpha = 0.6;

    TrainingConfig training;
    ConsensusConfig consensus;
    BaselineConfig baseline;

    std::uint64_t seed = 1;
    std::uint64_t data_seed = 1;
    std::string output_path;

    void validate() const {
        constellation.validate();
        link.validate();
        training.validate();
        consensus.validate();
        baseline.validate();
        if (n_samples < constellation.total_satellites())
            throw ConfigError("n_samples must cover at least one sample per satellite");
        if (dim < 1) throw ConfigError("dim must be >= 1");
        if (partition == PartitionMode::Dirichlet && !(alpha > 0.0))
            throw ConfigError("alpha must be > 0 for dirichlet partition");
    }
};

// Per-pair packet success probabilities over flat satellite indices. Intra
// links and self pairs are reliable; only inter-plane links take p < 1.
inline Eigen::MatrixXd link_probability_matrix(const ExperimentConfig& cfg) {
    const int n = cfg.constellation.total_satellites();
    Eigen::MatrixXd probs = Eigen::MatrixXd::Ones(n, n);
    if (cfg.consensus.links == LinkSampler::Reliable) return probs;

    const ConstellationGraph graph = build_constellation(cfg.constellation);
    for (const auto& [a, b] : graph.inter_edges) {
        double p = 1.0;
        if (cfg.consensus.links == LinkSampler::Pinned) {
            p = cfg.consensus.pinned_p;
        } else if (cfg.link_success_override) {
            p = *cfg.link_success_override;
        } else {
            p = success_probability(cfg.link, link_distance(cfg.constellation, a, b));
        }
        const int ia = sat_index(cfg.constellation, a);
        const int ib = sat_index(cfg.constellation, b);
        probs(ia, ib) = probs(ib, ia) = p;
    }
    return probs;
}

// Mean squared deviation of the satellite models from their average.
inline double consensus_error(const std::vector<ModelVector>& models) {
    if (models.empty()) throw std::invalid_argument("consensus_error: no models");
    ModelVector mean = ModelVector::Zero(models.front().size());
    for (const auto& m : models) mean += m;
    mean /= static_cast<double>(models.size());
    double err = 0.0;
    for (const auto& m : models) err += (m - mean).squaredNorm();
    return err / static_cast<double>(models.size());
}

namespace detail {

inline double test_metric(const Task& test, const ModelVector& w) {
    if (test.kind == TaskKind::Logistic) {
        int correct = 0;
        for (int i = 0; i < test.num_samples(); ++i) {
            const double score = test.features.row(i).dot(w);
            if ((score >= 0.0 ? 1.0 : -1.0) == test.labels(i)) ++correct;
        }
        return static_cast<double>(correct) / test.num_samples();
    }
    return full_loss_and_gradient(test, w).first;
}

inline bool finite(const ModelVector& v) { return v.allFinite(); }

}  // namespace detail

inline std::vector<RoundMetrics> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const int M = cfg.constellation.num_planes;
    const int K = cfg.constellation.sats_per_plane;
    const int n_sats = M * K;

    // The held-out set shares the training set's generating parameter.
    ModelVector truth;
    const Task train = generate_dataset(cfg.task_kind, cfg.n_samples, cfg.dim, cfg.noise,
                                        cfg.data_seed, &truth);
    const Task test = generate_dataset(cfg.task_kind, std::max(64, cfg.n_samples / 5), cfg.dim,
                                       cfg.noise, derive_seed(cfg.data_seed, {kStreamTestSet}), nullptr,
                                       &truth);
    const std::vector<Task> parts =
        partition_data(train, n_sats, cfg.partition, cfg.alpha, cfg.data_seed);
    const Task pooled = pooled_task(parts);

    std::vector<double> sizes(n_sats);
    for (int i = 0; i < n_sats; ++i) sizes[i] = parts[i].num_samples();

    const Eigen::MatrixXd probs = link_probability_matrix(cfg);
    auto link_prob = [&probs](int from, int to) { return probs(from, to); };

    MixingMatrix q_torus;
    if (cfg.baseline.algorithm != Algorithm::DFedSat)
        q_torus = torus_mixing_matrix(sizes, M, K);

    std::vector<ModelVector> models(n_sats, ModelVector::Zero(cfg.dim));
    CommCounters counters;
    std::vector<RoundMetrics> metrics;
    metrics.reserve(cfg.training.rounds);

    double total_mass = 0.0;
    for (double s : sizes) total_mass += s;

    for (int t = 0; t < cfg.training.rounds; ++t) {
        const double eta = cfg.training.lr_at_round(t);
        const std::uint64_t round_seed = derive_seed(cfg.seed, {kStreamRound, static_cast<std::uint64_t>(t)});

        if (cfg.baseline.algorithm == Algorithm::DFedSat) {
            std::vector<ModelVector> local(n_sats);
            for (int i = 0; i < n_sats; ++i) {
                Rng rng = substream(round_seed, {kStreamLocalUpdate, static_cast<std::uint64_t>(i)});
                local[i] = local_sgd(models[i], parts[i], cfg.training.local_epochs, eta,
                                     cfg.training.batch_size, rng);
            }
            models = model_consensus(local, sizes, M, K, cfg.consensus, link_prob,
                                     derive_seed(round_seed, {kStreamGossipMask}), &counters);
        } else {
            models = baseline_round(models, parts, q_torus, cfg.baseline, cfg.training, eta,
                                    cfg.consensus.packet_len, link_prob, round_seed, &counters);
        }

        ModelVector mean = ModelVector::Zero(cfg.dim);
        ModelVector weighted = ModelVector::Zero(cfg.dim);
        for (int i = 0; i < n_sats; ++i) {
            mean += models[i];
            weighted += sizes[i] / total_mass * models[i];
        }
        mean /= static_cast<double>(n_sats);
        if (!detail::finite(mean)) throw NumericError(t);

        const auto [loss, grad] = full_loss_and_gradient(pooled, mean);
        if (!std::isfinite(loss)) throw NumericError(t);

        RoundMetrics rm;
        rm.round = t;
        rm.global_loss = loss;
        rm.grad_norm_sq = grad.squaredNorm();
        rm.consensus_error = consensus_error(models);
        rm.test_metric = detail::test_metric(test, mean);
        rm.bytes_intra = counters.intra_params * 8;
        rm.bytes_inter = counters.inter_packets * cfg.consensus.packet_len * 8;
        rm.retransmissions = counters.retransmissions;
        rm.packet_failures = counters.packet_failures;
        rm.global_loss_weighted = full_loss_and_gradient(pooled, weighted).first;
        metrics.push_back(rm);
    }
    return metrics;
}

// --- metrics persistence ------------------------------------------------

enum class MetricsFormat { Csv, Json };

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline constexpr const char* kMetricsHeader =
    "round,global_loss,grad_norm_sq,consensus_error,test_metric,bytes_intra,bytes_inter,"
    "retransmissions,packet_failures";

inline void write_metrics(const std::vector<RoundMetrics>& metrics, const std::string& path,
                          MetricsFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    if (format == MetricsFormat::Csv) {
        out << kMetricsHeader << "\n";
        for (const auto& m : metrics) {
            out << m.round << ',' << detail::fmt_double(m.global_loss) << ','
                << detail::fmt_double(m.grad_norm_sq) << ','
                << detail::fmt_double(m.consensus_error) << ','
                << detail::fmt_double(m.test_metric) << ',' << m.bytes_intra << ','
                << m.bytes_inter << ',' << m.retransmissions << ',' << m.packet_failures << "\n";
        }
    } else {
        out << "[";
        for (std::size_t i = 0; i < metrics.size(); ++i) {
            const auto& m = metrics[i];
            out << (i == 0 ? "\n" : ",\n");
            out << "  {\"round\": " << m.round
                << ", \"global_loss\": " << detail::fmt_double(m.global_loss)
                << ", \"grad_norm_sq\": " << detail::fmt_double(m.grad_norm_sq)
                << ", \"consensus_error\": " << detail::fmt_double(m.consensus_error)
                << ", \"test_metric\": " << detail::fmt_double(m.test_metric)
                << ", \"bytes_intra\": " << m.bytes_intra
                << ", \"bytes_inter\": " << m.bytes_inter
                << ", \"retransmissions\": " << m.retransmissions
                << ", \"packet_failures\": " << m.packet_failures << "}";
        }
        out << "\n]\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<RoundMetrics> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw std::runtime_error("unexpected metrics header in " + path);
    std::vector<RoundMetrics> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        RoundMetrics m;
        long long bi = 0, bo = 0, rt = 0, pf = 0;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lld,%lld,%lld,%lld", &m.round,
                        &m.global_loss, &m.grad_norm_sq, &m.consensus_error, &m.test_metric, &bi,
                        &bo, &rt, &pf) != 9)
            throw std::runtime_error("malformed metrics row in " + path);
        m.bytes_intra = bi;
        m.bytes_inter = bo;
        m.retransmissions = rt;
        m.packet_failures = pf;
        out.push_back(m);
    }
    return out;
}

// --- parameter sweeps -----------------------------------------------------

// Grid over the experiment knobs the trend studies vary. Empty dimensions
// keep the base-config value.
struct SweepGrid {
    std::vector<int> gossip_rounds;
    std::vector<int> planes;  // total satellite count stays fixed
    std::vector<double> pinned_p;
    std::vector<double> tx_power_dbm;
    std::vector<Algorithm> algorithms;
    std::vector<double> alphas;

    bool empty() const {
        return gossip_rounds.empty() && planes.empty() && pinned_p.empty() &&
               tx_power_dbm.empty() && algorithms.empty() && alphas.empty();
    }
};

struct SweepCell {
    int index = 0;
    ExperimentConfig config;
    std::string label;
    double final_loss = 0.0;
    double final_consensus_error = 0.0;
    std::int64_t total_bytes = 0;
    double lambda_a = 0.0;
    double lambda_r = 0.0;
    double lambda_product = 0.0;  // lambda_a * lambda_r^C
    std::vector<RoundMetrics> metrics;
};

struct SpectralQuantities {
    double lambda_a = 0.0;
    double lambda_r = 0.0;
    double product = 0.0;  // lambda_a * lambda_r^C
};

// Spectral quantities of the configured mixing matrices under the configured
// link quality; data weights come from the realized partition sizes.
inline SpectralQuantities spectral_for_config(const ExperimentConfig& cfg) {
    const int M = cfg.constellation.num_planes;
    const int K = cfg.constellation.sats_per_plane;
    const Task train =
        generate_dataset(cfg.task_kind, cfg.n_samples, cfg.dim, cfg.noise, cfg.data_seed);
    const auto parts = partition_data(train, M * K, cfg.partition, cfg.alpha, cfg.data_seed);
    std::vector<double> sizes(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) sizes[i] = parts[i].num_samples();

    const MixingMatrix q_a = intra_plane_matrix(sizes, M, K);
    const MixingMatrix q_r = inter_plane_matrix(sizes, M, K);
    const Eigen::MatrixXd probs = link_probability_matrix(cfg);
    const MixingMatrix e_q_r =
        expected_inter_matrix(q_r, [&probs](int i, int j) { return probs(i, j); });
    SpectralQuantities out;
    out.lambda_a = lambda_a(q_a);
    out.lambda_r = lambda_r(e_q_r);
    out.product = out.lambda_a * std::pow(out.lambda_r, cfg.consensus.gossip_rounds);
    return out;
}

inline std::vector<SweepCell> sweep(const ExperimentConfig& base, const SweepGrid& grid) {
    auto dim_or = [](auto values, auto fallback) {
        if (values.empty()) values.push_back(fallback);
        return values;
    };
    const auto cs = dim_or(grid.gossip_rounds, base.consensus.gossip_rounds);
    const auto ms = dim_or(grid.planes, base.constellation.num_planes);
    const auto algos = dim_or(grid.algorithms, base.baseline.algorithm);
    const auto alphas = dim_or(grid.alphas, base.alpha);

    // p and tx-power sweeps are alternative link axes; combining both in one
    // grid would be ambiguous.
    if (!grid.pinned_p.empty() && !grid.tx_power_dbm.empty())
        throw ConfigError("sweep: pick either pinned_p or tx_power_dbm, not both");
    struct LinkCell {
        std::optional<double> p;
        std::optional<double> dbm;
    };
    std::vector<LinkCell> links;
    for (double p : grid.pinned_p) links.push_back({p, std::nullopt});
    for (double dbm : grid.tx_power_dbm) links.push_back({std::nullopt, dbm});
    if (links.empty()) links.push_back({std::nullopt, std::nullopt});

    const int total_sats = base.constellation.total_satellites();

    std::vector<SweepCell> cells;
    int index = 0;
    for (int c : cs)
        for (int m : ms)
            for (const auto& link : links)
                for (Algorithm algo : algos)
                    for (double alpha : alphas) {
                        SweepCell cell;
                        cell.index = index;
                        cell.config = base;
                        cell.config.consensus.gossip_rounds = c;
                        if (m != base.constellation.num_planes) {
                            if (total_sats % m != 0)
                                throw ConfigError("sweep: total satellites not divisible by M");
                            cell.config.constellation.num_planes = m;
                            cell.config.constellation.sats_per_plane = total_sats / m;
                        }
                        if (link.p) {
                            cell.config.consensus.links = LinkSampler::Pinned;
                            cell.config.consensus.pinned_p = *link.p;
                        } else if (link.dbm) {
                            cell.config.consensus.links = LinkSampler::Physical;
                            cell.config.link.set_transmit_power_dbm(*link.dbm);
                        }
                        cell.config.baseline.algorithm = algo;
                        cell.config.alpha = alpha;
                        cell.config.seed =
                            derive_seed(base.seed, {kStreamSweepCell, static_cast<std::uint64_t>(index)});

                        char label[160];
                        std::snprintf(label, sizeof(label), "C=%d,M=%d,link=%s,algo=%s,alpha=%g", c,
                                      cell.config.constellation.num_planes,
                                      link.p ? ("p" + detail::fmt_double(*link.p)).c_str()
                                             : (link.dbm ? (detail::fmt_double(*link.dbm) + "dBm").c_str()
                                                         : "base"),
                                      to_string(algo), alpha);
                        cell.label = label;

                        cell.metrics = run_experiment(cell.config);
                        if (!cell.metrics.empty()) {
                            const auto& last = cell.metrics.back();
                            cell.final_loss = last.global_loss;
                            cell.final_consensus_error = last.consensus_error;
                            cell.total_bytes = last.bytes_intra + last.bytes_inter;
                        }
                        const SpectralQuantities sq = spectral_for_config(cell.config);
                        cell.lambda_a = sq.lambda_a;
                        cell.lambda_r = sq.lambda_r;
                        cell.lambda_product = sq.product;
                        cells.push_back(std::move(cell));
                        ++index;
                    }
    return cells;
}

inline void write_sweep_summary(const std::vector<SweepCell>& cells, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "cell,label,C,M,K,algorithm,alpha,final_loss,final_consensus_error,total_bytes,"
           "lambda_a,lambda_r,lambda_a_times_lambda_r_pow_C\n";
    for (const auto& c : cells) {
        out << c.index << ',' << '"' << c.label << '"' << ',' << c.config.consensus.gossip_rounds
            << ',' << c.config.constellation.num_planes << ','
            << c.config.constellation.sats_per_plane << ',' << to_string(c.config.baseline.algorithm)
            << ',' << detail::fmt_double(c.config.alpha) << ',' << detail::fmt_double(c.final_loss)
            << ',' << detail::fmt_double(c.final_consensus_error) << ',' << c.total_bytes << ','
            << detail::fmt_double(c.lambda_a) << ',' << detail::fmt_double(c.lambda_r) << ','
            << detail::fmt_double(c.lambda_product) << "\n";
    }
}

}  // namespace dfedsat
