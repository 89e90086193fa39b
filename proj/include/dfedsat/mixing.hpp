#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dfedsat {

enum class MatrixKind { FullTorus, Intra, Inter, ExpectedInter };

// Dense row-stochastic mixing matrix over the plane-major satellite index
// (m * K + k). Rows sum to 1; the sparsity pattern is fixed by the kind.
struct MixingMatrix {
    MatrixKind kind = MatrixKind::Intra;
    int planes = 1;          // M
    int sats_per_plane = 1;  // K
    Eigen::MatrixXd weights;

    int size() const { return planes * sats_per_plane; }
};

namespace detail {

inline void check_sizes(const std::vector<double>& data_sizes, int planes, int sats_per_plane) {
    if (planes < 1 || sats_per_plane < 1)
        throw std::invalid_argument("planes and sats_per_plane must be >= 1");
    if (static_cast<int>(data_sizes.size()) != planes * sats_per_plane)
        throw std::invalid_argument("data_sizes must have one entry per satellite");
    for (double s : data_sizes)
        if (!(s > 0.0)) throw std::invalid_argument("data sizes must be positive");
}

}  // namespace detail

// Block-diagonal intra-plane matrix: block m has identical rows equal to the
// plane-m data-size distribution, so one application synchronizes the plane.
inline MixingMatrix intra_plane_matrix(const std::vector<double>& data_sizes, int planes,
                                       int sats_per_plane) {
    detail::check_sizes(data_sizes, planes, sats_per_plane);
    const int n = planes * sats_per_plane;
    MixingMatrix q{MatrixKind::Intra, planes, sats_per_plane, Eigen::MatrixXd::Zero(n, n)};
    for (int m = 0; m < planes; ++m) {
        double plane_mass = 0.0;
        for (int k = 0; k < sats_per_plane; ++k) plane_mass += data_sizes[m * sats_per_plane + k];
        for (int k = 0; k < sats_per_plane; ++k) {
            for (int j = 0; j < sats_per_plane; ++j) {
                q.weights(m * sats_per_plane + k, m * sats_per_plane + j) =
                    data_sizes[m * sats_per_plane + j] / plane_mass;
            }
        }
    }
    return q;
}

// Inter-plane gossip matrix: row (m,k) mixes over the same-slot satellites of
// the adjacent planes. M=2 falls back to the single deduplicated neighbor,
// M=1 to the identity (gossip skipped).
inline MixingMatrix inter_plane_matrix(const std::vector<double>& data_sizes, int planes,
                                       int sats_per_plane) {
    detail::check_sizes(data_sizes, planes, sats_per_plane);
    const int M = planes, K = sats_per_plane;
    const int n = M * K;
    MixingMatrix q{MatrixKind::Inter, M, K, Eigen::MatrixXd::Zero(n, n)};
    if (M == 1) {
        q.weights.setIdentity();
        return q;
    }
    for (int m = 0; m < M; ++m) {
        const int ml = (m + M - 1) % M;
        const int mr = (m + 1) % M;
        for (int k = 0; k < K; ++k) {
            const int row = m * K + k;
            std::vector<int> group{m};
            group.push_back(ml);
            if (mr != ml) group.push_back(mr);
            double mass = 0.0;
            for (int nb : group) mass += data_sizes[nb * K + k];
            for (int nb : group) q.weights(row, nb * K + k) = data_sizes[nb * K + k] / mass;
        }
    }
    return q;
}

// E{Q_r}: off-diagonal entries scale by the link success probability, the
// diagonal absorbs the expected self-compensated mass so rows still sum to 1.
// link_prob(i, j) must be symmetric over the inter-plane sparsity pattern.
template <typename LinkProb>
inline MixingMatrix expected_inter_matrix(const MixingMatrix& q_r, LinkProb&& link_prob) {
    if (q_r.kind != MatrixKind::Inter) throw std::invalid_argument("expected an inter matrix");
    const int n = q_r.size();
    MixingMatrix e{MatrixKind::ExpectedInter, q_r.planes, q_r.sats_per_plane,
                   Eigen::MatrixXd::Zero(n, n)};
    for (int i = 0; i < n; ++i) {
        double off_mass = 0.0;
        for (int j = 0; j < n; ++j) {
            if (i == j || q_r.weights(i, j) == 0.0) continue;
            const double p = link_prob(i, j);
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("probability outside [0, 1]");
            e.weights(i, j) = q_r.weights(i, j) * p;
            off_mass += e.weights(i, j);
        }
        e.weights(i, i) = 1.0 - off_mass;
    }
    return e;
}

inline MixingMatrix expected_inter_matrix(const MixingMatrix& q_r, double uniform_p) {
    return expected_inter_matrix(q_r, [uniform_p](int, int) { return uniform_p; });
}

// ||Q - J||_2 via power iteration on (Q-J)^T (Q-J); for symmetric Q this is
// max{|lambda_2|, |lambda_n|}. Throws if the iteration fails to settle.
inline double spectral_lambda(const Eigen::MatrixXd& q, double rel_tol = 1e-10,
                              int max_iters = 100000) {
    const int n = static_cast<int>(q.rows());
    if (n == 0 || q.cols() != n) throw std::invalid_argument("matrix must be square");
    if (n == 1) return 0.0;
    const Eigen::MatrixXd d = q - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    const Eigen::MatrixXd b = d.transpose() * d;
    if (b.norm() < 1e-300) return 0.0;

    // Fixed pseudo-random start vector keeps the result deterministic.
    Eigen::VectorXd v(n);
    std::uint64_t s = 0x2545f4914f6cdd1dULL;
    for (int i = 0; i < n; ++i) {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        v(i) = static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5;
    }
    v.normalize();

    double eig = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd w = b * v;
        const double norm = w.norm();
        if (norm < 1e-300) return 0.0;
        w /= norm;
        const double next = w.dot(b * w);
        if (it > 0 && std::abs(next - eig) <= rel_tol * std::abs(next)) {
            return std::sqrt(std::max(next, 0.0));
        }
        eig = next;
        v = std::move(w);
    }
    throw std::runtime_error("spectral_lambda: power iteration did not converge");
}

inline double spectral_lambda(const MixingMatrix& q) { return spectral_lambda(q.weights); }

// Slot-k M x M block of an inter/expected-inter matrix. Gossip only couples
// same-slot satellites, so the full matrix is the direct sum of these rings.
inline Eigen::MatrixXd inter_slot_block(const MixingMatrix& q, int slot) {
    if (q.kind != MatrixKind::Inter && q.kind != MatrixKind::ExpectedInter)
        throw std::invalid_argument("slot blocks only exist for inter matrices");
    if (slot < 0 || slot >= q.sats_per_plane) throw std::out_of_range("slot out of range");
    Eigen::MatrixXd block(q.planes, q.planes);
    for (int m = 0; m < q.planes; ++m)
        for (int n = 0; n < q.planes; ++n)
            block(m, n) = q.weights(m * q.sats_per_plane + slot, n * q.sats_per_plane + slot);
    return block;
}

// lambda_a: contraction factor of the intra-plane stage on the full stack.
inline double lambda_a(const MixingMatrix& q_a) {
    if (q_a.kind != MatrixKind::Intra) throw std::invalid_argument("expected an intra matrix");
    return spectral_lambda(q_a.weights);
}

// lambda_r: worst per-slot ring contraction of E{Q_r}. The slot rings act
// independently, and only their consensus directions matter for the combined
// operator E{Q_r}^C * Q_a, so the plane-level blocks carry the spectral gap.
inline double lambda_r(const MixingMatrix& e_q_r) {
    double worst = 0.0;
    for (int k = 0; k < e_q_r.sats_per_plane; ++k)
        worst = std::max(worst, spectral_lambda(inter_slot_block(e_q_r, k)));
    return worst;
}

struct ContractionReport {
    bool holds = true;
    double lambda = 0.0;
    // margin[t-1] = lambda^t + tol - ||Q^t - J||_op  (>= 0 when the bound holds)
    std::vector<double> margins;
};

// Numeric check of ||Q^t - J||_op <= lambda^t for t = 1..t_max. Restricted to
// symmetric doubly stochastic inputs; pass lambda_override to test a composite
// bound such as lambda_a * lambda_r^C.
inline ContractionReport contraction_bound_check(const Eigen::MatrixXd& q, int t_max,
                                                 double lambda_override = -1.0,
                                                 double tol = 1e-9) {
    const int n = static_cast<int>(q.rows());
    if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("contraction bound check requires a symmetric matrix");

    ContractionReport report;
    report.lambda = lambda_override >= 0.0 ? lambda_override : spectral_lambda(q);
    const Eigen::MatrixXd j = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    double bound = 1.0;
    for (int t = 1; t <= t_max; ++t) {
        power = power * q;
        bound *= report.lambda;
        const double norm = spectral_lambda(power);  // ||Q^t - J||: Q^t is stochastic too
        const double margin = bound + tol - norm;
        report.margins.push_back(margin);
        if (margin < 0.0) report.holds = false;
    }
    return report;
}

inline ContractionReport contraction_bound_check(const MixingMatrix& q, int t_max,
                                                 double lambda_override = -1.0) {
    return contraction_bound_check(q.weights, t_max, lambda_override);
}

}  // namespace dfedsat
