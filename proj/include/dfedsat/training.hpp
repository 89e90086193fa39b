#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfedsat/rng.hpp"

namespace dfedsat {

using ModelVector = Eigen::VectorXd;

enum class TaskKind { LeastSquares, Logistic };

// One satellite's local dataset plus the loss it induces.
// least_squares: f(w) = 1/(2|B|) sum (x^T w - y)^2 + reg/2 ||w||^2
// logistic:      f(w) = 1/|B| sum log(1 + exp(-y x^T w)) + reg/2 ||w||^2, y in {-1,+1}
struct Task {
    TaskKind kind = TaskKind::LeastSquares;
    Eigen::MatrixXd features;  // n x d_w
    Eigen::VectorXd labels;    // n
    double regularization = 0.0;

    int num_samples() const { return static_cast<int>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }
};

struct TrainingConfig {
    double learning_rate = 0.1;
    double lr_decay = 0.998;
    int local_epochs = 5;   // I
    int batch_size = 64;
    int rounds = 300;       // T
    double sam_radius = 0.01;

    void validate() const {
        if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
        if (lr_decay <= 0.0 || lr_decay > 1.0) throw std::invalid_argument("lr_decay in (0, 1]");
        if (local_epochs < 1) throw std::invalid_argument("local_epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (rounds < 0) throw std::invalid_argument("rounds must be >= 0");
        if (sam_radius < 0.0) throw std::invalid_argument("sam_radius must be >= 0");
    }

    double lr_at_round(int t) const { return learning_rate * std::pow(lr_decay, t); }
};

enum class PartitionMode { Iid, Dirichlet };

// Synthetic desk-scale dataset. least_squares draws standard-normal features
// and labels X w* + noise; logistic draws two Gaussian blobs with +-1 labels.
// The hidden parameter is returned through *ground_truth_out when requested;
// passing ground_truth_in reuses an existing parameter, which is how held-out
// test sets stay consistent with their training set.
inline Task generate_dataset(TaskKind kind, int n, int dim, double noise_level, std::uint64_t seed,
                             ModelVector* ground_truth_out = nullptr,
                             const ModelVector* ground_truth_in = nullptr) {
    if (n < 1 || dim < 1) throw std::invalid_argument("dataset needs n >= 1 and dim >= 1");
    if (ground_truth_in && ground_truth_in->size() != dim)
        throw std::invalid_argument("ground truth dimension mismatch");
    Rng rng = substream(seed, {kStreamDataset});
    std::normal_distribution<double> gauss(0.0, 1.0);

    Task task;
    task.kind = kind;
    task.features.resize(n, dim);
    task.labels.resize(n);

    if (kind == TaskKind::LeastSquares) {
        ModelVector w_star(dim);
        for (int j = 0; j < dim; ++j) w_star(j) = gauss(rng);
        if (ground_truth_in) w_star = *ground_truth_in;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dim; ++j) task.features(i, j) = gauss(rng);
        for (int i = 0; i < n; ++i)
            task.labels(i) = task.features.row(i).dot(w_star) + noise_level * gauss(rng);
        if (ground_truth_out) *ground_truth_out = w_star;
    } else {
        // Blob centers at +-mu along a random unit direction.
        ModelVector direction(dim);
        for (int j = 0; j < dim; ++j) direction(j) = gauss(rng);
        direction.normalize();
        if (ground_truth_in) direction = *ground_truth_in;
        const double mu = 2.0;
        std::bernoulli_distribution coin(0.5);
        for (int i = 0; i < n; ++i) {
            const double label = coin(rng) ? 1.0 : -1.0;
            for (int j = 0; j < dim; ++j)
                task.features(i, j) = label * mu * direction(j) + (1.0 + noise_level) * gauss(rng);
            task.labels(i) = label;
        }
        if (ground_truth_out) *ground_truth_out = direction;
    }
    return task;
}

namespace detail {

inline std::vector<Task> tasks_from_index_sets(const Task& task,
                                               const std::vector<std::vector<int>>& index_sets) {
    std::vector<Task> out;
    out.reserve(index_sets.size());
    for (const auto& idx : index_sets) {
        Task part;
        part.kind = task.kind;
        part.regularization = task.regularization;
        part.features.resize(static_cast<int>(idx.size()), task.dim());
        part.labels.resize(static_cast<int>(idx.size()));
        for (int r = 0; r < static_cast<int>(idx.size()); ++r) {
            part.features.row(r) = task.features.row(idx[r]);
            part.labels(r) = task.labels(idx[r]);
        }
        out.push_back(std::move(part));
    }
    return out;
}

}  // namespace detail

// Splits a task across num_parts satellites. IID shuffles and deals evenly.
// Dirichlet(alpha) draws per-class allocation proportions for classification;
// for regression it keeps an IID index split but regenerates labels with
// per-satellite parameters w* + delta, delta ~ N(0, (0.5/sqrt(alpha))^2 I),
// so smaller alpha means more heterogeneity there too.
inline std::vector<Task> partition_data(const Task& task, int num_parts, PartitionMode mode,
                                        double alpha, std::uint64_t seed) {
    if (num_parts < 1) throw std::invalid_argument("num_parts must be >= 1");
    if (task.num_samples() < num_parts)
        throw std::invalid_argument("fewer samples than satellites");
    if (mode == PartitionMode::Dirichlet && !(alpha > 0.0))
        throw std::invalid_argument("dirichlet alpha must be > 0");
    Rng rng = substream(seed, {kStreamPartition});

    const int n = task.num_samples();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::vector<int>> index_sets(num_parts);

    if (mode == PartitionMode::Iid || task.kind == TaskKind::LeastSquares) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int i = 0; i < n; ++i) index_sets[i % num_parts].push_back(order[i]);
    } else {
        // Per-class Dirichlet allocation. Classes are the distinct labels.
        std::vector<double> classes(task.labels.data(), task.labels.data() + n);
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

        std::gamma_distribution<double> gamma(alpha, 1.0);
        for (double cls : classes) {
            std::vector<int> members;
            for (int i = 0; i < n; ++i)
                if (task.labels(i) == cls) members.push_back(i);
            std::shuffle(members.begin(), members.end(), rng);

            std::vector<double> props(num_parts);
            double total = 0.0;
            for (auto& g : props) {
                g = std::max(gamma(rng), 1e-12);
                total += g;
            }
            // Cumulative quotas over the shuffled class members.
            std::size_t taken = 0;
            double cum = 0.0;
            for (int part = 0; part < num_parts; ++part) {
                cum += props[part] / total;
                const std::size_t upto =
                    (part == num_parts - 1)
                        ? members.size()
                        : std::min(members.size(),
                                   static_cast<std::size_t>(std::llround(cum * members.size())));
                for (; taken < upto; ++taken) index_sets[part].push_back(members[taken]);
            }
        }
        // Every satellite needs at least one sample; steal from the largest set.
        for (auto& set : index_sets) {
            if (!set.empty()) continue;
            auto donor = std::max_element(index_sets.begin(), index_sets.end(),
                                          [](const auto& a, const auto& b) {
                                              return a.size() < b.size();
                                          });
            set.push_back(donor->back());
            donor->pop_back();
        }
    }

    std::vector<Task> parts = detail::tasks_from_index_sets(task, index_sets);

    if (mode == PartitionMode::Dirichlet && task.kind == TaskKind::LeastSquares) {
        // Heterogeneity for regression: per-satellite label-generating model.
        const int dim = task.dim();
        const double delta_scale = 0.5 / std::sqrt(alpha);
        std::normal_distribution<double> gauss(0.0, 1.0);
        // Recover labels as X w_mk + noise around the shared fit; use the
        // global ridge solution as the shared center.
        ModelVector center = [&] {
            const Eigen::MatrixXd& x = task.features;
            Eigen::MatrixXd gram = x.transpose() * x / static_cast<double>(n);
            return ModelVector(gram.ldlt().solve(x.transpose() * task.labels / n));
        }();
        for (auto& part : parts) {
            ModelVector delta(dim);
            for (int j = 0; j < dim; ++j) delta(j) = delta_scale * gauss(rng);
            const ModelVector w_local = center + delta;
            for (int i = 0; i < part.num_samples(); ++i) {
                const double residual = part.labels(i) - part.features.row(i).dot(center);
                part.labels(i) = part.features.row(i).dot(w_local) + residual;
            }
        }
    }
    return parts;
}

// Mean loss and gradient over the given batch rows.
inline std::pair<double, ModelVector> loss_and_gradient(const Task& task, const ModelVector& model,
                                                        const std::vector<int>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    if (model.size() != task.dim()) throw std::invalid_argument("model/feature dim mismatch");
    const double inv = 1.0 / static_cast<double>(batch.size());

    double loss = 0.0;
    ModelVector grad = ModelVector::Zero(task.dim());
    if (task.kind == TaskKind::LeastSquares) {
        for (int i : batch) {
            const double r = task.features.row(i).dot(model) - task.labels(i);
            loss += 0.5 * r * r;
            grad += r * task.features.row(i).transpose();
        }
    } else {
        for (int i : batch) {
            const double margin = task.labels(i) * task.features.row(i).dot(model);
            // log(1 + exp(-m)) evaluated stably on both tails
            loss += margin > 0 ? std::log1p(std::exp(-margin))
                               : -margin + std::log1p(std::exp(margin));
            const double sig = 1.0 / (1.0 + std::exp(margin));
            grad += -task.labels(i) * sig * task.features.row(i).transpose();
        }
    }
    loss *= inv;
    grad *= inv;
    if (task.regularization > 0.0) {
        loss += 0.5 * task.regularization * model.squaredNorm();
        grad += task.regularization * model;
    }
    return {loss, grad};
}

inline std::vector<int> full_batch(const Task& task) {
    std::vector<int> all(task.num_samples());
    std::iota(all.begin(), all.end(), 0);
    return all;
}

inline std::pair<double, ModelVector> full_loss_and_gradient(const Task& task,
                                                             const ModelVector& model) {
    return loss_and_gradient(task, model, full_batch(task));
}

namespace detail {

inline std::vector<int> sample_batch(int n, int batch_size, Rng& rng) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<int> batch(static_cast<std::size_t>(std::min(batch_size, n)));
    if (batch_size >= n) {
        std::iota(batch.begin(), batch.end(), 0);  // full batch, no sampling noise
    } else {
        for (auto& b : batch) b = pick(rng);  // with replacement
    }
    return batch;
}

}  // namespace detail

// I steps of w <- w - eta * grad f(w; minibatch), minibatches sampled with
// replacement per step.
inline ModelVector local_sgd(ModelVector model, const Task& task, int num_steps, double eta,
                             int batch_size, Rng& rng) {
    if (num_steps < 1) throw std::invalid_argument("num_steps must be >= 1");
    for (int i = 0; i < num_steps; ++i) {
        const auto batch = detail::sample_batch(task.num_samples(), batch_size, rng);
        model -= eta * loss_and_gradient(task, model, batch).second;
    }
    return model;
}

// One sharpness-aware step: perturb along the normalized batch gradient, then
// descend with the gradient taken at the perturbed point (same batch).
inline ModelVector sam_step(const ModelVector& model, const Task& task, double eta, double rho,
                            const std::vector<int>& batch) {
    const ModelVector g1 = loss_and_gradient(task, model, batch).second;
    const double norm = g1.norm();
    const ModelVector adversarial = norm > 0.0 ? ModelVector(model + rho / norm * g1) : model;
    return model - eta * loss_and_gradient(task, adversarial, batch).second;
}

inline ModelVector local_sam(ModelVector model, const Task& task, int num_steps, double eta,
                             double rho, int batch_size, Rng& rng) {
    if (num_steps < 1) throw std::invalid_argument("num_steps must be >= 1");
    for (int i = 0; i < num_steps; ++i) {
        const auto batch = detail::sample_batch(task.num_samples(), batch_size, rng);
        model = sam_step(model, task, eta, rho, batch);
    }
    return model;
}

// Closed-form minimizer of the pooled least-squares objective (+ ridge term):
// solves (X^T X / n + reg I) w = X^T y / n.
inline ModelVector least_squares_optimum(const Task& task) {
    if (task.kind != TaskKind::LeastSquares)
        throw std::invalid_argument("closed-form optimum only for least squares");
    const int n = task.num_samples();
    Eigen::MatrixXd gram = task.features.transpose() * task.features / static_cast<double>(n);
    gram.diagonal().array() += task.regularization;
    return gram.ldlt().solve(task.features.transpose() * task.labels / static_cast<double>(n));
}

// Pools per-satellite tasks back into one dataset (used for global metrics).
inline Task pooled_task(const std::vector<Task>& parts) {
    if (parts.empty()) throw std::invalid_argument("no tasks to pool");
    int total = 0;
    for (const auto& p : parts) total += p.num_samples();
    Task out;
    out.kind = parts.front().kind;
    out.regularization = parts.front().regularization;
    out.features.resize(total, parts.front().dim());
    out.labels.resize(total);
    int row = 0;
    for (const auto& p : parts) {
        out.features.middleRows(row, p.num_samples()) = p.features;
        out.labels.segment(row, p.num_samples()) = p.labels;
        row += p.num_samples();
    }
    return out;
}

}  // namespace dfedsat
