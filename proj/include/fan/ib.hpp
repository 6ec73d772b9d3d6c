#pragma once

#include <cstdint>
#include <vector>

#include "fan/tensor.hpp"

namespace fan {

// Iterative information-bottleneck clustering with a Gaussian
// approximation of the per-cluster densities, plus the matrix attention
// form of the update. Points are rows (N x d); centers are rows (C x d).

enum class IBConvention { PaperLiteral, StandardIB };

struct IBConfig {
    double beta = 1.0;
    double epsilon = 1e-2; // smoothing of the observation model
    IBConvention convention = IBConvention::StandardIB;
    size_t max_iters = 100;
    double tol = 1e-6; // convergence threshold on center movement
    bool normalized = false; // keep mu_c^T Sigma^{-1} mu_c = 1

    void validate() const;
};

struct IBState {
    Tensor centers;              // C x d
    Tensor sigma;                // d x d, shared SPD covariance
    std::vector<double> masses;  // n_c, sum over c = N
    Tensor assignments;          // N x C, rows sum to 1
    bool degenerate = false;     // negative proportionality mass was hit
    bool center_frozen = false;  // an empty cluster kept its previous center

    size_t num_clusters() const { return centers.rows(); }
    double total_mass() const;
};

struct AssignResult {
    Tensor q; // N x C, rows sum to 1
    bool degenerate = false;
};

AssignResult ib_assign(const Tensor& points, const IBState& state, const IBConfig& cfg);

// The literal appendix update mu_c = (1/N) sum_i q(c|i) x_i. Empty clusters
// keep the previous center and set state-level frozen flag via `frozen`.
Tensor ib_update_centers(const Tensor& points, const Tensor& q, const IBState& state,
                         bool normalized = false, bool* frozen = nullptr);

// Weighted mean sum_i q(c|i) x_i / sum_i q(c|i): the exact minimizer of the
// q-weighted squared Mahalanobis loss. Used by the clustering driver.
Tensor weighted_mean_centers(const Tensor& points, const Tensor& q, const IBState& state,
                             bool* frozen = nullptr);

// One full appendix step: Mahalanobis-distance softmax assignment times the
// log-mass prefactor, folded into new centers. Oracle side of the
// attention-form equivalence.
Tensor ib_explicit_step(const Tensor& points, const IBState& state);

// Attention form of the same step: Softmax(Q^T K / d_hat) with d_hat = 1/2,
// Q = Sigma^{-1} X, K columns = centers. Requires normalized centers.
Tensor ib_matrix_step(const Tensor& points, const IBState& state);

// Renormalizes rows of `centers` so that mu^T Sigma^{-1} mu = 1.
Tensor normalize_centers(const Tensor& centers, const Tensor& sigma);

struct IBTrajectoryStep {
    Tensor centers;
    Tensor assignments;
    double objective = 0.0; // mean weighted squared Mahalanobis distance
    double movement = 0.0;  // max center displacement this step
};

struct IBResult {
    IBState state;
    std::vector<IBTrajectoryStep> trajectory;
    bool converged = false;
};

// Alternates assignment and center updates. Sigma is estimated once as the
// pooled data covariance + 1e-3 I and held fixed.
IBResult ib_cluster(const Tensor& points, size_t num_clusters, const IBConfig& cfg,
                    uint64_t seed);

// Pooled covariance of row-points plus ridge.
Tensor pooled_covariance(const Tensor& points, double ridge = 1e-3);

std::vector<size_t> hard_labels(const Tensor& q);

} // namespace fan
