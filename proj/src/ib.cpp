#include "fan/ib.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fan/linalg.hpp"
#include "fan/rng.hpp"

namespace fan {

void IBConfig::validate() const {
    if (beta <= 0.0) throw std::invalid_argument("ib config: beta must be > 0");
    if (epsilon <= 0.0) throw std::invalid_argument("ib config: epsilon must be > 0");
    if (max_iters < 1) throw std::invalid_argument("ib config: max_iters must be >= 1");
}

double IBState::total_mass() const {
    double s = 0.0;
    for (double m : masses) s += m;
    return s;
}

namespace {

// squared Mahalanobis distances: out[i][c] = (mu_c - x_i)^T Sigma^{-1} (mu_c - x_i)
Tensor mahalanobis_sq(const Tensor& points, const Tensor& centers, const Cholesky& chol) {
    const size_t n = points.rows(), c = centers.rows(), d = points.cols();
    Tensor out({n, c});
    std::vector<double> diff(d);
    for (size_t i = 0; i < n; ++i)
        for (size_t k = 0; k < c; ++k) {
            for (size_t j = 0; j < d; ++j) diff[j] = centers.at(k, j) - points.at(i, j);
            auto solved = chol.solve(diff);
            double s = 0.0;
            for (size_t j = 0; j < d; ++j) s += diff[j] * solved[j];
            out.at(i, k) = s;
        }
    return out;
}

// softmax over each row of a matrix of exponents
Tensor row_softmax(const Tensor& e) {
    return softmax(e, 1);
}

void check_state(const Tensor& points, const IBState& state) {
    if (points.cols() != state.centers.cols())
        throw std::invalid_argument("ib: point/center dimension mismatch");
    if (state.masses.size() != state.centers.rows())
        throw std::invalid_argument("ib: masses/centers count mismatch");
}

} // namespace

AssignResult ib_assign(const Tensor& points, const IBState& state, const IBConfig& cfg) {
    cfg.validate();
    check_state(points, state);
    const size_t n = points.rows(), C = state.centers.rows();
    const double N = state.total_mass();
    Cholesky chol(state.sigma);
    Tensor d2 = mahalanobis_sq(points, state.centers, chol);

    AssignResult res;
    res.q = Tensor({n, C});

    if (cfg.convention == IBConvention::StandardIB) {
        // q(c|i) ∝ (n_c/N) exp(-beta * KL), KL reduced to the Gaussian form
        const double logdet = chol.log_det();
        Tensor e({n, C});
        for (size_t i = 0; i < n; ++i)
            for (size_t c = 0; c < C; ++c) {
                double prior = state.masses[c] / N;
                double lp = (prior > 0) ? std::log(prior) : -1e300;
                e.at(i, c) = lp - cfg.beta * (d2.at(i, c) + logdet);
            }
        res.q = row_softmax(e);
        return res;
    }

    // paper-literal: q(c|i) ∝ (log[n_c/N] / det Sigma) * softmax_c(-d2),
    // then rows renormalized. log masses are <= 0, so the raw masses come
    // out negative; renormalize absolute values and flag the instance.
    const double det = chol.det();
    Tensor sm({n, C});
    for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < C; ++c) sm.at(i, c) = -d2.at(i, c);
    sm = row_softmax(sm);
    for (size_t i = 0; i < n; ++i) {
        double abs_sum = 0.0;
        bool negative = false;
        for (size_t c = 0; c < C; ++c) {
            double pref = std::log(state.masses[c] / N) / det;
            double v = pref * sm.at(i, c);
            if (v < 0.0) negative = true;
            res.q.at(i, c) = v;
            abs_sum += std::fabs(v);
        }
        if (negative) res.degenerate = true;
        if (abs_sum <= 0.0) {
            // all prefactors vanished (single full-mass cluster): uniform
            for (size_t c = 0; c < C; ++c) res.q.at(i, c) = 1.0 / static_cast<double>(C);
        } else {
            for (size_t c = 0; c < C; ++c)
                res.q.at(i, c) = std::fabs(res.q.at(i, c)) / abs_sum;
        }
    }
    return res;
}

Tensor normalize_centers(const Tensor& centers, const Tensor& sigma) {
    Cholesky chol(sigma);
    Tensor out = centers;
    const size_t d = centers.cols();
    std::vector<double> row(d);
    for (size_t c = 0; c < centers.rows(); ++c) {
        for (size_t j = 0; j < d; ++j) row[j] = centers.at(c, j);
        auto solved = chol.solve(row);
        double quad = 0.0;
        for (size_t j = 0; j < d; ++j) quad += row[j] * solved[j];
        if (quad <= 0.0)
            throw std::runtime_error("normalize_centers: zero center cannot be normalized");
        double inv = 1.0 / std::sqrt(quad);
        for (size_t j = 0; j < d; ++j) out.at(c, j) = row[j] * inv;
    }
    return out;
}

Tensor ib_update_centers(const Tensor& points, const Tensor& q, const IBState& state,
                         bool normalized, bool* frozen) {
    check_state(points, state);
    if (q.rows() != points.rows() || q.cols() != state.centers.rows())
        throw std::invalid_argument("ib_update_centers: assignment shape mismatch");
    const size_t n = points.rows(), C = q.cols(), d = points.cols();
    const double N = static_cast<double>(n);
    Tensor out({C, d});
    for (size_t c = 0; c < C; ++c) {
        double mass = 0.0;
        for (size_t i = 0; i < n; ++i) mass += q.at(i, c);
        if (mass == 0.0) {
            if (frozen) *frozen = true;
            for (size_t j = 0; j < d; ++j) out.at(c, j) = state.centers.at(c, j);
            continue;
        }
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) out.at(c, j) += q.at(i, c) * points.at(i, j) / N;
    }
    if (normalized) out = normalize_centers(out, state.sigma);
    return out;
}

Tensor weighted_mean_centers(const Tensor& points, const Tensor& q, const IBState& state,
                             bool* frozen) {
    check_state(points, state);
    const size_t n = points.rows(), C = q.cols(), d = points.cols();
    Tensor out({C, d});
    for (size_t c = 0; c < C; ++c) {
        double mass = 0.0;
        for (size_t i = 0; i < n; ++i) mass += q.at(i, c);
        if (mass == 0.0) {
            if (frozen) *frozen = true;
            for (size_t j = 0; j < d; ++j) out.at(c, j) = state.centers.at(c, j);
            continue;
        }
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) out.at(c, j) += q.at(i, c) * points.at(i, j) / mass;
    }
    return out;
}

Tensor ib_explicit_step(const Tensor& points, const IBState& state) {
    check_state(points, state);
    const size_t n = points.rows(), C = state.centers.rows(), d = points.cols();
    const double N = state.total_mass();
    Cholesky chol(state.sigma);
    const double det = chol.det();
    Tensor d2 = mahalanobis_sq(points, state.centers, chol);
    Tensor e({n, C});
    for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < C; ++c) e.at(i, c) = -d2.at(i, c);
    Tensor a = row_softmax(e);
    Tensor out({C, d});
    for (size_t c = 0; c < C; ++c) {
        double pref = std::log(state.masses[c] / N) / (N * det);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j)
                out.at(c, j) += pref * a.at(i, c) * points.at(i, j);
    }
    return out;
}

Tensor ib_matrix_step(const Tensor& points, const IBState& state) {
    check_state(points, state);
    // contract: centers normalized w.r.t. Sigma^{-1}
    {
        Cholesky chol(state.sigma);
        std::vector<double> row(points.cols());
        for (size_t c = 0; c < state.centers.rows(); ++c) {
            for (size_t j = 0; j < points.cols(); ++j) row[j] = state.centers.at(c, j);
            auto solved = chol.solve(row);
            double quad = 0.0;
            for (size_t j = 0; j < points.cols(); ++j) quad += row[j] * solved[j];
            if (std::fabs(quad - 1.0) > 1e-6)
                throw std::invalid_argument(
                    "ib_matrix_step: centers must satisfy mu^T Sigma^{-1} mu = 1");
        }
    }
    const size_t n = points.rows(), C = state.centers.rows(), d = points.cols();
    const double N = state.total_mass();
    Cholesky chol(state.sigma);
    const double det = chol.det();

    // Q = Sigma^{-1} X (d x n), K columns = centers (d x C), d_hat = 1/2
    Tensor x_cols = transpose(points);                  // d x n
    Tensor q_mat = chol.solve(x_cols);                  // d x n
    Tensor k_mat = transpose(state.centers);            // d x C
    Tensor scores = scale(matmul(transpose(q_mat), k_mat), 2.0); // n x C, / (1/2)
    Tensor a = row_softmax(scores);

    Tensor out({C, d});
    for (size_t c = 0; c < C; ++c) {
        double pref = std::log(state.masses[c] / N) / (N * det);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j)
                out.at(c, j) += pref * a.at(i, c) * points.at(i, j);
    }
    return out;
}

Tensor pooled_covariance(const Tensor& points, double ridge) {
    require_2d(points, "pooled_covariance");
    const size_t n = points.rows(), d = points.cols();
    std::vector<double> mean(d, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) mean[j] += points.at(i, j);
    for (auto& m : mean) m /= static_cast<double>(n);
    Tensor cov({d, d});
    for (size_t i = 0; i < n; ++i)
        for (size_t a = 0; a < d; ++a) {
            double da = points.at(i, a) - mean[a];
            for (size_t b = 0; b < d; ++b)
                cov.at(a, b) += da * (points.at(i, b) - mean[b]);
        }
    for (size_t a = 0; a < d; ++a)
        for (size_t b = 0; b < d; ++b) cov.at(a, b) /= static_cast<double>(n);
    for (size_t a = 0; a < d; ++a) cov.at(a, a) += ridge;
    return cov;
}

std::vector<size_t> hard_labels(const Tensor& q) {
    std::vector<size_t> labels(q.rows());
    for (size_t i = 0; i < q.rows(); ++i) {
        size_t best = 0;
        for (size_t c = 1; c < q.cols(); ++c)
            if (q.at(i, c) > q.at(i, best)) best = c;
        labels[i] = best;
    }
    return labels;
}

IBResult ib_cluster(const Tensor& points, size_t num_clusters, const IBConfig& cfg,
                    uint64_t seed) {
    cfg.validate();
    require_2d(points, "ib_cluster");
    const size_t n = points.rows(), d = points.cols();
    if (num_clusters < 1 || num_clusters > n)
        throw std::invalid_argument("ib_cluster: need 1 <= C <= N");

    IBResult res;
    IBState& st = res.state;
    st.sigma = pooled_covariance(points);
    st.masses.assign(num_clusters, static_cast<double>(n) / static_cast<double>(num_clusters));

    // farthest-point seeding
    Rng rng(derive_seed(seed, "ib-init"));
    std::vector<size_t> chosen;
    chosen.push_back(rng.next_below(n));
    while (chosen.size() < num_clusters) {
        size_t best = 0;
        double best_d = -1.0;
        for (size_t i = 0; i < n; ++i) {
            double dmin = std::numeric_limits<double>::max();
            for (size_t c : chosen) {
                double s = 0.0;
                for (size_t j = 0; j < d; ++j) {
                    double dd = points.at(i, j) - points.at(c, j);
                    s += dd * dd;
                }
                dmin = std::min(dmin, s);
            }
            if (dmin > best_d) { best_d = dmin; best = i; }
        }
        chosen.push_back(best);
    }
    st.centers = Tensor({num_clusters, d});
    for (size_t c = 0; c < num_clusters; ++c)
        for (size_t j = 0; j < d; ++j) st.centers.at(c, j) = points.at(chosen[c], j);

    Cholesky chol(st.sigma);
    for (size_t iter = 0; iter < cfg.max_iters; ++iter) {
        AssignResult ar = ib_assign(points, st, cfg);
        st.degenerate = st.degenerate || ar.degenerate;
        st.assignments = ar.q;
        for (size_t c = 0; c < num_clusters; ++c) {
            double m = 0.0;
            for (size_t i = 0; i < n; ++i) m += ar.q.at(i, c);
            st.masses[c] = m;
        }
        bool frozen = false;
        Tensor next = weighted_mean_centers(points, ar.q, st, &frozen);
        st.center_frozen = st.center_frozen || frozen;
        if (cfg.normalized) next = normalize_centers(next, st.sigma);

        double movement = 0.0;
        for (size_t c = 0; c < num_clusters; ++c) {
            double s = 0.0;
            for (size_t j = 0; j < d; ++j) {
                double dd = next.at(c, j) - st.centers.at(c, j);
                s += dd * dd;
            }
            movement = std::max(movement, std::sqrt(s));
        }
        st.centers = next;

        double objective = 0.0;
        {
            Tensor d2 = mahalanobis_sq(points, st.centers, chol);
            for (size_t i = 0; i < n; ++i)
                for (size_t c = 0; c < num_clusters; ++c)
                    objective += ar.q.at(i, c) * d2.at(i, c);
            objective /= static_cast<double>(n);
        }

        res.trajectory.push_back({st.centers, st.assignments, objective, movement});
        if (movement < cfg.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

} // namespace fan
