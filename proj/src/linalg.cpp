#include "fan/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fan/rng.hpp"

namespace fan {

Cholesky::Cholesky(const Tensor& a) {
    require_2d(a, "cholesky");
    if (a.rows() != a.cols())
        throw std::invalid_argument("cholesky: matrix must be square");
    n_ = a.rows();
    l_ = Tensor({n_, n_});
    for (size_t i = 0; i < n_; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (size_t k = 0; k < j; ++k) s -= l_.at(i, k) * l_.at(j, k);
            if (i == j) {
                if (s <= 0.0)
                    throw std::runtime_error("cholesky: matrix not positive definite");
                l_.at(i, i) = std::sqrt(s);
            } else {
                l_.at(i, j) = s / l_.at(j, j);
            }
        }
    }
}

std::vector<double> Cholesky::solve(const std::vector<double>& b) const {
    if (b.size() != n_) throw std::invalid_argument("cholesky solve: size mismatch");
    std::vector<double> y(n_), x(n_);
    for (size_t i = 0; i < n_; ++i) {
        double s = b[i];
        for (size_t k = 0; k < i; ++k) s -= l_.at(i, k) * y[k];
        y[i] = s / l_.at(i, i);
    }
    for (size_t ii = n_; ii-- > 0;) {
        double s = y[ii];
        for (size_t k = ii + 1; k < n_; ++k) s -= l_.at(k, ii) * x[k];
        x[ii] = s / l_.at(ii, ii);
    }
    return x;
}

Tensor Cholesky::solve(const Tensor& b) const {
    require_2d(b, "cholesky solve");
    if (b.rows() != n_) throw std::invalid_argument("cholesky solve: row mismatch");
    Tensor x({n_, b.cols()});
    std::vector<double> col(n_);
    for (size_t j = 0; j < b.cols(); ++j) {
        for (size_t i = 0; i < n_; ++i) col[i] = b.at(i, j);
        auto sol = solve(col);
        for (size_t i = 0; i < n_; ++i) x.at(i, j) = sol[i];
    }
    return x;
}

double Cholesky::log_det() const {
    double s = 0.0;
    for (size_t i = 0; i < n_; ++i) s += std::log(l_.at(i, i));
    return 2.0 * s;
}

double Cholesky::det() const { return std::exp(log_det()); }

EigenSym eigen_symmetric(const Tensor& s, double tol, int max_sweeps) {
    require_2d(s, "eigen_symmetric");
    const size_t n = s.rows();
    if (s.cols() != n) throw std::invalid_argument("eigen_symmetric: must be square");
    Tensor a = s;
    Tensor v = Tensor::identity(n);
    double norm = frobenius_norm(s);
    const double stop = tol * std::max(norm, 1e-300);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (std::sqrt(2.0 * off) < stop) break;
        for (size_t p = 0; p + 1 < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                double apq = a.at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                double app = a.at(p, p), aqq = a.at(q, q);
                double theta = 0.5 * (aqq - app) / apq;
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (size_t k = 0; k < n; ++k) {
                    double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - sn * akq;
                    a.at(k, q) = sn * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - sn * aqk;
                    a.at(q, k) = sn * apk + c * aqk;
                }
                for (size_t k = 0; k < n; ++k) {
                    double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - sn * vkq;
                    v.at(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t x, size_t y) { return a.at(x, x) > a.at(y, y); });

    EigenSym out;
    out.values.resize(n);
    out.vectors = Tensor({n, n});
    for (size_t i = 0; i < n; ++i) {
        out.values[i] = a.at(order[i], order[i]);
        for (size_t k = 0; k < n; ++k) out.vectors.at(k, i) = v.at(k, order[i]);
    }
    return out;
}

namespace {

double sqdist_row(const Tensor& points, size_t i, const Tensor& centers, size_t c) {
    double s = 0.0;
    for (size_t j = 0; j < points.cols(); ++j) {
        double d = points.at(i, j) - centers.at(c, j);
        s += d * d;
    }
    return s;
}

} // namespace

KMeansResult kmeans(const Tensor& points, size_t k, uint64_t seed, size_t max_iters) {
    require_2d(points, "kmeans");
    const size_t n = points.rows(), dim = points.cols();
    if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= n points");

    Rng rng(derive_seed(seed, "kmeans"));
    Tensor centers({k, dim});
    // farthest-point seeding from a random start
    std::vector<size_t> chosen;
    chosen.push_back(rng.next_below(n));
    while (chosen.size() < k) {
        size_t best = 0;
        double best_d = -1.0;
        for (size_t i = 0; i < n; ++i) {
            double dmin = std::numeric_limits<double>::max();
            for (size_t c : chosen) {
                double s = 0.0;
                for (size_t j = 0; j < dim; ++j) {
                    double d = points.at(i, j) - points.at(c, j);
                    s += d * d;
                }
                dmin = std::min(dmin, s);
            }
            if (dmin > best_d) { best_d = dmin; best = i; }
        }
        chosen.push_back(best);
    }
    for (size_t c = 0; c < k; ++c)
        for (size_t j = 0; j < dim; ++j) centers.at(c, j) = points.at(chosen[c], j);

    KMeansResult res;
    res.labels.assign(n, 0);
    for (size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (size_t i = 0; i < n; ++i) {
            size_t best = 0;
            double bd = sqdist_row(points, i, centers, 0);
            for (size_t c = 1; c < k; ++c) {
                double d = sqdist_row(points, i, centers, c);
                if (d < bd) { bd = d; best = c; }
            }
            if (res.labels[i] != best) { res.labels[i] = best; changed = true; }
        }
        // recompute centers; reseed empty clusters from the farthest point
        Tensor sums({k, dim});
        std::vector<size_t> counts(k, 0);
        for (size_t i = 0; i < n; ++i) {
            counts[res.labels[i]]++;
            for (size_t j = 0; j < dim; ++j) sums.at(res.labels[i], j) += points.at(i, j);
        }
        for (size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                size_t far = 0;
                double fd = -1.0;
                for (size_t i = 0; i < n; ++i) {
                    double d = sqdist_row(points, i, centers, res.labels[i]);
                    if (d > fd) { fd = d; far = i; }
                }
                for (size_t j = 0; j < dim; ++j) centers.at(c, j) = points.at(far, j);
                changed = true;
            } else {
                for (size_t j = 0; j < dim; ++j)
                    centers.at(c, j) = sums.at(c, j) / static_cast<double>(counts[c]);
            }
        }
        if (!changed && iter > 0) {
            res.converged = true;
            break;
        }
    }
    res.centers = std::move(centers);
    return res;
}

} // namespace fan
