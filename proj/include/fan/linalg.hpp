#pragma once

#include <cstdint>
#include <vector>

#include "fan/tensor.hpp"

namespace fan {

// Cholesky factor of a symmetric positive definite matrix (lower L, A = L L^T).
// Throws on non-SPD input.
class Cholesky {
public:
    explicit Cholesky(const Tensor& a);

    // solves A x = b for a length-n vector
    std::vector<double> solve(const std::vector<double>& b) const;
    // A^{-1} B for matrix B (n x m)
    Tensor solve(const Tensor& b) const;
    double log_det() const; // log det A
    double det() const;
    size_t dim() const { return n_; }

private:
    size_t n_;
    Tensor l_;
};

struct EigenSym {
    std::vector<double> values;  // sorted descending
    Tensor vectors;              // column i is the eigenvector of values[i]
};

// Cyclic Jacobi rotations on a symmetric matrix, f64.
EigenSym eigen_symmetric(const Tensor& s, double tol = 1e-12, int max_sweeps = 100);

struct KMeansResult {
    std::vector<size_t> labels;
    Tensor centers; // k x dim
    bool converged = false;
};

// Lloyd iterations with farthest-point (k-means++ style) seeding.
// Rows of `points` are observations. Empty clusters reseed from the
// farthest point.
KMeansResult kmeans(const Tensor& points, size_t k, uint64_t seed,
                    size_t max_iters = 100);

} // namespace fan
