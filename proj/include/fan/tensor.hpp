#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fan {

enum class Precision : uint8_t { F32 = 0, F64 = 1 };

// Dense row-major tensor. Elements are held as double; tensors tagged F32
// snap every stored value to the nearest float so f32 runs are faithful
// while the kernels stay single-sourced.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<size_t> shape, Precision prec = Precision::F64)
        : shape_(std::move(shape)), prec_(prec) {
        size_t n = 1;
        for (size_t d : shape_) {
            if (d < 1) throw std::invalid_argument("tensor dims must be >= 1");
            n *= d;
        }
        data_.assign(n, 0.0);
    }

    static Tensor zeros(std::vector<size_t> shape, Precision prec = Precision::F64) {
        return Tensor(std::move(shape), prec);
    }

    static Tensor full(std::vector<size_t> shape, double v, Precision prec = Precision::F64) {
        Tensor t(std::move(shape), prec);
        for (auto& x : t.data_) x = v;
        t.snap();
        return t;
    }

    static Tensor identity(size_t n, Precision prec = Precision::F64) {
        Tensor t({n, n}, prec);
        for (size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    static Tensor from_rows(const std::vector<std::vector<double>>& rows) {
        Tensor t({rows.size(), rows.at(0).size()});
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != t.cols())
                throw std::invalid_argument("ragged rows");
            for (size_t j = 0; j < t.cols(); ++j) t.at(i, j) = rows[i][j];
        }
        return t;
    }

    static Tensor vec(std::vector<double> v) {
        Tensor t({v.size()});
        t.data_ = std::move(v);
        return t;
    }

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    Precision precision() const { return prec_; }
    void set_precision(Precision p) { prec_ = p; snap(); }

    size_t rows() const { return shape_.at(0); }
    size_t cols() const { return shape_.at(1); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double at(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

    double& at3(size_t c, size_t i, size_t j) {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    double at3(size_t c, size_t i, size_t j) const {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void check_finite(const char* where) const {
        if (!all_finite())
            throw std::runtime_error(std::string("non-finite values in ") + where);
    }

    // Snap stored values to f32 representability when tagged F32.
    void snap() {
        if (prec_ == Precision::F32)
            for (auto& v : data_) v = static_cast<double>(static_cast<float>(v));
    }

    Tensor with_precision(Precision p) const {
        Tensor t = *this;
        t.set_precision(p);
        return t;
    }

private:
    std::vector<size_t> shape_;
    std::vector<double> data_;
    Precision prec_ = Precision::F64;
};

inline Precision result_precision(const Tensor& a, const Tensor& b) {
    return (a.precision() == Precision::F32 || b.precision() == Precision::F32)
               ? Precision::F32
               : Precision::F64;
}

// ---- kernels ----

constexpr double kLayerNormEps = 1e-6;

inline void require_2d(const Tensor& t, const char* name) {
    if (t.rank() != 2)
        throw std::invalid_argument(std::string(name) + " must be 2-d, got " + t.shape_str());
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul lhs");
    require_2d(b, "matmul rhs");
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul shape mismatch: " + a.shape_str() + " * " + b.shape_str());
    const size_t m = a.rows(), k = a.cols(), p = b.cols();
    Tensor c({m, p}, result_precision(a, b));
    const double* __restrict ap = a.data();
    const double* __restrict bp = b.data();
    double* __restrict cp = c.data();
    for (size_t i = 0; i < m; ++i) {
        const double* __restrict arow = ap + i * k;
        double* __restrict crow = cp + i * p;
        for (size_t t = 0; t < k; ++t) {
            const double av = arow[t];
            const double* __restrict brow = bp + t * p;
            for (size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
    c.snap();
    return c;
}

inline Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    Tensor t({a.cols(), a.rows()}, a.precision());
    for (size_t i = 0; i < a.rows(); ++i)
        for (size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("add shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    Tensor c = a;
    c.set_precision(result_precision(a, b));
    for (size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    c.snap();
    return c;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("sub shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    Tensor c = a;
    c.set_precision(result_precision(a, b));
    for (size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
    c.snap();
    return c;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("mul shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    Tensor c = a;
    c.set_precision(result_precision(a, b));
    for (size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
    c.snap();
    return c;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    for (size_t i = 0; i < c.size(); ++i) c[i] *= s;
    c.snap();
    return c;
}

// axis 0: softmax down each column; axis 1: softmax along each row
inline Tensor softmax(const Tensor& x, int axis) {
    require_2d(x, "softmax");
    if (axis != 0 && axis != 1) throw std::invalid_argument("softmax axis must be 0 or 1");
    Tensor y = x;
    const size_t R = x.rows(), C = x.cols();
    if (axis == 1) {
        for (size_t i = 0; i < R; ++i) {
            double mx = x.at(i, 0);
            for (size_t j = 1; j < C; ++j) mx = std::max(mx, x.at(i, j));
            double s = 0.0;
            for (size_t j = 0; j < C; ++j) {
                y.at(i, j) = std::exp(x.at(i, j) - mx);
                s += y.at(i, j);
            }
            for (size_t j = 0; j < C; ++j) y.at(i, j) /= s;
        }
    } else {
        for (size_t j = 0; j < C; ++j) {
            double mx = x.at(0, j);
            for (size_t i = 1; i < R; ++i) mx = std::max(mx, x.at(i, j));
            double s = 0.0;
            for (size_t i = 0; i < R; ++i) {
                y.at(i, j) = std::exp(x.at(i, j) - mx);
                s += y.at(i, j);
            }
            for (size_t i = 0; i < R; ++i) y.at(i, j) /= s;
        }
    }
    y.snap();
    return y;
}

inline double sigmoid_scalar(double x) {
    if (x >= 0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i) y[i] = sigmoid_scalar(x[i]);
    y.snap();
    return y;
}

// exact erf form
inline double gelu_scalar(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

inline double gelu_grad_scalar(double x) {
    const double inv_sqrt2 = 0.7071067811865475244;
    const double inv_sqrt2pi = 0.3989422804014326779;
    double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
    double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

inline Tensor gelu(const Tensor& x) {
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i) y[i] = gelu_scalar(x[i]);
    y.snap();
    return y;
}

// normalizes each slice along `axis` to zero mean / unit variance, then
// applies affine gamma, beta (vectors of the slice length)
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int axis) {
    require_2d(x, "layer_norm");
    if (axis != 0 && axis != 1) throw std::invalid_argument("layer_norm axis must be 0 or 1");
    const size_t L = (axis == 0) ? x.rows() : x.cols();
    if (gamma.size() != L || beta.size() != L)
        throw std::invalid_argument("layer_norm affine size mismatch");
    Tensor y = x;
    const size_t nslices = (axis == 0) ? x.cols() : x.rows();
    for (size_t s = 0; s < nslices; ++s) {
        double mean = 0.0;
        for (size_t t = 0; t < L; ++t)
            mean += (axis == 0) ? x.at(t, s) : x.at(s, t);
        mean /= static_cast<double>(L);
        double var = 0.0;
        for (size_t t = 0; t < L; ++t) {
            double d = ((axis == 0) ? x.at(t, s) : x.at(s, t)) - mean;
            var += d * d;
        }
        var /= static_cast<double>(L);
        double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (size_t t = 0; t < L; ++t) {
            double v = (((axis == 0) ? x.at(t, s) : x.at(s, t)) - mean) * inv;
            v = v * gamma[t] + beta[t];
            if (axis == 0) y.at(t, s) = v; else y.at(s, t) = v;
        }
    }
    y.snap();
    return y;
}

inline double sum(const Tensor& x) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i];
    return s;
}

// mean over axis of a 2-d tensor: axis 0 collapses rows (result length cols)
inline Tensor mean_axis(const Tensor& x, int axis) {
    require_2d(x, "mean_axis");
    if (axis == 0) {
        Tensor m({x.cols()}, x.precision());
        for (size_t j = 0; j < x.cols(); ++j) {
            double s = 0.0;
            for (size_t i = 0; i < x.rows(); ++i) s += x.at(i, j);
            m[j] = s / static_cast<double>(x.rows());
        }
        m.snap();
        return m;
    }
    if (axis == 1) {
        Tensor m({x.rows()}, x.precision());
        for (size_t i = 0; i < x.rows(); ++i) {
            double s = 0.0;
            for (size_t j = 0; j < x.cols(); ++j) s += x.at(i, j);
            m[i] = s / static_cast<double>(x.cols());
        }
        m.snap();
        return m;
    }
    throw std::invalid_argument("mean_axis axis must be 0 or 1");
}

inline double frobenius_norm(const Tensor& x) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("max_abs_diff shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

} // namespace fan
