#include "doctest.h"

#include <cmath>

#include "fan/autograd.hpp"
#include "fan/rng.hpp"

using namespace fan;

namespace {

Tensor random_tensor(std::vector<size_t> shape, uint64_t seed, double lo = -1, double hi = 1) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("linear function analytic gradient") {
    // f(W) = sum(W X): dW = row-broadcast of column-sums of X^T rows
    Tensor x = random_tensor({4, 3}, 7);
    Tensor w = random_tensor({2, 4}, 8);
    auto build = [&](Tape& t, const std::vector<Tape::Id>& p) {
        return t.sum_all(t.matmul(p[0], t.leaf(x)));
    };
    auto rep = grad_check(build, {w});
    CHECK(rep.max_rel_err < 1e-8);

    // the analytic value itself: dW[i][k] = sum_j x[k][j]
    Tape tape;
    Tape::Id wid = tape.leaf(w, true);
    Tape::Id loss = build(tape, {wid});
    tape.backward(loss);
    for (size_t i = 0; i < 2; ++i)
        for (size_t k = 0; k < 4; ++k) {
            double expect = 0.0;
            for (size_t j = 0; j < 3; ++j) expect += x.at(k, j);
            CHECK(tape.grad(wid).at(i, k) == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("zero-parameter function gives empty report") {
    auto build = [&](Tape& t, const std::vector<Tape::Id>&) {
        return t.sum_all(t.leaf(Tensor::full({2, 2}, 1.0)));
    };
    auto rep = grad_check(build, {});
    CHECK(rep.max_rel_err == 0.0);
    CHECK(rep.per_param.empty());
}

TEST_CASE("per-op gradients pass finite differences") {
    Tensor a = random_tensor({3, 4}, 21);
    Tensor b = random_tensor({4, 3}, 22);
    Tensor g = random_tensor({3}, 23, 0.5, 1.5);
    Tensor be = random_tensor({3}, 24);
    Tensor bias = random_tensor({3}, 25);
    Tensor gate = random_tensor({3, 1}, 26);

    SUBCASE("matmul + transpose") {
        auto rep = grad_check(
            [&](Tape& t, const std::vector<Tape::Id>& p) {
                return t.sum_all(t.matmul(p[0], t.transpose(p[1])));
            },
            {a, a});
        CHECK(rep.max_rel_err < 1e-7);
    }
    SUBCASE("softmax both axes") {
        for (int axis : {0, 1}) {
            auto rep = grad_check(
                [&](Tape& t, const std::vector<Tape::Id>& p) {
                    Tape::Id s = t.softmax(p[0], axis);
                    return t.sum_all(t.mul(s, t.leaf(b.with_precision(Precision::F64))));
                },
                {random_tensor({4, 3}, 30 + axis, -2, 2)});
            CHECK(rep.max_rel_err < 1e-6);
        }
    }
    SUBCASE("sigmoid gelu chain") {
        auto rep = grad_check(
            [&](Tape& t, const std::vector<Tape::Id>& p) {
                return t.sum_all(t.gelu(t.sigmoid(p[0])));
            },
            {a});
        CHECK(rep.max_rel_err < 1e-6);
    }
    SUBCASE("layer_norm with affine") {
        for (int axis : {0, 1}) {
            auto rep = grad_check(
                [&](Tape& t, const std::vector<Tape::Id>& p) {
                    Tape::Id y = t.layer_norm(p[0], p[1], p[2], axis);
                    return t.sum_all(t.mul(y, t.leaf(random_tensor({3, 4}, 40, -1, 1))));
                },
                {random_tensor({3, 4}, 41, -2, 2),
                 axis == 0 ? g : random_tensor({4}, 42, 0.5, 1.5),
                 axis == 0 ? be : random_tensor({4}, 43)});
            CHECK(rep.max_rel_err < 1e-5);
        }
    }
    SUBCASE("col bias, gate, means, slices") {
        auto rep = grad_check(
            [&](Tape& t, const std::vector<Tape::Id>& p) {
                Tape::Id y = t.add_col_bias(p[0], p[1]);
                y = t.mul_col_gate(y, p[2]);
                Tape::Id top = t.slice_rows(y, 0, 2);
                Tape::Id bot = t.slice_rows(y, 2, 3);
                y = t.concat_rows({top, bot});
                Tape::Id mc = t.mean_cols(y);
                Tape::Id mr = t.mean_rows(y);
                return t.add(t.sum_all(mc), t.sum_all(mr));
            },
            {a, bias, gate});
        CHECK(rep.max_rel_err < 1e-7);
    }
    SUBCASE("cross entropy with smoothing") {
        auto rep = grad_check(
            [&](Tape& t, const std::vector<Tape::Id>& p) {
                return t.cross_entropy(p[0], 1, 0.1);
            },
            {random_tensor({4, 1}, 50, -2, 2)});
        CHECK(rep.max_rel_err < 1e-7);
    }
    SUBCASE("scale add sub mul") {
        auto rep = grad_check(
            [&](Tape& t, const std::vector<Tape::Id>& p) {
                Tape::Id y = t.add(t.scale(p[0], 2.5), t.sub(p[0], p[1]));
                return t.sum_all(t.mul(y, y));
            },
            {a, a});
        CHECK(rep.max_rel_err < 1e-7);
    }
}

TEST_CASE("reused node accumulates gradient") {
    Tensor w = random_tensor({2, 2}, 60);
    auto rep = grad_check(
        [&](Tape& t, const std::vector<Tape::Id>& p) {
            Tape::Id y = t.matmul(p[0], p[0]); // same parameter twice
            return t.sum_all(y);
        },
        {w});
    CHECK(rep.max_rel_err < 1e-7);
}

TEST_CASE("non-finite loss raises probe error") {
    auto build = [&](Tape& t, const std::vector<Tape::Id>& p) {
        // log of a negative value through exp overflow: scale to inf
        return t.sum_all(t.scale(p[0], 1e308));
    };
    Tensor big = Tensor::full({1, 1}, 1e10);
    CHECK_THROWS_AS(grad_check(build, {big}), std::runtime_error);
}

TEST_CASE("backward determinism") {
    Tensor w = random_tensor({3, 3}, 70);
    Tensor x = random_tensor({3, 2}, 71);
    auto run = [&]() {
        Tape t;
        Tape::Id wid = t.leaf(w, true);
        Tape::Id loss = t.sum_all(t.gelu(t.matmul(wid, t.leaf(x))));
        t.backward(loss);
        return t.grad(wid);
    };
    Tensor g1 = run(), g2 = run();
    for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}
