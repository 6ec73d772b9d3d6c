#pragma once

#include <functional>
#include <vector>

#include "fan/tensor.hpp"

namespace fan {

// Reverse-mode tape. Nodes are appended in forward order; backward() walks
// the tape in reverse accumulating gradients into every node. One tape per
// training worker; tapes are not thread-safe.
class Tape {
public:
    using Id = int;

    Id leaf(Tensor value, bool is_param = false);

    const Tensor& value(Id id) const { return nodes_[id].value; }
    const Tensor& grad(Id id) const { return nodes_[id].grad; }
    const std::vector<Id>& params() const { return params_; }
    size_t num_nodes() const { return nodes_.size(); }

    // ops
    Id matmul(Id a, Id b);
    Id transpose(Id a);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id scale(Id a, double s);
    Id softmax(Id a, int axis);
    Id sigmoid(Id a);
    Id gelu(Id a);
    Id layer_norm(Id x, Id gamma, Id beta, int axis);
    // adds a length-d bias vector to every column of a d x n matrix
    Id add_col_bias(Id x, Id bias);
    // mean over columns of d x n -> d x 1
    Id mean_cols(Id x);
    // mean over rows of d x n -> 1 x n
    Id mean_rows(Id x);
    // out[i][j] = gate[i][0] * x[i][j]
    Id mul_col_gate(Id x, Id gate);
    Id slice_rows(Id x, size_t begin, size_t end);
    Id concat_rows(const std::vector<Id>& parts);
    Id sum_all(Id x); // -> 1x1
    // cross entropy with label smoothing on a k x 1 logits column
    Id cross_entropy(Id logits, size_t label, double smoothing);

    double scalar(Id id) const;

    // seeds d(loss)/d(loss)=1 at `loss` and accumulates grads tape-wide
    void backward(Id loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> back; // empty for leaves
    };

    Id push(Tensor value, std::function<void(Tape&)> back);
    Tensor& grad_ref(Id id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    std::vector<Id> params_;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::vector<double> per_param;
};

// Central finite differences, step h = 1e-5, against tape gradients.
// Per-element relative error |an - cd| / max(|an| + |cd|, 1e-6); the floor
// keeps roundoff on gradients below what central differences can resolve
// from registering as disagreement.
// `build` must construct the same scalar graph for any parameter values.
GradCheckReport grad_check(
    const std::function<Tape::Id(Tape&, const std::vector<Tape::Id>&)>& build,
    const std::vector<Tensor>& params);

} // namespace fan
