#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gcsd/tensor.hpp"

namespace gcsd::ag {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Ops append nodes; backward() walks the nodes
// in reverse creation order (a topological order by construction) and each
// node's closure accumulates into its inputs' gradients.
//
// Parameters enter the graph through param(), which aliases external value
// and gradient storage, so micro-batch gradient accumulation happens
// naturally across tapes without copying tensors around.
class Tape {
public:
    Var leaf(Tensor value);
    Var const_ref(const Tensor* value);  // aliases external storage, no gradient
    Var param(const Tensor* value, Tensor* grad_accum);

    const Tensor& val(Var v) const;
    Tensor& grad(Var v);
    bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

    // Seeds d(loss)/d(loss) = 1 and propagates. Throws NonScalarLoss unless
    // val(loss) is 1x1.
    void backward(Var loss);

    size_t node_count() const { return nodes_.size(); }

    Var push(Tensor value, bool needs_grad, std::function<void(Tape&)> back);

private:
    struct Node {
        Tensor own_val;
        const Tensor* ext_val = nullptr;
        Tensor own_grad;
        Tensor* ext_grad = nullptr;
        bool needs_grad = false;
        bool grad_touched = false;
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;
};

// --- primitive ops -------------------------------------------------------

Var matmul(Tape& t, Var a, Var b);     // A[mxk] * B[kxn]
Var matmul_nt(Tape& t, Var a, Var b);  // A[mxk] * B[nxk]^T
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var add_rowvec(Tape& t, Var a, Var bias);  // bias broadcast over rows
Var add_const(Tape& t, Var a, const Tensor& c);
Var affine(Tape& t, Var a, double mul, double add);  // mul*a + add elementwise
Var gelu(Tape& t, Var a);
Var tanh_t(Tape& t, Var a);
Var exp_t(Tape& t, Var a);
Var layer_norm(Tape& t, Var x, Var gain, Var bias);
Var softmax_causal(Tape& t, Var scores);  // square score matrix
Var embed_rows(Tape& t, Var table, const std::vector<int>& ids);
Var concat_rows(Tape& t, Var a, Var b);
Var slice_rows(Tape& t, Var a, int r0, int r1);
Var slice_cols(Tape& t, Var a, int c0, int c1);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var mean_rows_subset(Tape& t, Var a, std::vector<int> rows);
Var mean_vars(Tape& t, const std::vector<Var>& xs);
Var mean_all(Tape& t, Var a);
Var weighted_sum(Tape& t, const std::vector<Var>& scalars, const std::vector<double>& w);

// Mean over masked rows of -log softmax(logits[r])[targets[r]].
Var cross_entropy_masked(Tape& t, Var logits, std::vector<int> targets, std::vector<uint8_t> mask);

// out[r] = log softmax(logits[r])[ids[r]], returned as a column vector.
Var gather_log_probs(Tape& t, Var logits, std::vector<int> ids);

// (1/M) * sum_j lambda[j] * (a[j] - eta[j])^2 over a 1xM row.
Var weighted_sq_err(Tape& t, Var a, std::vector<double> eta, std::vector<double> lambda);

// Squared L2 distance to a constant tensor of the same shape.
Var sq_dist_const(Tape& t, Var a, Tensor b);

}  // namespace gcsd::ag
