#include "gcsd/tape.hpp"

#include <cmath>

#include "gcsd/errors.hpp"
#include "gcsd/kernels.hpp"

namespace gcsd::ag {

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, nullptr, false, false, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::const_ref(const Tensor* value) {
    Node n;
    n.ext_val = value;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Tensor* value, Tensor* grad_accum) {
    if (grad_accum->rows == 0) *grad_accum = Tensor(value->rows, value->cols);
    if (!grad_accum->same_shape(*value)) throw ShapeMismatch("param grad buffer");
    Node n;
    n.ext_val = value;
    n.ext_grad = grad_accum;
    n.needs_grad = true;
    n.grad_touched = true;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
    Node n;
    n.own_val = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::val(Var v) const {
    const Node& n = nodes_[v.id];
    return n.ext_val ? *n.ext_val : n.own_val;
}

Tensor& Tape::grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.ext_grad) return *n.ext_grad;
    if (n.own_grad.rows == 0) {
        const Tensor& val = n.ext_val ? *n.ext_val : n.own_val;
        n.own_grad = Tensor(val.rows, val.cols);
    }
    n.grad_touched = true;
    return n.own_grad;
}

void Tape::backward(Var loss) {
    const Tensor& lv = val(loss);
    if (lv.rows != 1 || lv.cols != 1) throw NonScalarLoss();
    grad(loss).v[0] += 1.0;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        // back closures may allocate grads of earlier nodes only, so the
        // reverse index walk stays valid.
        if (!nodes_[id].needs_grad || !nodes_[id].back) continue;
        if (!nodes_[id].grad_touched) continue;  // nothing downstream pulled on this node
        nodes_[id].back(*this);
    }
}

// ---------------------------------------------------------------------------
// Ops. Each computes its value with the shared kernels, then registers a
// closure that pulls d(out) and pushes into its inputs' grads.
// ---------------------------------------------------------------------------

namespace {

bool any_grad(Tape& t, Var a) { return t.needs_grad(a); }
bool any_grad(Tape& t, Var a, Var b) { return t.needs_grad(a) || t.needs_grad(b); }
bool any_grad(Tape& t, Var a, Var b, Var c) {
    return t.needs_grad(a) || t.needs_grad(b) || t.needs_grad(c);
}

Var self_var(const Tape& t) { return Var{static_cast<int>(t.node_count())}; }

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (A.cols != B.rows) throw ShapeMismatch("matmul");
    Tensor C(A.rows, B.cols);
    kernels::matmul(A.v.data(), B.v.data(), C.v.data(), A.rows, A.cols, B.cols);
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a, b), [a, b, out](Tape& tp) {
        const Tensor& A = tp.val(a);
        const Tensor& B = tp.val(b);
        const Tensor& dC = tp.grad(out);
        if (tp.needs_grad(a))
            kernels::matmul_nt(dC.v.data(), B.v.data(), tp.grad(a).v.data(), A.rows, B.cols, A.cols);
        if (tp.needs_grad(b))
            kernels::matmul_tn(A.v.data(), dC.v.data(), tp.grad(b).v.data(), A.cols, A.rows, B.cols);
    });
}

Var matmul_nt(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (A.cols != B.cols) throw ShapeMismatch("matmul_nt");
    Tensor C(A.rows, B.rows);
    kernels::matmul_nt(A.v.data(), B.v.data(), C.v.data(), A.rows, A.cols, B.rows);
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a, b), [a, b, out](Tape& tp) {
        const Tensor& A = tp.val(a);
        const Tensor& B = tp.val(b);
        const Tensor& dC = tp.grad(out);
        if (tp.needs_grad(a))
            kernels::matmul(dC.v.data(), B.v.data(), tp.grad(a).v.data(), A.rows, B.rows, A.cols);
        if (tp.needs_grad(b))
            kernels::matmul_tn(dC.v.data(), A.v.data(), tp.grad(b).v.data(), B.rows, A.rows, A.cols);
    });
}

Var add(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (!A.same_shape(B)) throw ShapeMismatch("add");
    Tensor C = A;
    for (size_t i = 0; i < C.v.size(); ++i) C.v[i] += B.v[i];
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a, b), [a, b, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        if (tp.needs_grad(a)) {
            Tensor& dA = tp.grad(a);
            for (size_t i = 0; i < dC.v.size(); ++i) dA.v[i] += dC.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& dB = tp.grad(b);
            for (size_t i = 0; i < dC.v.size(); ++i) dB.v[i] += dC.v[i];
        }
    });
}

Var sub(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (!A.same_shape(B)) throw ShapeMismatch("sub");
    Tensor C = A;
    for (size_t i = 0; i < C.v.size(); ++i) C.v[i] -= B.v[i];
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a, b), [a, b, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        if (tp.needs_grad(a)) {
            Tensor& dA = tp.grad(a);
            for (size_t i = 0; i < dC.v.size(); ++i) dA.v[i] += dC.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& dB = tp.grad(b);
            for (size_t i = 0; i < dC.v.size(); ++i) dB.v[i] -= dC.v[i];
        }
    });
}

Var add_rowvec(Tape& t, Var a, Var bias) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(bias);
    if (B.rows != 1 || B.cols != A.cols) throw ShapeMismatch("add_rowvec");
    Tensor C = A;
    for (int r = 0; r < C.rows; ++r)
        for (int j = 0; j < C.cols; ++j) C.at(r, j) += B.v[j];
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a, bias), [a, bias, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        if (tp.needs_grad(a)) {
            Tensor& dA = tp.grad(a);
            for (size_t i = 0; i < dC.v.size(); ++i) dA.v[i] += dC.v[i];
        }
        if (tp.needs_grad(bias)) {
            Tensor& dB = tp.grad(bias);
            for (int r = 0; r < dC.rows; ++r)
                for (int j = 0; j < dC.cols; ++j) dB.v[j] += dC.at(r, j);
        }
    });
}

Var add_const(Tape& t, Var a, const Tensor& c) {
    const Tensor& A = t.val(a);
    if (!A.same_shape(c)) throw ShapeMismatch("add_const");
    Tensor C = A;
    for (size_t i = 0; i < C.v.size(); ++i) C.v[i] += c.v[i];
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        Tensor& dA = tp.grad(a);
        for (size_t i = 0; i < dC.v.size(); ++i) dA.v[i] += dC.v[i];
    });
}

Var affine(Tape& t, Var a, double mul, double addc) {
    Tensor C = t.val(a);
    for (double& x : C.v) x = mul * x + addc;
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, mul, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        Tensor& dA = tp.grad(a);
        for (size_t i = 0; i < dC.v.size(); ++i) dA.v[i] += mul * dC.v[i];
    });
}

Var gelu(Tape& t, Var a) {
    const Tensor& A = t.val(a);
    Tensor C(A.rows, A.cols);
    kernels::gelu(A.v.data(), C.v.data(), A.v.size());
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, out](Tape& tp) {
        const Tensor& A = tp.val(a);
        const Tensor& dC = tp.grad(out);
        kernels::gelu_backward(A.v.data(), dC.v.data(), tp.grad(a).v.data(), A.v.size());
    });
}

Var tanh_t(Tape& t, Var a) {
    Tensor C = t.val(a);
    for (double& x : C.v) x = std::tanh(x);
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, out](Tape& tp) {
        const Tensor& Y = tp.val(out);
        const Tensor& dC = tp.grad(out);
        Tensor& dA = tp.grad(a);
        for (size_t i = 0; i < dC.v.size(); ++i) dA.v[i] += dC.v[i] * (1.0 - Y.v[i] * Y.v[i]);
    });
}

Var exp_t(Tape& t, Var a) {
    Tensor C = t.val(a);
    for (double& x : C.v) x = std::exp(x);
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, out](Tape& tp) {
        const Tensor& Y = tp.val(out);
        const Tensor& dC = tp.grad(out);
        Tensor& dA = tp.grad(a);
        for (size_t i = 0; i < dC.v.size(); ++i) dA.v[i] += dC.v[i] * Y.v[i];
    });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias) {
    const Tensor& X = t.val(x);
    const Tensor& G = t.val(gain);
    const Tensor& B = t.val(bias);
    if (G.rows != 1 || G.cols != X.cols || B.rows != 1 || B.cols != X.cols)
        throw ShapeMismatch("layer_norm");
    Tensor Y(X.rows, X.cols);
    kernels::layer_norm(X.v.data(), G.v.data(), B.v.data(), Y.v.data(), X.rows, X.cols);
    Var out = self_var(t);
    return t.push(std::move(Y), any_grad(t, x, gain, bias), [x, gain, bias, out](Tape& tp) {
        const Tensor& X = tp.val(x);
        const Tensor& G = tp.val(gain);
        const Tensor& dY = tp.grad(out);
        kernels::layer_norm_backward(X.v.data(), G.v.data(), dY.v.data(), tp.grad(x).v.data(),
                                     tp.grad(gain).v.data(), tp.grad(bias).v.data(), X.rows, X.cols);
    });
}

Var softmax_causal(Tape& t, Var scores) {
    const Tensor& S = t.val(scores);
    if (S.rows != S.cols) throw ShapeMismatch("softmax_causal expects a square matrix");
    Tensor P(S.rows, S.cols);
    kernels::softmax_causal(S.v.data(), P.v.data(), S.rows);
    Var out = self_var(t);
    return t.push(std::move(P), any_grad(t, scores), [scores, out](Tape& tp) {
        const Tensor& P = tp.val(out);
        const Tensor& dP = tp.grad(out);
        kernels::softmax_causal_backward(P.v.data(), dP.v.data(), tp.grad(scores).v.data(), P.rows);
    });
}

Var embed_rows(Tape& t, Var table, const std::vector<int>& ids) {
    const Tensor& E = t.val(table);
    Tensor Y(static_cast<int>(ids.size()), E.cols);
    for (size_t r = 0; r < ids.size(); ++r) {
        const double* src = E.row(ids[r]);
        std::copy(src, src + E.cols, Y.row(static_cast<int>(r)));
    }
    Var out = self_var(t);
    return t.push(std::move(Y), any_grad(t, table), [table, ids, out](Tape& tp) {
        const Tensor& dY = tp.grad(out);
        Tensor& dE = tp.grad(table);
        for (size_t r = 0; r < ids.size(); ++r) {
            const double* g = dY.row(static_cast<int>(r));
            double* dst = dE.row(ids[r]);
            for (int j = 0; j < dY.cols; ++j) dst[j] += g[j];
        }
    });
}

Var concat_rows(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (A.cols != B.cols) throw ShapeMismatch("concat_rows");
    Tensor C(A.rows + B.rows, A.cols);
    std::copy(A.v.begin(), A.v.end(), C.v.begin());
    std::copy(B.v.begin(), B.v.end(), C.v.begin() + A.v.size());
    Var out = self_var(t);
    int split = A.rows;
    return t.push(std::move(C), any_grad(t, a, b), [a, b, split, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        size_t cut = static_cast<size_t>(split) * dC.cols;
        if (tp.needs_grad(a)) {
            Tensor& dA = tp.grad(a);
            for (size_t i = 0; i < cut; ++i) dA.v[i] += dC.v[i];
        }
        if (tp.needs_grad(b)) {
            Tensor& dB = tp.grad(b);
            for (size_t i = cut; i < dC.v.size(); ++i) dB.v[i - cut] += dC.v[i];
        }
    });
}

Var slice_rows(Tape& t, Var a, int r0, int r1) {
    const Tensor& A = t.val(a);
    if (r0 < 0 || r1 > A.rows || r0 >= r1) throw ShapeMismatch("slice_rows");
    Tensor C(r1 - r0, A.cols);
    std::copy(A.row(r0), A.row(r0) + C.v.size(), C.v.begin());
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, r0, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        Tensor& dA = tp.grad(a);
        double* dst = dA.row(r0);
        for (size_t i = 0; i < dC.v.size(); ++i) dst[i] += dC.v[i];
    });
}

Var slice_cols(Tape& t, Var a, int c0, int c1) {
    const Tensor& A = t.val(a);
    if (c0 < 0 || c1 > A.cols || c0 >= c1) throw ShapeMismatch("slice_cols");
    Tensor C(A.rows, c1 - c0);
    for (int r = 0; r < A.rows; ++r)
        std::copy(A.row(r) + c0, A.row(r) + c1, C.row(r));
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, c0, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        Tensor& dA = tp.grad(a);
        for (int r = 0; r < dC.rows; ++r) {
            double* dst = dA.row(r) + c0;
            const double* src = dC.row(r);
            for (int j = 0; j < dC.cols; ++j) dst[j] += src[j];
        }
    });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
    int rows = t.val(parts[0]).rows;
    int cols = 0;
    bool ng = false;
    for (Var p : parts) {
        const Tensor& P = t.val(p);
        if (P.rows != rows) throw ShapeMismatch("concat_cols");
        cols += P.cols;
        ng = ng || t.needs_grad(p);
    }
    Tensor C(rows, cols);
    int off = 0;
    for (Var p : parts) {
        const Tensor& P = t.val(p);
        for (int r = 0; r < rows; ++r) std::copy(P.row(r), P.row(r) + P.cols, C.row(r) + off);
        off += P.cols;
    }
    Var out = self_var(t);
    return t.push(std::move(C), ng, [parts, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        int off = 0;
        for (Var p : parts) {
            const Tensor& P = tp.val(p);
            if (tp.needs_grad(p)) {
                Tensor& dP = tp.grad(p);
                for (int r = 0; r < dC.rows; ++r) {
                    const double* src = dC.row(r) + off;
                    double* dst = dP.row(r);
                    for (int j = 0; j < P.cols; ++j) dst[j] += src[j];
                }
            }
            off += P.cols;
        }
    });
}

Var mean_rows_subset(Tape& t, Var a, std::vector<int> rows) {
    const Tensor& A = t.val(a);
    if (rows.empty()) throw ShapeMismatch("mean_rows_subset needs rows");
    Tensor C(1, A.cols);
    for (int r : rows) {
        if (r < 0 || r >= A.rows) throw ShapeMismatch("mean_rows_subset row index");
        const double* src = A.row(r);
        for (int j = 0; j < A.cols; ++j) C.v[j] += src[j];
    }
    double inv = 1.0 / static_cast<double>(rows.size());
    for (double& x : C.v) x *= inv;
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, rows, inv, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        Tensor& dA = tp.grad(a);
        for (int r : rows) {
            double* dst = dA.row(r);
            for (int j = 0; j < dC.cols; ++j) dst[j] += inv * dC.v[j];
        }
    });
}

Var mean_vars(Tape& t, const std::vector<Var>& xs) {
    const Tensor& first = t.val(xs[0]);
    Tensor C(first.rows, first.cols);
    bool ng = false;
    for (Var x : xs) {
        const Tensor& X = t.val(x);
        if (!X.same_shape(first)) throw ShapeMismatch("mean_vars");
        for (size_t i = 0; i < C.v.size(); ++i) C.v[i] += X.v[i];
        ng = ng || t.needs_grad(x);
    }
    double inv = 1.0 / static_cast<double>(xs.size());
    for (double& x : C.v) x *= inv;
    Var out = self_var(t);
    return t.push(std::move(C), ng, [xs, inv, out](Tape& tp) {
        const Tensor& dC = tp.grad(out);
        for (Var x : xs) {
            if (!tp.needs_grad(x)) continue;
            Tensor& dX = tp.grad(x);
            for (size_t i = 0; i < dC.v.size(); ++i) dX.v[i] += inv * dC.v[i];
        }
    });
}

Var mean_all(Tape& t, Var a) {
    const Tensor& A = t.val(a);
    double s = 0.0;
    for (double x : A.v) s += x;
    double inv = 1.0 / static_cast<double>(A.v.size());
    Tensor C(1, 1);
    C.v[0] = s * inv;
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, inv, out](Tape& tp) {
        double g = tp.grad(out).v[0];
        Tensor& dA = tp.grad(a);
        for (double& x : dA.v) x += g * inv;
    });
}

Var weighted_sum(Tape& t, const std::vector<Var>& scalars, const std::vector<double>& w) {
    if (scalars.size() != w.size()) throw ShapeMismatch("weighted_sum");
    double s = 0.0;
    bool ng = false;
    for (size_t i = 0; i < scalars.size(); ++i) {
        const Tensor& X = t.val(scalars[i]);
        if (X.rows != 1 || X.cols != 1) throw ShapeMismatch("weighted_sum expects scalars");
        s += w[i] * X.v[0];
        ng = ng || t.needs_grad(scalars[i]);
    }
    Tensor C(1, 1);
    C.v[0] = s;
    Var out = self_var(t);
    return t.push(std::move(C), ng, [scalars, w, out](Tape& tp) {
        double g = tp.grad(out).v[0];
        for (size_t i = 0; i < scalars.size(); ++i)
            if (tp.needs_grad(scalars[i])) tp.grad(scalars[i]).v[0] += w[i] * g;
    });
}

Var cross_entropy_masked(Tape& t, Var logits, std::vector<int> targets, std::vector<uint8_t> mask) {
    const Tensor& L = t.val(logits);
    if (static_cast<int>(targets.size()) != L.rows || mask.size() != targets.size())
        throw ShapeMismatch("cross_entropy_masked");
    int n_masked = 0;
    for (uint8_t m : mask) n_masked += m ? 1 : 0;
    if (n_masked == 0) throw EmptyMask();

    double loss = 0.0;
    for (int r = 0; r < L.rows; ++r) {
        if (!mask[r]) continue;
        const double* row = L.row(r);
        double mx = row[0];
        for (int j = 1; j < L.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < L.cols; ++j) sum += std::exp(row[j] - mx);
        double lse = mx + std::log(sum);
        loss -= row[targets[r]] - lse;
    }
    loss /= n_masked;

    Tensor C(1, 1);
    C.v[0] = loss;
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, logits),
                  [logits, targets = std::move(targets), mask = std::move(mask), n_masked, out](Tape& tp) {
                      const Tensor& L = tp.val(logits);
                      Tensor& dL = tp.grad(logits);
                      double g = tp.grad(out).v[0] / n_masked;
                      for (int r = 0; r < L.rows; ++r) {
                          if (!mask[r]) continue;
                          const double* row = L.row(r);
                          double* drow = dL.row(r);
                          double mx = row[0];
                          for (int j = 1; j < L.cols; ++j) mx = std::max(mx, row[j]);
                          double sum = 0.0;
                          for (int j = 0; j < L.cols; ++j) sum += std::exp(row[j] - mx);
                          for (int j = 0; j < L.cols; ++j) {
                              double p = std::exp(row[j] - mx) / sum;
                              drow[j] += g * (p - (j == targets[r] ? 1.0 : 0.0));
                          }
                      }
                  });
}

Var gather_log_probs(Tape& t, Var logits, std::vector<int> ids) {
    const Tensor& L = t.val(logits);
    if (static_cast<int>(ids.size()) != L.rows) throw ShapeMismatch("gather_log_probs");
    Tensor C(L.rows, 1);
    for (int r = 0; r < L.rows; ++r) {
        const double* row = L.row(r);
        double mx = row[0];
        for (int j = 1; j < L.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < L.cols; ++j) sum += std::exp(row[j] - mx);
        C.v[r] = row[ids[r]] - (mx + std::log(sum));
    }
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, logits), [logits, ids = std::move(ids), out](Tape& tp) {
        const Tensor& L = tp.val(logits);
        Tensor& dL = tp.grad(logits);
        const Tensor& dC = tp.grad(out);
        for (int r = 0; r < L.rows; ++r) {
            double g = dC.v[r];
            if (g == 0.0) continue;
            const double* row = L.row(r);
            double* drow = dL.row(r);
            double mx = row[0];
            for (int j = 1; j < L.cols; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (int j = 0; j < L.cols; ++j) sum += std::exp(row[j] - mx);
            for (int j = 0; j < L.cols; ++j) {
                double p = std::exp(row[j] - mx) / sum;
                drow[j] += g * ((j == ids[r] ? 1.0 : 0.0) - p);
            }
        }
    });
}

Var weighted_sq_err(Tape& t, Var a, std::vector<double> eta, std::vector<double> lambda) {
    const Tensor& A = t.val(a);
    size_t m = A.v.size();
    if (eta.size() != m || lambda.size() != m) throw DimensionMismatch("weighted_sq_err");
    double loss = 0.0;
    for (size_t j = 0; j < m; ++j) {
        double d = A.v[j] - eta[j];
        loss += lambda[j] * d * d;
    }
    loss /= static_cast<double>(m);
    Tensor C(1, 1);
    C.v[0] = loss;
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a),
                  [a, eta = std::move(eta), lambda = std::move(lambda), m, out](Tape& tp) {
                      const Tensor& A = tp.val(a);
                      Tensor& dA = tp.grad(a);
                      double g = tp.grad(out).v[0] * 2.0 / static_cast<double>(m);
                      for (size_t j = 0; j < m; ++j) dA.v[j] += g * lambda[j] * (A.v[j] - eta[j]);
                  });
}

Var sq_dist_const(Tape& t, Var a, Tensor b) {
    const Tensor& A = t.val(a);
    if (!A.same_shape(b)) throw DimensionMismatch("sq_dist_const");
    double loss = 0.0;
    for (size_t i = 0; i < A.v.size(); ++i) {
        double d = A.v[i] - b.v[i];
        loss += d * d;
    }
    Tensor C(1, 1);
    C.v[0] = loss;
    Var out = self_var(t);
    return t.push(std::move(C), any_grad(t, a), [a, b = std::move(b), out](Tape& tp) {
        const Tensor& A = tp.val(a);
        Tensor& dA = tp.grad(a);
        double g = tp.grad(out).v[0];
        for (size_t i = 0; i < A.v.size(); ++i) dA.v[i] += g * 2.0 * (A.v[i] - b.v[i]);
    });
}

}  // namespace gcsd::ag
