#pragma once

#include <cstddef>

namespace gcsd::kernels {

// The hot inner loops of the training core. Every kernel exists twice:
// a serial reference under kernels::serial and an OpenMP version under
// kernels::omp. Both compute each output element with the same serial
// accumulation order, so their results are bit-identical and the parallel
// backend can be validated against the reference by exact comparison
// (see tests/test_kernels.cpp and the gcsd_bench target).
//
// All matrices are dense row-major.

namespace serial {

// c[m x n] += a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// c[m x n] += a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
// c[m x n] += a[k x m]^T * b[k x n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

// Row-wise causal softmax over an m x m score matrix: row r is a softmax
// over columns 0..r, columns > r are exactly 0.
void softmax_causal(const double* scores, double* probs, int m);
// dscores[r][j] += p[r][j] * (dprobs[r][j] - sum_k dprobs[r][k] * p[r][k])
void softmax_causal_backward(const double* probs, const double* dprobs, double* dscores, int m);

void gelu(const double* x, double* y, size_t n);
// dx[i] += dy[i] * gelu'(x[i])
void gelu_backward(const double* x, const double* dy, double* dx, size_t n);

// Row-wise layer norm with gain g and bias b (length c), eps 1e-5.
void layer_norm(const double* x, const double* g, const double* b, double* y, int r, int c);
void layer_norm_backward(const double* x, const double* g, const double* dy, double* dx, double* dg,
                         double* db, int r, int c);

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);
void softmax_causal(const double* scores, double* probs, int m);
void softmax_causal_backward(const double* probs, const double* dprobs, double* dscores, int m);
void gelu(const double* x, double* y, size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, size_t n);
void layer_norm(const double* x, const double* g, const double* b, double* y, int r, int c);
void layer_norm_backward(const double* x, const double* g, const double* dy, double* dx, double* dg,
                         double* db, int r, int c);

}  // namespace omp

enum class Backend { Serial, OpenMP };

Backend backend();
void set_backend(Backend b);

// Dispatch to the active backend.
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);
void softmax_causal(const double* scores, double* probs, int m);
void softmax_causal_backward(const double* probs, const double* dprobs, double* dscores, int m);
void gelu(const double* x, double* y, size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, size_t n);
void layer_norm(const double* x, const double* g, const double* b, double* y, int r, int c);
void layer_norm_backward(const double* x, const double* g, const double* dy, double* dx, double* dg,
                         double* db, int r, int c);

double gelu_scalar(double x);
double gelu_grad_scalar(double x);

}  // namespace gcsd::kernels
