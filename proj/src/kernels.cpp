#include "gcsd/kernels.hpp"

#include <atomic>
#include <cmath>

namespace gcsd::kernels {

namespace {
constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad_scalar(double x) {
    double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// Serial reference implementations.
// ---------------------------------------------------------------------------

namespace serial {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            double av = a[static_cast<size_t>(i) * k + l];
            const double* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int l = 0; l < k; ++l) s += arow[l] * brow[l];
            crow[j] += s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            double av = a[static_cast<size_t>(l) * m + i];
            const double* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void softmax_causal(const double* scores, double* probs, int m) {
    for (int r = 0; r < m; ++r) {
        const double* srow = scores + static_cast<size_t>(r) * m;
        double* prow = probs + static_cast<size_t>(r) * m;
        double mx = srow[0];
        for (int j = 1; j <= r; ++j) mx = std::max(mx, srow[j]);
        double sum = 0.0;
        for (int j = 0; j <= r; ++j) {
            double e = std::exp(srow[j] - mx);
            prow[j] = e;
            sum += e;
        }
        double inv = 1.0 / sum;
        for (int j = 0; j <= r; ++j) prow[j] *= inv;
        for (int j = r + 1; j < m; ++j) prow[j] = 0.0;
    }
}

void softmax_causal_backward(const double* probs, const double* dprobs, double* dscores, int m) {
    for (int r = 0; r < m; ++r) {
        const double* prow = probs + static_cast<size_t>(r) * m;
        const double* dprow = dprobs + static_cast<size_t>(r) * m;
        double* dsrow = dscores + static_cast<size_t>(r) * m;
        double dot = 0.0;
        for (int j = 0; j <= r; ++j) dot += dprow[j] * prow[j];
        for (int j = 0; j <= r; ++j) dsrow[j] += prow[j] * (dprow[j] - dot);
    }
}

void gelu(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

void gelu_backward(const double* x, const double* dy, double* dx, size_t n) {
    for (size_t i = 0; i < n; ++i) dx[i] += dy[i] * gelu_grad_scalar(x[i]);
}

void layer_norm(const double* x, const double* g, const double* b, double* y, int r, int c) {
    for (int i = 0; i < r; ++i) {
        const double* xr = x + static_cast<size_t>(i) * c;
        double* yr = y + static_cast<size_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += xr[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            double d = xr[j] - mean;
            var += d * d;
        }
        var /= c;
        double inv = 1.0 / std::sqrt(var + kLnEps);
        for (int j = 0; j < c; ++j) yr[j] = g[j] * (xr[j] - mean) * inv + b[j];
    }
}

void layer_norm_backward(const double* x, const double* g, const double* dy, double* dx, double* dg,
                         double* db, int r, int c) {
    for (int i = 0; i < r; ++i) {
        const double* xr = x + static_cast<size_t>(i) * c;
        const double* dyr = dy + static_cast<size_t>(i) * c;
        double* dxr = dx + static_cast<size_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += xr[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            double d = xr[j] - mean;
            var += d * d;
        }
        var /= c;
        double inv = 1.0 / std::sqrt(var + kLnEps);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < c; ++j) {
            double xhat = (xr[j] - mean) * inv;
            double dxhat = dyr[j] * g[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        for (int j = 0; j < c; ++j) {
            double xhat = (xr[j] - mean) * inv;
            double dxhat = dyr[j] * g[j];
            dxr[j] += inv * (dxhat - sum_dxhat / c - xhat * sum_dxhat_xhat / c);
        }
        for (int j = 0; j < c; ++j) {
            double xhat = (xr[j] - mean) * inv;
            dg[j] += dyr[j] * xhat;
            db[j] += dyr[j];
        }
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP implementations. Each output element is produced by exactly one
// thread with the same inner accumulation order as the serial reference,
// so results match the reference bit for bit at any thread count.
// ---------------------------------------------------------------------------

namespace omp {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            double av = a[static_cast<size_t>(i) * k + l];
            const double* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int l = 0; l < k; ++l) s += arow[l] * brow[l];
            crow[j] += s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            double av = a[static_cast<size_t>(l) * m + i];
            const double* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void softmax_causal(const double* scores, double* probs, int m) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m; ++r) {
        const double* srow = scores + static_cast<size_t>(r) * m;
        double* prow = probs + static_cast<size_t>(r) * m;
        double mx = srow[0];
        for (int j = 1; j <= r; ++j) mx = std::max(mx, srow[j]);
        double sum = 0.0;
        for (int j = 0; j <= r; ++j) {
            double e = std::exp(srow[j] - mx);
            prow[j] = e;
            sum += e;
        }
        double inv = 1.0 / sum;
        for (int j = 0; j <= r; ++j) prow[j] *= inv;
        for (int j = r + 1; j < m; ++j) prow[j] = 0.0;
    }
}

void softmax_causal_backward(const double* probs, const double* dprobs, double* dscores, int m) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m; ++r) {
        const double* prow = probs + static_cast<size_t>(r) * m;
        const double* dprow = dprobs + static_cast<size_t>(r) * m;
        double* dsrow = dscores + static_cast<size_t>(r) * m;
        double dot = 0.0;
        for (int j = 0; j <= r; ++j) dot += dprow[j] * prow[j];
        for (int j = 0; j <= r; ++j) dsrow[j] += prow[j] * (dprow[j] - dot);
    }
}

void gelu(const double* x, double* y, size_t n) {
    const int64_t nn = static_cast<int64_t>(n);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < nn; ++i) y[i] = gelu_scalar(x[i]);
}

void gelu_backward(const double* x, const double* dy, double* dx, size_t n) {
    const int64_t nn = static_cast<int64_t>(n);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < nn; ++i) dx[i] += dy[i] * gelu_grad_scalar(x[i]);
}

void layer_norm(const double* x, const double* g, const double* b, double* y, int r, int c) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < r; ++i) {
        serial::layer_norm(x + static_cast<size_t>(i) * c, g, b, y + static_cast<size_t>(i) * c, 1, c);
    }
}

void layer_norm_backward(const double* x, const double* g, const double* dy, double* dx, double* dg,
                         double* db, int r, int c) {
    // dx rows are independent; dg/db accumulate across rows and stay serial
    // so the accumulation order matches the reference.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < r; ++i) {
        const double* xr = x + static_cast<size_t>(i) * c;
        const double* dyr = dy + static_cast<size_t>(i) * c;
        double* dxr = dx + static_cast<size_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += xr[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            double d = xr[j] - mean;
            var += d * d;
        }
        var /= c;
        double inv = 1.0 / std::sqrt(var + kLnEps);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < c; ++j) {
            double xhat = (xr[j] - mean) * inv;
            double dxhat = dyr[j] * g[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        for (int j = 0; j < c; ++j) {
            double xhat = (xr[j] - mean) * inv;
            double dxhat = dyr[j] * g[j];
            dxr[j] += inv * (dxhat - sum_dxhat / c - xhat * sum_dxhat_xhat / c);
        }
    }
    for (int i = 0; i < r; ++i) {
        const double* xr = x + static_cast<size_t>(i) * c;
        const double* dyr = dy + static_cast<size_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += xr[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            double d = xr[j] - mean;
            var += d * d;
        }
        var /= c;
        double inv = 1.0 / std::sqrt(var + kLnEps);
        for (int j = 0; j < c; ++j) {
            dg[j] += dyr[j] * (xr[j] - mean) * inv;
            db[j] += dyr[j];
        }
    }
}

}  // namespace omp

// ---------------------------------------------------------------------------
// Backend dispatch.
// ---------------------------------------------------------------------------

namespace {
std::atomic<Backend> g_backend{Backend::OpenMP};
}

Backend backend() { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

#define GCSD_DISPATCH(fn, ...)                  \
    if (backend() == Backend::OpenMP)           \
        omp::fn(__VA_ARGS__);                   \
    else                                        \
        serial::fn(__VA_ARGS__)

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    GCSD_DISPATCH(matmul, a, b, c, m, k, n);
}
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    GCSD_DISPATCH(matmul_nt, a, b, c, m, k, n);
}
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    GCSD_DISPATCH(matmul_tn, a, b, c, m, k, n);
}
void softmax_causal(const double* scores, double* probs, int m) {
    GCSD_DISPATCH(softmax_causal, scores, probs, m);
}
void softmax_causal_backward(const double* probs, const double* dprobs, double* dscores, int m) {
    GCSD_DISPATCH(softmax_causal_backward, probs, dprobs, dscores, m);
}
void gelu(const double* x, double* y, size_t n) { GCSD_DISPATCH(gelu, x, y, n); }
void gelu_backward(const double* x, const double* dy, double* dx, size_t n) {
    GCSD_DISPATCH(gelu_backward, x, dy, dx, n);
}
void layer_norm(const double* x, const double* g, const double* b, double* y, int r, int c) {
    GCSD_DISPATCH(layer_norm, x, g, b, y, r, c);
}
void layer_norm_backward(const double* x, const double* g, const double* dy, double* dx, double* dg,
                         double* db, int r, int c) {
    GCSD_DISPATCH(layer_norm_backward, x, g, dy, dx, dg, db, r, c);
}

#undef GCSD_DISPATCH

}  // namespace gcsd::kernels
