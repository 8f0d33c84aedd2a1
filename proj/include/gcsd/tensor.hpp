#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace gcsd {

// Dense row-major 2-D tensor of doubles. Vectors are 1xN or Nx1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
    Tensor(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
        assert(v.size() == static_cast<size_t>(r) * c);
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    bool finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline Tensor row_vector(std::vector<double> data) {
    int n = static_cast<int>(data.size());
    return Tensor(1, n, std::move(data));
}

}  // namespace gcsd
