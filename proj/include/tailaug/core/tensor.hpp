#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tailaug/core/rng.hpp"

namespace tailaug {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 tensors; all
// model state and activations use this one shape family.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    static Tensor row(const std::vector<double>& v) {
        Tensor t(1, static_cast<int>(v.size()));
        t.data = v;
        return t;
    }

    int size() const { return rows * cols; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
    double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Glorot-uniform initialization
    static Tensor xavier(int r, int c, Rng& rng) {
        Tensor t(r, c);
        double bound = std::sqrt(6.0 / (r + c));
        for (double& v : t.data) v = rng.uniform(-bound, bound);
        return t;
    }

    static Tensor randn(int r, int c, Rng& rng, double stddev = 1.0) {
        Tensor t(r, c);
        for (double& v : t.data) v = rng.normal() * stddev;
        return t;
    }
};

}  // namespace tailaug
