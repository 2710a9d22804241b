#include "tailaug/core/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tailaug::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// below this many multiply-adds the fork/join overhead dominates
constexpr long kMatmulParThreshold = 64 * 1024;
constexpr long kElemParThreshold = 1 << 15;
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = accumulate ? ci[j] + s : s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
        for (int p = 0; p < k; ++p) {
            double av = a[static_cast<size_t>(p) * m + i];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void add(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul(const double* a, const double* b, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void axpy(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}
void scale(const double* a, double s, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * s;
}
void vtanh(const double* a, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
}
void vsigmoid(const double* a, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
}
void vrelu(const double* a, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}
void vexp(const double* a, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = std::exp(a[i]);
}

void softmax_rows(const double* a, double* out, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const double* ai = a + static_cast<size_t>(i) * cols;
        double* oi = out + static_cast<size_t>(i) * cols;
        double mx = ai[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, ai[j]);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) {
            oi[j] = std::exp(ai[j] - mx);
            z += oi[j];
        }
        double inv = 1.0 / z;
        for (int j = 0; j < cols; ++j) oi[j] *= inv;
    }
}

}  // namespace serial

namespace par {

// Row-parallel: each output row is produced by one thread with the serial
// inner-loop order, keeping results bitwise equal to serial::.

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kMatmulParThreshold)
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kMatmulParThreshold)
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = accumulate ? ci[j] + s : s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kMatmulParThreshold)
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
        for (int p = 0; p < k; ++p) {
            double av = a[static_cast<size_t>(p) * m + i];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void add(const double* a, const double* b, double* out, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold)
    for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub(const double* a, const double* b, double* out, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold)
    for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul(const double* a, const double* b, double* out, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold)
    for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void axpy(double alpha, const double* x, double* y, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold)
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}
void scale(const double* a, double s, double* out, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold)
    for (int i = 0; i < n; ++i) out[i] = a[i] * s;
}
void vtanh(const double* a, double* out, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold / 8)
    for (int i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
}
void vsigmoid(const double* a, double* out, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold / 8)
    for (int i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
}
void vrelu(const double* a, double* out, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold)
    for (int i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}
void vexp(const double* a, double* out, int n) {
#pragma omp parallel for schedule(static) if (n > kElemParThreshold / 8)
    for (int i = 0; i < n; ++i) out[i] = std::exp(a[i]);
}

void softmax_rows(const double* a, double* out, int rows, int cols) {
#pragma omp parallel for schedule(static) if (static_cast<long>(rows) * cols > kElemParThreshold / 4)
    for (int i = 0; i < rows; ++i) {
        serial::softmax_rows(a + static_cast<size_t>(i) * cols, out + static_cast<size_t>(i) * cols, 1, cols);
    }
}

}  // namespace par

#define TAILAUG_DISPATCH(fn, ...)          \
    do {                                   \
        if (parallel_enabled())            \
            par::fn(__VA_ARGS__);          \
        else                               \
            serial::fn(__VA_ARGS__);       \
    } while (0)

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    TAILAUG_DISPATCH(matmul_nn, a, b, c, m, k, n, accumulate);
}
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    TAILAUG_DISPATCH(matmul_nt, a, b, c, m, k, n, accumulate);
}
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    TAILAUG_DISPATCH(matmul_tn, a, b, c, m, k, n, accumulate);
}
void add(const double* a, const double* b, double* out, int n) { TAILAUG_DISPATCH(add, a, b, out, n); }
void sub(const double* a, const double* b, double* out, int n) { TAILAUG_DISPATCH(sub, a, b, out, n); }
void mul(const double* a, const double* b, double* out, int n) { TAILAUG_DISPATCH(mul, a, b, out, n); }
void axpy(double alpha, const double* x, double* y, int n) { TAILAUG_DISPATCH(axpy, alpha, x, y, n); }
void scale(const double* a, double s, double* out, int n) { TAILAUG_DISPATCH(scale, a, s, out, n); }
void vtanh(const double* a, double* out, int n) { TAILAUG_DISPATCH(vtanh, a, out, n); }
void vsigmoid(const double* a, double* out, int n) { TAILAUG_DISPATCH(vsigmoid, a, out, n); }
void vrelu(const double* a, double* out, int n) { TAILAUG_DISPATCH(vrelu, a, out, n); }
void vexp(const double* a, double* out, int n) { TAILAUG_DISPATCH(vexp, a, out, n); }
void softmax_rows(const double* a, double* out, int rows, int cols) {
    TAILAUG_DISPATCH(softmax_rows, a, out, rows, cols);
}

#undef TAILAUG_DISPATCH

}  // namespace tailaug::kernels
