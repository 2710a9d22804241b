#pragma once

#include <cstddef>

namespace tailaug::kernels {

// Two implementations of every hot kernel: `serial` is the reference the
// tests compare against, `par` is the OpenMP version used by default. Both
// compute each output element with the same inner-loop order, so results are
// bitwise identical and independent of the thread count.

bool parallel_enabled();
void set_parallel(bool on);

namespace serial {

// C (m x n) = A (m x k) @ B (k x n), accumulate=false overwrites C
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
// C (m x n) = A (m x k) @ B^T (B is n x k)
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
// C (m x n) = A^T (A is k x m) @ B (k x n)
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

void add(const double* a, const double* b, double* out, int n);
void sub(const double* a, const double* b, double* out, int n);
void mul(const double* a, const double* b, double* out, int n);
void axpy(double alpha, const double* x, double* y, int n);  // y += alpha*x
void scale(const double* a, double s, double* out, int n);
void vtanh(const double* a, double* out, int n);
void vsigmoid(const double* a, double* out, int n);
void vrelu(const double* a, double* out, int n);
void vexp(const double* a, double* out, int n);
void softmax_rows(const double* a, double* out, int rows, int cols);

}  // namespace serial

namespace par {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

void add(const double* a, const double* b, double* out, int n);
void sub(const double* a, const double* b, double* out, int n);
void mul(const double* a, const double* b, double* out, int n);
void axpy(double alpha, const double* x, double* y, int n);
void scale(const double* a, double s, double* out, int n);
void vtanh(const double* a, double* out, int n);
void vsigmoid(const double* a, double* out, int n);
void vrelu(const double* a, double* out, int n);
void vexp(const double* a, double* out, int n);
void softmax_rows(const double* a, double* out, int rows, int cols);

}  // namespace par

// Dispatchers: route to par:: when parallelism is enabled, serial:: otherwise.
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate = false);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate = false);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate = false);
void add(const double* a, const double* b, double* out, int n);
void sub(const double* a, const double* b, double* out, int n);
void mul(const double* a, const double* b, double* out, int n);
void axpy(double alpha, const double* x, double* y, int n);
void scale(const double* a, double s, double* out, int n);
void vtanh(const double* a, double* out, int n);
void vsigmoid(const double* a, double* out, int n);
void vrelu(const double* a, double* out, int n);
void vexp(const double* a, double* out, int n);
void softmax_rows(const double* a, double* out, int rows, int cols);

}  // namespace tailaug::kernels
