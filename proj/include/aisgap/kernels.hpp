#pragma once

// Dense numeric kernels used by the neural core and the geo batch queries.
//
// Every kernel exists twice: an OpenMP-parallel version in aisgap::kernels
// and a plain serial version in aisgap::kernels::reference. The reference
// versions are kept for testing and benchmarking only. Parallel versions
// partition work over output rows so each output element is produced by
// exactly one thread in a fixed order; results do not depend on the thread
// count.

#include <cstddef>
#include <span>

namespace aisgap::kernels {

enum class Trans { No, Yes };

/// C = alpha * op(A) * op(B) + beta * C, all row-major.
/// op(A) is m x k, op(B) is k x n, C is m x n.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc);

/// y[r, :] += bias for every row r of an rows x cols matrix.
void add_row_bias(std::span<double> y, std::span<const double> bias, std::size_t rows,
                  std::size_t cols);

/// out[c] += sum over rows of x[r, c].
void accumulate_column_sums(std::span<const double> x, std::size_t rows, std::size_t cols,
                            std::span<double> out);

/// In-place numerically stable softmax over each row.
void softmax_rows(std::span<double> x, std::size_t rows, std::size_t cols);

/// Given softmax output p and upstream gradient dp, writes dx = p * (dp - <dp, p>) per row.
void softmax_rows_backward(std::span<const double> p, std::span<const double> dp,
                           std::span<double> dx, std::size_t rows, std::size_t cols);

/// Row-wise layer normalization. Writes normalized xhat (before affine), the
/// per-row inverse standard deviation and y = xhat * gamma + beta.
void layer_norm_rows(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::size_t rows, std::size_t cols,
                     double eps, std::span<double> xhat, std::span<double> inv_std,
                     std::span<double> y);

/// Backward of layer_norm_rows. Accumulates dgamma/dbeta and writes dx.
void layer_norm_rows_backward(std::span<const double> xhat, std::span<const double> inv_std,
                              std::span<const double> gamma, std::span<const double> dy,
                              std::size_t rows, std::size_t cols, std::span<double> dx,
                              std::span<double> dgamma, std::span<double> dbeta);

/// Number of threads the parallel kernels will use.
int max_threads();

/// Keeps freed heap memory mapped so large per-batch tensors do not fault in
/// fresh pages on every forward pass. Process-wide; call once from main.
void retain_freed_memory();

namespace reference {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc);
void add_row_bias(std::span<double> y, std::span<const double> bias, std::size_t rows,
                  std::size_t cols);
void accumulate_column_sums(std::span<const double> x, std::size_t rows, std::size_t cols,
                            std::span<double> out);
void softmax_rows(std::span<double> x, std::size_t rows, std::size_t cols);
void softmax_rows_backward(std::span<const double> p, std::span<const double> dp,
                           std::span<double> dx, std::size_t rows, std::size_t cols);
void layer_norm_rows(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::size_t rows, std::size_t cols,
                     double eps, std::span<double> xhat, std::span<double> inv_std,
                     std::span<double> y);
void layer_norm_rows_backward(std::span<const double> xhat, std::span<const double> inv_std,
                              std::span<const double> gamma, std::span<const double> dy,
                              std::size_t rows, std::size_t cols, std::span<double> dx,
                              std::span<double> dgamma, std::span<double> dbeta);

}  // namespace reference
}  // namespace aisgap::kernels
