#include "aisgap/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aisgap::kernels {

namespace {

constexpr std::size_t kTileRows = 6;
constexpr std::size_t kLanes = 8;
constexpr std::size_t kTileCols = 2 * kLanes;
constexpr std::size_t kDepthBlock = 256;

typedef double Vec __attribute__((vector_size(kLanes * sizeof(double))));


// Packs op(A) into strips of kTileRows rows, interleaved by k so that the
// kTileRows values for one k are contiguous. Short final strip is zero-padded.
std::vector<double> pack_strips(Trans t, std::size_t m, std::size_t k, const double* a,
                                std::size_t lda) {
    const std::size_t strips = (m + kTileRows - 1) / kTileRows;
    std::vector<double> out(strips * kTileRows * k, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* dst = out.data() + (i / kTileRows) * kTileRows * k + (i % kTileRows);
        for (std::size_t p = 0; p < k; ++p)
            dst[p * kTileRows] = t == Trans::No ? a[i * lda + p] : a[p * lda + i];
    }
    return out;
}

// Packs op(B) into column panels of kTileCols, zero-padded to full width.
std::vector<double> pack_panels(Trans t, std::size_t k, std::size_t n, const double* b,
                                std::size_t ldb) {
    const std::size_t panels = (n + kTileCols - 1) / kTileCols;
    std::vector<double> out(panels * kTileCols * k, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = t == Trans::No ? b[p * ldb + j] : b[j * ldb + p];
            out[(j / kTileCols) * kTileCols * k + p * kTileCols + (j % kTileCols)] = v;
        }
    }
    return out;
}

inline Vec load(const double* p) {
    Vec v;
    __builtin_memcpy(&v, p, sizeof(Vec));
    return v;
}

// acc(kTileRows x kTileCols) = strip(kTileRows x k) * panel(k x kTileCols)
inline void micro_kernel(std::size_t k, const double* a, const double* b,
                         double (&out)[kTileRows][kTileCols]) {
    Vec c00{}, c01{}, c10{}, c11{}, c20{}, c21{}, c30{}, c31{}, c40{}, c41{}, c50{}, c51{};
    for (std::size_t p = 0; p < k; ++p) {
        const Vec b0 = load(b + p * kTileCols);
        const Vec b1 = load(b + p * kTileCols + kLanes);
        const double* ap = a + p * kTileRows;
        c00 += ap[0] * b0; c01 += ap[0] * b1;
        c10 += ap[1] * b0; c11 += ap[1] * b1;
        c20 += ap[2] * b0; c21 += ap[2] * b1;
        c30 += ap[3] * b0; c31 += ap[3] * b1;
        c40 += ap[4] * b0; c41 += ap[4] * b1;
        c50 += ap[5] * b0; c51 += ap[5] * b1;
    }
    const Vec rows[kTileRows][2] = {{c00, c01}, {c10, c11}, {c20, c21},
                                    {c30, c31}, {c40, c41}, {c50, c51}};
    for (std::size_t r = 0; r < kTileRows; ++r) {
        __builtin_memcpy(&out[r][0], &rows[r][0], sizeof(Vec));
        __builtin_memcpy(&out[r][kLanes], &rows[r][1], sizeof(Vec));
    }
}

inline void store_tile(const double (&acc)[kTileRows][kTileCols], std::size_t rows,
                       std::size_t cols, double alpha, double beta, double* c,
                       std::size_t ldc) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* crow = c + r * ldc;
        if (beta == 0.0) {
            for (std::size_t j = 0; j < cols; ++j) crow[j] = alpha * acc[r][j];
        } else {
            for (std::size_t j = 0; j < cols; ++j) crow[j] = alpha * acc[r][j] + beta * crow[j];
        }
    }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void retain_freed_memory() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 256 << 20);
#endif
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                c[i * ldc + j] = beta == 0.0 ? 0.0 : beta * c[i * ldc + j];
        return;
    }
    // Split k so a packed B panel stays cache resident; later blocks accumulate.
    for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
        const std::size_t kb = std::min(kDepthBlock, k - k0);
        const double* ablk = ta == Trans::No ? a + k0 : a + k0 * lda;
        const double* bblk = tb == Trans::No ? b + k0 * ldb : b + k0;
        const std::vector<double> ap = pack_strips(ta, m, kb, ablk, lda);
        const std::vector<double> bp = pack_panels(tb, kb, n, bblk, ldb);
        const double blk_beta = k0 == 0 ? beta : 1.0;
        const std::size_t panels = (n + kTileCols - 1) / kTileCols;
        const auto strips = static_cast<std::ptrdiff_t>((m + kTileRows - 1) / kTileRows);
        const double* ad = ap.data();
        const double* bd = bp.data();
#pragma omp parallel for schedule(static) if (m * n * kb > 32768)
        for (std::ptrdiff_t s = 0; s < strips; ++s) {
            const std::size_t i0 = static_cast<std::size_t>(s) * kTileRows;
            const std::size_t rows = std::min(kTileRows, m - i0);
            for (std::size_t jp = 0; jp < panels; ++jp) {
                const std::size_t j0 = jp * kTileCols;
                double acc[kTileRows][kTileCols];
                micro_kernel(kb, ad + i0 * kb, bd + j0 * kb, acc);
                store_tile(acc, rows, std::min(kTileCols, n - j0), alpha, blk_beta,
                           c + i0 * ldc + j0, ldc);
            }
        }
    }
}

void add_row_bias(std::span<double> y, std::span<const double> bias, std::size_t rows,
                  std::size_t cols) {
    const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > 65536)
    for (std::ptrdiff_t r = 0; r < nrows; ++r) {
        double* row = y.data() + static_cast<std::size_t>(r) * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += bias[c];
    }
}

void accumulate_column_sums(std::span<const double> x, std::size_t rows, std::size_t cols,
                            std::span<double> out) {
    // Columns are split across threads; each column is summed in row order.
    const auto ncols = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) if (rows * cols > 65536)
    for (std::ptrdiff_t c = 0; c < ncols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += x[r * cols + static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(c)] += s;
    }
}

void softmax_rows(std::span<double> x, std::size_t rows, std::size_t cols) {
    const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > 16384)
    for (std::ptrdiff_t r = 0; r < nrows; ++r) {
        double* row = x.data() + static_cast<std::size_t>(r) * cols;
        const double mx = *std::max_element(row, row + cols);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < cols; ++c) row[c] *= inv;
    }
}

void softmax_rows_backward(std::span<const double> p, std::span<const double> dp,
                           std::span<double> dx, std::size_t rows, std::size_t cols) {
    const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > 16384)
    for (std::ptrdiff_t r = 0; r < nrows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += dp[off + c] * p[off + c];
        for (std::size_t c = 0; c < cols; ++c) dx[off + c] = p[off + c] * (dp[off + c] - dot);
    }
}

void layer_norm_rows(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::size_t rows, std::size_t cols,
                     double eps, std::span<double> xhat, std::span<double> inv_std,
                     std::span<double> y) {
    const auto nrows = static_cast<std::ptrdiff_t>(rows);
    const double inv_n = 1.0 / static_cast<double>(cols);
#pragma omp parallel for schedule(static) if (rows * cols > 16384)
    for (std::ptrdiff_t r = 0; r < nrows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * cols;
        double mean = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mean += x[off + c];
        mean *= inv_n;
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = x[off + c] - mean;
            var += d * d;
        }
        var *= inv_n;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(r)] = is;
        for (std::size_t c = 0; c < cols; ++c) {
            const double h = (x[off + c] - mean) * is;
            xhat[off + c] = h;
            y[off + c] = h * gamma[c] + beta[c];
        }
    }
}

void layer_norm_rows_backward(std::span<const double> xhat, std::span<const double> inv_std,
                              std::span<const double> gamma, std::span<const double> dy,
                              std::size_t rows, std::size_t cols, std::span<double> dx,
                              std::span<double> dgamma, std::span<double> dbeta) {
    const auto nrows = static_cast<std::ptrdiff_t>(rows);
    const double inv_n = 1.0 / static_cast<double>(cols);
#pragma omp parallel for schedule(static) if (rows * cols > 16384)
    for (std::ptrdiff_t r = 0; r < nrows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * cols;
        double sum_g = 0.0;
        double sum_gh = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double g = dy[off + c] * gamma[c];
            sum_g += g;
            sum_gh += g * xhat[off + c];
        }
        const double is = inv_std[static_cast<std::size_t>(r)];
        for (std::size_t c = 0; c < cols; ++c) {
            const double g = dy[off + c] * gamma[c];
            dx[off + c] = is * (g - inv_n * sum_g - xhat[off + c] * inv_n * sum_gh);
        }
    }
    const auto ncols = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) if (rows * cols > 65536)
    for (std::ptrdiff_t c = 0; c < ncols; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        double sg = 0.0;
        double sb = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            sg += dy[r * cols + cc] * xhat[r * cols + cc];
            sb += dy[r * cols + cc];
        }
        dgamma[cc] += sg;
        dbeta[cc] += sb;
    }
}

namespace reference {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ta == Trans::No ? a[i * lda + p] : a[p * lda + i];
                const double bv = tb == Trans::No ? b[p * ldb + j] : b[j * ldb + p];
                s += av * bv;
            }
            double& out = c[i * ldc + j];
            out = beta == 0.0 ? alpha * s : alpha * s + beta * out;
        }
    }
}

void add_row_bias(std::span<double> y, std::span<const double> bias, std::size_t rows,
                  std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += bias[c];
}

void accumulate_column_sums(std::span<const double> x, std::size_t rows, std::size_t cols,
                            std::span<double> out) {
    for (std::size_t c = 0; c < cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += x[r * cols + c];
        out[c] += s;
    }
}

void softmax_rows(std::span<double> x, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = x[r * cols];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[r * cols + c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) sum += std::exp(x[r * cols + c] - mx);
        for (std::size_t c = 0; c < cols; ++c) x[r * cols + c] = std::exp(x[r * cols + c] - mx) / sum;
    }
}

void softmax_rows_backward(std::span<const double> p, std::span<const double> dp,
                           std::span<double> dx, std::size_t rows, std::size_t cols) {
    // Full Jacobian product: dx_i = sum_j p_i (delta_ij - p_j) dp_j.
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * cols;
        for (std::size_t i = 0; i < cols; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                const double jac = p[off + i] * ((i == j ? 1.0 : 0.0) - p[off + j]);
                s += jac * dp[off + j];
            }
            dx[off + i] = s;
        }
    }
}

void layer_norm_rows(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::size_t rows, std::size_t cols,
                     double eps, std::span<double> xhat, std::span<double> inv_std,
                     std::span<double> y) {
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mean += x[r * cols + c];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            var += (x[r * cols + c] - mean) * (x[r * cols + c] - mean);
        var /= static_cast<double>(cols);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            xhat[r * cols + c] = (x[r * cols + c] - mean) * inv_std[r];
            y[r * cols + c] = xhat[r * cols + c] * gamma[c] + beta[c];
        }
    }
}

void layer_norm_rows_backward(std::span<const double> xhat, std::span<const double> inv_std,
                              std::span<const double> gamma, std::span<const double> dy,
                              std::size_t rows, std::size_t cols, std::span<double> dx,
                              std::span<double> dgamma, std::span<double> dbeta) {
    const double n = static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < cols; ++i) {
            // dx_i = sum_j dy_j gamma_j d(xhat_j)/dx_i
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                const double d = (i == j ? 1.0 : 0.0) - 1.0 / n -
                                 xhat[r * cols + i] * xhat[r * cols + j] / n;
                s += dy[r * cols + j] * gamma[j] * inv_std[r] * d;
            }
            dx[r * cols + i] = s;
        }
    }
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) {
            dgamma[c] += dy[r * cols + c] * xhat[r * cols + c];
            dbeta[c] += dy[r * cols + c];
        }
    }
}

}  // namespace reference
}  // namespace aisgap::kernels
