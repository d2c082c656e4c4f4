#include <doctest.h>

#include <cmath>

#include "aisgap/kernels.hpp"
#include "support.hpp"

using namespace aisgap;
namespace k = aisgap::kernels;
namespace ref = aisgap::kernels::reference;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace

TEST_CASE("gemm matches the reference for every transpose combination") {
    rnd::Engine rng(1);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t m = 1 + rnd::below(rng, 70), n = 1 + rnd::below(rng, 70),
                          kk = 1 + rnd::below(rng, 70);
        const auto ta = rnd::below(rng, 2) ? k::Trans::Yes : k::Trans::No;
        const auto tb = rnd::below(rng, 2) ? k::Trans::Yes : k::Trans::No;
        const std::size_t lda = ta == k::Trans::No ? kk : m, ldb = tb == k::Trans::No ? n : kk;
        const auto a = testing::random_values(m * kk, rng), b = testing::random_values(kk * n, rng);
        auto c1 = testing::random_values(m * n, rng);
        auto c2 = c1;
        const double alpha = rnd::uniform(rng, -2, 2), beta = trial % 3 == 0 ? 0.0 : 0.5;
        k::gemm(ta, tb, m, n, kk, alpha, a.data(), lda, b.data(), ldb, beta, c1.data(), n);
        ref::gemm(ta, tb, m, n, kk, alpha, a.data(), lda, b.data(), ldb, beta, c2.data(), n);
        CHECK(max_abs_diff(c1, c2) <= 1e-12);
    }
}

TEST_CASE("gemm small example") {
    const std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2 x 3
    const std::vector<double> b{7, 8, 9, 10, 11, 12};  // 3 x 2
    std::vector<double> c(4, 1.0);
    k::gemm(k::Trans::No, k::Trans::No, 2, 2, 3, 1.0, a.data(), 3, b.data(), 2, 0.0, c.data(), 2);
    CHECK(c == std::vector<double>{58, 64, 139, 154});
    // A^T A with A 2 x 3.
    std::vector<double> g(9);
    k::gemm(k::Trans::Yes, k::Trans::No, 3, 3, 2, 1.0, a.data(), 3, a.data(), 3, 0.0, g.data(), 3);
    CHECK(g == std::vector<double>{17, 22, 27, 22, 29, 36, 27, 36, 45});
}

TEST_CASE("row kernels match the reference") {
    rnd::Engine rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t rows = 1 + rnd::below(rng, 200), cols = 1 + rnd::below(rng, 40);
        const auto x = testing::random_values(rows * cols, rng, 5.0);
        const auto bias = testing::random_values(cols, rng);

        auto y1 = x, y2 = x;
        k::add_row_bias(y1, bias, rows, cols);
        ref::add_row_bias(y2, bias, rows, cols);
        CHECK(y1 == y2);

        std::vector<double> s1(cols, 1.0), s2(cols, 1.0);
        k::accumulate_column_sums(x, rows, cols, s1);
        ref::accumulate_column_sums(x, rows, cols, s2);
        CHECK(max_abs_diff(s1, s2) <= 1e-12);

        auto p1 = x, p2 = x;
        k::softmax_rows(p1, rows, cols);
        ref::softmax_rows(p2, rows, cols);
        CHECK(max_abs_diff(p1, p2) <= 1e-12);
        for (std::size_t r = 0; r < rows; ++r) {
            double sum = 0;
            for (std::size_t c = 0; c < cols; ++c) sum += p1[r * cols + c];
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }

        const auto dp = testing::random_values(rows * cols, rng);
        std::vector<double> dx1(rows * cols), dx2(rows * cols);
        k::softmax_rows_backward(p1, dp, dx1, rows, cols);
        ref::softmax_rows_backward(p2, dp, dx2, rows, cols);
        CHECK(max_abs_diff(dx1, dx2) <= 1e-12);

        const auto gamma = testing::random_values(cols, rng), beta = testing::random_values(cols, rng);
        std::vector<double> xh1(rows * cols), xh2(rows * cols), is1(rows), is2(rows),
            ln1(rows * cols), ln2(rows * cols);
        k::layer_norm_rows(x, gamma, beta, rows, cols, 1e-5, xh1, is1, ln1);
        ref::layer_norm_rows(x, gamma, beta, rows, cols, 1e-5, xh2, is2, ln2);
        CHECK(max_abs_diff(ln1, ln2) <= 1e-12);
        CHECK(max_abs_diff(is1, is2) <= 1e-12);

        std::vector<double> d1(rows * cols), d2(rows * cols), g1(cols, 0), g2(cols, 0), b1(cols, 0),
            b2(cols, 0);
        k::layer_norm_rows_backward(xh1, is1, gamma, dp, rows, cols, d1, g1, b1);
        ref::layer_norm_rows_backward(xh2, is2, gamma, dp, rows, cols, d2, g2, b2);
        CHECK(max_abs_diff(d1, d2) <= 1e-12);
        CHECK(max_abs_diff(g1, g2) <= 1e-12);
        CHECK(max_abs_diff(b1, b2) <= 1e-12);
    }
}

TEST_CASE("softmax is stable for large inputs") {
    std::vector<double> x{1000, 1000, -1000};
    k::softmax_rows(x, 1, 3);
    CHECK(x[0] == doctest::Approx(0.5));
    CHECK(x[1] == doctest::Approx(0.5));
    CHECK(x[2] == 0.0);
    CHECK(k::max_threads() >= 1);
}
