#pragma once

// Shared helpers for the unit tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "aisgap/random.hpp"

namespace testing {

/// Largest relative error between analytic and central-difference gradients
/// of a scalar function f over the values of x. Relative error uses
/// max(|a|, |n|, floor) as denominator; the floor absorbs rounding noise on
/// gradients that are exactly zero.
inline double max_grad_error(std::span<double> x, std::span<const double> analytic,
                             const std::function<double()>& f, double eps = 1e-5,
                             double floor = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double up = f();
        x[i] = saved - eps;
        const double down = f();
        x[i] = saved;
        const double numeric = (up - down) / (2 * eps);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

inline std::vector<double> random_values(std::size_t n, aisgap::rnd::Engine& rng,
                                         double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = aisgap::rnd::uniform(rng, -scale, scale);
    return v;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("aisgap-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testing
