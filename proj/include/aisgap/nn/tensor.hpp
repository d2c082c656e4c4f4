#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace aisgap::nn {

/// Dense row-major array of 64-bit reals with an optional same-shape gradient.
/// Two-dimensional views treat the first dimension as rows and flatten the rest.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : Tensor(std::vector<std::size_t>{rows, cols}, fill) {}

    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return rows() == 0 ? 0 : data_.size() / rows(); }
    bool empty() const { return data_.empty(); }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool has_grad() const { return !grad_.empty(); }
    void enable_grad() { grad_.assign(data_.size(), 0.0); }
    void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }
    std::span<double> grad() { return grad_; }
    std::span<const double> grad() const { return grad_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    /// Uniform in [-limit, limit].
    void fill_uniform(double limit, std::mt19937_64& rng);

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_string() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    std::vector<double> grad_;
};

/// A trainable tensor together with the name it is checkpointed under.
struct ParamRef {
    std::string name;
    Tensor* tensor;
};

/// Throws ShapeMismatch with a message naming `what` unless the condition holds.
void require_shape(bool ok, const std::string& what);

}  // namespace aisgap::nn
