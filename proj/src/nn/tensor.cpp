#include "aisgap/nn/tensor.hpp"

#include <functional>
#include <numeric>

#include "aisgap/error.hpp"
#include "aisgap/random.hpp"

namespace aisgap::nn {

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)),
      data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                            std::multiplies<>()),
            fill) {
    if (shape_.empty()) data_.clear();
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
    Tensor t(std::move(shape));
    require_shape(t.size() == values.size(), "Tensor::from value count " +
                                                 std::to_string(values.size()) + " vs shape " +
                                                 t.shape_string());
    t.data_ = std::move(values);
    return t;
}

void Tensor::fill_uniform(double limit, std::mt19937_64& rng) {
    for (auto& v : data_) v = rnd::uniform(rng, -limit, limit);
}

std::string Tensor::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

void require_shape(bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::ShapeMismatch, what);
}

}  // namespace aisgap::nn
