#pragma once

// Differentiable building blocks. Each layer's forward pass is const and
// writes whatever the backward pass needs into a caller-owned Cache, so a
// frozen model can serve concurrent forward calls. Backward accumulates into
// the parameters' gradients and returns the input gradient.

#include <cstdint>
#include <string>
#include <vector>

#include "aisgap/nn/tensor.hpp"
#include "aisgap/random.hpp"

namespace aisgap::nn {

/// Forward-pass mode. Dropout draws from `rng` only when `training` is set.
struct Mode {
    bool training = false;
    rnd::Engine* rng = nullptr;
};

// ---- stateless ops ---------------------------------------------------------

/// y = x W + b for x (n x d_in), W (d_in x d_out), b (d_out).
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct DenseGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};
DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy);

Tensor relu_forward(const Tensor& x);
/// Uses the forward output y to mask the gradient.
Tensor relu_backward(const Tensor& y, const Tensor& dy);

/// Row-wise softmax of a 2-D tensor.
Tensor softmax_forward(const Tensor& x);
Tensor softmax_backward(const Tensor& y, const Tensor& dy);

/// Sinusoidal table (w x d): even columns sin(pos / 10000^(2i/d)), odd columns cos.
Tensor positional_encoding(std::size_t w, std::size_t d);

/// Mean over each group of `seq` consecutive rows: (n*seq x d) -> (n x d).
Tensor mean_pool(const Tensor& x, std::size_t seq);
Tensor mean_pool_backward(const Tensor& dy, std::size_t seq);

/// Elementwise logistic function.
double sigmoid(double z);

/// Mean binary cross-entropy over logits; writes dL/dlogit into dlogits when non-null.
double bce_with_logits(std::span<const double> logits, std::span<const std::uint8_t> labels,
                       std::vector<double>* dlogits);

// ---- layers ----------------------------------------------------------------

class Dense {
public:
    Dense() = default;
    /// Weights uniform in +-sqrt(3 / fan_in), biases zero.
    Dense(std::string name, std::size_t in, std::size_t out, rnd::Engine& rng);

    struct Cache {
        Tensor input;
    };

    Tensor forward(const Tensor& x, Cache* cache) const;
    Tensor backward(const Cache& cache, const Tensor& dy);
    void collect(std::vector<ParamRef>& out);

    std::size_t in_dim() const { return weight.rows(); }
    std::size_t out_dim() const { return weight.cols(); }

    std::string name;
    Tensor weight;
    Tensor bias;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(std::string name, std::size_t dim, double eps = 1e-5);

    struct Cache {
        Tensor xhat;
        std::vector<double> inv_std;
    };

    Tensor forward(const Tensor& x, Cache* cache) const;
    Tensor backward(const Cache& cache, const Tensor& dy);
    void collect(std::vector<ParamRef>& out);

    std::string name;
    Tensor gamma;
    Tensor beta;
    double eps = 1e-5;
};

/// Inverted dropout: kept units are scaled by 1/(1-rate) in training mode.
class Dropout {
public:
    Dropout() = default;
    explicit Dropout(double rate);

    struct Cache {
        std::vector<std::uint8_t> mask;
    };

    Tensor forward(const Tensor& x, const Mode& mode, Cache* cache) const;
    Tensor backward(const Cache& cache, const Tensor& dy) const;

    double rate() const { return rate_; }

private:
    double rate_ = 0.0;
};

}  // namespace aisgap::nn
