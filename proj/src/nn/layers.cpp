#include "aisgap/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "aisgap/error.hpp"
#include "aisgap/kernels.hpp"

namespace aisgap::nn {

using kernels::Trans;

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_shape(w.shape().size() == 2, "dense weight must be 2-D, got " + w.shape_string());
    require_shape(x.cols() == w.rows(), "dense input " + x.shape_string() + " vs weight " +
                                            w.shape_string());
    require_shape(b.size() == w.cols(), "dense bias " + b.shape_string() + " vs weight " +
                                            w.shape_string());
    const std::size_t n = x.rows();
    Tensor y(n, w.cols());
    kernels::gemm(Trans::No, Trans::No, n, w.cols(), w.rows(), 1.0, x.data(), x.cols(),
                  w.data(), w.cols(), 0.0, y.data(), y.cols());
    kernels::add_row_bias(y.values(), b.values(), n, w.cols());
    return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy) {
    require_shape(dy.rows() == x.rows() && dy.cols() == w.cols(),
                  "dense upstream gradient " + dy.shape_string());
    const std::size_t n = x.rows();
    const std::size_t din = w.rows();
    const std::size_t dout = w.cols();
    DenseGrads g{Tensor(n, din), Tensor(din, dout), Tensor(std::vector<std::size_t>{dout})};
    kernels::gemm(Trans::No, Trans::Yes, n, din, dout, 1.0, dy.data(), dout, w.data(), dout,
                  0.0, g.dx.data(), din);
    kernels::gemm(Trans::Yes, Trans::No, din, dout, n, 1.0, x.data(), din, dy.data(), dout, 0.0,
                  g.dw.data(), dout);
    kernels::accumulate_column_sums(dy.values(), n, dout, g.db.values());
    return g;
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
    require_shape(y.same_shape(dy), "relu gradient shape");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (y[i] <= 0.0) dx[i] = 0.0;
    return dx;
}

Tensor softmax_forward(const Tensor& x) {
    Tensor y = x;
    kernels::softmax_rows(y.values(), y.rows(), y.cols());
    return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
    require_shape(y.same_shape(dy), "softmax gradient shape");
    Tensor dx(y.shape());
    kernels::softmax_rows_backward(y.values(), dy.values(), dx.values(), y.rows(), y.cols());
    return dx;
}

Tensor positional_encoding(std::size_t w, std::size_t d) {
    if (d % 2 != 0)
        throw Error(Errc::OddDimension, "positional encoding width must be even, got " +
                                            std::to_string(d));
    Tensor pe(w, d);
    for (std::size_t pos = 0; pos < w; ++pos) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double freq =
                std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
            const double angle = static_cast<double>(pos) * freq;
            pe(pos, i) = std::sin(angle);
            pe(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

Tensor mean_pool(const Tensor& x, std::size_t seq) {
    require_shape(seq > 0 && x.rows() % seq == 0,
                  "mean_pool rows " + std::to_string(x.rows()) + " not a multiple of " +
                      std::to_string(seq));
    const std::size_t n = x.rows() / seq;
    const std::size_t d = x.cols();
    Tensor y(n, d);
    const double inv = 1.0 / static_cast<double>(seq);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < seq; ++t)
            for (std::size_t c = 0; c < d; ++c) y(s, c) += x(s * seq + t, c) * inv;
    return y;
}

Tensor mean_pool_backward(const Tensor& dy, std::size_t seq) {
    const std::size_t n = dy.rows();
    const std::size_t d = dy.cols();
    Tensor dx(n * seq, d);
    const double inv = 1.0 / static_cast<double>(seq);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < seq; ++t)
            for (std::size_t c = 0; c < d; ++c) dx(s * seq + t, c) = dy(s, c) * inv;
    return dx;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_with_logits(std::span<const double> logits, std::span<const std::uint8_t> labels,
                       std::vector<double>* dlogits) {
    require_shape(logits.size() == labels.size(), "bce logits vs labels");
    if (logits.empty()) return 0.0;
    const double inv = 1.0 / static_cast<double>(logits.size());
    double loss = 0.0;
    if (dlogits) dlogits->assign(logits.size(), 0.0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const double y = labels[i] ? 1.0 : 0.0;
        // max(z,0) - z*y + log(1 + exp(-|z|))
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        if (dlogits) (*dlogits)[i] = (sigmoid(z) - y) * inv;
    }
    return loss * inv;
}

// ---- Dense -----------------------------------------------------------------

Dense::Dense(std::string n, std::size_t in, std::size_t out, rnd::Engine& rng)
    : name(std::move(n)), weight(in, out), bias(std::vector<std::size_t>{out}) {
    weight.fill_uniform(std::sqrt(3.0 / static_cast<double>(in)), rng);
    weight.enable_grad();
    bias.enable_grad();
}

Tensor Dense::forward(const Tensor& x, Cache* cache) const {
    Tensor y = dense_forward(x, weight, bias);
    if (cache) cache->input = x;
    return y;
}

Tensor Dense::backward(const Cache& cache, const Tensor& dy) {
    DenseGrads g = dense_backward(cache.input, weight, dy);
    auto wg = weight.grad();
    auto bg = bias.grad();
    for (std::size_t i = 0; i < wg.size(); ++i) wg[i] += g.dw[i];
    for (std::size_t i = 0; i < bg.size(); ++i) bg[i] += g.db[i];
    return std::move(g.dx);
}

void Dense::collect(std::vector<ParamRef>& out) {
    out.push_back({name + ".weight", &weight});
    out.push_back({name + ".bias", &bias});
}

// ---- LayerNorm -------------------------------------------------------------

LayerNorm::LayerNorm(std::string n, std::size_t dim, double e)
    : name(std::move(n)),
      gamma(std::vector<std::size_t>{dim}, 1.0),
      beta(std::vector<std::size_t>{dim}, 0.0),
      eps(e) {
    gamma.enable_grad();
    beta.enable_grad();
}

Tensor LayerNorm::forward(const Tensor& x, Cache* cache) const {
    require_shape(x.cols() == gamma.size(),
                  "layer_norm input " + x.shape_string() + " vs dim " + std::to_string(gamma.size()));
    Tensor y(x.shape());
    Cache local;
    Cache& c = cache ? *cache : local;
    c.xhat = Tensor(x.shape());
    c.inv_std.assign(x.rows(), 0.0);
    kernels::layer_norm_rows(x.values(), gamma.values(), beta.values(), x.rows(), x.cols(), eps,
                             c.xhat.values(), c.inv_std, y.values());
    return y;
}

Tensor LayerNorm::backward(const Cache& cache, const Tensor& dy) {
    require_shape(dy.same_shape(cache.xhat), "layer_norm gradient shape");
    Tensor dx(dy.shape());
    kernels::layer_norm_rows_backward(cache.xhat.values(), cache.inv_std, gamma.values(),
                                      dy.values(), dy.rows(), dy.cols(), dx.values(),
                                      gamma.grad(), beta.grad());
    return dx;
}

void LayerNorm::collect(std::vector<ParamRef>& out) {
    out.push_back({name + ".gamma", &gamma});
    out.push_back({name + ".beta", &beta});
}

// ---- Dropout ---------------------------------------------------------------

Dropout::Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw Error(Errc::InvalidConfig, "dropout rate must be in [0,1), got " +
                                             std::to_string(rate));
}

Tensor Dropout::forward(const Tensor& x, const Mode& mode, Cache* cache) const {
    if (!mode.training || rate_ == 0.0) {
        if (cache) cache->mask.clear();
        return x;
    }
    if (!mode.rng) throw Error(Errc::InvalidConfig, "training-mode dropout needs an rng");
    Tensor y = x;
    std::vector<std::uint8_t> mask(x.size());
    const double scale = 1.0 / (1.0 - rate_);
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask[i] = rnd::uniform01(*mode.rng) >= rate_ ? 1 : 0;
        y[i] = mask[i] ? x[i] * scale : 0.0;
    }
    if (cache) cache->mask = std::move(mask);
    return y;
}

Tensor Dropout::backward(const Cache& cache, const Tensor& dy) const {
    if (cache.mask.empty()) return dy;
    require_shape(cache.mask.size() == dy.size(), "dropout gradient shape");
    Tensor dx = dy;
    const double scale = 1.0 / (1.0 - rate_);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = cache.mask[i] ? dy[i] * scale : 0.0;
    return dx;
}

}  // namespace aisgap::nn
