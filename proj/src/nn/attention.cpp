#include "aisgap/nn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "aisgap/error.hpp"
#include "aisgap/kernels.hpp"

namespace aisgap::nn {

namespace {

// y += a * x
inline void axpy(std::size_t n, double a, const double* __restrict x, double* __restrict y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Row-wise softmax without opening a parallel region.
void softmax_serial(double* x, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = x + r * cols;
        double mx = row[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < cols; ++c) row[c] *= inv;
    }
}

}  // namespace

MultiHeadAttention::MultiHeadAttention(std::string name, std::size_t d_model, std::size_t heads,
                                       rnd::Engine& rng)
    : wq(name + ".q", d_model, d_model, rng),
      wk(name + ".k", d_model, d_model, rng),
      wv(name + ".v", d_model, d_model, rng),
      wo(name + ".o", d_model, d_model, rng),
      d_model_(d_model),
      heads_(heads) {
    if (heads == 0 || d_model % heads != 0)
        throw Error(Errc::ShapeMismatch, "attention heads " + std::to_string(heads) +
                                             " must divide model width " +
                                             std::to_string(d_model));
}

Tensor MultiHeadAttention::forward(const Tensor& x, std::size_t seq, Cache* cache) const {
    require_shape(x.cols() == d_model_, "attention input " + x.shape_string() + " vs width " +
                                            std::to_string(d_model_));
    require_shape(seq > 0 && x.rows() % seq == 0, "attention rows not a multiple of sequence");
    Cache local;
    Cache& c = cache ? *cache : local;
    c.q = wq.forward(x, cache ? &c.q_in : nullptr);
    c.k = wk.forward(x, cache ? &c.k_in : nullptr);
    c.v = wv.forward(x, cache ? &c.v_in : nullptr);

    const std::size_t batch = x.rows() / seq;
    const std::size_t dh = d_model_ / heads_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t d = d_model_;
    c.probs = Tensor(batch * heads_ * seq, seq);
    Tensor concat(x.rows(), d);

    const auto jobs = static_cast<std::ptrdiff_t>(batch * heads_);
    const double* q = c.q.data();
    const double* k = c.k.data();
    const double* v = c.v.data();
    double* probs = c.probs.data();
    double* out = concat.data();
#pragma omp parallel
    {
        std::vector<double> kt(dh * seq);  // this head's keys, transposed
#pragma omp for schedule(static)
        for (std::ptrdiff_t job = 0; job < jobs; ++job) {
            const std::size_t s = static_cast<std::size_t>(job) / heads_;
            const std::size_t h = static_cast<std::size_t>(job) % heads_;
            const std::size_t row0 = s * seq;
            const std::size_t col0 = h * dh;
            double* p = probs + static_cast<std::size_t>(job) * seq * seq;
            for (std::size_t j = 0; j < seq; ++j) {
                const double* kj = k + (row0 + j) * d + col0;
                for (std::size_t t = 0; t < dh; ++t) kt[t * seq + j] = kj[t];
            }
            for (std::size_t i = 0; i < seq; ++i) {
                const double* qi = q + (row0 + i) * d + col0;
                double* pi = p + i * seq;
                for (std::size_t t = 0; t < dh; ++t) axpy(seq, qi[t], kt.data() + t * seq, pi);
                for (std::size_t j = 0; j < seq; ++j) pi[j] *= scale;
            }
            softmax_serial(p, seq, seq);
            for (std::size_t i = 0; i < seq; ++i) {
                double* oi = out + (row0 + i) * d + col0;
                for (std::size_t j = 0; j < seq; ++j) axpy(dh, p[i * seq + j], v + (row0 + j) * d + col0, oi);
            }
        }
    }
    return wo.forward(concat, cache ? &c.o_in : nullptr);
}

Tensor MultiHeadAttention::backward(const Cache& c, const Tensor& dy, std::size_t seq) {
    Tensor dconcat = wo.backward(c.o_in, dy);
    const std::size_t rows = dconcat.rows();
    const std::size_t batch = rows / seq;
    const std::size_t dh = d_model_ / heads_;
    const std::size_t d = d_model_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor dq(rows, d), dk(rows, d), dv(rows, d);

    const auto jobs = static_cast<std::ptrdiff_t>(batch * heads_);
    const double* q = c.q.data();
    const double* k = c.k.data();
    const double* v = c.v.data();
    const double* probs = c.probs.data();
    const double* dout = dconcat.data();
    double* dqd = dq.data();
    double* dkd = dk.data();
    double* dvd = dv.data();
    // Each (sample, head) job writes a disjoint block of dq/dk/dv.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t job = 0; job < jobs; ++job) {
        const std::size_t s = static_cast<std::size_t>(job) / heads_;
        const std::size_t h = static_cast<std::size_t>(job) % heads_;
        const std::size_t row0 = s * seq;
        const std::size_t col0 = h * dh;
        const double* p = probs + static_cast<std::size_t>(job) * seq * seq;
        std::vector<double> dp(seq * seq), ds(seq * seq);
        for (std::size_t i = 0; i < seq; ++i) {
            const double* doi = dout + (row0 + i) * d + col0;
            for (std::size_t j = 0; j < seq; ++j) {
                const double* vj = v + (row0 + j) * d + col0;
                double dot = 0.0;
                for (std::size_t t = 0; t < dh; ++t) dot += doi[t] * vj[t];
                dp[i * seq + j] = dot;
                double* dvj = dvd + (row0 + j) * d + col0;
                const double pij = p[i * seq + j];
                for (std::size_t t = 0; t < dh; ++t) dvj[t] += pij * doi[t];
            }
        }
        kernels::softmax_rows_backward(std::span<const double>(p, seq * seq), dp, ds, seq, seq);
        for (std::size_t i = 0; i < seq; ++i) {
            double* dqi = dqd + (row0 + i) * d + col0;
            const double* qi = q + (row0 + i) * d + col0;
            for (std::size_t j = 0; j < seq; ++j) {
                const double g = ds[i * seq + j] * scale;
                const double* kj = k + (row0 + j) * d + col0;
                double* dkj = dkd + (row0 + j) * d + col0;
                for (std::size_t t = 0; t < dh; ++t) {
                    dqi[t] += g * kj[t];
                    dkj[t] += g * qi[t];
                }
            }
        }
    }
    Tensor dx = wq.backward(c.q_in, dq);
    const Tensor dxk = wk.backward(c.k_in, dk);
    const Tensor dxv = wv.backward(c.v_in, dv);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxk[i] + dxv[i];
    return dx;
}

void MultiHeadAttention::collect(std::vector<ParamRef>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
}

TransformerBlock::TransformerBlock(std::string name, std::size_t d_model, std::size_t heads,
                                   std::size_t ffn_dim, double dropout, rnd::Engine& rng)
    : ln1(name + ".ln1", d_model),
      ln2(name + ".ln2", d_model),
      mha(name + ".attn", d_model, heads, rng),
      ff1(name + ".ff1", d_model, ffn_dim, rng),
      ff2(name + ".ff2", ffn_dim, d_model, rng),
      drop1(dropout),
      drop2(dropout) {}

Tensor TransformerBlock::forward(const Tensor& x, std::size_t seq, const Mode& mode,
                                 Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    Tensor a = ln1.forward(x, &c.ln1);
    Tensor m = drop1.forward(mha.forward(a, seq, cache ? &c.mha : nullptr), mode, &c.drop1);
    Tensor h = x;
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += m[i];
    Tensor b = ln2.forward(h, &c.ln2);
    Tensor r = relu_forward(ff1.forward(b, cache ? &c.ff1 : nullptr));
    Tensor f = drop2.forward(ff2.forward(r, cache ? &c.ff2 : nullptr), mode, &c.drop2);
    if (cache) c.relu_out = std::move(r);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += f[i];
    return h;
}

Tensor TransformerBlock::backward(const Cache& c, const Tensor& dy, std::size_t seq) {
    Tensor dh = dy;
    Tensor df = drop2.backward(c.drop2, dy);
    Tensor dr = ff2.backward(c.ff2, df);
    Tensor db = ff1.backward(c.ff1, relu_backward(c.relu_out, dr));
    Tensor dln2 = ln2.backward(c.ln2, db);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dln2[i];
    Tensor dm = drop1.backward(c.drop1, dh);
    Tensor da = mha.backward(c.mha, dm, seq);
    Tensor dln1 = ln1.backward(c.ln1, da);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dln1[i];
    return dh;
}

void TransformerBlock::collect(std::vector<ParamRef>& out) {
    ln1.collect(out);
    mha.collect(out);
    ln2.collect(out);
    ff1.collect(out);
    ff2.collect(out);
}

}  // namespace aisgap::nn
