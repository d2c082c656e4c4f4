#pragma once

#include <string>
#include <vector>

#include "aisgap/nn/layers.hpp"

namespace aisgap::nn {

/// Multi-head self-attention over a batch of equal-length sequences.
/// Input rows are laid out sequence by sequence: (batch * seq) x d_model.
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(std::string name, std::size_t d_model, std::size_t heads,
                       rnd::Engine& rng);

    struct Cache {
        Dense::Cache q_in, k_in, v_in, o_in;
        Tensor q, k, v;
        /// Attention weights, (batch * heads * seq) x seq, one softmax row per query.
        Tensor probs;
    };

    Tensor forward(const Tensor& x, std::size_t seq, Cache* cache) const;
    Tensor backward(const Cache& cache, const Tensor& dy, std::size_t seq);
    void collect(std::vector<ParamRef>& out);

    std::size_t d_model() const { return d_model_; }
    std::size_t heads() const { return heads_; }

    Dense wq, wk, wv, wo;

private:
    std::size_t d_model_ = 0;
    std::size_t heads_ = 0;
};

/// Pre-norm transformer encoder block:
///   h = x + Dropout(MHA(LN1(x)))
///   y = h + Dropout(FFN(LN2(h))),  FFN = Dense -> ReLU -> Dense
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(std::string name, std::size_t d_model, std::size_t heads,
                     std::size_t ffn_dim, double dropout, rnd::Engine& rng);

    struct Cache {
        LayerNorm::Cache ln1, ln2;
        MultiHeadAttention::Cache mha;
        Dropout::Cache drop1, drop2;
        Dense::Cache ff1, ff2;
        Tensor relu_out;
    };

    Tensor forward(const Tensor& x, std::size_t seq, const Mode& mode, Cache* cache) const;
    Tensor backward(const Cache& cache, const Tensor& dy, std::size_t seq);
    void collect(std::vector<ParamRef>& out);

    LayerNorm ln1, ln2;
    MultiHeadAttention mha;
    Dense ff1, ff2;
    Dropout drop1, drop2;
};

}  // namespace aisgap::nn
