#pragma once

// Reception classifier: the transformer model, the baselines it is compared
// against, training with early stopping, evaluation and checkpoints.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aisgap/encoder.hpp"
#include "aisgap/nn/attention.hpp"

namespace aisgap::model {

enum class Architecture { Transformer, FeedForward };

struct ModelConfig {
    Architecture arch = Architecture::Transformer;
    std::size_t w = 25;
    std::size_t history_dims = encoder::kHistoryDims;
    std::size_t position_dims = encoder::kPositionDims;
    std::size_t d_model = 128;
    std::size_t heads = 4;
    std::size_t blocks = 2;
    std::size_t ffn_dim = 0;  // 0 means 2 * d_model
    std::size_t repr_dim = 64;
    std::vector<std::size_t> head_dims{100, 50, 50};
    /// Hidden layers of the feed-forward baseline.
    std::vector<std::size_t> ff_dims{10, 20, 25, 20, 10};
    double dropout = 0.10;
    double tau_s = 600.0;
    bool raw_inputs = false;  // trained on encode_dataset_raw output

    std::size_t ffn() const { return ffn_dim == 0 ? 2 * d_model : ffn_dim; }
    std::size_t encoder_part_dim() const { return repr_dim - position_dims; }
    /// Throws InvalidConfig.
    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
    bool same_shape(const ModelConfig& other) const;
};

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

/// Contiguous inputs for n samples.
struct Batch {
    std::span<const double> history;   // n x w x history_dims
    std::span<const double> position;  // n x position_dims
    std::size_t n = 0;
};

/// Rows [begin, end) of an encoded set.
Batch slice(const encoder::EncodedSet& set, std::size_t begin, std::size_t end);

/// A trainable binary classifier producing one logit per sample.
class Classifier {
public:
    virtual ~Classifier() = default;

    const ModelConfig& config() const { return cfg_; }

    /// Training-mode forward pass; keeps what backward needs.
    virtual std::vector<double> forward_train(const Batch& batch, rnd::Engine& rng) = 0;
    /// Accumulates parameter gradients for the last forward_train.
    virtual void backward(std::span<const double> dlogits) = 0;
    /// Eval-mode logits. Const and safe to call concurrently.
    virtual std::vector<double> logits(const Batch& batch) const = 0;

    virtual std::vector<nn::ParamRef> parameters() = 0;
    std::size_t parameter_count();

protected:
    explicit Classifier(ModelConfig cfg) : cfg_(std::move(cfg)) {}
    void check_batch(const Batch& b) const;
    ModelConfig cfg_;
};

/// History -> input projection + positional encoding -> transformer blocks ->
/// layer norm -> mean pool -> dense to encoder_part_dim; concatenated with
/// the position vector into R; dense head with ReLU + dropout -> logit.
class TransformerClassifier final : public Classifier {
public:
    TransformerClassifier(ModelConfig cfg, std::uint64_t seed);

    std::vector<double> forward_train(const Batch& batch, rnd::Engine& rng) override;
    void backward(std::span<const double> dlogits) override;
    std::vector<double> logits(const Batch& batch) const override;
    std::vector<nn::ParamRef> parameters() override;

private:
    struct Cache {
        std::size_t n = 0;
        nn::Dense::Cache input;
        std::vector<nn::TransformerBlock::Cache> blocks;
        nn::LayerNorm::Cache final_ln;
        nn::Dense::Cache pool_proj;
        std::vector<nn::Dense::Cache> head;
        std::vector<nn::Tensor> head_out;  // post-ReLU activations
        std::vector<nn::Dropout::Cache> head_drop;
        nn::Dense::Cache out;
    };
    std::vector<double> run(const Batch& batch, const nn::Mode& mode, Cache* cache) const;

    nn::Dense input_;
    nn::Tensor pe_;
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm final_ln_;
    nn::Dense pool_proj_;
    std::vector<nn::Dense> head_;
    nn::Dropout head_drop_;
    nn::Dense out_;
    Cache cache_;
};

/// Flattened window ++ position -> ReLU dense stack -> logit.
class FeedForwardClassifier final : public Classifier {
public:
    FeedForwardClassifier(ModelConfig cfg, std::uint64_t seed);

    std::vector<double> forward_train(const Batch& batch, rnd::Engine& rng) override;
    void backward(std::span<const double> dlogits) override;
    std::vector<double> logits(const Batch& batch) const override;
    std::vector<nn::ParamRef> parameters() override;

private:
    struct Cache {
        std::vector<nn::Dense::Cache> layers;
        std::vector<nn::Tensor> acts;
        nn::Dense::Cache out;
    };
    std::vector<double> run(const Batch& batch, Cache* cache) const;

    std::vector<nn::Dense> layers_;
    nn::Dense out_;
    Cache cache_;
};

/// Throws InvalidConfig.
std::unique_ptr<Classifier> build_model(const ModelConfig& cfg, std::uint64_t seed);

// ---- training --------------------------------------------------------------

struct TrainConfig {
    std::size_t batch_size = 128;
    std::size_t max_epochs = 200;
    /// Batches per epoch; 0 means one pass over the training set.
    std::size_t batches_per_epoch = 1562;
    std::size_t patience = 10;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    /// Stop after the epoch that crosses this wall-clock budget; 0 disables.
    double max_seconds = 0.0;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double best_val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    bool early_stopped = false;
};

/// Minimizes binary cross-entropy with Adam; restores the weights of the
/// epoch with the lowest validation loss. Throws EmptyDataset, DivergedLoss.
TrainResult train(Classifier& model, const encoder::EncodedSet& train_set,
                  const encoder::EncodedSet& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// ---- inference and evaluation ------------------------------------------------

/// Probability that a message arrives within tau.
double predict(const Classifier& model, std::span<const double> history,
               std::span<const double> position);
/// Probabilities for every sample, in chunks of `chunk` samples.
std::vector<double> predict_all(const Classifier& model, const encoder::EncodedSet& set,
                                std::size_t chunk = 256);
/// Mean binary cross-entropy of the eval-mode model.
double mean_loss(const Classifier& model, const encoder::EncodedSet& set);

struct EvalReport {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double accuracy = 0.0;  // (TP + TN) / total
    double ppv = 0.0;       // TP / (TP + FP), NaN when undefined
    double npv = 0.0;       // TN / (TN + FN), NaN when undefined
    std::uint64_t total() const { return tp + fp + fn + tn; }
};

EvalReport report_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                              std::uint64_t tn);
/// Throws EmptyDataset.
EvalReport evaluate(const Classifier& model, const encoder::EncodedSet& test,
                    double threshold = 0.5);

// ---- checkpoints ---------------------------------------------------------------

/// "AISGCKPT", u32 version, u32 config length, config JSON, u32 array count,
/// then per array: u32 name length, name, u32 rank, u64 dims, little-endian
/// doubles; finally the FNV-1a 64 hash of everything before it.
void save_checkpoint(Classifier& model, const std::string& path);
/// Throws CorruptCheckpoint for damaged files and VersionMismatch for an
/// unknown format version or, when `expected` is given, a different shape.
std::unique_ptr<Classifier> load_checkpoint(const std::string& path,
                                            const ModelConfig* expected = nullptr);

}  // namespace aisgap::model
