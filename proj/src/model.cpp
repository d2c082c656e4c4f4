#include "aisgap/model.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aisgap/dataset.hpp"
#include "aisgap/error.hpp"
#include "aisgap/nn/adam.hpp"

namespace aisgap::model {

using nn::Tensor;

namespace {

constexpr char kMagic[8] = {'A', 'I', 'S', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::InvalidConfig, what); }

}  // namespace

// ---- config ------------------------------------------------------------------

std::string to_string(Architecture a) {
    return a == Architecture::Transformer ? "transformer" : "feedforward";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "transformer") return Architecture::Transformer;
    if (s == "feedforward") return Architecture::FeedForward;
    invalid("unknown architecture '" + s + "'");
}

void ModelConfig::validate() const {
    if (w < 1) invalid("window size must be >= 1");
    if (history_dims < 1 || position_dims < 1) invalid("input dimensions must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) invalid("dropout must be in [0, 1)");
    if (!(tau_s > 0.0)) invalid("tau must be > 0");
    if (arch == Architecture::FeedForward) {
        if (ff_dims.empty()) invalid("feed-forward baseline needs hidden layers");
        for (auto d : ff_dims)
            if (d == 0) invalid("hidden layer width must be > 0");
        return;
    }
    if (d_model < 2 || d_model % 2 != 0) invalid("d_model must be even and >= 2");
    if (heads == 0 || d_model % heads != 0) invalid("heads must divide d_model");
    if (blocks < 1) invalid("need at least one transformer block");
    if (repr_dim <= position_dims) invalid("repr_dim must exceed the position vector length");
    if (head_dims.size() != 3) invalid("the head has exactly three hidden layers");
    for (auto d : head_dims)
        if (d == 0) invalid("hidden layer width must be > 0");
}

std::string ModelConfig::to_json() const {
    const nlohmann::ordered_json j = {{"arch", to_string(arch)},
                                      {"w", w},
                                      {"history_dims", history_dims},
                                      {"position_dims", position_dims},
                                      {"d_model", d_model},
                                      {"heads", heads},
                                      {"blocks", blocks},
                                      {"ffn_dim", ffn()},
                                      {"repr_dim", repr_dim},
                                      {"head_dims", head_dims},
                                      {"ff_dims", ff_dims},
                                      {"dropout", dropout},
                                      {"tau_s", tau_s},
                                      {"raw_inputs", raw_inputs}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    ModelConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.arch = architecture_from_string(j.value("arch", std::string("transformer")));
        c.w = j.value("w", c.w);
        c.history_dims = j.value("history_dims", c.history_dims);
        c.position_dims = j.value("position_dims", c.position_dims);
        c.d_model = j.value("d_model", c.d_model);
        c.heads = j.value("heads", c.heads);
        c.blocks = j.value("blocks", c.blocks);
        c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
        c.repr_dim = j.value("repr_dim", c.repr_dim);
        c.head_dims = j.value("head_dims", c.head_dims);
        c.ff_dims = j.value("ff_dims", c.ff_dims);
        c.dropout = j.value("dropout", c.dropout);
        c.tau_s = j.value("tau_s", c.tau_s);
        c.raw_inputs = j.value("raw_inputs", c.raw_inputs);
    } catch (const nlohmann::json::exception& e) {
        invalid(std::string("model config: ") + e.what());
    }
    return c;
}

bool ModelConfig::same_shape(const ModelConfig& o) const {
    if (arch != o.arch || w != o.w || history_dims != o.history_dims ||
        position_dims != o.position_dims || raw_inputs != o.raw_inputs)
        return false;
    if (arch == Architecture::FeedForward) return ff_dims == o.ff_dims;
    return d_model == o.d_model && heads == o.heads && blocks == o.blocks && ffn() == o.ffn() &&
           repr_dim == o.repr_dim && head_dims == o.head_dims;
}

Batch slice(const encoder::EncodedSet& set, std::size_t begin, std::size_t end) {
    const std::size_t hs = set.w * set.history_dims;
    return Batch{std::span<const double>(set.history.data() + begin * hs, (end - begin) * hs),
                 std::span<const double>(set.position.data() + begin * set.position_dims,
                                         (end - begin) * set.position_dims),
                 end - begin};
}

// ---- classifier base -------------------------------------------------------------

std::size_t Classifier::parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor->size();
    return n;
}

void Classifier::check_batch(const Batch& b) const {
    nn::require_shape(b.history.size() == b.n * cfg_.w * cfg_.history_dims,
                      "history input has " + std::to_string(b.history.size()) +
                          " values, expected " +
                          std::to_string(b.n * cfg_.w * cfg_.history_dims));
    nn::require_shape(b.position.size() == b.n * cfg_.position_dims,
                      "position input has " + std::to_string(b.position.size()) +
                          " values, expected " + std::to_string(b.n * cfg_.position_dims));
}

// ---- transformer -------------------------------------------------------------------

TransformerClassifier::TransformerClassifier(ModelConfig cfg, std::uint64_t seed)
    : Classifier(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.arch != Architecture::Transformer) invalid("config is not a transformer");
    rnd::Engine rng = rnd::derive(seed, 0x7e11);
    input_ = nn::Dense("input", cfg_.history_dims, cfg_.d_model, rng);
    pe_ = nn::positional_encoding(cfg_.w, cfg_.d_model);
    for (std::size_t b = 0; b < cfg_.blocks; ++b)
        blocks_.emplace_back("block" + std::to_string(b), cfg_.d_model, cfg_.heads, cfg_.ffn(),
                             cfg_.dropout, rng);
    final_ln_ = nn::LayerNorm("final_ln", cfg_.d_model);
    pool_proj_ = nn::Dense("pool_proj", cfg_.d_model, cfg_.encoder_part_dim(), rng);
    std::size_t in = cfg_.repr_dim;
    for (std::size_t i = 0; i < cfg_.head_dims.size(); ++i) {
        head_.emplace_back("head" + std::to_string(i), in, cfg_.head_dims[i], rng);
        in = cfg_.head_dims[i];
    }
    head_drop_ = nn::Dropout(cfg_.dropout);
    out_ = nn::Dense("out", in, 1, rng);
}

std::vector<double> TransformerClassifier::run(const Batch& batch, const nn::Mode& mode,
                                               Cache* c) const {
    check_batch(batch);
    const std::size_t n = batch.n;
    const std::size_t w = cfg_.w;
    const std::size_t d = cfg_.d_model;
    Tensor x = Tensor::from({n * w, cfg_.history_dims},
                            std::vector<double>(batch.history.begin(), batch.history.end()));
    Tensor h = input_.forward(x, c ? &c->input : nullptr);
    for (std::size_t r = 0; r < n * w; ++r)
        for (std::size_t k = 0; k < d; ++k) h(r, k) += pe_(r % w, k);
    if (c) c->blocks.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b)
        h = blocks_[b].forward(h, w, mode, c ? &c->blocks[b] : nullptr);
    h = final_ln_.forward(h, c ? &c->final_ln : nullptr);
    const Tensor pooled = nn::mean_pool(h, w);
    const Tensor enc = pool_proj_.forward(pooled, c ? &c->pool_proj : nullptr);

    const std::size_t ep = cfg_.encoder_part_dim();
    const std::size_t pd = cfg_.position_dims;
    Tensor a(n, cfg_.repr_dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < ep; ++k) a(i, k) = enc(i, k);
        for (std::size_t k = 0; k < pd; ++k) a(i, ep + k) = batch.position[i * pd + k];
    }
    if (c) {
        c->n = n;
        c->head.resize(head_.size());
        c->head_out.resize(head_.size());
        c->head_drop.resize(head_.size());
    }
    for (std::size_t l = 0; l < head_.size(); ++l) {
        Tensor z = nn::relu_forward(head_[l].forward(a, c ? &c->head[l] : nullptr));
        nn::Dropout::Cache local;
        a = head_drop_.forward(z, mode, c ? &c->head_drop[l] : &local);
        if (c) c->head_out[l] = std::move(z);
    }
    const Tensor logit = out_.forward(a, c ? &c->out : nullptr);
    return std::vector<double>(logit.values().begin(), logit.values().end());
}

std::vector<double> TransformerClassifier::forward_train(const Batch& batch, rnd::Engine& rng) {
    return run(batch, nn::Mode{true, &rng}, &cache_);
}

std::vector<double> TransformerClassifier::logits(const Batch& batch) const {
    return run(batch, nn::Mode{}, nullptr);
}

void TransformerClassifier::backward(std::span<const double> dlogits) {
    const std::size_t n = cache_.n;
    nn::require_shape(dlogits.size() == n, "logit gradient length");
    Tensor da = out_.backward(cache_.out,
                              Tensor::from({n, 1}, std::vector<double>(dlogits.begin(), dlogits.end())));
    for (std::size_t l = head_.size(); l-- > 0;) {
        da = head_drop_.backward(cache_.head_drop[l], da);
        da = nn::relu_backward(cache_.head_out[l], da);
        da = head_[l].backward(cache_.head[l], da);
    }
    const std::size_t ep = cfg_.encoder_part_dim();
    Tensor denc(n, ep);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < ep; ++k) denc(i, k) = da(i, k);
    Tensor dh = nn::mean_pool_backward(pool_proj_.backward(cache_.pool_proj, denc), cfg_.w);
    dh = final_ln_.backward(cache_.final_ln, dh);
    for (std::size_t b = blocks_.size(); b-- > 0;) dh = blocks_[b].backward(cache_.blocks[b], dh, cfg_.w);
    (void)input_.backward(cache_.input, dh);
}

std::vector<nn::ParamRef> TransformerClassifier::parameters() {
    std::vector<nn::ParamRef> out;
    input_.collect(out);
    for (auto& b : blocks_) b.collect(out);
    final_ln_.collect(out);
    pool_proj_.collect(out);
    for (auto& h : head_) h.collect(out);
    out_.collect(out);
    return out;
}

// ---- feed-forward baseline -------------------------------------------------------------

FeedForwardClassifier::FeedForwardClassifier(ModelConfig cfg, std::uint64_t seed)
    : Classifier(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.arch != Architecture::FeedForward) invalid("config is not a feed-forward model");
    rnd::Engine rng = rnd::derive(seed, 0xff);
    std::size_t in = cfg_.w * cfg_.history_dims + cfg_.position_dims;
    for (std::size_t i = 0; i < cfg_.ff_dims.size(); ++i) {
        layers_.emplace_back("ff" + std::to_string(i), in, cfg_.ff_dims[i], rng);
        in = cfg_.ff_dims[i];
    }
    out_ = nn::Dense("out", in, 1, rng);
}

std::vector<double> FeedForwardClassifier::run(const Batch& batch, Cache* c) const {
    check_batch(batch);
    const std::size_t n = batch.n;
    const std::size_t hs = cfg_.w * cfg_.history_dims;
    const std::size_t pd = cfg_.position_dims;
    Tensor a(n, hs + pd);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(batch.history.data() + i * hs, hs, a.data() + i * (hs + pd));
        std::copy_n(batch.position.data() + i * pd, pd, a.data() + i * (hs + pd) + hs);
    }
    if (c) {
        c->layers.resize(layers_.size());
        c->acts.resize(layers_.size());
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        a = nn::relu_forward(layers_[l].forward(a, c ? &c->layers[l] : nullptr));
        if (c) c->acts[l] = a;
    }
    const Tensor logit = out_.forward(a, c ? &c->out : nullptr);
    return std::vector<double>(logit.values().begin(), logit.values().end());
}

std::vector<double> FeedForwardClassifier::forward_train(const Batch& batch, rnd::Engine&) {
    return run(batch, &cache_);
}

std::vector<double> FeedForwardClassifier::logits(const Batch& batch) const {
    return run(batch, nullptr);
}

void FeedForwardClassifier::backward(std::span<const double> dlogits) {
    Tensor da = out_.backward(
        cache_.out,
        Tensor::from({dlogits.size(), 1}, std::vector<double>(dlogits.begin(), dlogits.end())));
    for (std::size_t l = layers_.size(); l-- > 0;) {
        da = nn::relu_backward(cache_.acts[l], da);
        da = layers_[l].backward(cache_.layers[l], da);
    }
}

std::vector<nn::ParamRef> FeedForwardClassifier::parameters() {
    std::vector<nn::ParamRef> out;
    for (auto& l : layers_) l.collect(out);
    out_.collect(out);
    return out;
}

std::unique_ptr<Classifier> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (cfg.arch == Architecture::FeedForward)
        return std::make_unique<FeedForwardClassifier>(cfg, seed);
    return std::make_unique<TransformerClassifier>(cfg, seed);
}

// ---- training ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (batch_size < 1) invalid("batch size must be >= 1");
    if (patience < 1) invalid("patience must be >= 1");
    if (max_epochs < 1) invalid("max_epochs must be >= 1");
    if (!(lr > 0.0)) invalid("learning rate must be > 0");
}

TrainResult train(Classifier& model, const encoder::EncodedSet& train_set,
                  const encoder::EncodedSet& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    if (train_set.size() == 0) throw Error(Errc::EmptyDataset, "training set is empty");
    const auto params = model.parameters();
    nn::Adam opt(params, nn::AdamConfig{cfg.lr});
    rnd::Engine order_rng = rnd::derive(cfg.seed, 0x0bde);
    rnd::Engine drop_rng = rnd::derive(cfg.seed, 0xd0);

    const std::size_t n = train_set.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rnd::shuffle(perm, order_rng);
    std::size_t cursor = 0;
    const std::size_t batches = cfg.batches_per_epoch != 0
                                    ? cfg.batches_per_epoch
                                    : (n + cfg.batch_size - 1) / cfg.batch_size;

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best(params.size());
    std::size_t bad_epochs = 0;
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::size_t> idx;
    std::vector<double> dlogits;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t loss_n = 0;
        for (std::size_t b = 0; b < batches; ++b) {
            if (cursor >= n) {
                rnd::shuffle(perm, order_rng);
                cursor = 0;
            }
            const std::size_t take = std::min(cfg.batch_size, n - cursor);
            idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(cursor),
                       perm.begin() + static_cast<std::ptrdiff_t>(cursor + take));
            cursor += take;
            const auto sub = train_set.gather(idx);
            opt.zero_grad();
            const auto logit = model.forward_train(slice(sub, 0, take), drop_rng);
            dlogits.assign(take, 0.0);
            const double loss = nn::bce_with_logits(logit, sub.labels, &dlogits);
            if (!std::isfinite(loss))
                throw Error(Errc::DivergedLoss, "non-finite training loss at epoch " +
                                                    std::to_string(epoch) + ", batch " +
                                                    std::to_string(b));
            model.backward(dlogits);
            opt.step();
            loss_sum += loss * static_cast<double>(take);
            loss_n += take;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(loss_n);
        if (val_set.size() > 0) {
            const auto probs = predict_all(model, val_set);
            rec.val_loss = mean_loss(model, val_set);
            std::size_t correct = 0;
            for (std::size_t i = 0; i < probs.size(); ++i)
                correct += (probs[i] >= 0.5) == (val_set.labels[i] != 0);
            rec.val_accuracy = static_cast<double>(correct) / static_cast<double>(probs.size());
        } else {
            rec.val_loss = rec.train_loss;
        }
        if (!std::isfinite(rec.val_loss))
            throw Error(Errc::DivergedLoss, "non-finite validation loss at epoch " +
                                                std::to_string(epoch));
        if (rec.val_loss < result.best_val_loss) {
            result.best_val_loss = rec.val_loss;
            result.best_epoch = epoch;
            for (std::size_t p = 0; p < params.size(); ++p) {
                const auto v = params[p].tensor->values();
                best[p].assign(v.begin(), v.end());
            }
            bad_epochs = 0;
        } else {
            ++bad_epochs;
        }
        rec.best_val_loss = result.best_val_loss;
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (bad_epochs >= cfg.patience) {
            result.early_stopped = true;
            break;
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (cfg.max_seconds > 0.0 && elapsed > cfg.max_seconds) break;
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto v = params[p].tensor->values();
        std::copy(best[p].begin(), best[p].end(), v.begin());
    }
    return result;
}

// ---- inference -------------------------------------------------------------------------

double predict(const Classifier& model, std::span<const double> history,
               std::span<const double> position) {
    const auto z = model.logits(Batch{history, position, 1});
    return nn::sigmoid(z[0]);
}

namespace {

std::vector<double> logits_all(const Classifier& model, const encoder::EncodedSet& set,
                               std::size_t chunk) {
    const std::size_t n = set.size();
    std::vector<double> out(n);
    const auto chunks = static_cast<std::ptrdiff_t>((n + chunk - 1) / chunk);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < chunks; ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        const auto z = model.logits(slice(set, begin, end));
        std::copy(z.begin(), z.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
    }
    return out;
}

}  // namespace

std::vector<double> predict_all(const Classifier& model, const encoder::EncodedSet& set,
                                std::size_t chunk) {
    auto z = logits_all(model, set, chunk);
    for (auto& v : z) v = nn::sigmoid(v);
    return z;
}

double mean_loss(const Classifier& model, const encoder::EncodedSet& set) {
    if (set.size() == 0) throw Error(Errc::EmptyDataset, "loss of an empty set");
    const auto z = logits_all(model, set, 256);
    return nn::bce_with_logits(z, set.labels, nullptr);
}

EvalReport report_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                              std::uint64_t tn) {
    EvalReport r{tp, fp, fn, tn};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto total = static_cast<double>(r.total());
    r.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : nan;
    r.ppv = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : nan;
    r.npv = tn + fn > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fn) : nan;
    return r;
}

EvalReport evaluate(const Classifier& model, const encoder::EncodedSet& test, double threshold) {
    if (test.size() == 0) throw Error(Errc::EmptyDataset, "test set is empty");
    const auto probs = predict_all(model, test);
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool pred = probs[i] >= threshold;
        const bool truth = test.labels[i] != 0;
        if (pred && truth) ++tp;
        else if (pred) ++fp;
        else if (truth) ++fn;
        else ++tn;
    }
    return report_from_counts(tp, fp, fn, tn);
}

// ---- checkpoints ----------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little);

template <class T>
void put(std::string& buf, T v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        const auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw Error(Errc::CorruptCheckpoint, "checkpoint is truncated");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(Classifier& model, const std::string& path) {
    std::string buf(kMagic, sizeof kMagic);
    put<std::uint32_t>(buf, kCheckpointVersion);
    const std::string cfg = model.config().to_json();
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(cfg.size()));
    buf += cfg;
    const auto params = model.parameters();
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
        buf += p.name;
        const auto& shape = p.tensor->shape();
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) put<std::uint64_t>(buf, d);
        const auto v = p.tensor->values();
        buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    put<std::uint64_t>(buf, dataset::fnv1a(buf));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write checkpoint " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(Errc::Io, "failed writing checkpoint " + path);
}

std::unique_ptr<Classifier> load_checkpoint(const std::string& path, const ModelConfig* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open checkpoint " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    if (data.size() < sizeof kMagic + 4 + 8 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw Error(Errc::CorruptCheckpoint, path + " is not a checkpoint");
    const std::string_view body(data.data(), data.size() - 8);
    std::uint64_t stated;
    std::memcpy(&stated, data.data() + data.size() - 8, 8);
    Reader r(body);
    (void)r.bytes(sizeof kMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw Error(Errc::VersionMismatch, "checkpoint format version " + std::to_string(version) +
                                               ", expected " + std::to_string(kCheckpointVersion));
    if (dataset::fnv1a(body) != stated)
        throw Error(Errc::CorruptCheckpoint, path + " fails its integrity hash");

    const auto cfg_len = r.get<std::uint32_t>();
    ModelConfig cfg;
    try {
        cfg = ModelConfig::from_json(std::string(r.bytes(cfg_len)));
        cfg.validate();
    } catch (const Error& e) {
        throw Error(Errc::CorruptCheckpoint, std::string("stored config: ") + e.what());
    }
    if (expected && !cfg.same_shape(*expected))
        throw Error(Errc::VersionMismatch, "checkpoint model " + cfg.to_json() +
                                               " does not match requested " + expected->to_json());
    auto model = build_model(cfg, 0);
    std::map<std::string, Tensor*> by_name;
    for (const auto& p : model->parameters()) by_name[p.name] = p.tensor;

    const auto count = r.get<std::uint32_t>();
    if (count != by_name.size())
        throw Error(Errc::CorruptCheckpoint, "checkpoint holds " + std::to_string(count) +
                                                 " arrays, model has " +
                                                 std::to_string(by_name.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name(r.bytes(r.get<std::uint32_t>()));
        const auto rank = r.get<std::uint32_t>();
        std::vector<std::size_t> shape;
        for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.get<std::uint64_t>());
        const auto it = by_name.find(name);
        if (it == by_name.end() || it->second->shape() != shape)
            throw Error(Errc::CorruptCheckpoint, "unexpected array " + name);
        auto v = it->second->values();
        const auto raw = r.bytes(v.size() * sizeof(double));
        std::memcpy(v.data(), raw.data(), raw.size());
    }
    if (r.remaining() != 0) throw Error(Errc::CorruptCheckpoint, "trailing bytes in checkpoint");
    return model;
}

}  // namespace aisgap::model
