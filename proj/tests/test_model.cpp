#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "aisgap/error.hpp"
#include "aisgap/model.hpp"
#include "support.hpp"

using namespace aisgap;
using namespace aisgap::model;
using encoder::EncodedSet;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.w = 4;
    c.d_model = 8;
    c.heads = 2;
    c.blocks = 2;
    c.ffn_dim = 12;
    c.repr_dim = 16;
    c.head_dims = {6, 5, 4};
    c.dropout = 0.2;
    return c;
}

// Random inputs; the label is whether the first position entry exceeds 0.5,
// with a margin of 0.05 around the boundary.
EncodedSet separable_set(std::size_t n, std::size_t w, rnd::Engine& rng) {
    EncodedSet s;
    s.w = w;
    s.history = testing::random_values(n * w * s.history_dims, rng);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < s.position_dims; ++k) s.position.push_back(rnd::uniform01(rng));
        double& key = s.position[i * s.position_dims];
        key = key < 0.5 ? 0.45 * key / 0.5 : 0.55 + 0.45 * (key - 0.5) / 0.5;
        s.labels.push_back(key > 0.5);
    }
    return s;
}

Errc error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return Errc::Io;
}

}  // namespace

TEST_CASE("metric identities") {
    const double total = 4'500'000;
    const auto tp = static_cast<std::uint64_t>(std::llround(0.4996 * total));
    const auto fp = static_cast<std::uint64_t>(std::llround(0.0020 * total));
    const auto fn = static_cast<std::uint64_t>(std::llround(0.0004 * total));
    const auto tn = static_cast<std::uint64_t>(std::llround(0.4980 * total));
    const auto r = report_from_counts(tp, fp, fn, tn);
    CHECK(r.total() == 4'500'000);
    CHECK(std::round(r.ppv * 10000) / 100 == 99.60);
    CHECK(std::round(r.npv * 10000) / 100 == 99.92);
    CHECK(std::round(r.accuracy * 10000) / 100 == 99.76);

    const auto none = report_from_counts(0, 0, 3, 5);
    CHECK(std::isnan(none.ppv));
    CHECK(none.npv == doctest::Approx(5.0 / 8));
}

TEST_CASE("parameter counts") {
    CHECK(build_model(ModelConfig{}, 1)->parameter_count() == 287'100);
    ModelConfig ff;
    ff.arch = Architecture::FeedForward;
    // (25 * 6 + 11) -> 10 -> 20 -> 25 -> 20 -> 10 -> 1
    CHECK(build_model(ff, 1)->parameter_count() == 3'106);
}

TEST_CASE("invalid configurations") {
    auto c = small_config();
    c.heads = 3;
    CHECK(error_of([&] { build_model(c, 1); }) == Errc::InvalidConfig);
    c = small_config();
    c.repr_dim = 11;
    CHECK(error_of([&] { build_model(c, 1); }) == Errc::InvalidConfig);
    c = small_config();
    c.dropout = 1.0;
    CHECK(error_of([&] { build_model(c, 1); }) == Errc::InvalidConfig);
    CHECK(error_of([] { architecture_from_string("lstm"); }) == Errc::InvalidConfig);
    TrainConfig t;
    t.batch_size = 0;
    CHECK(error_of([&] { t.validate(); }) == Errc::InvalidConfig);
}

TEST_CASE("config json round trip") {
    auto c = small_config();
    c.tau_s = 1800;
    const auto back = ModelConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.same_shape(c));
    CHECK(error_of([] { ModelConfig::from_json("{\"w\": \"x\"}"); }) == Errc::InvalidConfig);
}

TEST_CASE("full model gradients") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (auto arch : {Architecture::Transformer, Architecture::FeedForward}) {
            auto cfg = small_config();
            cfg.arch = arch;
            cfg.ff_dims = {7, 5};
            auto net = build_model(cfg, seed);
            rnd::Engine rng(seed + 10);
            const auto set = separable_set(3, cfg.w, rng);
            const auto batch = slice(set, 0, set.size());
            auto loss = [&](std::vector<double>* d) {
                rnd::Engine drop(seed + 20);
                const auto z = net->forward_train(batch, drop);
                return nn::bce_with_logits(z, set.labels, d);
            };
            auto params = net->parameters();
            // Zero-initialized biases can leave a ReLU input exactly on the kink.
            for (auto& p : params)
                for (auto& v : p.tensor->values()) v += rnd::uniform(rng, -0.1, 0.1);
            for (auto& p : params) p.tensor->zero_grad();
            std::vector<double> d;
            loss(&d);
            net->backward(d);
            double worst = 0;
            for (auto& p : params) {
                const std::vector<double> analytic(p.tensor->grad().begin(), p.tensor->grad().end());
                worst = std::max(worst, testing::max_grad_error(p.tensor->values(), analytic,
                                                                [&] { return loss(nullptr); }));
            }
            CHECK(worst < 1e-4);
        }
    }
}

TEST_CASE("construction and training are deterministic") {
    rnd::Engine rng(1);
    const auto train_set = separable_set(300, 4, rng), val = separable_set(100, 4, rng);
    TrainConfig tc;
    tc.batch_size = 32;
    tc.max_epochs = 3;
    tc.batches_per_epoch = 5;
    tc.seed = 9;
    auto a = build_model(small_config(), 4), b = build_model(small_config(), 4);
    train(*a, train_set, val, tc);
    train(*b, train_set, val, tc);
    const auto pa = a->parameters(), pb = b->parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const auto va = pa[i].tensor->values(), vb = pb[i].tensor->values();
        CHECK(std::equal(va.begin(), va.end(), vb.begin()));
    }
    auto c = build_model(small_config(), 5);
    CHECK(predict_all(*a, val) != predict_all(*c, val));
}

TEST_CASE("learns a separable task") {
    rnd::Engine rng(2);
    const auto train_set = separable_set(4000, 4, rng), val = separable_set(500, 4, rng),
               test = separable_set(2000, 4, rng);
    auto cfg = small_config();
    cfg.d_model = 16;
    cfg.dropout = 0.0;
    auto net = build_model(cfg, 1);
    TrainConfig tc;
    tc.batch_size = 64;
    tc.max_epochs = 40;
    tc.batches_per_epoch = 60;
    tc.lr = 3e-3;
    tc.seed = 1;
    std::size_t epochs_seen = 0;
    const auto res = train(*net, train_set, val, tc, [&](const EpochRecord&) { ++epochs_seen; });
    CHECK(epochs_seen == res.history.size());
    CHECK(evaluate(*net, test).accuracy >= 0.99);
}

TEST_CASE("early stopping restores the best epoch") {
    rnd::Engine rng(3);
    auto train_set = separable_set(500, 4, rng), val = separable_set(200, 4, rng);
    for (auto& l : val.labels) l = static_cast<std::uint8_t>(rnd::below(rng, 2));  // unlearnable
    auto net = build_model(small_config(), 2);
    TrainConfig tc;
    tc.batch_size = 32;
    tc.max_epochs = 200;
    tc.batches_per_epoch = 20;
    tc.patience = 3;
    tc.lr = 1e-2;
    const auto res = train(*net, train_set, val, tc);
    CHECK(res.early_stopped);
    CHECK(res.history.size() < 200);
    CHECK(res.history.size() == res.best_epoch + 3);
    CHECK(mean_loss(*net, val) == doctest::Approx(res.best_val_loss).epsilon(1e-12));
    for (const auto& h : res.history) CHECK(h.val_loss >= res.best_val_loss);

    EncodedSet empty;
    empty.w = 4;
    CHECK(error_of([&] { train(*net, empty, val, tc); }) == Errc::EmptyDataset);
    CHECK(error_of([&] { evaluate(*net, empty); }) == Errc::EmptyDataset);
    auto wrong = separable_set(10, 5, rng);
    CHECK(error_of([&] { train(*net, wrong, val, tc); }) == Errc::ShapeMismatch);
}

TEST_CASE("divergence is reported") {
    rnd::Engine rng(4);
    auto train_set = separable_set(100, 4, rng);
    auto net = build_model(small_config(), 2);
    TrainConfig tc;
    tc.batch_size = 100;
    tc.max_epochs = 5;
    tc.batches_per_epoch = 10;
    tc.lr = 1e200;
    CHECK(error_of([&] { train(*net, train_set, train_set, tc); }) == Errc::DivergedLoss);
}

TEST_CASE("single and batched prediction agree; evaluate counts") {
    rnd::Engine rng(5);
    const auto set = separable_set(300, 4, rng);
    auto net = build_model(small_config(), 3);
    const auto all = predict_all(*net, set, 64);
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double p = predict(*net, set.history_of(i), set.position_of(i));
        CHECK(std::abs(p - all[i]) <= 1e-12);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        const bool yes = all[i] >= 0.5;
        tp += yes && set.labels[i];
        fp += yes && !set.labels[i];
        fn += !yes && set.labels[i];
        tn += !yes && !set.labels[i];
    }
    const auto r = evaluate(*net, set);
    CHECK(r.tp == tp);
    CHECK(r.fp == fp);
    CHECK(r.fn == fn);
    CHECK(r.tn == tn);
    CHECK(evaluate(*net, set, 0.0).tp + evaluate(*net, set, 0.0).fp == set.size());
}

TEST_CASE("checkpoints") {
    testing::TempDir dir("model");
    rnd::Engine rng(6);
    const auto set = separable_set(50, 4, rng);
    for (auto arch : {Architecture::Transformer, Architecture::FeedForward}) {
        auto cfg = small_config();
        cfg.arch = arch;
        auto net = build_model(cfg, 7);
        const auto path = dir.file("m.ckpt");
        save_checkpoint(*net, path);
        const auto back = load_checkpoint(path, &cfg);
        CHECK(back->config().to_json() == cfg.to_json());
        CHECK(predict_all(*back, set) == predict_all(*net, set));

        std::string bytes;
        {
            std::ifstream in(path, std::ios::binary);
            bytes.assign(std::istreambuf_iterator<char>(in), {});
        }
        auto write = [&](const std::string& b) {
            std::ofstream out(dir.file("bad.ckpt"), std::ios::binary);
            out << b;
        };
        write(bytes.substr(0, bytes.size() / 2));
        CHECK(error_of([&] { load_checkpoint(dir.file("bad.ckpt")); }) == Errc::CorruptCheckpoint);
        auto flipped = bytes;
        flipped[bytes.size() - 20] ^= 0x10;
        write(flipped);
        CHECK(error_of([&] { load_checkpoint(dir.file("bad.ckpt")); }) == Errc::CorruptCheckpoint);
        write("AISGCKPT");
        CHECK(error_of([&] { load_checkpoint(dir.file("bad.ckpt")); }) == Errc::CorruptCheckpoint);
        auto versioned = bytes;
        versioned[8] = 99;
        write(versioned);
        CHECK(error_of([&] { load_checkpoint(dir.file("bad.ckpt")); }) == Errc::VersionMismatch);

        auto other = cfg;
        other.w = 6;
        CHECK(error_of([&] { load_checkpoint(path, &other); }) == Errc::VersionMismatch);
    }
    CHECK(error_of([&] { load_checkpoint(dir.file("missing.ckpt")); }) == Errc::Io);
}
