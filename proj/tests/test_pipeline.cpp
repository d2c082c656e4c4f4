#include <doctest.h>

#include <fstream>
#include <sstream>

#include "aisgap/config.hpp"
#include "aisgap/error.hpp"
#include "aisgap/pipeline.hpp"
#include "support.hpp"

using namespace aisgap;

namespace {

Errc error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return Errc::Io;
}

pipeline::AblationConfig tiny_ablation() {
    pipeline::AblationConfig c;
    c.month_a.vessels = 15;
    c.month_a.duration_s = 86400;
    c.month_a.seed = 1;
    c.month_a.coverage.terrestrial_fraction = 0.0;
    c.month_b = c.month_a;
    c.month_b.seed = 2;
    c.month_b.start_time += 31 * 86400.0;
    c.ports = 100;
    c.dataset.target_size = 200;
    c.dataset.seed = 3;
    c.eval_size = 200;
    c.model.d_model = 8;
    c.model.heads = 2;
    c.model.blocks = 1;
    c.train.max_epochs = 2;
    c.train.batches_per_epoch = 3;
    c.train.batch_size = 32;
    c.train.seed = 4;
    return c;
}

}  // namespace

TEST_CASE("config defaults round trip") {
    const AppConfig def;
    CHECK_NOTHROW(def.validate());
    const auto text = app_config_to_json(def);
    CHECK(app_config_to_json(app_config_from_json(text)) == text);
    CHECK(app_config_to_json(app_config_from_json("{}")) == text);
}

TEST_CASE("config overrides and errors") {
    const auto c = app_config_from_json(R"({
        "synthetic_ports": 20,
        "scenario": {"vessels": 7, "coverage": {"satellite_drop": 0.25}},
        "dataset": {"target_size": 400},
        "model": {"d_model": 32, "heads": 2},
        "train": {"max_epochs": 3},
        "detector": {"threshold": 0.7}
    })");
    CHECK(c.synthetic_ports == 20);
    CHECK(c.scenario.vessels == 7);
    CHECK(c.scenario.coverage.satellite_drop == 0.25);
    CHECK(c.scenario.coverage.pass_period_s == sim::CoverageConfig{}.pass_period_s);
    CHECK(c.dataset.target_size == 400);
    CHECK(c.model.d_model == 32);
    CHECK(c.train.max_epochs == 3);
    CHECK(c.detector.threshold == 0.7);

    CHECK(error_of([] { app_config_from_json(R"({"scenaro": {}})"); }) == Errc::InvalidConfig);
    CHECK(error_of([] { app_config_from_json(R"({"scenario": {"vesels": 3}})"); }) ==
          Errc::InvalidConfig);
    CHECK(error_of([] { app_config_from_json(R"({"model": {"layers": 3}})"); }) ==
          Errc::InvalidConfig);
    CHECK(error_of([] { app_config_from_json(R"({"train": {"lr": "fast"}})"); }) ==
          Errc::InvalidConfig);
    CHECK(error_of([] { app_config_from_json("{"); }) == Errc::InvalidConfig);

    auto bad = app_config_from_json(R"({"model": {"heads": 3}})");
    CHECK(error_of([&] { bad.validate(); }) == Errc::InvalidConfig);
    bad = app_config_from_json(R"({"log_level": "loud"})");
    CHECK(error_of([&] { bad.validate(); }) == Errc::InvalidConfig);
    CHECK(error_of([] { load_app_config("/nonexistent/aisgap.json"); }) == Errc::Io);
}

TEST_CASE("common settings reach every section") {
    AppConfig c;
    c.set_tau(1800);
    c.set_window(10);
    c.set_seed(77);
    CHECK(c.dataset.tau_s == 1800);
    CHECK(c.model.tau_s == 1800);
    CHECK(c.detector.tau_s == 1800);
    CHECK(c.dataset.w == 10);
    CHECK(c.model.w == 10);
    CHECK(c.detector.w == 10);
    CHECK(c.scenario.seed == 77);
    CHECK(c.dataset.seed == 77);
    CHECK(c.train.seed == 77);

    testing::TempDir dir("config");
    {
        std::ofstream out(dir.file("c.json"));
        out << app_config_to_json(c);
    }
    CHECK(app_config_to_json(load_app_config(dir.file("c.json"))) == app_config_to_json(c));
}

TEST_CASE("list splitting") {
    CHECK(pipeline::split_list("a, b ,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(pipeline::split_list("60") == std::vector<std::string>{"60"});
    CHECK(pipeline::split_list("").empty());
}

TEST_CASE("ablation grids are validated before any work") {
    const auto cfg = tiny_ablation();
    auto run = [&](const std::string& axis, const std::string& grid) {
        return error_of([&] { pipeline::ablation_run(axis, pipeline::split_list(grid), cfg); });
    };
    CHECK(run("depth", "1,2") == Errc::InvalidGrid);
    CHECK(run("horizon", "") == Errc::InvalidGrid);
    CHECK(run("horizon", "60,60") == Errc::InvalidGrid);
    CHECK(run("horizon", "60,abc") == Errc::InvalidGrid);
    CHECK(run("horizon", "0") == Errc::InvalidGrid);
    CHECK(run("dataset_size", "1001") == Errc::InvalidGrid);
    CHECK(run("dataset_size", "2.5") == Errc::InvalidGrid);
    CHECK(run("window_size", "0") == Errc::InvalidGrid);
    CHECK(run("architecture", "transformer,lstm") == Errc::InvalidGrid);
}

TEST_CASE("small ablation run") {
    const auto cfg = tiny_ablation();
    std::size_t seen = 0;
    const auto rows = pipeline::ablation_run("architecture", {"transformer", "feedforward"}, cfg,
                                             [&](const pipeline::AblationRow&) { ++seen; });
    REQUIRE(rows.size() == 2);
    CHECK(seen == 2);
    for (const auto& r : rows) {
        CHECK(r.axis == "architecture");
        CHECK(r.train_samples == 200);
        CHECK(r.test_samples == 180);
        CHECK(r.epochs >= 1);
        CHECK(r.report.total() == r.test_samples);
    }
    CHECK(rows[0].parameters != rows[1].parameters);

    std::ostringstream a, b;
    pipeline::write_ablation_csv(a, rows);
    pipeline::write_ablation_csv(b, pipeline::ablation_run("architecture", {"transformer", "feedforward"}, cfg));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("axis,value,train_samples,test_samples,parameters,epochs,tp,fp,fn,tn,"
                        "accuracy,ppv,npv\n",
                        0) == 0);
}
