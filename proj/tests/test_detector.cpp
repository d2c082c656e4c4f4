#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "aisgap/detector.hpp"
#include "aisgap/error.hpp"
#include "aisgap/simulator.hpp"

using namespace aisgap;
using namespace aisgap::detect;
using ais::DynamicReport;

namespace {

// Emits the same logit for every sample.
class ConstantModel final : public model::Classifier {
public:
    explicit ConstantModel(double logit) : Classifier(model::ModelConfig{}), logit_(logit) {}
    std::vector<double> forward_train(const model::Batch& b, rnd::Engine&) override {
        return logits(b);
    }
    void backward(std::span<const double>) override {}
    std::vector<double> logits(const model::Batch& b) const override {
        return std::vector<double>(b.n, logit_);
    }
    std::vector<nn::ParamRef> parameters() override { return {}; }

private:
    double logit_;
};

const std::vector<geo::GeoPoint> kPorts{{0.0, 0.0}};

// A vessel drifting east by about 1 m/s.
DynamicReport report(std::uint32_t mmsi, double t, double lat = 30.0, double lon = 0.0,
                     double drift = 1e-5) {
    DynamicReport r;
    r.mmsi = mmsi;
    r.msg_type = 1;
    r.timestamp_s = t;
    r.lat = lat;
    r.lon = lon + t * drift;
    r.sog = 10;
    return r;
}

struct Collected {
    std::vector<Resolution> resolutions;
    std::vector<Reappearance> reappearances;
    Sink sink() {
        return [this](const Output& o) {
            if (const auto* r = std::get_if<Resolution>(&o))
                resolutions.push_back(*r);
            else
                reappearances.push_back(std::get<Reappearance>(o));
        };
    }
};

std::string serialize(const std::vector<Resolution>& rs) {
    std::ostringstream out;
    for (const auto& r : rs) write_output_json(out, Output{r}, true);
    return out.str();
}

}  // namespace

TEST_CASE("event classification") {
    CHECK(classify_event(true, false) == Classification::Abnormal);
    CHECK(classify_event(false, true) == Classification::ModelError);
    CHECK(classify_event(true, true) == Classification::Ordinary);
    CHECK(classify_event(false, false) == Classification::Ordinary);
    CHECK(to_string(Classification::Abnormal) == "abnormal");
}

TEST_CASE("predictions start at the fiftieth message") {
    const ConstantModel m(5.0);
    const geo::PortIndex idx(kPorts);
    Collected out;
    Detector det(m, idx, DetectorConfig{}, out.sink());
    for (int i = 0; i < 49; ++i) det.on_message(report(1, 60.0 * i));
    CHECK(det.counters().predictions == 0);
    CHECK(!det.state(1)->pending);
    det.on_message(report(1, 60.0 * 49));
    CHECK(det.counters().predictions == 1);
    CHECK(det.state(1)->pending);
    CHECK(det.state(1)->pending_probability == doctest::Approx(1.0 / (1.0 + std::exp(-5.0))));
    for (int i = 50; i < 60; ++i) det.on_message(report(1, 60.0 * i));
    CHECK(det.counters().predictions == 11);
    CHECK(out.resolutions.size() == 10);
    for (const auto& r : out.resolutions) {
        CHECK(r.cls == Classification::Ordinary);
        CHECK(r.expected);
        CHECK(r.arrived);
    }
    CHECK(det.state(1)->history.size() == 50);
}

TEST_CASE("no predictions inside the port zone") {
    const ConstantModel m(5.0);
    const geo::PortIndex idx(kPorts);
    Detector det(m, idx, DetectorConfig{}, {});
    // About 2.2 km from the port.
    for (int i = 0; i < 80; ++i) det.on_message(report(1, 60.0 * i, 0.02, -0.001, 0.0));
    CHECK(det.counters().predictions == 0);
    CHECK(det.counters().messages == 80);
}

TEST_CASE("expected message that never arrives raises an alert") {
    const ConstantModel m(5.0);
    const geo::PortIndex idx(kPorts);
    Collected out;
    DetectorConfig cfg;
    Detector det(m, idx, cfg, out.sink());
    for (int i = 0; i < 50; ++i) det.on_message(report(1, 60.0 * i));
    const double last = 60.0 * 49;
    // A second vessel keeps the clock moving.
    double t = last;
    while (t < last + cfg.tau_s + cfg.lateness_s - 1) {
        t += 30;
        det.on_message(report(2, t, 20));
    }
    CHECK(out.resolutions.empty());
    t += 30;
    det.on_message(report(2, t, 20));
    REQUIRE(out.resolutions.size() == 1);
    const auto& r = out.resolutions[0];
    CHECK(r.mmsi == 1);
    CHECK(r.cls == Classification::Abnormal);
    CHECK(!r.arrived);
    CHECK(r.last_msg_time == last);
    REQUIRE(r.alert.has_value());
    CHECK(r.alert->loss_point.lat == 30.0);
    CHECK(r.alert->history.size() == 50);
    CHECK(r.alert->history.back().t == last);
    CHECK(det.counters().alerts == 1);

    // The vessel comes back.
    det.on_message(report(1, t + 100));
    REQUIRE(out.reappearances.size() == 1);
    CHECK(out.reappearances[0].alert_last_msg_time == last);
    CHECK(out.reappearances[0].reappeared_at == t + 100);
    CHECK(det.counters().reappeared == 1);
}

TEST_CASE("unexpected outcomes") {
    const ConstantModel m(-5.0);
    const geo::PortIndex idx(kPorts);
    Collected out;
    Detector det(m, idx, DetectorConfig{}, out.sink());
    for (int i = 0; i < 51; ++i) det.on_message(report(1, 60.0 * i));
    REQUIRE(out.resolutions.size() == 1);
    CHECK(out.resolutions[0].cls == Classification::ModelError);
    // A silence the model did not expect to be broken is ordinary.
    det.on_message(report(1, 60.0 * 50 + 5000));
    REQUIRE(out.resolutions.size() == 2);
    CHECK(out.resolutions[1].cls == Classification::Ordinary);
    CHECK(!out.resolutions[1].arrived);
    CHECK(det.counters().model_errors == 1);
    CHECK(det.counters().alerts == 0);
    // The gap rule is inclusive at tau.
    det.on_message(report(1, 60.0 * 50 + 5000 + 600));
    CHECK(out.resolutions.back().arrived);
}

TEST_CASE("late and duplicate reports") {
    const ConstantModel m(5.0);
    const geo::PortIndex idx(kPorts);
    Detector det(m, idx, DetectorConfig{}, {});
    det.on_message(report(1, 100));
    det.on_message(report(1, 100));
    det.on_message(report(1, 50));
    det.on_message(report(1, 160));
    CHECK(det.counters().duplicates == 1);
    CHECK(det.counters().late == 1);
    CHECK(det.state(1)->history.size() == 2);
    CHECK(det.state(1)->history.back().delta_t == 60.0);
}

TEST_CASE("idle vessels are evicted") {
    const ConstantModel m(5.0);
    const geo::PortIndex idx(kPorts);
    Detector det(m, idx, DetectorConfig{}, {});
    for (int i = 0; i < 10; ++i) det.on_message(report(1, 60.0 * i));
    for (int h = 0; h < 8 * 24; ++h) det.on_message(report(2, 600.0 + 3600.0 * h, 20));
    CHECK(det.state(1) == nullptr);
    CHECK(det.counters().evicted == 1);
    CHECK(det.tracked_vessels() == 1);
}

TEST_CASE("finish resolves deadlines inside the observed range only") {
    const ConstantModel m(5.0);
    const geo::PortIndex idx(kPorts);
    Collected out;
    Detector det(m, idx, DetectorConfig{}, out.sink());
    for (int i = 0; i < 50; ++i) det.on_report(report(1, 60.0 * i));
    for (int i = 0; i < 50; ++i) det.on_report(report(2, 60.0 * 49 + 700 + i, 20));
    det.finish();
    REQUIRE(out.resolutions.size() == 1);
    CHECK(out.resolutions[0].mmsi == 1);
    CHECK(out.resolutions[0].cls == Classification::Abnormal);
    CHECK(det.counters().unresolved == 1);  // vessel 2's deadline is past the end
}

TEST_CASE("online and batched processing agree") {
    sim::ScenarioConfig cfg;
    cfg.vessels = 30;
    cfg.duration_s = 86400;
    cfg.seed = 3;
    cfg.coverage.terrestrial_fraction = 0.2;
    cfg.shutdowns.rate_per_vessel_day = 0.5;
    const auto ports = sim::synthetic_ports(100, 2, cfg.region);
    const auto sc = sim::generate(cfg, ports);
    const geo::PortIndex idx(ports);

    model::ModelConfig mc;
    mc.d_model = 16;
    mc.heads = 2;
    const auto net = model::build_model(mc, 5);
    DetectorConfig dc;
    dc.batch_reports = 777;
    const auto batched = run_stream(sc.lines, *net, idx, dc);
    CHECK(batched.counters.predictions > 1000);
    CHECK(batched.counters.alerts > 0);

    Collected online;
    Detector det(*net, idx, dc, online.sink());
    ais::StreamDecoder dec;
    for (const auto& line : sc.lines)
        if (auto r = dec.feed(line)) det.on_message(*r);
    det.finish();
    CHECK(serialize(online.resolutions) == serialize(batched.resolutions));
    CHECK(online.reappearances.size() == batched.reappearances.size());

    const auto again = run_stream(sc.lines, *net, idx, dc);
    CHECK(serialize(again.resolutions) == serialize(batched.resolutions));
    std::ostringstream a, b;
    write_summary_json(a, again.counters);
    write_summary_json(b, batched.counters);
    CHECK(a.str() == b.str());

    // Every prediction is resolved or still open at the end.
    const auto& c = batched.counters;
    CHECK(c.alerts + c.model_errors + c.ordinary + c.unresolved == c.predictions);
}

TEST_CASE("interleaving other vessels does not change a vessel's outcomes") {
    const geo::PortIndex idx(kPorts);
    model::ModelConfig mc;
    mc.d_model = 16;
    mc.heads = 2;
    const auto net = model::build_model(mc, 8);
    rnd::Engine rng(4);
    std::vector<DynamicReport> a, b;
    double t = 0;
    for (int i = 0; i < 300; ++i) {
        t += rnd::below(rng, 10) == 0 ? 1500 : 30;
        a.push_back(report(1, t));
    }
    t = 0;
    for (int i = 0; i < 300; ++i) {
        t += rnd::below(rng, 10) == 0 ? 2000 : 40;
        b.push_back(report(2, t, 25));
    }
    auto run = [&](bool interleave) {
        Collected out;
        Detector det(*net, idx, DetectorConfig{}, out.sink());
        std::vector<DynamicReport> all = a;
        if (interleave) all.insert(all.end(), b.begin(), b.end());
        std::stable_sort(all.begin(), all.end(),
                         [](const auto& x, const auto& y) { return x.timestamp_s < y.timestamp_s; });
        for (const auto& r : all) det.on_message(r);
        det.finish();
        std::vector<std::tuple<double, Classification, double>> mine;
        for (const auto& r : out.resolutions)
            if (r.mmsi == 1) mine.emplace_back(r.last_msg_time, r.cls, r.probability);
        return mine;
    };
    const auto alone = run(false), mixed = run(true);
    CHECK(alone.size() > 200);
    // Vessel 2 extends the stream, which can resolve vessel 1's final prediction.
    REQUIRE(mixed.size() >= alone.size());
    CHECK(mixed.size() - alone.size() <= 1);
    CHECK(std::equal(alone.begin(), alone.end(), mixed.begin()));
}

TEST_CASE("detector configuration") {
    DetectorConfig c;
    c.tau_s = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = DetectorConfig{};
    c.threshold = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(DetectorConfig{}.capacity() == 50);
}
