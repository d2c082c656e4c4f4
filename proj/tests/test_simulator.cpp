#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include <omp.h>

#include "aisgap/error.hpp"
#include "aisgap/pipeline.hpp"
#include "aisgap/simulator.hpp"

using namespace aisgap;
using namespace aisgap::sim;

namespace {

const std::vector<geo::Port>& ports() {
    static const auto p = synthetic_ports(200, 3, Region{});
    return p;
}

std::map<std::uint32_t, std::vector<double>> emission_times(const Scenario& sc, bool received_only) {
    std::map<std::uint32_t, std::vector<double>> out;
    for (const auto& e : sc.truth.emissions)
        if (e.received || !received_only) out[e.mmsi].push_back(e.t);
    return out;
}

}  // namespace

TEST_CASE("cadence") {
    CHECK(cadence_s(0, true) == 180.0);
    CHECK(cadence_s(30, true) == 180.0);
    CHECK(cadence_s(12, false) == 10.0);
    CHECK(cadence_s(23, false) == 2.0);
}

TEST_CASE("anchored vessels emit about twenty reports an hour") {
    ScenarioConfig cfg;
    cfg.vessels = 20;
    cfg.duration_s = 6 * 3600;
    cfg.seed = 1;
    cfg.mix = {0, 0, 1};
    cfg.shutdowns.rate_per_vessel_day = 0;
    cfg.record_emissions = true;
    const auto sc = generate(cfg, ports());
    const auto times = emission_times(sc, false);
    REQUIRE(times.size() == 20);
    for (const auto& [mmsi, ts] : times) {
        for (int h = 1; h < 6; ++h) {
            const double lo = cfg.start_time + h * 3600.0, hi = lo + 3600.0;
            const auto n = std::count_if(ts.begin(), ts.end(), [&](double t) { return t >= lo && t < hi; });
            CHECK(n >= 19);
            CHECK(n <= 21);
        }
    }
}

TEST_CASE("empty and invalid scenarios") {
    ScenarioConfig cfg;
    cfg.vessels = 0;
    const auto sc = generate(cfg, ports());
    CHECK(sc.lines.empty());
    CHECK(sc.truth.shutdowns.empty());
    CHECK(sc.truth.mmsis.empty());

    cfg.vessels = 5;
    cfg.duration_s = 0;
    CHECK(generate(cfg, ports()).lines.empty());

    auto bad = ScenarioConfig{};
    bad.mix = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(generate(bad, ports()), Error);
    bad = ScenarioConfig{};
    bad.coverage.satellite_drop = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ScenarioConfig{};
    bad.shutdowns.min_duration_s = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("generation is deterministic and independent of the thread count") {
    ScenarioConfig cfg;
    cfg.vessels = 30;
    cfg.duration_s = 86400;
    cfg.seed = 42;
    cfg.record_emissions = true;
    const auto a = generate(cfg, ports());
    omp_set_num_threads(3);
    const auto b = generate(cfg, ports());
    omp_set_num_threads(1);
    const auto c = generate(cfg, ports());
    omp_set_num_threads(omp_get_num_procs());
    CHECK(a.lines == b.lines);
    CHECK(a.lines == c.lines);
    std::stringstream sa, sb;
    write_truth(sa, a.truth);
    write_truth(sb, b.truth);
    CHECK(sa.str() == sb.str());

    cfg.seed = 43;
    CHECK(generate(cfg, ports()).lines != a.lines);
    CHECK(synthetic_ports(50, 1, Region{})[7].pos.lat == synthetic_ports(50, 1, Region{})[7].pos.lat);
}

TEST_CASE("stream is well formed and respects cadence and shutdowns") {
    ScenarioConfig cfg;
    cfg.vessels = 60;
    cfg.duration_s = 2 * 86400;
    cfg.seed = 7;
    cfg.shutdowns.rate_per_vessel_day = 1.0;
    cfg.record_emissions = true;
    const auto sc = generate(cfg, ports());
    REQUIRE(!sc.truth.shutdowns.empty());

    ais::DecodeStats stats;
    const auto reports = pipeline::decode_lines(sc.lines, &stats);
    CHECK(stats.errors.empty());
    CHECK(stats.non_dynamic > 0);  // static and voyage reports
    CHECK(reports.size() == static_cast<std::size_t>(std::count_if(
                                sc.truth.emissions.begin(), sc.truth.emissions.end(),
                                [](const Emission& e) { return e.received; })));
    for (std::size_t i = 1; i < reports.size(); ++i)
        CHECK(reports[i].timestamp_s >= reports[i - 1].timestamp_s);

    for (const auto& [mmsi, ts] : emission_times(sc, false))
        for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] - ts[i - 1] >= 2.0);

    for (const auto& s : sc.truth.shutdowns) {
        CHECK(s.end > s.start);
        CHECK(s.end - s.start >= cfg.shutdowns.min_duration_s);
        for (const auto& e : sc.truth.emissions)
            if (e.mmsi == s.mmsi) CHECK(!(e.t >= s.start && e.t < s.end));
    }
    for (const auto& r : reports) {
        CHECK(r.lat >= cfg.region.lat_min - 1);
        CHECK(r.lat <= cfg.region.lat_max + 1);
    }
}

TEST_CASE("terrestrial and satellite reception patterns") {
    ScenarioConfig cfg;
    cfg.vessels = 40;
    cfg.duration_s = 2 * 86400;
    cfg.seed = 9;
    cfg.mix = {1, 0, 0};
    cfg.shutdowns.rate_per_vessel_day = 0;
    cfg.record_emissions = true;

    cfg.coverage.terrestrial_fraction = 1.0;
    const auto terr = generate(cfg, ports());
    const double rx = static_cast<double>(std::count_if(
        terr.truth.emissions.begin(), terr.truth.emissions.end(), [](const Emission& e) { return e.received; }));
    CHECK(rx / static_cast<double>(terr.truth.emissions.size()) ==
          doctest::Approx(1.0 - cfg.coverage.terrestrial_drop).epsilon(0.01));

    // Satellite-only vessels: gaps are either within a pass or span the time between passes.
    cfg.coverage.terrestrial_fraction = 0.0;
    const auto sat = generate(cfg, ports());
    std::size_t short_gaps = 0, long_gaps = 0, middle = 0;
    for (const auto& [mmsi, ts] : emission_times(sat, true)) {
        for (std::size_t i = 1; i < ts.size(); ++i) {
            const double g = ts[i] - ts[i - 1];
            if (g < cfg.coverage.pass_duration_s) ++short_gaps;
            else if (g > cfg.coverage.pass_period_s - cfg.coverage.pass_duration_s - 60) ++long_gaps;
            else ++middle;
        }
    }
    CHECK(short_gaps > 10 * long_gaps);
    CHECK(long_gaps >= 40 * 2 * 86400 / 6000 / 2);
    CHECK(middle == 0);
}

TEST_CASE("truth file round trip") {
    ScenarioConfig cfg;
    cfg.vessels = 10;
    cfg.duration_s = 86400;
    cfg.shutdowns.rate_per_vessel_day = 2;
    cfg.record_emissions = true;
    const auto sc = generate(cfg, ports());
    std::stringstream ss;
    write_truth(ss, sc.truth);
    const auto back = read_truth(ss);
    CHECK(back.mmsis == sc.truth.mmsis);
    REQUIRE(back.shutdowns.size() == sc.truth.shutdowns.size());
    for (std::size_t i = 0; i < back.shutdowns.size(); ++i) {
        CHECK(back.shutdowns[i].start == sc.truth.shutdowns[i].start);
        CHECK(back.shutdowns[i].received_before == sc.truth.shutdowns[i].received_before);
    }
    CHECK(back.emissions.size() == sc.truth.emissions.size());
    std::stringstream bad("{\"kind\": \"shutdown\", \"mmsi\": \n");
    CHECK_THROWS_AS(read_truth(bad), Error);
}

TEST_CASE("alert scoring") {
    GroundTruth truth;
    truth.mmsis = {1, 2, 3};
    // Eligible, eligible, too little history, in port.
    truth.shutdowns = {{1, 1000, 5000, 60, 20000, 990},
                       {2, 3000, 9000, 50, 6000, 2990},
                       {2, 20000, 30000, 49, 6000, 19990},
                       {3, 500, 4000, 100, 4000, 490}};
    const std::vector<AlertRef> alerts{{1, 990}, {1, 50000}, {3, 490}, {2, 19990}};
    const auto s = score_alerts(alerts, truth, 600);
    CHECK(s.eligible_shutdowns == 2);
    CHECK(s.matched_shutdowns == 1);
    REQUIRE(s.recall.has_value());
    CHECK(*s.recall == 0.5);
    CHECK(s.alerts == 4);
    CHECK(s.unmatched_alerts == 1);
    CHECK(s.false_alert_rate == 0.25);

    const auto none = score_alerts({}, GroundTruth{{1}, {}, {}}, 600);
    CHECK(!none.recall.has_value());
    CHECK(none.false_alert_rate == 0.0);

    const std::vector<AlertRef> stranger{{99, 0}};
    try {
        score_alerts(stranger, truth, 600);
        FAIL("expected ScenarioMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ScenarioMismatch);
    }
}
