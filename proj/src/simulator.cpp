#include "aisgap/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "aisgap/ais.hpp"
#include "aisgap/error.hpp"
#include "aisgap/random.hpp"

namespace aisgap::sim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kKnot = 1852.0 / 3600.0;
constexpr double kStaticInterval = 360.0;

enum class Regime { Cruising, Fishing, Anchored };

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::InvalidConfig, what); }

double wrap_lon(double lon) {
    double x = std::fmod(lon + 180.0, 360.0);
    if (x < 0) x += 360.0;
    return x - 180.0;
}

geo::GeoPoint offset(const geo::GeoPoint& p, double bearing_deg, double dist_m) {
    const double d = dist_m / geo::kEarthRadiusM;
    const double b = bearing_deg * kDeg;
    const double lat = p.lat + d * std::cos(b) / kDeg;
    const double lon = p.lon + d * std::sin(b) / (std::max(0.01, std::cos(p.lat * kDeg)) * kDeg);
    return {std::clamp(lat, -89.9, 89.9), wrap_lon(lon)};
}

struct Line {
    double rx;
    std::uint32_t mmsi;
    std::uint32_t seq;
    std::string text;
};

struct VesselOutput {
    std::vector<Line> lines;
    std::vector<Shutdown> shutdowns;
    std::vector<Emission> emissions;
};

std::string stamp(double t, const std::string& sentence) {
    return std::to_string(static_cast<long long>(t)) + "\t" + sentence;
}

VesselOutput simulate_vessel(const ScenarioConfig& cfg, std::size_t index,
                             std::span<const geo::Port> ports, const geo::PortIndex* port_index) {
    VesselOutput out;
    rnd::Engine rng = rnd::derive(cfg.seed, index + 1);
    const auto mmsi = static_cast<std::uint32_t>(201000000 + index);
    const bool class_b = rnd::bernoulli(rng, cfg.class_b_fraction);
    const double u = rnd::uniform01(rng);
    const Regime regime = u < cfg.mix.cruising                      ? Regime::Cruising
                          : u < cfg.mix.cruising + cfg.mix.fishing ? Regime::Fishing
                                                                    : Regime::Anchored;
    const bool terrestrial = rnd::bernoulli(rng, cfg.coverage.terrestrial_fraction);
    const bool near_port_draw = rnd::bernoulli(rng, cfg.near_port_fraction);

    auto port_dist = [&](const geo::GeoPoint& p) {
        return port_index ? port_index->nearest_distance_m(p)
                          : std::numeric_limits<double>::infinity();
    };

    geo::GeoPoint pos;
    const bool near_port = !ports.empty() &&
                           ((regime == Regime::Anchored && cfg.anchor_near_ports) || near_port_draw);
    if (near_port) {
        const auto& port = ports[rnd::below(rng, ports.size())].pos;
        pos = offset(port, rnd::uniform(rng, 0.0, 360.0), rnd::uniform(rng, 1000.0, 4000.0));
    } else {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            pos = {rnd::uniform(rng, cfg.region.lat_min, cfg.region.lat_max),
                   wrap_lon(rnd::uniform(rng, cfg.region.lon_min, cfg.region.lon_max))};
            if (port_dist(pos) >= cfg.spawn_min_port_dist_m) break;
        }
    }
    double speed = regime == Regime::Cruising  ? rnd::uniform(rng, 8.0, 22.0)
                   : regime == Regime::Fishing ? rnd::uniform(rng, 2.0, 5.0)
                                               : 0.0;
    double heading = rnd::uniform(rng, 0.0, 360.0);
    double turn_rate = rnd::uniform(rng, 1.0, 3.0) * (rnd::bernoulli(rng, 0.5) ? 1.0 : -1.0);

    const double t0 = cfg.start_time;
    const double t_end = cfg.start_time + cfg.duration_s;

    // Shutdown intervals, drawn up front as a Poisson process per vessel.
    if (cfg.shutdowns.rate_per_vessel_day > 0.0) {
        const double mean_gap = 86400.0 / cfg.shutdowns.rate_per_vessel_day;
        double t = t0 + rnd::exponential(rng, mean_gap);
        while (t < t_end) {
            const double dur = rnd::log_uniform(rng, cfg.shutdowns.min_duration_s,
                                                cfg.shutdowns.max_duration_s);
            Shutdown s;
            s.mmsi = mmsi;
            s.start = std::floor(t);
            s.end = std::floor(t + dur);
            s.last_rx_before = std::numeric_limits<double>::quiet_NaN();
            s.dist_port_m = -1.0;
            out.shutdowns.push_back(s);
            t = t + dur + rnd::exponential(rng, mean_gap);
        }
    }

    auto advance = [&](double dt) {
        if (dt <= 0.0 || regime == Regime::Anchored) return;
        const double scale = std::sqrt(dt / 60.0);
        if (regime == Regime::Cruising) {
            heading += rnd::normal(rng) * 0.5 * scale;
            speed = std::clamp(speed + rnd::normal(rng) * 0.05 * scale, 8.0, 22.0);
        } else {
            if (rnd::bernoulli(rng, std::min(1.0, dt / 3600.0))) turn_rate = -turn_rate;
            heading += turn_rate * dt / 60.0 + rnd::normal(rng) * 0.5 * scale;
            speed = std::clamp(speed + rnd::normal(rng) * 0.1 * scale, 2.0, 5.0);
        }
        heading = std::fmod(heading + 360.0, 360.0);
        geo::GeoPoint next = offset(pos, heading, speed * kKnot * dt);
        if (next.lat > cfg.region.lat_max || next.lat < cfg.region.lat_min) {
            heading = std::fmod(540.0 - heading, 360.0);
            next.lat = std::clamp(next.lat, cfg.region.lat_min, cfg.region.lat_max);
        }
        const bool global_lon = cfg.region.lon_max - cfg.region.lon_min >= 360.0;
        if (!global_lon && (next.lon > cfg.region.lon_max || next.lon < cfg.region.lon_min)) {
            heading = std::fmod(360.0 - heading, 360.0);
            next.lon = std::clamp(next.lon, cfg.region.lon_min, cfg.region.lon_max);
        }
        pos = next;
    };

    auto in_pass = [&](double t) {
        const double phase = (pos.lon + 180.0) / 360.0 * cfg.coverage.pass_period_s;
        return std::fmod(t + phase, cfg.coverage.pass_period_s) < cfg.coverage.pass_duration_s;
    };
    auto received_now = [&](double t) {
        const double drop = rnd::uniform01(rng);
        if (terrestrial) return drop >= cfg.coverage.terrestrial_drop;
        return in_pass(t) && drop >= cfg.coverage.satellite_drop;
    };

    const bool anchored = regime == Regime::Anchored;
    std::size_t received = 0;
    double last_rx = std::numeric_limits<double>::quiet_NaN();
    std::size_t next_shutdown = 0;
    std::uint32_t seq = 0;
    std::uint32_t static_seq = 0;
    double next_static = t0 + std::floor(rnd::uniform(rng, 0.0, kStaticInterval));
    char channel = 'A';

    double t = t0 + std::floor(rnd::uniform(rng, 0.0, cadence_s(speed, anchored)));
    double last_t = t0;
    while (t < t_end) {
        advance(t - last_t);
        last_t = t;
        while (next_shutdown < out.shutdowns.size() && out.shutdowns[next_shutdown].end <= t) {
            auto& s = out.shutdowns[next_shutdown];
            if (s.dist_port_m < 0.0) {
                s.received_before = received;
                s.dist_port_m = port_dist(pos);
                s.last_rx_before = last_rx;
            }
            ++next_shutdown;
        }
        bool silent = false;
        if (next_shutdown < out.shutdowns.size() && out.shutdowns[next_shutdown].start <= t) {
            auto& s = out.shutdowns[next_shutdown];
            if (s.dist_port_m < 0.0) {
                s.received_before = received;
                s.dist_port_m = port_dist(pos);
                s.last_rx_before = last_rx;
            }
            silent = true;
        }
        if (!silent) {
            const bool rx = received_now(t);
            if (cfg.record_emissions) out.emissions.push_back({mmsi, t, rx});
            if (rx) {
                ais::DynamicReport r;
                r.mmsi = mmsi;
                r.msg_type = class_b ? 18 : (anchored ? 3 : 1);
                r.timestamp_s = t;
                r.lat = pos.lat;
                r.lon = pos.lon;
                r.sog = speed;
                out.lines.push_back({t, mmsi, seq++, stamp(t, ais::encode_position_report(r, channel))});
                channel = channel == 'A' ? 'B' : 'A';
                ++received;
                last_rx = t;
            }
            if (cfg.emit_static && !class_b && t >= next_static) {
                if (received_now(t)) {
                    const auto parts = ais::encode_static_voyage(
                        mmsi, "SIM" + std::to_string(index), static_cast<int>(static_seq % 10),
                        channel);
                    for (const auto& p : parts) out.lines.push_back({t, mmsi, seq++, stamp(t, p)});
                    ++static_seq;
                }
                next_static += kStaticInterval;
            }
        }
        const double base = cadence_s(speed, anchored);
        const double jitter = rnd::uniform(rng, 1.0 - cfg.cadence_jitter, 1.0 + cfg.cadence_jitter);
        t += std::max(2.0, std::round(base * jitter));
    }
    for (auto& s : out.shutdowns) {
        if (s.dist_port_m < 0.0) {
            s.received_before = received;
            s.dist_port_m = port_dist(pos);
            s.last_rx_before = last_rx;
        }
    }
    return out;
}

}  // namespace

double cadence_s(double sog_kn, bool anchored) {
    if (anchored) return 180.0;
    if (sog_kn >= 23.0) return 2.0;
    return 10.0;
}

void ScenarioConfig::validate() const {
    if (!(duration_s >= 0.0)) invalid("duration must be >= 0");
    const double sum = mix.cruising + mix.fishing + mix.anchored;
    if (mix.cruising < 0 || mix.fishing < 0 || mix.anchored < 0 || std::abs(sum - 1.0) > 1e-9)
        invalid("movement mix fractions must be >= 0 and sum to 1");
    auto prob = [](double p, const char* what) {
        if (!(p >= 0.0 && p <= 1.0)) invalid(std::string(what) + " must be in [0, 1]");
    };
    prob(coverage.terrestrial_fraction, "terrestrial_fraction");
    prob(coverage.terrestrial_drop, "terrestrial_drop");
    prob(coverage.satellite_drop, "satellite_drop");
    prob(class_b_fraction, "class_b_fraction");
    prob(near_port_fraction, "near_port_fraction");
    if (!(coverage.pass_period_s > 0.0) || !(coverage.pass_duration_s >= 0.0) ||
        coverage.pass_duration_s > coverage.pass_period_s)
        invalid("pass duration must lie within (0, pass period]");
    if (!(shutdowns.rate_per_vessel_day >= 0.0)) invalid("shutdown rate must be >= 0");
    if (!(shutdowns.min_duration_s > 0.0 && shutdowns.max_duration_s >= shutdowns.min_duration_s))
        invalid("shutdown durations must satisfy 0 < min <= max");
    if (!(region.lat_min < region.lat_max && region.lat_min >= -90.0 && region.lat_max <= 90.0 &&
          region.lon_min < region.lon_max))
        invalid("invalid region");
    if (!(cadence_jitter >= 0.0 && cadence_jitter < 0.5)) invalid("cadence jitter must be in [0, 0.5)");
    if (vessels > 700'000'000) invalid("too many vessels for the MMSI range");
}

std::vector<geo::Port> synthetic_ports(std::size_t n, std::uint64_t seed, const Region& region) {
    rnd::Engine rng = rnd::derive(seed, 0x9047);
    std::vector<geo::Port> ports;
    ports.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        geo::Port p;
        p.label = "port" + std::to_string(i);
        p.pos.lat = rnd::uniform(rng, region.lat_min, region.lat_max);
        p.pos.lon = wrap_lon(rnd::uniform(rng, region.lon_min, region.lon_max));
        ports.push_back(std::move(p));
    }
    return ports;
}

Scenario generate(const ScenarioConfig& cfg, std::span<const geo::Port> ports) {
    cfg.validate();
    std::optional<geo::PortIndex> index;
    if (!ports.empty()) index.emplace(ports);
    std::vector<VesselOutput> per_vessel(cfg.vessels);
    const auto n = static_cast<std::ptrdiff_t>(cfg.vessels);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        per_vessel[static_cast<std::size_t>(i)] =
            simulate_vessel(cfg, static_cast<std::size_t>(i), ports, index ? &*index : nullptr);

    Scenario sc;
    std::vector<Line> lines;
    for (std::size_t i = 0; i < per_vessel.size(); ++i) {
        auto& v = per_vessel[i];
        sc.truth.mmsis.push_back(static_cast<std::uint32_t>(201000000 + i));
        for (auto& l : v.lines) lines.push_back(std::move(l));
        sc.truth.shutdowns.insert(sc.truth.shutdowns.end(), v.shutdowns.begin(), v.shutdowns.end());
        sc.truth.emissions.insert(sc.truth.emissions.end(), v.emissions.begin(), v.emissions.end());
        v = VesselOutput{};
    }
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
        return std::tie(a.rx, a.mmsi, a.seq) < std::tie(b.rx, b.mmsi, b.seq);
    });
    sc.lines.reserve(lines.size());
    for (auto& l : lines) sc.lines.push_back(std::move(l.text));
    std::sort(sc.truth.emissions.begin(), sc.truth.emissions.end(),
              [](const Emission& a, const Emission& b) {
                  return std::tie(a.t, a.mmsi) < std::tie(b.t, b.mmsi);
              });
    return sc;
}

void write_truth(std::ostream& out, const GroundTruth& truth) {
    out << nlohmann::json({{"kind", "vessels"}, {"mmsis", truth.mmsis}}).dump() << '\n';
    for (const auto& s : truth.shutdowns) {
        nlohmann::ordered_json j = {{"kind", "shutdown"},
                                    {"mmsi", s.mmsi},
                                    {"start", s.start},
                                    {"end", s.end},
                                    {"received_before", s.received_before},
                                    {"dist_port_m", s.dist_port_m}};
        j["last_rx_before"] = std::isnan(s.last_rx_before) ? nlohmann::ordered_json(nullptr)
                                                           : nlohmann::ordered_json(s.last_rx_before);
        out << j.dump() << '\n';
    }
    for (const auto& e : truth.emissions) {
        const nlohmann::ordered_json j = {
            {"kind", "emission"}, {"mmsi", e.mmsi}, {"t", e.t}, {"received", e.received}};
        out << j.dump() << '\n';
    }
}

GroundTruth read_truth(std::istream& in) {
    GroundTruth truth;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "vessels") {
                truth.mmsis = j.at("mmsis").get<std::vector<std::uint32_t>>();
            } else if (kind == "shutdown") {
                Shutdown s;
                s.mmsi = j.at("mmsi").get<std::uint32_t>();
                s.start = j.at("start").get<double>();
                s.end = j.at("end").get<double>();
                s.received_before = j.at("received_before").get<std::size_t>();
                s.dist_port_m = j.at("dist_port_m").get<double>();
                s.last_rx_before = j.at("last_rx_before").is_null()
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : j.at("last_rx_before").get<double>();
                truth.shutdowns.push_back(s);
            } else if (kind == "emission") {
                truth.emissions.push_back({j.at("mmsi").get<std::uint32_t>(),
                                           j.at("t").get<double>(), j.at("received").get<bool>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::Io, "truth line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return truth;
}

Score score_alerts(std::span<const AlertRef> alerts, const GroundTruth& truth,
                   double match_window_s, std::size_t min_history, double min_port_dist_m) {
    std::map<std::uint32_t, std::vector<const Shutdown*>> by_vessel;
    for (auto m : truth.mmsis) by_vessel[m];
    for (const auto& s : truth.shutdowns) by_vessel[s.mmsi].push_back(&s);

    Score score;
    score.alerts = alerts.size();
    std::vector<bool> hit(truth.shutdowns.size(), false);
    for (const auto& a : alerts) {
        const auto it = by_vessel.find(a.mmsi);
        if (it == by_vessel.end())
            throw Error(Errc::ScenarioMismatch,
                        "alert for mmsi " + std::to_string(a.mmsi) + " not in the scenario");
        bool matched = false;
        for (const Shutdown* s : it->second) {
            if (std::abs(a.last_msg_time - s->start) <= match_window_s) {
                hit[static_cast<std::size_t>(s - truth.shutdowns.data())] = true;
                matched = true;
            }
        }
        if (!matched) ++score.unmatched_alerts;
    }
    for (std::size_t i = 0; i < truth.shutdowns.size(); ++i) {
        const auto& s = truth.shutdowns[i];
        if (s.received_before < min_history || !(s.dist_port_m > min_port_dist_m)) continue;
        ++score.eligible_shutdowns;
        if (hit[i]) ++score.matched_shutdowns;
    }
    if (score.eligible_shutdowns > 0)
        score.recall = static_cast<double>(score.matched_shutdowns) /
                       static_cast<double>(score.eligible_shutdowns);
    score.false_alert_rate = score.alerts == 0 ? 0.0
                                               : static_cast<double>(score.unmatched_alerts) /
                                                     static_cast<double>(score.alerts);
    return score;
}

}  // namespace aisgap::sim
