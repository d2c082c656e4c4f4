#pragma once

// Synthetic AIS traffic: vessels moving under simple regimes, emitting at
// protocol cadence, received through terrestrial or satellite coverage, with
// injected transponder shutdowns as ground truth.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aisgap/geo.hpp"

namespace aisgap::sim {

struct Region {
    double lat_min = -60.0;
    double lat_max = 60.0;
    double lon_min = -180.0;
    double lon_max = 180.0;
};

struct MovementMix {
    double cruising = 0.6;
    double fishing = 0.3;
    double anchored = 0.1;
};

struct CoverageConfig {
    /// Share of vessels inside continuous terrestrial coverage; the rest are
    /// only heard during satellite passes.
    double terrestrial_fraction = 0.1;
    double terrestrial_drop = 0.05;
    double pass_period_s = 6000.0;
    double pass_duration_s = 600.0;
    double satellite_drop = 0.5;
};

struct ShutdownConfig {
    double rate_per_vessel_day = 0.1;
    double min_duration_s = 1800.0;
    double max_duration_s = 172800.0;
};

struct ScenarioConfig {
    std::size_t vessels = 50;
    double start_time = 1704067200.0;  // 2024-01-01T00:00:00Z
    double duration_s = 3 * 86400.0;
    std::uint64_t seed = 0;
    Region region;
    MovementMix mix;
    CoverageConfig coverage;
    ShutdownConfig shutdowns;
    double class_b_fraction = 0.2;
    /// Spawn distance from the nearest port for moving vessels.
    double spawn_min_port_dist_m = 10000.0;
    /// Extra share of moving vessels spawned 1-4 km from a port.
    double near_port_fraction = 0.0;
    /// Anchored vessels wait 1-4 km from a port.
    bool anchor_near_ports = true;
    /// Relative jitter of the emission interval.
    double cadence_jitter = 0.02;
    /// Class A vessels also send multi-fragment static reports every 6 min.
    bool emit_static = true;
    /// Keep every emission (received or not) in the ground truth.
    bool record_emissions = false;

    /// Throws InvalidConfig.
    void validate() const;
};

struct Shutdown {
    std::uint32_t mmsi = 0;
    double start = 0.0;
    double end = 0.0;
    /// Position reports received from this vessel before start.
    std::size_t received_before = 0;
    /// Port distance of the vessel's position at start.
    double dist_port_m = 0.0;
    /// Reception time of the last report before start (NaN when none).
    double last_rx_before = 0.0;
};

struct Emission {
    std::uint32_t mmsi = 0;
    double t = 0.0;
    bool received = false;
};

struct GroundTruth {
    std::vector<std::uint32_t> mmsis;
    std::vector<Shutdown> shutdowns;
    std::vector<Emission> emissions;  // only with record_emissions
};

struct Scenario {
    /// "epoch<TAB>!AIVDM..." lines ordered by reception time.
    std::vector<std::string> lines;
    GroundTruth truth;
};

/// Uniformly scattered synthetic ports.
std::vector<geo::Port> synthetic_ports(std::size_t n, std::uint64_t seed, const Region& region);

/// Deterministic given (cfg, ports); vessels are simulated in parallel from
/// independent per-vessel random streams.
Scenario generate(const ScenarioConfig& cfg, std::span<const geo::Port> ports);

/// Emission interval for a vessel at `sog_kn`; `anchored` selects the 3-minute cadence.
double cadence_s(double sog_kn, bool anchored);

void write_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_truth(std::istream& in);

struct AlertRef {
    std::uint32_t mmsi = 0;
    double last_msg_time = 0.0;
};

struct Score {
    std::size_t eligible_shutdowns = 0;
    std::size_t matched_shutdowns = 0;
    std::size_t alerts = 0;
    std::size_t unmatched_alerts = 0;
    std::optional<double> recall;  // empty when no shutdown is eligible
    double false_alert_rate = 0.0;
};

/// An alert matches a shutdown of the same vessel when its last message time
/// is within match_window_s of the shutdown start. Throws ScenarioMismatch
/// for alerts naming a vessel absent from the scenario.
Score score_alerts(std::span<const AlertRef> alerts, const GroundTruth& truth,
                   double match_window_s, std::size_t min_history = 50,
                   double min_port_dist_m = 5000.0);

}  // namespace aisgap::sim
