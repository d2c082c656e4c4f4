#pragma once

// Per-vessel track assembly and per-message feature enrichment.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "aisgap/ais.hpp"
#include "aisgap/geo.hpp"

namespace aisgap::features {

/// m = [t, lat, lon, s, dt, dv, dh, dist_port, second_of_day]
struct FeatureMessage {
    double t = 0.0;
    double lat = 0.0;
    double lon = 0.0;
    double s = 0.0;
    double delta_t = 0.0;
    double delta_dv = 0.0;
    double delta_dh = 0.0;
    double dist_port_m = 0.0;
    int second_of_day = 0;

    bool operator==(const FeatureMessage&) const = default;
};

/// Logical track: one MMSI, split into segments when the MMSI is evidently
/// shared by two transmitters (implied speed above the split threshold).
struct TrackId {
    std::uint32_t mmsi = 0;
    std::uint32_t segment = 0;
    auto operator<=>(const TrackId&) const = default;
};

struct Trajectory {
    TrackId id;
    std::vector<FeatureMessage> messages;
};

/// floor(t) mod 86400, non-negative.
int second_of_day(double t);

/// Features of `cur` against the previous report of the same track. Throws
/// NonMonotonicTime when cur precedes prev.
FeatureMessage enrich(const std::optional<ais::DynamicReport>& prev, const ais::DynamicReport& cur,
                      double dist_port_m);
FeatureMessage enrich(const std::optional<ais::DynamicReport>& prev, const ais::DynamicReport& cur,
                      const geo::PortIndex& ports);

/// Enriches a whole time-ordered track; port distances are computed in one batch.
std::vector<FeatureMessage> enrich_track(const std::vector<ais::DynamicReport>& reports,
                                         const geo::PortIndex& ports);

struct AssemblerConfig {
    double reorder_window_s = 120.0;
    double split_speed_kn = 100.0;
};

struct AssemblerStats {
    std::size_t received = 0;
    std::size_t duplicates = 0;
    std::size_t late_dropped = 0;
    std::size_t segments_split = 0;
};

/// Groups a report stream into time-ordered tracks. Reports are held in a
/// reorder buffer until the stream's maximum time has moved past them by
/// reorder_window_s; anything older than the released horizon is dropped.
class TrackAssembler {
public:
    explicit TrackAssembler(AssemblerConfig cfg = {}) : cfg_(cfg) {}

    void push(const ais::DynamicReport& report);
    /// Releases everything still buffered.
    void finish();

    /// Raw reports per logical track, ordered by track id.
    std::map<TrackId, std::vector<ais::DynamicReport>> take();
    const AssemblerStats& stats() const { return stats_; }

private:
    using BufferKey = std::tuple<double, std::uint32_t, double, double>;
    void release_until(double horizon);
    void route(const ais::DynamicReport& r);

    AssemblerConfig cfg_;
    AssemblerStats stats_;
    std::map<BufferKey, ais::DynamicReport> buffer_;
    double max_seen_ = -1e300;
    double released_ = -1e300;
    std::map<std::uint32_t, std::uint32_t> segment_count_;
    std::map<TrackId, std::vector<ais::DynamicReport>> tracks_;
};

/// Assembles and enriches a finished report collection. Enrichment runs in
/// parallel over tracks; output is ordered by track id.
std::vector<Trajectory> assemble(const std::vector<ais::DynamicReport>& reports,
                                 const geo::PortIndex& ports, AssemblerConfig cfg = {},
                                 AssemblerStats* stats = nullptr);

/// JSONL, one message per line carrying its mmsi and segment.
void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_trajectories(std::istream& in);

}  // namespace aisgap::features
