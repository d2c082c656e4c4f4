#include "aisgap/features.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "aisgap/error.hpp"

namespace aisgap::features {

namespace {

constexpr double kMetersPerNauticalMile = 1852.0;

double implied_speed_kn(const ais::DynamicReport& a, const ais::DynamicReport& b) {
    const double d = geo::haversine_m({a.lat, a.lon}, {b.lat, b.lon});
    const double dt = b.timestamp_s - a.timestamp_s;
    if (d == 0.0) return 0.0;
    if (dt <= 0.0) return std::numeric_limits<double>::infinity();
    return d / kMetersPerNauticalMile / (dt / 3600.0);
}

}  // namespace

int second_of_day(double t) {
    const auto whole = static_cast<long long>(std::floor(t));
    return static_cast<int>(((whole % 86400) + 86400) % 86400);
}

FeatureMessage enrich(const std::optional<ais::DynamicReport>& prev, const ais::DynamicReport& cur,
                      double dist_port_m) {
    FeatureMessage m;
    m.t = cur.timestamp_s;
    m.lat = cur.lat;
    m.lon = cur.lon;
    m.s = cur.sog;
    m.dist_port_m = dist_port_m;
    m.second_of_day = second_of_day(cur.timestamp_s);
    if (prev) {
        if (cur.timestamp_s < prev->timestamp_s)
            throw Error(Errc::NonMonotonicTime,
                        "mmsi " + std::to_string(cur.mmsi) + ": t=" +
                            std::to_string(cur.timestamp_s) + " precedes " +
                            std::to_string(prev->timestamp_s));
        m.delta_t = cur.timestamp_s - prev->timestamp_s;
        const auto d = geo::delta_components({prev->lat, prev->lon}, {cur.lat, cur.lon});
        m.delta_dv = d.dv;
        m.delta_dh = d.dh;
    }
    return m;
}

FeatureMessage enrich(const std::optional<ais::DynamicReport>& prev, const ais::DynamicReport& cur,
                      const geo::PortIndex& ports) {
    return enrich(prev, cur, ports.nearest_distance_m({cur.lat, cur.lon}));
}

std::vector<FeatureMessage> enrich_track(const std::vector<ais::DynamicReport>& reports,
                                         const geo::PortIndex& ports) {
    std::vector<FeatureMessage> out;
    out.reserve(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const double dp = ports.nearest_distance_m({reports[i].lat, reports[i].lon});
        out.push_back(enrich(i == 0 ? std::nullopt : std::optional(reports[i - 1]), reports[i], dp));
    }
    return out;
}

void TrackAssembler::push(const ais::DynamicReport& r) {
    ++stats_.received;
    if (r.timestamp_s < released_) {
        ++stats_.late_dropped;
        return;
    }
    const BufferKey key{r.timestamp_s, r.mmsi, r.lat, r.lon};
    if (!buffer_.emplace(key, r).second) {
        ++stats_.duplicates;
        return;
    }
    if (r.timestamp_s > max_seen_) {
        max_seen_ = r.timestamp_s;
        release_until(max_seen_ - cfg_.reorder_window_s);
    }
}

void TrackAssembler::finish() { release_until(std::numeric_limits<double>::infinity()); }

void TrackAssembler::release_until(double horizon) {
    while (!buffer_.empty() && std::get<0>(buffer_.begin()->first) <= horizon) {
        const auto r = buffer_.begin()->second;
        buffer_.erase(buffer_.begin());
        released_ = std::max(released_, r.timestamp_s);
        route(r);
    }
    if (horizon > released_ && std::isfinite(horizon)) released_ = horizon;
}

void TrackAssembler::route(const ais::DynamicReport& r) {
    auto [count_it, fresh] = segment_count_.try_emplace(r.mmsi, 0u);
    // Candidate segments of this MMSI, most recently active first.
    const TrackId* chosen = nullptr;
    double chosen_t = -1e300;
    for (std::uint32_t seg = 0; seg < count_it->second; ++seg) {
        const auto it = tracks_.find(TrackId{r.mmsi, seg});
        const auto& last = it->second.back();
        if (last.timestamp_s == r.timestamp_s && last.lat == r.lat && last.lon == r.lon) {
            ++stats_.duplicates;
            return;
        }
        if (implied_speed_kn(last, r) <= cfg_.split_speed_kn && last.timestamp_s >= chosen_t) {
            chosen = &it->first;
            chosen_t = last.timestamp_s;
        }
    }
    if (chosen) {
        tracks_[*chosen].push_back(r);
        return;
    }
    if (count_it->second > 0) ++stats_.segments_split;
    tracks_[TrackId{r.mmsi, count_it->second}].push_back(r);
    ++count_it->second;
}

std::map<TrackId, std::vector<ais::DynamicReport>> TrackAssembler::take() {
    auto out = std::move(tracks_);
    tracks_.clear();
    segment_count_.clear();
    return out;
}

std::vector<Trajectory> assemble(const std::vector<ais::DynamicReport>& reports,
                                 const geo::PortIndex& ports, AssemblerConfig cfg,
                                 AssemblerStats* stats) {
    TrackAssembler assembler(cfg);
    for (const auto& r : reports) assembler.push(r);
    assembler.finish();
    if (stats) *stats = assembler.stats();
    auto raw = assembler.take();

    std::vector<const std::pair<const TrackId, std::vector<ais::DynamicReport>>*> order;
    order.reserve(raw.size());
    for (const auto& kv : raw) order.push_back(&kv);
    std::vector<Trajectory> out(order.size());
    const auto n = static_cast<std::ptrdiff_t>(order.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& [id, track] = *order[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = Trajectory{id, enrich_track(track, ports)};
    }
    return out;
}

void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajs) {
    for (const auto& tr : trajs) {
        for (const auto& m : tr.messages) {
            const nlohmann::ordered_json j = {
                {"mmsi", tr.id.mmsi},  {"segment", tr.id.segment}, {"t", m.t},
                {"lat", m.lat},        {"lon", m.lon},             {"s", m.s},
                {"dt", m.delta_t},     {"dv", m.delta_dv},         {"dh", m.delta_dh},
                {"dp", m.dist_port_m}, {"sod", m.second_of_day}};
            out << j.dump() << '\n';
        }
    }
}

std::vector<Trajectory> read_trajectories(std::istream& in) {
    std::map<TrackId, std::vector<FeatureMessage>> tracks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const TrackId id{j.at("mmsi").get<std::uint32_t>(),
                             j.value("segment", std::uint32_t{0})};
            FeatureMessage m;
            m.t = j.at("t").get<double>();
            m.lat = j.at("lat").get<double>();
            m.lon = j.at("lon").get<double>();
            m.s = j.at("s").get<double>();
            m.delta_t = j.at("dt").get<double>();
            m.delta_dv = j.at("dv").get<double>();
            m.delta_dh = j.at("dh").get<double>();
            m.dist_port_m = j.at("dp").get<double>();
            m.second_of_day = j.at("sod").get<int>();
            auto& v = tracks[id];
            if (!v.empty() && m.t < v.back().t)
                throw Error(Errc::NonMonotonicTime, "track messages out of order");
            v.push_back(m);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::Io, "trajectory line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    std::vector<Trajectory> out;
    out.reserve(tracks.size());
    for (auto& [id, msgs] : tracks) out.push_back(Trajectory{id, std::move(msgs)});
    return out;
}

}  // namespace aisgap::features
