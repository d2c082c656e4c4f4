#include "aisgap/detector.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "aisgap/error.hpp"

namespace aisgap::detect {

using nlohmann::ordered_json;

std::string to_string(Classification c) {
    switch (c) {
        case Classification::Ordinary: return "ordinary";
        case Classification::ModelError: return "model_error";
        case Classification::Abnormal: return "abnormal";
    }
    return "unknown";
}

Classification classify_event(bool predicted_expected, bool arrived_within_tau) {
    if (predicted_expected && !arrived_within_tau) return Classification::Abnormal;
    if (!predicted_expected && arrived_within_tau) return Classification::ModelError;
    return Classification::Ordinary;
}

void DetectorConfig::validate() const {
    if (!(tau_s > 0.0)) throw Error(Errc::InvalidConfig, "tau must be > 0");
    if (w < 1 || min_history < w)
        throw Error(Errc::InvalidConfig, "need 1 <= w <= min_history");
    if (capacity() < std::max(w, min_history))
        throw Error(Errc::InvalidConfig, "history capacity must be >= max(w, min_history)");
    if (!(lateness_s >= 0.0) || !(eviction_s > 0.0))
        throw Error(Errc::InvalidConfig, "lateness must be >= 0 and eviction > 0");
    if (batch_reports < 1) throw Error(Errc::InvalidConfig, "batch_reports must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw Error(Errc::InvalidConfig, "threshold must be in [0, 1]");
}

Detector::Detector(const model::Classifier& model, const geo::PortIndex& ports, DetectorConfig cfg,
                   Sink sink)
    : model_(model), ports_(ports), cfg_(cfg), sink_(std::move(sink)) {
    cfg_.validate();
    const auto& mc = model.config();
    if (mc.raw_inputs || mc.history_dims != encoder::kHistoryDims ||
        mc.position_dims != encoder::kPositionDims)
        throw Error(Errc::InvalidConfig, "detector needs a model trained on normalized inputs");
    if (mc.w != cfg_.w)
        throw Error(Errc::InvalidConfig, "detector window " + std::to_string(cfg_.w) +
                                             " differs from the model's " + std::to_string(mc.w));
    queued_.w = cfg_.w;
}

const VesselState* Detector::state(std::uint32_t mmsi) const {
    const auto it = vessels_.find(mmsi);
    return it == vessels_.end() ? nullptr : &it->second;
}

void Detector::on_report(const ais::DynamicReport& r) {
    ++counters_.messages;
    auto [it, fresh] = vessels_.try_emplace(r.mmsi);
    VesselState& v = it->second;
    v.mmsi = r.mmsi;
    if (v.last_report) {
        if (r.timestamp_s < v.last_msg_time) {
            ++counters_.late;
            return;
        }
        if (r.timestamp_s == v.last_report->timestamp_s && r.lat == v.last_report->lat &&
            r.lon == v.last_report->lon) {
            ++counters_.duplicates;
            return;
        }
    }
    const features::FeatureMessage m =
        features::enrich(v.last_report, r, ports_.nearest_distance_m({r.lat, r.lon}));
    if (v.pending) resolve(v, r.timestamp_s - v.last_msg_time <= cfg_.tau_s, r.timestamp_s);
    if (v.awaiting_reappearance) {
        Event e;
        e.reappearance = true;
        e.mmsi = v.mmsi;
        e.resolved_at = r.timestamp_s;
        events_.push_back(std::move(e));
        v.awaiting_reappearance = false;
    }
    v.history.push_back(m);
    while (v.history.size() > cfg_.capacity()) v.history.pop_front();
    v.last_report = r;
    v.last_msg_time = r.timestamp_s;
    ++v.lifetime;
    if (v.lifetime >= cfg_.min_history && m.dist_port_m > cfg_.min_port_dist_m &&
        v.history.size() >= cfg_.w)
        request_prediction(v);

    if (r.timestamp_s > max_seen_) {
        max_seen_ = r.timestamp_s;
        on_clock(max_seen_ - cfg_.lateness_s);
    }
}

void Detector::request_prediction(VesselState& v) {
    const std::uint64_t id = next_request_++;
    const std::size_t w = cfg_.w;
    std::vector<features::FeatureMessage> window(v.history.end() - static_cast<std::ptrdiff_t>(w),
                                                 v.history.end());
    const std::size_t hs = w * encoder::kHistoryDims;
    const std::size_t off = queued_.history.size();
    queued_.history.resize(off + hs);
    encoder::encode_history(window, {}, std::span<double>(queued_.history.data() + off, hs));
    const auto p = encoder::encode_position(window.back().lat, window.back().lon);
    queued_.position.insert(queued_.position.end(), p.begin(), p.end());
    queued_.labels.push_back(0);
    queued_mmsi_.push_back(v.mmsi);
    v.pending = id;
    v.pending_probability = std::numeric_limits<double>::quiet_NaN();
    deadlines_.push({v.last_msg_time + cfg_.tau_s, v.mmsi, id});
    ++counters_.predictions;
}

void Detector::resolve(VesselState& v, bool arrived, double at) {
    Event e;
    e.mmsi = v.mmsi;
    e.request = *v.pending;
    e.probability = v.pending_probability;
    e.arrived = arrived;
    e.last_msg_time = v.last_msg_time;
    e.resolved_at = at;
    e.loss_point = {v.last_report->lat, v.last_report->lon};
    if (!arrived) {
        e.history.assign(v.history.begin(), v.history.end());
        v.awaiting_reappearance = true;
    }
    events_.push_back(std::move(e));
    v.pending.reset();
}

void Detector::on_clock(double now) {
    if (now <= watermark_) return;
    watermark_ = now;
    expire(false);
    if (watermark_ - last_eviction_ >= 3600.0) {
        evict();
        last_eviction_ = watermark_;
    }
}

void Detector::expire(bool inclusive) {
    while (!deadlines_.empty()) {
        const Deadline d = deadlines_.top();
        const bool due = inclusive ? d.at <= max_seen_ : d.at < watermark_;
        if (!due) break;
        deadlines_.pop();
        const auto it = vessels_.find(d.mmsi);
        if (it == vessels_.end() || it->second.pending != d.request) continue;
        resolve(it->second, false, inclusive ? max_seen_ : watermark_);
    }
}

void Detector::evict() {
    for (auto it = vessels_.begin(); it != vessels_.end();) {
        if (!it->second.pending && it->second.last_msg_time < watermark_ - cfg_.eviction_s) {
            it = vessels_.erase(it);
            ++counters_.evicted;
        } else {
            ++it;
        }
    }
}

void Detector::flush() {
    std::vector<double> probs;
    if (!queued_mmsi_.empty()) probs = model::predict_all(model_, queued_);
    for (std::size_t k = 0; k < queued_mmsi_.size(); ++k) {
        const auto it = vessels_.find(queued_mmsi_[k]);
        if (it != vessels_.end() && it->second.pending == queue_base_ + k)
            it->second.pending_probability = probs[k];
    }
    for (auto& e : events_) {
        if (e.reappearance) {
            const auto it = open_alerts_.find(e.mmsi);
            if (it != open_alerts_.end()) {
                ++counters_.reappeared;
                if (sink_) sink_(Reappearance{e.mmsi, it->second, e.resolved_at});
                open_alerts_.erase(it);
            }
            continue;
        }
        const double p =
            std::isnan(e.probability) ? probs[e.request - queue_base_] : e.probability;
        Resolution res;
        res.mmsi = e.mmsi;
        res.expected = p >= cfg_.threshold;
        res.arrived = e.arrived;
        res.cls = classify_event(res.expected, res.arrived);
        res.probability = p;
        res.last_msg_time = e.last_msg_time;
        res.resolved_at = e.resolved_at;
        switch (res.cls) {
            case Classification::Abnormal:
                ++counters_.alerts;
                open_alerts_[e.mmsi] = e.last_msg_time;
                res.alert = Alert{e.mmsi, e.loss_point, e.last_msg_time, cfg_.tau_s, p,
                                  std::move(e.history)};
                break;
            case Classification::ModelError: ++counters_.model_errors; break;
            case Classification::Ordinary: ++counters_.ordinary; break;
        }
        if (sink_) sink_(res);
    }
    events_.clear();
    queued_ = encoder::EncodedSet{};
    queued_.w = cfg_.w;
    queued_mmsi_.clear();
    queue_base_ = next_request_;
}

void Detector::finish() {
    if (max_seen_ > watermark_) watermark_ = max_seen_;
    expire(true);
    flush();
    counters_.unresolved = 0;
    for (const auto& [mmsi, v] : vessels_)
        if (v.pending) ++counters_.unresolved;
}

StreamResult run_stream(std::span<const std::string> lines, const model::Classifier& model,
                        const geo::PortIndex& ports, const DetectorConfig& cfg) {
    StreamResult result;
    const auto started = std::chrono::steady_clock::now();
    Detector det(model, ports, cfg, [&](const Output& o) {
        if (const auto* r = std::get_if<Resolution>(&o))
            result.resolutions.push_back(*r);
        else
            result.reappearances.push_back(std::get<Reappearance>(o));
    });
    ais::StreamDecoder decoder;
    std::size_t since_flush = 0;
    for (const auto& line : lines) {
        const auto report = decoder.feed(line);
        if (!report) continue;
        det.on_report(*report);
        if (++since_flush >= cfg.batch_reports) {
            det.flush();
            since_flush = 0;
        }
    }
    det.finish();
    result.decode = decoder.stats();
    for (const auto& [kind, n] : result.decode.errors) det.count_malformed(n);
    result.counters = det.counters();
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

namespace {

ordered_json history_json(const std::vector<features::FeatureMessage>& h) {
    ordered_json arr = ordered_json::array();
    for (const auto& m : h)
        arr.push_back({{"t", m.t},
                       {"lat", m.lat},
                       {"lon", m.lon},
                       {"s", m.s},
                       {"dt", m.delta_t},
                       {"dv", m.delta_dv},
                       {"dh", m.delta_dh},
                       {"dp", m.dist_port_m},
                       {"sod", m.second_of_day}});
    return arr;
}

}  // namespace

void write_alert_json(std::ostream& out, const Alert& a) {
    const ordered_json j = {{"kind", "alert"},
                            {"mmsi", a.mmsi},
                            {"loss_lat", a.loss_point.lat},
                            {"loss_lon", a.loss_point.lon},
                            {"last_msg_time", a.last_msg_time},
                            {"tau_s", a.tau_s},
                            {"probability", a.probability},
                            {"history", history_json(a.history)}};
    out << j.dump() << '\n';
}

void write_output_json(std::ostream& out, const Output& o, bool all_resolutions) {
    if (const auto* r = std::get_if<Resolution>(&o)) {
        if (r->alert) {
            write_alert_json(out, *r->alert);
        } else if (all_resolutions) {
            const ordered_json j = {{"kind", "resolution"},
                                    {"mmsi", r->mmsi},
                                    {"class", to_string(r->cls)},
                                    {"expected", r->expected},
                                    {"arrived", r->arrived},
                                    {"probability", r->probability},
                                    {"last_msg_time", r->last_msg_time},
                                    {"resolved_at", r->resolved_at}};
            out << j.dump() << '\n';
        }
        return;
    }
    const auto& re = std::get<Reappearance>(o);
    const ordered_json j = {{"kind", "reappeared"},
                            {"mmsi", re.mmsi},
                            {"alert_last_msg_time", re.alert_last_msg_time},
                            {"reappeared_at", re.reappeared_at}};
    out << j.dump() << '\n';
}

void write_summary_json(std::ostream& out, const Counters& c) {
    const ordered_json j = {{"kind", "summary"},
                            {"messages", c.messages},
                            {"predictions", c.predictions},
                            {"alerts", c.alerts},
                            {"model_errors", c.model_errors},
                            {"ordinary", c.ordinary},
                            {"late", c.late},
                            {"duplicates", c.duplicates},
                            {"malformed", c.malformed},
                            {"evicted", c.evicted},
                            {"unresolved", c.unresolved},
                            {"reappeared", c.reappeared}};
    out << j.dump() << '\n';
}

}  // namespace aisgap::detect
