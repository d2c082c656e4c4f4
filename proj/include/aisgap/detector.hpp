#pragma once

// Streaming detection of missing receptions. Each eligible message gets a
// prediction "another message within tau"; the prediction is later resolved
// by the next message or by the event-time watermark passing the deadline.

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "aisgap/ais.hpp"
#include "aisgap/features.hpp"
#include "aisgap/model.hpp"

namespace aisgap::detect {

enum class Classification { Ordinary, ModelError, Abnormal };

std::string to_string(Classification c);

/// (expected, arrived): (T,F) -> Abnormal, (F,T) -> ModelError, otherwise Ordinary.
Classification classify_event(bool predicted_expected, bool arrived_within_tau);

struct DetectorConfig {
    double tau_s = 600.0;
    std::size_t w = 25;
    std::size_t min_history = 50;
    double min_port_dist_m = 5000.0;
    double threshold = 0.5;
    /// Watermark = max seen time - lateness.
    double lateness_s = 120.0;
    double eviction_s = 7 * 86400.0;
    /// Ring buffer length; 0 means max(w, min_history).
    std::size_t history_capacity = 0;
    /// Reports processed between batched prediction flushes.
    std::size_t batch_reports = 4096;

    std::size_t capacity() const { return history_capacity ? history_capacity : std::max(w, min_history); }
    void validate() const;
};

struct Alert {
    std::uint32_t mmsi = 0;
    geo::GeoPoint loss_point;
    double last_msg_time = 0.0;
    double tau_s = 0.0;
    double probability = 0.0;
    std::vector<features::FeatureMessage> history;
};

/// Outcome of one stored prediction.
struct Resolution {
    std::uint32_t mmsi = 0;
    Classification cls = Classification::Ordinary;
    bool expected = false;
    bool arrived = false;
    double probability = 0.0;
    double last_msg_time = 0.0;
    double resolved_at = 0.0;
    std::optional<Alert> alert;
};

/// A vessel with an open alert was heard again.
struct Reappearance {
    std::uint32_t mmsi = 0;
    double alert_last_msg_time = 0.0;
    double reappeared_at = 0.0;
};

using Output = std::variant<Resolution, Reappearance>;
using Sink = std::function<void(const Output&)>;

struct Counters {
    std::uint64_t messages = 0;
    std::uint64_t predictions = 0;
    std::uint64_t alerts = 0;
    std::uint64_t model_errors = 0;
    std::uint64_t ordinary = 0;
    std::uint64_t late = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t malformed = 0;
    std::uint64_t evicted = 0;
    std::uint64_t unresolved = 0;
    std::uint64_t reappeared = 0;
};

/// Per-vessel decision state.
struct VesselState {
    std::uint32_t mmsi = 0;
    std::deque<features::FeatureMessage> history;
    std::optional<ais::DynamicReport> last_report;
    double last_msg_time = 0.0;
    std::uint64_t lifetime = 0;
    /// Request id of the stored prediction, if any.
    std::optional<std::uint64_t> pending;
    double pending_probability = 0.0;  // NaN until the request is scored
    /// Set after an unanswered expectation; the next message checks for an open alert.
    bool awaiting_reappearance = false;
};

/// Stream detector. Predictions requested while processing reports are
/// scored in batches at flush(); outputs are emitted in stream order.
/// Not safe for concurrent use; the model is only read.
class Detector {
public:
    Detector(const model::Classifier& model, const geo::PortIndex& ports, DetectorConfig cfg,
             Sink sink);

    /// Processes one report and advances the watermark. Outputs wait for flush().
    void on_report(const ais::DynamicReport& report);
    /// Advances the watermark to at least `now` (already lateness-adjusted).
    void on_clock(double now);
    /// Scores queued predictions and emits finalized outputs.
    void flush();
    /// End of input: resolves every prediction whose deadline lies within the
    /// seen time range, flushes, and counts the rest as unresolved.
    void finish();

    /// Immediate-mode steps: process then flush.
    void on_message(const ais::DynamicReport& report) {
        on_report(report);
        flush();
    }
    void on_clock_flush(double now) {
        on_clock(now);
        flush();
    }

    void count_malformed(std::uint64_t n = 1) { counters_.malformed += n; }
    const Counters& counters() const { return counters_; }
    double watermark() const { return watermark_; }
    std::size_t tracked_vessels() const { return vessels_.size(); }
    const VesselState* state(std::uint32_t mmsi) const;

private:
    struct Event {
        bool reappearance = false;
        std::uint32_t mmsi = 0;
        std::uint64_t request = 0;
        double probability = 0.0;  // NaN when the request is still queued
        bool arrived = false;
        double last_msg_time = 0.0;
        double resolved_at = 0.0;
        geo::GeoPoint loss_point;
        std::vector<features::FeatureMessage> history;
    };
    struct Deadline {
        double at;
        std::uint32_t mmsi;
        std::uint64_t request;
        bool operator>(const Deadline& o) const {
            return at != o.at ? at > o.at : (mmsi != o.mmsi ? mmsi > o.mmsi : request > o.request);
        }
    };

    void resolve(VesselState& v, bool arrived, double at);
    void expire(bool inclusive);
    void evict();
    void request_prediction(VesselState& v);

    const model::Classifier& model_;
    const geo::PortIndex& ports_;
    DetectorConfig cfg_;
    Sink sink_;
    Counters counters_;
    std::unordered_map<std::uint32_t, VesselState> vessels_;
    std::priority_queue<Deadline, std::vector<Deadline>, std::greater<>> deadlines_;
    double max_seen_ = -1e300;
    double watermark_ = -1e300;
    double last_eviction_ = -1e300;

    // Queued prediction requests since the last flush.
    std::uint64_t next_request_ = 0;
    std::uint64_t queue_base_ = 0;
    std::vector<std::uint32_t> queued_mmsi_;
    encoder::EncodedSet queued_;
    std::vector<Event> events_;
    // Open alerts by vessel, maintained while finalizing events.
    std::unordered_map<std::uint32_t, double> open_alerts_;
};

struct StreamResult {
    Counters counters;
    std::vector<Resolution> resolutions;
    std::vector<Reappearance> reappearances;
    ais::DecodeStats decode;
    double seconds = 0.0;
};

/// Decodes and processes timestamped NMEA lines, batching predictions.
StreamResult run_stream(std::span<const std::string> lines, const model::Classifier& model,
                        const geo::PortIndex& ports, const DetectorConfig& cfg);

void write_alert_json(std::ostream& out, const Alert& a);
void write_output_json(std::ostream& out, const Output& o, bool all_resolutions);
void write_summary_json(std::ostream& out, const Counters& c);

}  // namespace aisgap::detect
