#pragma once

// Self-supervised window labeling, balanced sampling and period splits.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aisgap/features.hpp"

namespace aisgap::dataset {

struct DatasetConfig {
    std::size_t w = 25;
    double tau_s = 600.0;
    std::size_t min_history = 50;
    double min_port_dist_m = 5000.0;
    /// Total samples; 0 takes the largest balanced set available.
    std::size_t target_size = 0;
    std::uint64_t seed = 0;

    /// Throws InvalidConfig unless w >= 1, tau_s > 0, min_history >= w and
    /// target_size is even.
    void validate() const;
};

struct Sample {
    std::uint32_t mmsi = 0;
    std::uint32_t segment = 0;
    std::vector<features::FeatureMessage> window;
    bool label = false;  // a message follows within tau of the window's last one
    geo::GeoPoint loss_point;
};

/// Tracks observed over one collection period [period_start, period_end].
struct TrajectorySet {
    double period_start = 0.0;
    double period_end = 0.0;
    std::vector<features::Trajectory> tracks;
};

struct Dataset {
    DatasetConfig config;
    std::vector<Sample> samples;
};

/// Label of the window ending at end_idx: true iff the next message follows
/// within tau. The final message of a track is labeled false only when the
/// period extends at least tau past it; otherwise the window is censored.
std::optional<Sample> label_window(const features::Trajectory& traj, std::size_t end_idx,
                                   const DatasetConfig& cfg, double period_end);

/// At least min_history messages up to and including end_idx, and the last
/// message strictly farther than min_port_dist_m from every port.
bool eligible(const features::Trajectory& traj, std::size_t end_idx, const DatasetConfig& cfg);

/// Index of one labeled candidate window.
struct Candidate {
    std::uint32_t track = 0;
    std::uint32_t end_idx = 0;
    bool label = false;
};

/// Every eligible, labelable window in track order (parallel over tracks).
std::vector<Candidate> enumerate_candidates(const TrajectorySet& set, const DatasetConfig& cfg);

/// Balanced dataset sampled uniformly without replacement per class.
/// Throws InsufficientSamples when a class is too small for target_size / 2.
Dataset build_dataset(const TrajectorySet& set, const DatasetConfig& cfg);

struct Split {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// train = all of train_period; val = floor(10 %) of eval_period drawn with
/// `seed`; test = the remainder. Throws MissingPeriod.
Split split_by_date(const std::map<std::string, Dataset>& periods, const std::string& train_period,
                    const std::string& eval_period, std::uint64_t seed);

inline constexpr std::array<double, 7> kPercentiles{1, 5, 25, 50, 75, 95, 100};

struct PercentileRow {
    std::string name;
    std::array<double, 7> values{};
};

/// Nearest-rank percentiles of inter-message distance and time (over every
/// message in every window) and of window length and duration (per sample).
/// Throws EmptyDataset.
std::vector<PercentileRow> dataset_stats(const Dataset& ds);

/// Nearest-rank percentile of an unsorted sample.
double percentile(std::vector<double> values, double p);

/// JSONL: a header line {config, count, hash} then one sample per line. The
/// hash is FNV-1a 64 over the sample lines.
void write_dataset(std::ostream& out, const Dataset& ds);
Dataset read_dataset(std::istream& in);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace aisgap::dataset
