#pragma once

// End-to-end wiring shared by the command-line tool and the harnesses:
// NMEA lines -> reports -> trajectories -> datasets -> trained models.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "aisgap/dataset.hpp"
#include "aisgap/model.hpp"
#include "aisgap/simulator.hpp"

namespace aisgap::pipeline {

/// Decodes timestamped NMEA lines; malformed lines are counted in `stats`.
std::vector<ais::DynamicReport> decode_lines(std::span<const std::string> lines,
                                             ais::DecodeStats* stats = nullptr);

/// Decodes, assembles and enriches a stream observed over [period_start, period_end].
dataset::TrajectorySet trajectories_from_lines(std::span<const std::string> lines,
                                               const geo::PortIndex& ports, double period_start,
                                               double period_end);

/// Simulates one period and turns it into trajectories.
dataset::TrajectorySet simulate_period(const sim::ScenarioConfig& cfg,
                                       std::span<const geo::Port> ports,
                                       sim::GroundTruth* truth = nullptr);

encoder::EncodedSet encode_for(const model::ModelConfig& cfg, const dataset::Dataset& ds);

struct AblationConfig {
    sim::ScenarioConfig month_a;
    sim::ScenarioConfig month_b;
    std::size_t ports = 500;
    std::uint64_t port_seed = 7;
    dataset::DatasetConfig dataset;  // target_size is the training size
    std::size_t eval_size = 20000;   // month B samples before the val/test split
    model::ModelConfig model;
    model::TrainConfig train;
};

struct AblationRow {
    std::string axis;
    std::string value;
    std::size_t train_samples = 0;
    std::size_t test_samples = 0;
    std::size_t parameters = 0;
    std::size_t epochs = 0;
    double seconds = 0.0;
    model::EvalReport report;
};

/// Trains and evaluates one model per grid value along `axis`
/// (dataset_size, window_size, horizon or architecture). Month A trains,
/// month B is split into validation and test. Throws InvalidGrid.
std::vector<AblationRow> ablation_run(
    const std::string& axis, const std::vector<std::string>& grid, const AblationConfig& cfg,
    const std::function<void(const AblationRow&)>& on_row = {});

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

/// Splits "a,b,c" into its items (whitespace trimmed).
std::vector<std::string> split_list(const std::string& s);

}  // namespace aisgap::pipeline
