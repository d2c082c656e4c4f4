#pragma once

// Application configuration: one JSON document with a section per stage.
// Missing keys keep their defaults; unknown keys are rejected.

#include <optional>
#include <string>

#include "aisgap/dataset.hpp"
#include "aisgap/detector.hpp"
#include "aisgap/model.hpp"
#include "aisgap/simulator.hpp"

namespace aisgap {

struct AppConfig {
    /// Port CSV; empty selects synthetic ports.
    std::string ports_file;
    std::size_t synthetic_ports = 500;
    std::uint64_t port_seed = 7;
    sim::ScenarioConfig scenario;
    dataset::DatasetConfig dataset;
    model::ModelConfig model;
    model::TrainConfig train;
    detect::DetectorConfig detector;
    std::string log_level = "info";

    /// Checks every section; throws InvalidConfig.
    void validate() const;
    /// Applies a common seed to every section.
    void set_seed(std::uint64_t seed);
    /// Applies a horizon / window to the dataset, model and detector sections.
    void set_tau(double tau_s);
    void set_window(std::size_t w);
};

/// Throws InvalidConfig on unknown keys or mistyped values.
AppConfig app_config_from_json(const std::string& text);
std::string app_config_to_json(const AppConfig& cfg);
/// Reads a config file; throws Io when unreadable.
AppConfig load_app_config(const std::string& path);

}  // namespace aisgap
