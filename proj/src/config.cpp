#include "aisgap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aisgap/error.hpp"

namespace aisgap {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::InvalidConfig, what); }

// Reads known keys from one object and rejects the rest.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) invalid(name_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            invalid(name_ + "." + key + " has the wrong type");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void done() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.contains(k)) invalid("unknown key " + name_ + "." + k);
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

void read_scenario(const json& j, sim::ScenarioConfig& c) {
    Section s(j, "scenario");
    s.get("vessels", c.vessels);
    s.get("start_time", c.start_time);
    s.get("duration_s", c.duration_s);
    s.get("seed", c.seed);
    s.get("class_b_fraction", c.class_b_fraction);
    s.get("spawn_min_port_dist_m", c.spawn_min_port_dist_m);
    s.get("near_port_fraction", c.near_port_fraction);
    s.get("anchor_near_ports", c.anchor_near_ports);
    s.get("cadence_jitter", c.cadence_jitter);
    s.get("emit_static", c.emit_static);
    s.get("record_emissions", c.record_emissions);
    if (const json* r = s.child("region")) {
        Section t(*r, "scenario.region");
        t.get("lat_min", c.region.lat_min);
        t.get("lat_max", c.region.lat_max);
        t.get("lon_min", c.region.lon_min);
        t.get("lon_max", c.region.lon_max);
        t.done();
    }
    if (const json* m = s.child("mix")) {
        Section t(*m, "scenario.mix");
        t.get("cruising", c.mix.cruising);
        t.get("fishing", c.mix.fishing);
        t.get("anchored", c.mix.anchored);
        t.done();
    }
    if (const json* v = s.child("coverage")) {
        Section t(*v, "scenario.coverage");
        t.get("terrestrial_fraction", c.coverage.terrestrial_fraction);
        t.get("terrestrial_drop", c.coverage.terrestrial_drop);
        t.get("pass_period_s", c.coverage.pass_period_s);
        t.get("pass_duration_s", c.coverage.pass_duration_s);
        t.get("satellite_drop", c.coverage.satellite_drop);
        t.done();
    }
    if (const json* d = s.child("shutdowns")) {
        Section t(*d, "scenario.shutdowns");
        t.get("rate_per_vessel_day", c.shutdowns.rate_per_vessel_day);
        t.get("min_duration_s", c.shutdowns.min_duration_s);
        t.get("max_duration_s", c.shutdowns.max_duration_s);
        t.done();
    }
    s.done();
}

void read_dataset(const json& j, dataset::DatasetConfig& c) {
    Section s(j, "dataset");
    s.get("w", c.w);
    s.get("tau_s", c.tau_s);
    s.get("min_history", c.min_history);
    s.get("min_port_dist_m", c.min_port_dist_m);
    s.get("target_size", c.target_size);
    s.get("seed", c.seed);
    s.done();
}

void read_train(const json& j, model::TrainConfig& c) {
    Section s(j, "train");
    s.get("batch_size", c.batch_size);
    s.get("max_epochs", c.max_epochs);
    s.get("batches_per_epoch", c.batches_per_epoch);
    s.get("patience", c.patience);
    s.get("lr", c.lr);
    s.get("seed", c.seed);
    s.get("max_seconds", c.max_seconds);
    s.done();
}

void read_detector(const json& j, detect::DetectorConfig& c) {
    Section s(j, "detector");
    s.get("tau_s", c.tau_s);
    s.get("w", c.w);
    s.get("min_history", c.min_history);
    s.get("min_port_dist_m", c.min_port_dist_m);
    s.get("threshold", c.threshold);
    s.get("lateness_s", c.lateness_s);
    s.get("eviction_s", c.eviction_s);
    s.get("history_capacity", c.history_capacity);
    s.get("batch_reports", c.batch_reports);
    s.done();
}

}  // namespace

void AppConfig::validate() const {
    if (ports_file.empty() && synthetic_ports == 0)
        invalid("need a ports file or synthetic_ports > 0");
    static const std::set<std::string> levels{"debug", "info", "warn", "error"};
    if (!levels.contains(log_level)) invalid("log_level must be debug, info, warn or error");
    scenario.validate();
    dataset.validate();
    model.validate();
    train.validate();
    detector.validate();
}

void AppConfig::set_seed(std::uint64_t seed) {
    scenario.seed = seed;
    dataset.seed = seed;
    train.seed = seed;
}

void AppConfig::set_tau(double tau_s) {
    dataset.tau_s = tau_s;
    model.tau_s = tau_s;
    detector.tau_s = tau_s;
}

void AppConfig::set_window(std::size_t w) {
    dataset.w = w;
    model.w = w;
    detector.w = w;
}

AppConfig app_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        invalid(std::string("config is not valid JSON: ") + e.what());
    }
    AppConfig c;
    Section s(j, "config");
    s.get("ports_file", c.ports_file);
    s.get("synthetic_ports", c.synthetic_ports);
    s.get("port_seed", c.port_seed);
    s.get("log_level", c.log_level);
    if (const json* v = s.child("scenario")) read_scenario(*v, c.scenario);
    if (const json* v = s.child("dataset")) read_dataset(*v, c.dataset);
    if (const json* v = s.child("model")) {
        if (!v->is_object()) invalid("model must be an object");
        static const std::set<std::string> keys{
            "arch",     "w",        "history_dims", "position_dims", "d_model",
            "heads",    "blocks",   "ffn_dim",      "repr_dim",      "head_dims",
            "ff_dims",  "dropout",  "tau_s",        "raw_inputs"};
        for (const auto& [k, x] : v->items())
            if (!keys.contains(k)) invalid("unknown key model." + k);
        c.model = model::ModelConfig::from_json(v->dump());
    }
    if (const json* v = s.child("train")) read_train(*v, c.train);
    if (const json* v = s.child("detector")) read_detector(*v, c.detector);
    s.done();
    return c;
}

std::string app_config_to_json(const AppConfig& c) {
    const auto& sc = c.scenario;
    ordered_json j;
    j["ports_file"] = c.ports_file;
    j["synthetic_ports"] = c.synthetic_ports;
    j["port_seed"] = c.port_seed;
    j["log_level"] = c.log_level;
    j["scenario"] = {
        {"vessels", sc.vessels},
        {"start_time", sc.start_time},
        {"duration_s", sc.duration_s},
        {"seed", sc.seed},
        {"region",
         {{"lat_min", sc.region.lat_min},
          {"lat_max", sc.region.lat_max},
          {"lon_min", sc.region.lon_min},
          {"lon_max", sc.region.lon_max}}},
        {"mix",
         {{"cruising", sc.mix.cruising}, {"fishing", sc.mix.fishing}, {"anchored", sc.mix.anchored}}},
        {"coverage",
         {{"terrestrial_fraction", sc.coverage.terrestrial_fraction},
          {"terrestrial_drop", sc.coverage.terrestrial_drop},
          {"pass_period_s", sc.coverage.pass_period_s},
          {"pass_duration_s", sc.coverage.pass_duration_s},
          {"satellite_drop", sc.coverage.satellite_drop}}},
        {"shutdowns",
         {{"rate_per_vessel_day", sc.shutdowns.rate_per_vessel_day},
          {"min_duration_s", sc.shutdowns.min_duration_s},
          {"max_duration_s", sc.shutdowns.max_duration_s}}},
        {"class_b_fraction", sc.class_b_fraction},
        {"spawn_min_port_dist_m", sc.spawn_min_port_dist_m},
        {"near_port_fraction", sc.near_port_fraction},
        {"anchor_near_ports", sc.anchor_near_ports},
        {"cadence_jitter", sc.cadence_jitter},
        {"emit_static", sc.emit_static},
        {"record_emissions", sc.record_emissions}};
    j["dataset"] = {{"w", c.dataset.w},
                    {"tau_s", c.dataset.tau_s},
                    {"min_history", c.dataset.min_history},
                    {"min_port_dist_m", c.dataset.min_port_dist_m},
                    {"target_size", c.dataset.target_size},
                    {"seed", c.dataset.seed}};
    j["model"] = ordered_json::parse(c.model.to_json());
    j["train"] = {{"batch_size", c.train.batch_size},
                  {"max_epochs", c.train.max_epochs},
                  {"batches_per_epoch", c.train.batches_per_epoch},
                  {"patience", c.train.patience},
                  {"lr", c.train.lr},
                  {"seed", c.train.seed},
                  {"max_seconds", c.train.max_seconds}};
    j["detector"] = {{"tau_s", c.detector.tau_s},
                     {"w", c.detector.w},
                     {"min_history", c.detector.min_history},
                     {"min_port_dist_m", c.detector.min_port_dist_m},
                     {"threshold", c.detector.threshold},
                     {"lateness_s", c.detector.lateness_s},
                     {"eviction_s", c.detector.eviction_s},
                     {"history_capacity", c.detector.history_capacity},
                     {"batch_reports", c.detector.batch_reports}};
    return j.dump(2);
}

AppConfig load_app_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return app_config_from_json(ss.str());
}

}  // namespace aisgap
