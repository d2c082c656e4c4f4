#include "aisgap/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "aisgap/error.hpp"

namespace aisgap::pipeline {

std::vector<ais::DynamicReport> decode_lines(std::span<const std::string> lines,
                                             ais::DecodeStats* stats) {
    ais::StreamDecoder decoder;
    std::vector<ais::DynamicReport> out;
    for (const auto& l : lines)
        if (auto r = decoder.feed(l)) out.push_back(*r);
    if (stats) *stats = decoder.stats();
    return out;
}

dataset::TrajectorySet trajectories_from_lines(std::span<const std::string> lines,
                                               const geo::PortIndex& ports, double period_start,
                                               double period_end) {
    dataset::TrajectorySet set;
    set.period_start = period_start;
    set.period_end = period_end;
    set.tracks = features::assemble(decode_lines(lines), ports);
    return set;
}

dataset::TrajectorySet simulate_period(const sim::ScenarioConfig& cfg,
                                       std::span<const geo::Port> ports, sim::GroundTruth* truth) {
    auto scenario = sim::generate(cfg, ports);
    const geo::PortIndex index(ports);
    auto set = trajectories_from_lines(scenario.lines, index, cfg.start_time,
                                       cfg.start_time + cfg.duration_s);
    if (truth) *truth = std::move(scenario.truth);
    return set;
}

encoder::EncodedSet encode_for(const model::ModelConfig& cfg, const dataset::Dataset& ds) {
    return cfg.raw_inputs ? encoder::encode_dataset_raw(ds) : encoder::encode_dataset(ds);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    auto push = [&] {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char c : s) {
        if (c == ',') push();
        else cur.push_back(c);
    }
    push();
    return out;
}

namespace {

[[noreturn]] void bad_grid(const std::string& what) { throw Error(Errc::InvalidGrid, what); }

double parse_number(const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        bad_grid("grid value '" + v + "' is not a number");
    }
    if (used != v.size() || !std::isfinite(x)) bad_grid("grid value '" + v + "' is not a number");
    return x;
}

std::size_t parse_count(const std::string& v) {
    const double x = parse_number(v);
    if (x < 1 || x != std::floor(x)) bad_grid("grid value '" + v + "' must be a positive integer");
    return static_cast<std::size_t>(x);
}

}  // namespace

std::vector<AblationRow> ablation_run(const std::string& axis, const std::vector<std::string>& grid,
                                      const AblationConfig& cfg,
                                      const std::function<void(const AblationRow&)>& on_row) {
    static const std::set<std::string> axes{"dataset_size", "window_size", "horizon",
                                            "architecture"};
    if (!axes.contains(axis)) bad_grid("unknown axis '" + axis + "'");
    if (grid.empty()) bad_grid("grid is empty");
    if (std::set<std::string>(grid.begin(), grid.end()).size() != grid.size())
        bad_grid("grid has repeated values");
    // Validate every value before the expensive part.
    for (const auto& v : grid) {
        if (axis == "dataset_size") {
            if (parse_count(v) % 2 != 0) bad_grid("dataset size must be even");
        } else if (axis == "window_size") {
            (void)parse_count(v);
        } else if (axis == "horizon") {
            if (!(parse_number(v) > 0)) bad_grid("horizon must be > 0");
        } else if (v != "transformer" && v != "feedforward" && v != "feedforward_w1" &&
                   v != "raw_transformer") {
            bad_grid("unknown architecture '" + v + "'");
        }
    }

    const auto ports = sim::synthetic_ports(cfg.ports, cfg.port_seed, cfg.month_a.region);
    const auto set_a = simulate_period(cfg.month_a, ports);
    const auto set_b = simulate_period(cfg.month_b, ports);

    std::vector<AblationRow> rows;
    for (const auto& v : grid) {
        const auto started = std::chrono::steady_clock::now();
        dataset::DatasetConfig dcfg = cfg.dataset;
        model::ModelConfig mcfg = cfg.model;
        if (axis == "dataset_size") {
            dcfg.target_size = parse_count(v);
        } else if (axis == "window_size") {
            dcfg.w = parse_count(v);
            dcfg.min_history = std::max(dcfg.min_history, dcfg.w);
        } else if (axis == "horizon") {
            dcfg.tau_s = parse_number(v);
        } else if (v == "feedforward" || v == "feedforward_w1") {
            mcfg.arch = model::Architecture::FeedForward;
            if (v == "feedforward_w1") dcfg.w = 1;
        } else if (v == "raw_transformer") {
            mcfg.raw_inputs = true;
            mcfg.history_dims = encoder::kRawHistoryDims;
            mcfg.position_dims = encoder::kRawPositionDims;
        }
        mcfg.w = dcfg.w;
        mcfg.tau_s = dcfg.tau_s;

        const auto train_ds = dataset::build_dataset(set_a, dcfg);
        dataset::DatasetConfig ecfg = dcfg;
        ecfg.target_size = cfg.eval_size;
        ecfg.seed = dcfg.seed + 1;
        const auto eval_ds = dataset::build_dataset(set_b, ecfg);
        const auto split =
            dataset::split_by_date({{"A", train_ds}, {"B", eval_ds}}, "A", "B", dcfg.seed);
        const auto train_enc = encode_for(mcfg, split.train);
        const auto val_enc = encode_for(mcfg, split.val);
        const auto test_enc = encode_for(mcfg, split.test);

        auto net = model::build_model(mcfg, cfg.train.seed);
        const auto result = model::train(*net, train_enc, val_enc, cfg.train);

        AblationRow row;
        row.axis = axis;
        row.value = v;
        row.train_samples = train_enc.size();
        row.test_samples = test_enc.size();
        row.parameters = net->parameter_count();
        row.epochs = result.history.size();
        row.report = model::evaluate(*net, test_enc);
        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (on_row) on_row(row);
        rows.push_back(row);
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "axis,value,train_samples,test_samples,parameters,epochs,tp,fp,fn,tn,accuracy,ppv,npv\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%zu,%zu,%llu,%llu,%llu,%llu,%.6f,%.6f,%.6f\n",
                      r.axis.c_str(), r.value.c_str(), r.train_samples, r.test_samples,
                      r.parameters, r.epochs, static_cast<unsigned long long>(r.report.tp),
                      static_cast<unsigned long long>(r.report.fp),
                      static_cast<unsigned long long>(r.report.fn),
                      static_cast<unsigned long long>(r.report.tn), r.report.accuracy,
                      r.report.ppv, r.report.npv);
        out << buf;
    }
}

}  // namespace aisgap::pipeline
