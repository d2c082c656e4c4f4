// Command-line front end: simulate, decode, build-dataset, train, eval,
// detect and ablate.

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aisgap/config.hpp"
#include "aisgap/error.hpp"
#include "aisgap/kernels.hpp"
#include "aisgap/pipeline.hpp"

using namespace aisgap;
using nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

int g_log_level = 1;  // 0 debug, 1 info, 2 warn, 3 error

void log(int level, const std::string& msg) {
    static const char* names[] = {"debug", "info", "warn", "error"};
    if (level >= g_log_level) std::cerr << "[" << names[level] << "] " << msg << '\n';
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> tau;
    std::optional<std::size_t> window;
    std::string ports;
};

AppConfig resolve(const Common& c) {
    AppConfig cfg = c.config.empty() ? AppConfig{} : load_app_config(c.config);
    if (c.seed) cfg.set_seed(*c.seed);
    if (c.tau) cfg.set_tau(*c.tau);
    if (c.window) cfg.set_window(*c.window);
    if (!c.ports.empty()) cfg.ports_file = c.ports;
    cfg.validate();
    static const char* levels[] = {"debug", "info", "warn", "error"};
    for (int i = 0; i < 4; ++i)
        if (cfg.log_level == levels[i]) g_log_level = i;
    return cfg;
}

std::vector<geo::Port> load_ports(const AppConfig& cfg) {
    if (cfg.ports_file.empty())
        return sim::synthetic_ports(cfg.synthetic_ports, cfg.port_seed, cfg.scenario.region);
    if (!std::filesystem::exists(cfg.ports_file))
        throw Error(Errc::Io, "ports file " + cfg.ports_file + " does not exist");
    return geo::load_ports_csv(cfg.ports_file);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(std::move(l));
    return lines;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw Error(Errc::Io, "cannot write " + path);
    return out;
}

dataset::Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    return dataset::read_dataset(in);
}

void write_dataset_file(const std::string& path, const dataset::Dataset& ds) {
    auto out = open_out(path);
    dataset::write_dataset(out, ds);
}

std::string decode_summary(const ais::DecodeStats& s) {
    std::ostringstream o;
    o << "lines " << s.lines << ", reports " << s.reports << ", non-dynamic " << s.non_dynamic
      << ", unavailable " << s.unavailable;
    for (const auto& [k, n] : s.errors) o << ", " << k << " " << n;
    return o.str();
}

// Observation period of a stream: first and last reception time.
std::pair<double, double> stream_period(const std::vector<ais::DynamicReport>& reports) {
    if (reports.empty()) throw Error(Errc::EmptyDataset, "stream holds no position reports");
    double lo = reports.front().timestamp_s, hi = lo;
    for (const auto& r : reports) {
        lo = std::min(lo, r.timestamp_s);
        hi = std::max(hi, r.timestamp_s);
    }
    return {lo, hi};
}

dataset::TrajectorySet trajectories_from_file(const std::string& path,
                                              const geo::PortIndex& index) {
    ais::DecodeStats stats;
    const auto lines = read_lines(path);
    const auto reports = pipeline::decode_lines(lines, &stats);
    log(1, path + ": " + decode_summary(stats));
    const auto [lo, hi] = stream_period(reports);
    dataset::TrajectorySet set;
    set.period_start = lo;
    set.period_end = hi;
    set.tracks = features::assemble(reports, index);
    return set;
}

// simulate -----------------------------------------------------------------

int cmd_simulate(const Common& common, const std::string& out_path, std::string truth_path) {
    const AppConfig cfg = resolve(common);
    const auto ports = load_ports(cfg);
    const auto scenario = sim::generate(cfg.scenario, ports);
    {
        auto out = open_out(out_path);
        for (const auto& l : scenario.lines) out << l << '\n';
    }
    if (truth_path.empty()) truth_path = out_path + ".truth.jsonl";
    {
        auto out = open_out(truth_path);
        out << ordered_json{{"kind", "config"},
                            {"config", ordered_json::parse(app_config_to_json(cfg))}}
                   .dump()
            << '\n';
        sim::write_truth(out, scenario.truth);
    }
    log(1, "wrote " + std::to_string(scenario.lines.size()) + " lines, " +
               std::to_string(scenario.truth.shutdowns.size()) + " shutdowns");
    return kOk;
}

// decode -------------------------------------------------------------------

int cmd_decode(const std::string& in_path, const std::string& out_path) {
    ais::StreamDecoder decoder;
    std::ifstream in(in_path);
    if (!in) throw Error(Errc::Io, "cannot open " + in_path);
    auto out = open_out(out_path);
    for (std::string l; std::getline(in, l);) {
        const auto r = decoder.feed(l);
        if (!r) continue;
        out << ordered_json{{"mmsi", r->mmsi}, {"type", r->msg_type}, {"t", r->timestamp_s},
                            {"lat", r->lat},   {"lon", r->lon},       {"sog", r->sog}}
                   .dump()
            << '\n';
    }
    log(1, decode_summary(decoder.stats()));
    return kOk;
}

// build-dataset ------------------------------------------------------------

void print_stats(const dataset::Dataset& ds, const std::string& title) {
    std::size_t positives = 0;
    for (const auto& s : ds.samples) positives += s.label;
    std::printf("%s: %zu samples (%zu positive, %zu negative)\n", title.c_str(), ds.samples.size(),
                positives, ds.samples.size() - positives);
    std::printf("%-10s", "stat");
    for (double p : dataset::kPercentiles) std::printf(" %12s", ("p" + std::to_string(int(p))).c_str());
    std::printf("\n");
    for (const auto& row : dataset::dataset_stats(ds)) {
        std::printf("%-10s", row.name.c_str());
        for (double v : row.values) std::printf(" %12.1f", v);
        std::printf("\n");
    }
}

int cmd_build_dataset(const Common& common, const std::string& in_path,
                      const std::string& eval_path, const std::string& out_path, bool split,
                      const std::string& trajectories_out) {
    const AppConfig cfg = resolve(common);
    const auto ports = load_ports(cfg);
    const geo::PortIndex index(ports);
    const auto set = trajectories_from_file(in_path, index);
    if (!trajectories_out.empty()) {
        auto out = open_out(trajectories_out);
        features::write_trajectories(out, set.tracks);
    }
    const auto ds = dataset::build_dataset(set, cfg.dataset);
    if (!split) {
        write_dataset_file(out_path, ds);
        print_stats(ds, out_path);
        return kOk;
    }
    if (eval_path.empty()) throw Error(Errc::MissingPeriod, "--split needs --eval-in");
    const auto eval_set = trajectories_from_file(eval_path, index);
    dataset::DatasetConfig ecfg = cfg.dataset;
    ecfg.seed = cfg.dataset.seed + 1;
    const auto eval_ds = dataset::build_dataset(eval_set, ecfg);
    const auto parts =
        dataset::split_by_date({{"train", ds}, {"eval", eval_ds}}, "train", "eval", cfg.dataset.seed);
    write_dataset_file(out_path + ".train.jsonl", parts.train);
    write_dataset_file(out_path + ".val.jsonl", parts.val);
    write_dataset_file(out_path + ".test.jsonl", parts.test);
    print_stats(parts.train, "train");
    print_stats(parts.val, "val");
    print_stats(parts.test, "test");
    return kOk;
}

// train --------------------------------------------------------------------

int cmd_train(const Common& common, const std::string& train_path, const std::string& val_path,
              const std::string& out_path, std::string history_path) {
    AppConfig cfg = resolve(common);
    const auto train_ds = load_dataset(train_path);
    const auto val_ds = load_dataset(val_path);
    cfg.model.w = train_ds.config.w;
    cfg.model.tau_s = train_ds.config.tau_s;
    if (cfg.model.raw_inputs) {
        cfg.model.history_dims = encoder::kRawHistoryDims;
        cfg.model.position_dims = encoder::kRawPositionDims;
    }
    const auto tr = pipeline::encode_for(cfg.model, train_ds);
    const auto va = pipeline::encode_for(cfg.model, val_ds);
    auto net = model::build_model(cfg.model, cfg.train.seed);
    log(1, "training " + model::to_string(cfg.model.arch) + " with " +
               std::to_string(net->parameter_count()) + " parameters on " +
               std::to_string(tr.size()) + " samples");
    const auto result = model::train(*net, tr, va, cfg.train, [](const model::EpochRecord& e) {
        log(1, "epoch " + std::to_string(e.epoch) + " train " + std::to_string(e.train_loss) +
                   " val " + std::to_string(e.val_loss) + " acc " +
                   std::to_string(e.val_accuracy));
    });
    model::save_checkpoint(*net, out_path);
    if (history_path.empty()) history_path = out_path + ".history.csv";
    auto hist = open_out(history_path);
    hist << "epoch,train_loss,val_loss,val_accuracy,best_val_loss\n";
    for (const auto& e : result.history) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%.8f,%.8f,%.6f,%.8f\n", e.epoch, e.train_loss,
                      e.val_loss, e.val_accuracy, e.best_val_loss);
        hist << buf;
    }
    log(1, "best epoch " + std::to_string(result.best_epoch) +
               (result.early_stopped ? " (early stop)" : ""));
    return kOk;
}

// eval ---------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& test_path,
             const std::string& csv_path, double threshold) {
    const auto net = model::load_checkpoint(checkpoint);
    const auto ds = load_dataset(test_path);
    const auto set = pipeline::encode_for(net->config(), ds);
    const auto r = model::evaluate(*net, set, threshold);
    const double n = double(r.tp + r.fp + r.fn + r.tn);
    std::printf("samples   %.0f\n", n);
    std::printf("                 actual true   actual false\n");
    std::printf("predicted true   %11llu   %12llu\n", (unsigned long long)r.tp,
                (unsigned long long)r.fp);
    std::printf("predicted false  %11llu   %12llu\n", (unsigned long long)r.fn,
                (unsigned long long)r.tn);
    std::printf("accuracy  %.4f\nppv       %.4f\nnpv       %.4f\n", r.accuracy, r.ppv, r.npv);
    if (!csv_path.empty()) {
        auto out = open_out(csv_path);
        char buf[256];
        std::snprintf(buf, sizeof buf, "tp,fp,fn,tn,accuracy,ppv,npv\n%llu,%llu,%llu,%llu,%.6f,%.6f,%.6f\n",
                      (unsigned long long)r.tp, (unsigned long long)r.fp,
                      (unsigned long long)r.fn, (unsigned long long)r.tn, r.accuracy, r.ppv,
                      r.npv);
        out << buf;
    }
    return kOk;
}

// detect -------------------------------------------------------------------

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int cmd_detect(const Common& common, const std::string& checkpoint, const std::string& in_path,
               const std::string& out_path, bool follow, bool all, double idle_exit_s) {
    AppConfig cfg = resolve(common);
    const auto net = model::load_checkpoint(checkpoint);
    cfg.detector.w = net->config().w;
    if (!common.tau) cfg.detector.tau_s = net->config().tau_s;
    cfg.detector.min_history = std::max(cfg.detector.min_history, cfg.detector.w);
    const auto ports = load_ports(cfg);
    const geo::PortIndex index(ports);

    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        file_out = open_out(out_path);
        out = &file_out;
    }
    detect::Detector det(*net, index, cfg.detector,
                         [&](const detect::Output& o) { detect::write_output_json(*out, o, all); });

    std::ifstream in(in_path);
    if (!in) throw Error(Errc::Io, "cannot open " + in_path);
    ais::StreamDecoder decoder;
    std::size_t since_flush = 0;
    auto idle_since = std::chrono::steady_clock::now();
    if (follow) {
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
    }
    std::string line;
    while (!g_stop) {
        if (std::getline(in, line)) {
            if (in.eof()) {
                // Partial last line of a growing file: wait for the rest.
                if (follow) {
                    in.clear();
                    in.seekg(-static_cast<std::streamoff>(line.size()), std::ios::cur);
                    std::this_thread::sleep_for(std::chrono::milliseconds(100));
                    continue;
                }
            }
            idle_since = std::chrono::steady_clock::now();
            if (const auto r = decoder.feed(line)) {
                det.on_report(*r);
                if (++since_flush >= cfg.detector.batch_reports) {
                    det.flush();
                    out->flush();
                    since_flush = 0;
                }
            }
            continue;
        }
        if (!follow) break;
        det.flush();
        out->flush();
        since_flush = 0;
        const double idle = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                          idle_since)
                                .count();
        if (idle_exit_s > 0 && idle >= idle_exit_s) break;
        in.clear();
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    det.finish();
    std::uint64_t malformed = 0;
    for (const auto& [k, n] : decoder.stats().errors) malformed += n;
    det.count_malformed(malformed);
    out->flush();
    detect::write_summary_json(std::cerr, det.counters());
    return kOk;
}

// ablate -------------------------------------------------------------------

int cmd_ablate(const Common& common, const std::string& axis, const std::string& grid,
               const std::string& out_path, std::size_t eval_size, double month_gap_days) {
    const AppConfig cfg = resolve(common);
    pipeline::AblationConfig ac;
    ac.month_a = cfg.scenario;
    ac.month_b = cfg.scenario;
    ac.month_b.seed = cfg.scenario.seed + 1;
    ac.month_b.start_time = cfg.scenario.start_time + month_gap_days * 86400.0;
    ac.ports = cfg.synthetic_ports;
    ac.port_seed = cfg.port_seed;
    ac.dataset = cfg.dataset;
    ac.eval_size = eval_size;
    ac.model = cfg.model;
    ac.train = cfg.train;
    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        file_out = open_out(out_path);
        out = &file_out;
    }
    const auto rows = pipeline::ablation_run(axis, pipeline::split_list(grid), ac,
                                             [](const pipeline::AblationRow& r) {
                                                 log(1, r.axis + "=" + r.value + " accuracy " +
                                                            std::to_string(r.report.accuracy) +
                                                            " in " + std::to_string(r.seconds) +
                                                            " s");
                                             });
    pipeline::write_ablation_csv(*out, rows);
    return kOk;
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON configuration file");
    app->add_option("--seed", c.seed, "Seed for every random stream");
    app->add_option("--tau", c.tau, "Time horizon in seconds");
    app->add_option("--window", c.window, "Messages per window");
    app->add_option("--ports", c.ports, "Port CSV (default: synthetic ports)");
}

}  // namespace

int main(int argc, char** argv) {
    aisgap::kernels::retain_freed_memory();
    CLI::App app{"AIS missing-reception detector"};
    app.require_subcommand(1);

    Common common;
    std::string in, out, eval_in, val, checkpoint, csv, truth, history, traj_out, axis, grid;
    bool follow = false, split = false, all = false;
    double threshold = 0.5, idle_exit = 0.0, month_gap = 31.0;
    std::size_t eval_size = 20000;

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scenario");
    add_common(simulate, common);
    simulate->add_option("--out", out, "NMEA output")->required();
    simulate->add_option("--truth", truth, "Ground truth output (default: <out>.truth.jsonl)");

    auto* decode = app.add_subcommand("decode", "Decode NMEA into JSONL position reports");
    decode->add_option("--in", in, "NMEA input")->required();
    decode->add_option("--out", out, "JSONL output")->required();

    auto* build = app.add_subcommand("build-dataset", "Label windows into a balanced dataset");
    add_common(build, common);
    build->add_option("--in", in, "NMEA stream of the training period")->required();
    build->add_option("--eval-in", eval_in, "NMEA stream of the evaluation period");
    build->add_option("--out", out, "Dataset output (prefix with --split)")->required();
    build->add_flag("--split", split, "Write train/val/test sets");
    build->add_option("--trajectories-out", traj_out, "Also write the trajectories");

    auto* train = app.add_subcommand("train", "Train a classifier");
    add_common(train, common);
    train->add_option("--in", in, "Training dataset")->required();
    train->add_option("--val", val, "Validation dataset")->required();
    train->add_option("--out", out, "Checkpoint output")->required();
    train->add_option("--history", history, "Per-epoch CSV (default: <out>.history.csv)");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled dataset");
    eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    eval->add_option("--in", in, "Test dataset")->required();
    eval->add_option("--out", csv, "CSV output");
    eval->add_option("--threshold", threshold, "Decision threshold");

    auto* detect_cmd = app.add_subcommand("detect", "Flag abnormal missing receptions");
    add_common(detect_cmd, common);
    detect_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    detect_cmd->add_option("--in", in, "NMEA stream")->required();
    detect_cmd->add_option("--out", out, "JSONL output (default: stdout)");
    detect_cmd->add_flag("--follow", follow, "Keep reading as the file grows");
    detect_cmd->add_option("--idle-exit", idle_exit, "In follow mode, stop after this many idle seconds");
    detect_cmd->add_flag("--all", all, "Write every resolved prediction, not only alerts");

    auto* ablate = app.add_subcommand("ablate", "Train and evaluate along one axis");
    add_common(ablate, common);
    ablate->add_option("--axis", axis, "dataset_size, window_size, horizon or architecture")->required();
    ablate->add_option("--grid", grid, "Comma separated values")->required();
    ablate->add_option("--out", out, "CSV output (default: stdout)");
    ablate->add_option("--eval-size", eval_size, "Evaluation-period samples");
    ablate->add_option("--month-gap-days", month_gap, "Start offset of the evaluation period");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate) return cmd_simulate(common, out, truth);
        if (*decode) return cmd_decode(in, out);
        if (*build) return cmd_build_dataset(common, in, eval_in, out, split, traj_out);
        if (*train) return cmd_train(common, in, val, out, history);
        if (*eval) return cmd_eval(checkpoint, in, csv, threshold);
        if (*detect_cmd) return cmd_detect(common, checkpoint, in, out, follow, all, idle_exit);
        if (*ablate) return cmd_ablate(common, axis, grid, out, eval_size, month_gap);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == Errc::InvalidConfig || e.code() == Errc::InvalidGrid ? kUsage : kData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}
