#include "aisgap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aisgap/error.hpp"
#include "aisgap/random.hpp"

namespace aisgap::dataset {

using features::FeatureMessage;
using features::Trajectory;
using nlohmann::ordered_json;

void DatasetConfig::validate() const {
    if (w < 1) throw Error(Errc::InvalidConfig, "window size must be >= 1");
    if (!(tau_s > 0.0)) throw Error(Errc::InvalidConfig, "tau must be > 0");
    if (min_history < w) throw Error(Errc::InvalidConfig, "min_history must be >= window size");
    if (target_size % 2 != 0) throw Error(Errc::InvalidConfig, "target size must be even");
}

std::optional<Sample> label_window(const Trajectory& traj, std::size_t end_idx,
                                   const DatasetConfig& cfg, double period_end) {
    const auto& msgs = traj.messages;
    if (end_idx + 1 < cfg.w || end_idx >= msgs.size()) return std::nullopt;
    bool label;
    if (end_idx + 1 < msgs.size()) {
        label = msgs[end_idx + 1].t - msgs[end_idx].t <= cfg.tau_s;
    } else {
        if (period_end - msgs[end_idx].t < cfg.tau_s) return std::nullopt;
        label = false;
    }
    Sample s;
    s.mmsi = traj.id.mmsi;
    s.segment = traj.id.segment;
    s.window.assign(msgs.begin() + static_cast<std::ptrdiff_t>(end_idx + 1 - cfg.w),
                    msgs.begin() + static_cast<std::ptrdiff_t>(end_idx + 1));
    s.label = label;
    s.loss_point = {msgs[end_idx].lat, msgs[end_idx].lon};
    return s;
}

bool eligible(const Trajectory& traj, std::size_t end_idx, const DatasetConfig& cfg) {
    if (end_idx >= traj.messages.size()) return false;
    return end_idx + 1 >= cfg.min_history &&
           traj.messages[end_idx].dist_port_m > cfg.min_port_dist_m;
}

std::vector<Candidate> enumerate_candidates(const TrajectorySet& set, const DatasetConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<Candidate>> per_track(set.tracks.size());
    const auto n = static_cast<std::ptrdiff_t>(set.tracks.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t ti = 0; ti < n; ++ti) {
        const auto& msgs = set.tracks[static_cast<std::size_t>(ti)].messages;
        auto& out = per_track[static_cast<std::size_t>(ti)];
        for (std::size_t i = 0; i < msgs.size(); ++i) {
            if (!eligible(set.tracks[static_cast<std::size_t>(ti)], i, cfg) || i + 1 < cfg.w) continue;
            bool label;
            if (i + 1 < msgs.size()) {
                label = msgs[i + 1].t - msgs[i].t <= cfg.tau_s;
            } else if (set.period_end - msgs[i].t >= cfg.tau_s) {
                label = false;
            } else {
                continue;
            }
            out.push_back({static_cast<std::uint32_t>(ti), static_cast<std::uint32_t>(i), label});
        }
    }
    std::vector<Candidate> all;
    for (auto& v : per_track) all.insert(all.end(), v.begin(), v.end());
    return all;
}

namespace {

// Uniform k-subset via a partial Fisher-Yates pass, kept in draw order.
std::vector<Candidate> draw(std::vector<Candidate> pool, std::size_t k, rnd::Engine& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rnd::below(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

ordered_json config_json(const DatasetConfig& c) {
    return {{"w", c.w},
            {"tau_s", c.tau_s},
            {"min_history", c.min_history},
            {"min_port_dist_m", c.min_port_dist_m},
            {"target_size", c.target_size},
            {"seed", c.seed}};
}

DatasetConfig config_from_json(const nlohmann::json& j) {
    DatasetConfig c;
    c.w = j.at("w").get<std::size_t>();
    c.tau_s = j.at("tau_s").get<double>();
    c.min_history = j.at("min_history").get<std::size_t>();
    c.min_port_dist_m = j.at("min_port_dist_m").get<double>();
    c.target_size = j.at("target_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

std::string sample_line(const Sample& s) {
    ordered_json win = ordered_json::array();
    for (const auto& m : s.window)
        win.push_back({m.t, m.lat, m.lon, m.s, m.delta_t, m.delta_dv, m.delta_dh, m.dist_port_m,
                       m.second_of_day});
    const ordered_json j = {{"mmsi", s.mmsi},
                            {"segment", s.segment},
                            {"label", s.label},
                            {"loss_lat", s.loss_point.lat},
                            {"loss_lon", s.loss_point.lon},
                            {"window", std::move(win)}};
    return j.dump();
}

}  // namespace

Dataset build_dataset(const TrajectorySet& set, const DatasetConfig& cfg) {
    const auto candidates = enumerate_candidates(set, cfg);
    std::vector<Candidate> pos, neg;
    for (const auto& c : candidates) (c.label ? pos : neg).push_back(c);
    const std::size_t per_class =
        cfg.target_size == 0 ? std::min(pos.size(), neg.size()) : cfg.target_size / 2;
    if (pos.size() < per_class || neg.size() < per_class || per_class == 0) {
        const bool pos_short = pos.size() < std::max<std::size_t>(per_class, 1);
        throw Error(Errc::InsufficientSamples,
                    std::string(pos_short ? "positive" : "negative") + " class has " +
                        std::to_string(pos_short ? pos.size() : neg.size()) +
                        " candidates, need " + std::to_string(std::max<std::size_t>(per_class, 1)));
    }
    rnd::Engine rng = rnd::derive(cfg.seed, 0x5a4d);
    auto chosen = draw(std::move(pos), per_class, rng);
    auto chosen_neg = draw(std::move(neg), per_class, rng);
    chosen.insert(chosen.end(), chosen_neg.begin(), chosen_neg.end());
    rnd::shuffle(chosen, rng);

    Dataset ds;
    ds.config = cfg;
    ds.samples.resize(chosen.size());
    const auto n = static_cast<std::ptrdiff_t>(chosen.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& c = chosen[static_cast<std::size_t>(i)];
        ds.samples[static_cast<std::size_t>(i)] =
            *label_window(set.tracks[c.track], c.end_idx, cfg, set.period_end);
    }
    return ds;
}

Split split_by_date(const std::map<std::string, Dataset>& periods, const std::string& train_period,
                    const std::string& eval_period, std::uint64_t seed) {
    const auto tr = periods.find(train_period);
    if (tr == periods.end()) throw Error(Errc::MissingPeriod, "no dataset for " + train_period);
    const auto ev = periods.find(eval_period);
    if (ev == periods.end()) throw Error(Errc::MissingPeriod, "no dataset for " + eval_period);
    Split out;
    out.train = tr->second;
    out.val.config = ev->second.config;
    out.test.config = ev->second.config;
    const auto& eval = ev->second.samples;
    std::vector<std::size_t> idx(eval.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rnd::Engine rng = rnd::derive(seed, 0x5e1);
    rnd::shuffle(idx, rng);
    const std::size_t n_val = eval.size() / 10;
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_val ? out.val : out.test).samples.push_back(eval[idx[i]]);
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw Error(Errc::EmptyDataset, "percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

std::vector<PercentileRow> dataset_stats(const Dataset& ds) {
    if (ds.samples.empty()) throw Error(Errc::EmptyDataset, "dataset has no samples");
    std::vector<double> dd, dt, sum_d, sum_t;
    for (const auto& s : ds.samples) {
        double total = 0.0;
        for (std::size_t i = 0; i < s.window.size(); ++i) {
            const auto& m = s.window[i];
            const double d = std::hypot(m.delta_dv, m.delta_dh);
            dd.push_back(d);
            dt.push_back(m.delta_t);
            if (i > 0) total += d;
        }
        sum_d.push_back(total);
        sum_t.push_back(s.window.back().t - s.window.front().t);
    }
    std::vector<PercentileRow> rows{{"delta_d_m", {}}, {"delta_t_s", {}}, {"sum_d_m", {}},
                                    {"sum_t_s", {}}};
    const std::vector<double>* cols[] = {&dd, &dt, &sum_d, &sum_t};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<double> sorted = *cols[r];
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k < kPercentiles.size(); ++k) {
            auto rank = static_cast<std::size_t>(
                std::ceil(kPercentiles[k] / 100.0 * static_cast<double>(sorted.size())));
            rank = std::clamp<std::size_t>(rank, 1, sorted.size());
            rows[r].values[k] = sorted[rank - 1];
        }
    }
    return rows;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

void write_dataset(std::ostream& out, const Dataset& ds) {
    std::vector<std::string> lines;
    lines.reserve(ds.samples.size());
    std::uint64_t h = fnv1a("");
    for (const auto& s : ds.samples) {
        lines.push_back(sample_line(s));
        h = fnv1a(lines.back(), h);
        h = fnv1a("\n", h);
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    const ordered_json header = {{"kind", "aisgap-dataset"},
                                 {"config", config_json(ds.config)},
                                 {"count", ds.samples.size()},
                                 {"hash", hex}};
    out << header.dump() << '\n';
    for (const auto& l : lines) out << l << '\n';
}

Dataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::EmptyDataset, "dataset file is empty");
    Dataset ds;
    std::size_t count = 0;
    std::string stated_hash;
    try {
        const auto header = nlohmann::json::parse(line);
        ds.config = config_from_json(header.at("config"));
        count = header.at("count").get<std::size_t>();
        stated_hash = header.at("hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::Io, std::string("dataset header: ") + e.what());
    }
    std::uint64_t h = fnv1a("");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        h = fnv1a(line, h);
        h = fnv1a("\n", h);
        try {
            const auto j = nlohmann::json::parse(line);
            Sample s;
            s.mmsi = j.at("mmsi").get<std::uint32_t>();
            s.segment = j.value("segment", std::uint32_t{0});
            s.label = j.at("label").get<bool>();
            s.loss_point = {j.at("loss_lat").get<double>(), j.at("loss_lon").get<double>()};
            for (const auto& row : j.at("window")) {
                if (row.size() != 9) throw Error(Errc::Io, "window rows need 9 fields");
                FeatureMessage m;
                m.t = row[0].get<double>();
                m.lat = row[1].get<double>();
                m.lon = row[2].get<double>();
                m.s = row[3].get<double>();
                m.delta_t = row[4].get<double>();
                m.delta_dv = row[5].get<double>();
                m.delta_dh = row[6].get<double>();
                m.dist_port_m = row[7].get<double>();
                m.second_of_day = row[8].get<int>();
                s.window.push_back(m);
            }
            ds.samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::Io, "dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    if (ds.samples.size() != count || stated_hash != hex)
        throw Error(Errc::Io, "dataset content does not match its header (count or hash)");
    return ds;
}

}  // namespace aisgap::dataset
