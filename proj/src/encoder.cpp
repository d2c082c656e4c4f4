#include "aisgap/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

#include "aisgap/error.hpp"

namespace aisgap::encoder {

namespace {

constexpr char kMagic[8] = {'A', 'I', 'S', 'G', 'E', 'N', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

void require_range(double min, double max) {
    if (!(max > min))
        throw Error(Errc::DegenerateRange,
                    "range [" + std::to_string(min) + ", " + std::to_string(max) + "] is empty");
}

// Degree, minute, second of a non-negative angle.
std::array<double, 3> dms(double deg) {
    const double d = std::floor(deg);
    const double rem_min = (deg - d) * 60.0;
    const double m = std::floor(rem_min);
    const double s = (rem_min - m) * 60.0;
    return {d, m, s};
}

template <class T>
void put(std::ostream& out, T v) {
    static_assert(std::endian::native == std::endian::little);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error(Errc::Io, "encoded cache is truncated");
    return v;
}

}  // namespace

std::pair<double, double> cyclic_norm(double x, double min, double max) {
    require_range(min, max);
    const double phase = 2.0 * std::numbers::pi * (x - min) / (max - min);
    return {std::sin(phase), std::cos(phase)};
}

double linear_norm(double x, double min, double max) {
    require_range(min, max);
    return std::clamp((x - min) / (max - min), 0.0, 1.0);
}

double symlog(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

void encode_history(std::span<const features::FeatureMessage> window, const NormBounds& b,
                    std::span<double> out) {
    for (std::size_t i = 0; i < window.size(); ++i) {
        const auto& m = window[i];
        double* row = out.data() + i * kHistoryDims;
        row[0] = symlog(m.delta_t);
        row[1] = symlog(m.delta_dv);
        row[2] = symlog(m.delta_dh);
        const auto [s, c] = cyclic_norm(m.second_of_day, 0.0, b.day_s);
        row[3] = s;
        row[4] = c;
        row[5] = linear_norm(m.s, b.speed_min, b.speed_max);
    }
}

std::vector<double> encode_history(std::span<const features::FeatureMessage> window,
                                   const NormBounds& bounds) {
    std::vector<double> out(window.size() * kHistoryDims);
    encode_history(window, bounds, out);
    return out;
}

std::array<double, kPositionDims> encode_position(double lat, double lon) {
    const auto la = dms(std::abs(lat));
    const auto lo = dms(std::abs(lon));
    const double lat_deg = std::copysign(la[0], lat);
    std::array<double, kPositionDims> v{};
    v[0] = linear_norm(lat_deg, -90.0, 90.0);
    std::tie(v[1], v[2]) = cyclic_norm(la[1], 0.0, 60.0);
    std::tie(v[3], v[4]) = cyclic_norm(la[2], 0.0, 60.0);
    std::tie(v[5], v[6]) = cyclic_norm(lon, 0.0, 360.0);
    std::tie(v[7], v[8]) = cyclic_norm(lo[1], 0.0, 60.0);
    std::tie(v[9], v[10]) = cyclic_norm(lo[2], 0.0, 60.0);
    return v;
}

EncodedSet EncodedSet::gather(std::span<const std::size_t> order) const {
    EncodedSet out;
    out.w = w;
    out.history_dims = history_dims;
    out.position_dims = position_dims;
    const std::size_t hs = w * history_dims;
    out.history.resize(order.size() * hs);
    out.position.resize(order.size() * position_dims);
    out.labels.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t j = order[i];
        std::memcpy(out.history.data() + i * hs, history.data() + j * hs, hs * sizeof(double));
        std::memcpy(out.position.data() + i * position_dims, position.data() + j * position_dims,
                    position_dims * sizeof(double));
        out.labels[i] = labels[j];
    }
    return out;
}

EncodedSet encode_dataset(const dataset::Dataset& ds, const NormBounds& bounds) {
    EncodedSet out;
    out.w = ds.config.w;
    const std::size_t n = ds.samples.size();
    const std::size_t hs = out.w * kHistoryDims;
    out.history.resize(n * hs);
    out.position.resize(n * kPositionDims);
    out.labels.resize(n);
    for (const auto& s : ds.samples)
        if (s.window.size() != out.w)
            throw Error(Errc::ShapeMismatch, "sample window length differs from config");
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const auto k = static_cast<std::size_t>(i);
        const auto& s = ds.samples[k];
        encode_history(s.window, bounds, std::span<double>(out.history.data() + k * hs, hs));
        const auto p = encode_position(s.window.back().lat, s.window.back().lon);
        std::copy(p.begin(), p.end(), out.position.begin() + static_cast<std::ptrdiff_t>(k * kPositionDims));
        out.labels[k] = s.label ? 1 : 0;
    }
    return out;
}

EncodedSet encode_dataset_raw(const dataset::Dataset& ds) {
    EncodedSet out;
    out.w = ds.config.w;
    out.history_dims = kRawHistoryDims;
    out.position_dims = kRawPositionDims;
    for (const auto& s : ds.samples) {
        if (s.window.size() != out.w)
            throw Error(Errc::ShapeMismatch, "sample window length differs from config");
        for (const auto& m : s.window) {
            out.history.insert(out.history.end(), {m.lat, m.lon, m.s, m.delta_t, m.delta_dv,
                                                   m.delta_dh, double(m.second_of_day)});
        }
        out.position.push_back(s.window.back().lat);
        out.position.push_back(s.window.back().lon);
        out.labels.push_back(s.label ? 1 : 0);
    }
    return out;
}

void write_encoded(std::ostream& out, const EncodedSet& set) {
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, set.w);
    put<std::uint64_t>(out, set.history_dims);
    put<std::uint64_t>(out, set.position_dims);
    put<std::uint64_t>(out, set.size());
    const std::size_t hs = set.w * set.history_dims;
    for (std::size_t i = 0; i < set.size(); ++i) {
        out.write(reinterpret_cast<const char*>(set.history.data() + i * hs),
                  static_cast<std::streamsize>(hs * sizeof(double)));
        out.write(reinterpret_cast<const char*>(set.position.data() + i * set.position_dims),
                  static_cast<std::streamsize>(set.position_dims * sizeof(double)));
        put<double>(out, set.labels[i] ? 1.0 : 0.0);
    }
}

EncodedSet read_encoded(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw Error(Errc::Io, "not an encoded dataset cache");
    if (get<std::uint32_t>(in) != kVersion)
        throw Error(Errc::VersionMismatch, "unsupported encoded cache version");
    EncodedSet set;
    set.w = get<std::uint64_t>(in);
    set.history_dims = get<std::uint64_t>(in);
    set.position_dims = get<std::uint64_t>(in);
    const auto count = get<std::uint64_t>(in);
    const std::size_t hs = set.w * set.history_dims;
    set.history.resize(count * hs);
    set.position.resize(count * set.position_dims);
    set.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(set.history.data() + i * hs),
                static_cast<std::streamsize>(hs * sizeof(double)));
        in.read(reinterpret_cast<char*>(set.position.data() + i * set.position_dims),
                static_cast<std::streamsize>(set.position_dims * sizeof(double)));
        set.labels[i] = get<double>(in) != 0.0 ? 1 : 0;
    }
    if (!in) throw Error(Errc::Io, "encoded cache is truncated");
    return set;
}

}  // namespace aisgap::encoder
