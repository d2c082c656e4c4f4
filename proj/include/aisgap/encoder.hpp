#pragma once

// Normalization of a sample into model inputs: a w x 6 history matrix of
// relative features and an 11-value vector for the latest position.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "aisgap/dataset.hpp"

namespace aisgap::encoder {

inline constexpr std::size_t kHistoryDims = 6;
inline constexpr std::size_t kPositionDims = 11;

struct NormBounds {
    double speed_min = 0.0;
    double speed_max = 102.2;
    double day_s = 86400.0;
};

/// [sin, cos] of 2 pi (x - min) / (max - min). Throws DegenerateRange when max <= min.
std::pair<double, double> cyclic_norm(double x, double min, double max);
/// (x - min) / (max - min) clamped to [0, 1]. Throws DegenerateRange when max <= min.
double linear_norm(double x, double min, double max);
/// sign(x) * ln(1 + |x|)
double symlog(double x);

/// Row i: [symlog dt, symlog dv, symlog dh, sin sod, cos sod, speed].
void encode_history(std::span<const features::FeatureMessage> window, const NormBounds& bounds,
                    std::span<double> out);
std::vector<double> encode_history(std::span<const features::FeatureMessage> window,
                                   const NormBounds& bounds = {});

/// [lat degree (linear over [-90, 90]), lat minute, lat second,
///  lon (cyclic with period 360, phase 0 at 0), lon minute, lon second], each cyclic
/// entry a sin/cos pair. Minutes and seconds come from |lat|, |lon|. The
/// longitude slot keeps its fraction so the vector is continuous across
/// the antimeridian.
std::array<double, kPositionDims> encode_position(double lat, double lon);

/// A batch of encoded samples stored contiguously.
struct EncodedSet {
    std::size_t w = 0;
    std::size_t history_dims = kHistoryDims;
    std::size_t position_dims = kPositionDims;
    std::vector<double> history;   // count x w x history_dims
    std::vector<double> position;  // count x position_dims
    std::vector<std::uint8_t> labels;

    std::size_t size() const { return labels.size(); }
    std::span<const double> history_of(std::size_t i) const {
        return {history.data() + i * w * history_dims, w * history_dims};
    }
    std::span<const double> position_of(std::size_t i) const {
        return {position.data() + i * position_dims, position_dims};
    }
    /// Copies rows [begin, end) of `order` into a new set.
    EncodedSet gather(std::span<const std::size_t> order) const;
};

/// Encodes every sample (parallel over samples).
EncodedSet encode_dataset(const dataset::Dataset& ds, const NormBounds& bounds = {});

/// Unnormalized inputs for the no-encoding baseline: history rows
/// [lat, lon, s, dt, dv, dh, second_of_day] and position [lat, lon].
inline constexpr std::size_t kRawHistoryDims = 7;
inline constexpr std::size_t kRawPositionDims = 2;
EncodedSet encode_dataset_raw(const dataset::Dataset& ds);

/// Flat binary cache: "AISGENC1", u32 version, u64 w, u64 history dims,
/// u64 position dims, u64 count, then per sample the history matrix, the
/// position vector and the label as little-endian 64-bit floats.
void write_encoded(std::ostream& out, const EncodedSet& set);
EncodedSet read_encoded(std::istream& in);

}  // namespace aisgap::encoder
