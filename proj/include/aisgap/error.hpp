#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aisgap {

/// Failure categories surfaced by the library. Every thrown aisgap::Error carries one.
enum class Errc {
    ChecksumMismatch,
    MalformedSentence,
    IncompleteFragmentGroup,
    FieldOutOfRange,
    EmptyPortDatabase,
    NonMonotonicTime,
    InsufficientSamples,
    MissingPeriod,
    EmptyDataset,
    DegenerateRange,
    ShapeMismatch,
    OddDimension,
    InvalidConfig,
    DivergedLoss,
    CorruptCheckpoint,
    VersionMismatch,
    InvalidGrid,
    ScenarioMismatch,
    Io,
};

constexpr std::string_view to_string(Errc e) {
    switch (e) {
        case Errc::ChecksumMismatch: return "ChecksumMismatch";
        case Errc::MalformedSentence: return "MalformedSentence";
        case Errc::IncompleteFragmentGroup: return "IncompleteFragmentGroup";
        case Errc::FieldOutOfRange: return "FieldOutOfRange";
        case Errc::EmptyPortDatabase: return "EmptyPortDatabase";
        case Errc::NonMonotonicTime: return "NonMonotonicTime";
        case Errc::InsufficientSamples: return "InsufficientSamples";
        case Errc::MissingPeriod: return "MissingPeriod";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::DegenerateRange: return "DegenerateRange";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::OddDimension: return "OddDimension";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::DivergedLoss: return "DivergedLoss";
        case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::InvalidGrid: return "InvalidGrid";
        case Errc::ScenarioMismatch: return "ScenarioMismatch";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace aisgap
