#pragma once

// AIVDM/AIVDO sentence parsing and dynamic position report extraction.
//
// References: ITU-R M.1371 message layouts, IEC 61162-1 sentence framing.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace aisgap::ais {

/// One complete AIVDM/AIVDO sentence (all fragments joined).
struct NmeaSentence {
    std::string raw_line;  // last fragment's line for multi-part groups
    std::string payload;   // 6-bit armored characters
    int fill_bits = 0;
    int fragment_count = 1;
    int fragment_index = 1;
    std::optional<int> sequence_id;
    char channel = 'A';
    std::uint8_t checksum = 0;
    bool own_vessel = false;  // AIVDO
};

struct DynamicReport {
    std::uint32_t mmsi = 0;
    int msg_type = 0;
    double timestamp_s = 0.0;  // reception time, epoch seconds
    double lat = 0.0;
    double lon = 0.0;
    double sog = 0.0;  // knots
};

/// XOR of every character of `body` (the text strictly between '!' and '*').
std::uint8_t nmea_checksum(std::string_view body);

/// Value of one armored payload character, 0..63. Throws MalformedSentence
/// for characters outside the armoring alphabet.
int sixbit_value(char c);
char sixbit_char(int value);

/// Parses and checksum-verifies a single sentence line (one fragment).
NmeaSentence parse_fragment(std::string_view line);

/// Payload bit access, MSB first.
class BitReader {
public:
    BitReader(std::string_view payload, int fill_bits);

    std::size_t size() const { return bits_.size(); }
    std::uint64_t unsigned_field(std::size_t start, std::size_t len) const;
    std::int64_t signed_field(std::size_t start, std::size_t len) const;

private:
    std::vector<bool> bits_;
};

/// Builds armored payloads bit by bit (used by the traffic simulator and tests).
class BitWriter {
public:
    void put_unsigned(std::uint64_t value, std::size_t len);
    void put_signed(std::int64_t value, std::size_t len);
    std::size_t size() const { return bits_.size(); }
    /// Armored payload and the number of pad bits added to the last character.
    std::pair<std::string, int> armor() const;

private:
    std::vector<bool> bits_;
};

/// Stateful sentence decoder. Multi-fragment groups are buffered per
/// (channel, sequence id) and evicted after `fragment_timeout_s`.
/// One instance per input partition; not safe for concurrent use.
class SentenceDecoder {
public:
    explicit SentenceDecoder(double fragment_timeout_s = 30.0)
        : fragment_timeout_s_(fragment_timeout_s) {}

    /// Returns the complete sentence, or nullopt while a group is still
    /// being buffered. Throws ChecksumMismatch / MalformedSentence for a bad
    /// line and IncompleteFragmentGroup when a continuation fragment has no
    /// live group to join (missing predecessor, expired, or out of order).
    std::optional<NmeaSentence> decode_sentence(std::string_view line, double rx_time);

    /// Drops groups older than the timeout; returns how many were dropped.
    std::size_t expire(double now);

    std::size_t pending_groups() const { return groups_.size(); }
    std::size_t incomplete_groups() const { return incomplete_; }

private:
    struct Group {
        std::vector<std::string> parts;
        int expected = 0;
        double first_seen = 0.0;
    };
    double fragment_timeout_s_;
    std::map<std::pair<char, int>, Group> groups_;
    std::size_t incomplete_ = 0;
};

/// Extracts a dynamic report for message types 1, 2, 3, 18 and 19. Other
/// types and "position not available" sentinels give nullopt. Throws
/// FieldOutOfRange for positions or speeds outside their valid ranges.
std::optional<DynamicReport> extract_dynamic(const NmeaSentence& sentence, double rx_time);

/// Encodes a position report as a single-fragment sentence line. Supports
/// types 1, 2, 3, 18 and 19. Positions are quantized to 1/10000 minute and
/// speed to 0.1 knot.
std::string encode_position_report(const DynamicReport& report, char channel = 'A');

/// Encodes a type 5 static/voyage message, split into fragments.
std::vector<std::string> encode_static_voyage(std::uint32_t mmsi, std::string_view name,
                                              int sequence_id, char channel = 'A');

/// Splits an armored payload into AIVDM fragment lines of at most 60 characters.
std::vector<std::string> make_sentences(const std::string& payload, int fill_bits, char channel,
                                        std::optional<int> sequence_id);

/// One input line of a reception-timestamped stream: either bare NMEA,
/// "epoch<TAB>NMEA", or an NMEA 4 tag block "\c:epoch*hh\NMEA".
struct StampedLine {
    std::optional<double> rx_time;
    std::string_view sentence;
};
StampedLine split_timestamp(std::string_view line);

/// Decodes a whole stream. Lines without a timestamp inherit the most recent
/// one. Failures are counted by error kind and skipped.
struct DecodeStats {
    std::size_t lines = 0;
    std::size_t reports = 0;
    std::size_t non_dynamic = 0;
    std::size_t unavailable = 0;
    std::map<std::string, std::size_t> errors;
};

class StreamDecoder {
public:
    explicit StreamDecoder(double fragment_timeout_s = 30.0) : sentences_(fragment_timeout_s) {}

    std::optional<DynamicReport> feed(std::string_view line);
    const DecodeStats& stats() const { return stats_; }

private:
    SentenceDecoder sentences_;
    double clock_ = 0.0;
    DecodeStats stats_;
};

}  // namespace aisgap::ais
