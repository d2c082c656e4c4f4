#include "aisgap/ais.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "aisgap/error.hpp"

namespace aisgap::ais {

namespace {

constexpr std::int64_t kLonUnavailable = 181 * 600000;
constexpr std::int64_t kLatUnavailable = 91 * 600000;
constexpr std::uint64_t kSogUnavailable = 1023;

[[noreturn]] void malformed(const std::string& what) {
    throw Error(Errc::MalformedSentence, what);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ' ||
                          s.back() == '\t'))
        s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

int parse_small_int(std::string_view s, const char* what) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        malformed(std::string("bad ") + what + " field '" + std::string(s) + "'");
    return v;
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

// 6-bit text used in static messages: '@'..'_' -> 0..31, ' '..'?' -> 32..63.
int text_code(char c) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    if (c >= 64 && c <= 95) return c - 64;
    if (c >= 32 && c <= 63) return c;
    return 0;
}

std::size_t required_bits(int type) { return type == 19 ? 312 : 168; }

}  // namespace

std::uint8_t nmea_checksum(std::string_view body) {
    std::uint8_t x = 0;
    for (char c : body) x ^= static_cast<std::uint8_t>(c);
    return x;
}

int sixbit_value(char c) {
    const int v = static_cast<unsigned char>(c);
    if (v >= 48 && v <= 87) return v - 48;
    if (v >= 96 && v <= 119) return v - 56;
    malformed(std::string("invalid payload character '") + c + "'");
}

char sixbit_char(int value) {
    return static_cast<char>(value < 40 ? value + 48 : value + 56);
}

NmeaSentence parse_fragment(std::string_view line) {
    line = trim(line);
    if (!(line.starts_with("!AIVDM") || line.starts_with("!AIVDO")))
        malformed("sentence must start with !AIVDM or !AIVDO");
    const std::size_t star = line.rfind('*');
    if (star == std::string_view::npos || star + 3 != line.size())
        malformed("missing or misplaced checksum");
    const int hi = hex_digit(line[star + 1]);
    const int lo = hex_digit(line[star + 2]);
    if (hi < 0 || lo < 0) malformed("checksum is not two hex digits");
    const auto stated = static_cast<std::uint8_t>(hi * 16 + lo);
    const std::string_view body = line.substr(1, star - 1);
    const std::uint8_t actual = nmea_checksum(body);
    if (stated != actual) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "stated %02X, computed %02X", stated, actual);
        throw Error(Errc::ChecksumMismatch, buf);
    }

    const auto fields = split(body, ',');
    if (fields.size() != 7) malformed("expected 7 fields, got " + std::to_string(fields.size()));
    NmeaSentence s;
    s.raw_line = std::string(line);
    s.own_vessel = fields[0] == "AIVDO";
    s.fragment_count = parse_small_int(fields[1], "fragment count");
    s.fragment_index = parse_small_int(fields[2], "fragment index");
    if (s.fragment_count < 1 || s.fragment_count > 9 || s.fragment_index < 1 ||
        s.fragment_index > s.fragment_count)
        malformed("fragment index/count out of range");
    if (!fields[3].empty()) s.sequence_id = parse_small_int(fields[3], "sequence id");
    if (fields[4].size() > 1) malformed("bad channel field");
    s.channel = fields[4].empty() ? 'A' : fields[4][0];
    if (s.channel == '1') s.channel = 'A';
    if (s.channel == '2') s.channel = 'B';
    s.payload = std::string(fields[5]);
    if (s.payload.empty()) malformed("empty payload");
    for (char c : s.payload) (void)sixbit_value(c);
    s.fill_bits = parse_small_int(fields[6], "fill bits");
    if (s.fill_bits < 0 || s.fill_bits > 5) malformed("fill bits out of range");
    s.checksum = stated;
    return s;
}

BitReader::BitReader(std::string_view payload, int fill_bits) {
    bits_.reserve(payload.size() * 6);
    for (char c : payload) {
        const int v = sixbit_value(c);
        for (int b = 5; b >= 0; --b) bits_.push_back(((v >> b) & 1) != 0);
    }
    const auto drop = static_cast<std::size_t>(fill_bits);
    bits_.resize(bits_.size() >= drop ? bits_.size() - drop : 0);
}

std::uint64_t BitReader::unsigned_field(std::size_t start, std::size_t len) const {
    if (start + len > bits_.size())
        malformed("field at bit " + std::to_string(start) + " exceeds payload of " +
                  std::to_string(bits_.size()) + " bits");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < len; ++i) v = (v << 1) | (bits_[start + i] ? 1u : 0u);
    return v;
}

std::int64_t BitReader::signed_field(std::size_t start, std::size_t len) const {
    const std::uint64_t u = unsigned_field(start, len);
    if (len > 0 && (u >> (len - 1)) & 1u)
        return static_cast<std::int64_t>(u) - (static_cast<std::int64_t>(1) << len);
    return static_cast<std::int64_t>(u);
}

void BitWriter::put_unsigned(std::uint64_t value, std::size_t len) {
    for (std::size_t i = len; i-- > 0;) bits_.push_back(((value >> i) & 1u) != 0);
}

void BitWriter::put_signed(std::int64_t value, std::size_t len) {
    const std::uint64_t mask = len >= 64 ? ~0ull : ((1ull << len) - 1);
    put_unsigned(static_cast<std::uint64_t>(value) & mask, len);
}

std::pair<std::string, int> BitWriter::armor() const {
    std::string out;
    const std::size_t chars = (bits_.size() + 5) / 6;
    const int fill = static_cast<int>(chars * 6 - bits_.size());
    for (std::size_t c = 0; c < chars; ++c) {
        int v = 0;
        for (std::size_t b = 0; b < 6; ++b) {
            const std::size_t i = c * 6 + b;
            v = (v << 1) | (i < bits_.size() && bits_[i] ? 1 : 0);
        }
        out.push_back(sixbit_char(v));
    }
    return {out, fill};
}

std::optional<NmeaSentence> SentenceDecoder::decode_sentence(std::string_view line,
                                                             double rx_time) {
    NmeaSentence s = parse_fragment(line);
    expire(rx_time);
    if (s.fragment_count == 1) return s;

    const std::pair<char, int> key{s.channel, s.sequence_id.value_or(-1)};
    auto it = groups_.find(key);
    if (s.fragment_index == 1) {
        if (it != groups_.end()) {
            ++incomplete_;
            groups_.erase(it);
        }
        groups_[key] = Group{{s.payload}, s.fragment_count, rx_time};
        return std::nullopt;
    }
    if (it == groups_.end() || it->second.expected != s.fragment_count ||
        static_cast<int>(it->second.parts.size()) != s.fragment_index - 1) {
        if (it != groups_.end()) groups_.erase(it);
        ++incomplete_;
        throw Error(Errc::IncompleteFragmentGroup,
                    "fragment " + std::to_string(s.fragment_index) + "/" +
                        std::to_string(s.fragment_count) + " has no matching group");
    }
    it->second.parts.push_back(s.payload);
    if (static_cast<int>(it->second.parts.size()) < s.fragment_count) return std::nullopt;

    std::string joined;
    for (const auto& p : it->second.parts) joined += p;
    groups_.erase(it);
    s.payload = std::move(joined);
    return s;
}

std::size_t SentenceDecoder::expire(double now) {
    std::size_t dropped = 0;
    for (auto it = groups_.begin(); it != groups_.end();) {
        if (now - it->second.first_seen > fragment_timeout_s_) {
            it = groups_.erase(it);
            ++dropped;
        } else {
            ++it;
        }
    }
    incomplete_ += dropped;
    return dropped;
}

std::optional<DynamicReport> extract_dynamic(const NmeaSentence& sentence, double rx_time) {
    const BitReader bits(sentence.payload, sentence.fill_bits);
    const auto type = static_cast<int>(bits.unsigned_field(0, 6));
    if (!(type == 1 || type == 2 || type == 3 || type == 18 || type == 19)) return std::nullopt;
    if (bits.size() < required_bits(type))
        malformed("type " + std::to_string(type) + " payload has " +
                  std::to_string(bits.size()) + " bits");

    const bool class_a = type <= 3;
    const std::size_t sog_at = class_a ? 50 : 46;
    const std::size_t lon_at = class_a ? 61 : 57;
    const std::size_t lat_at = class_a ? 89 : 85;

    DynamicReport r;
    r.msg_type = type;
    r.timestamp_s = rx_time;
    r.mmsi = static_cast<std::uint32_t>(bits.unsigned_field(8, 30));
    const std::uint64_t sog_raw = bits.unsigned_field(sog_at, 10);
    const std::int64_t lon_raw = bits.signed_field(lon_at, 28);
    const std::int64_t lat_raw = bits.signed_field(lat_at, 27);

    if (lon_raw == kLonUnavailable || lat_raw == kLatUnavailable || sog_raw == kSogUnavailable)
        return std::nullopt;
    if (r.mmsi > 999'999'999u)
        throw Error(Errc::FieldOutOfRange, "mmsi " + std::to_string(r.mmsi));
    if (lat_raw < -90 * 600000 || lat_raw > 90 * 600000)
        throw Error(Errc::FieldOutOfRange, "latitude raw value " + std::to_string(lat_raw));
    if (lon_raw < -180 * 600000 || lon_raw > 180 * 600000)
        throw Error(Errc::FieldOutOfRange, "longitude raw value " + std::to_string(lon_raw));

    r.lat = static_cast<double>(lat_raw) / 600000.0;
    r.lon = lon_raw == 180 * 600000 ? -180.0 : static_cast<double>(lon_raw) / 600000.0;
    r.sog = static_cast<double>(sog_raw) / 10.0;
    return r;
}

std::vector<std::string> make_sentences(const std::string& payload, int fill_bits, char channel,
                                        std::optional<int> sequence_id) {
    constexpr std::size_t kMaxChars = 60;
    const std::size_t count = std::max<std::size_t>(1, (payload.size() + kMaxChars - 1) / kMaxChars);
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < count; ++i) {
        const std::string part = payload.substr(i * kMaxChars, kMaxChars);
        const int fill = i + 1 == count ? fill_bits : 0;
        std::string seq = count > 1 && sequence_id ? std::to_string(*sequence_id) : "";
        const std::string body = "AIVDM," + std::to_string(count) + "," + std::to_string(i + 1) +
                                 "," + seq + "," + std::string(1, channel) + "," + part + "," +
                                 std::to_string(fill);
        char cs[4];
        std::snprintf(cs, sizeof cs, "%02X", nmea_checksum(body));
        lines.push_back("!" + body + "*" + cs);
    }
    return lines;
}

std::string encode_position_report(const DynamicReport& r, char channel) {
    const int type = r.msg_type;
    if (!(type == 1 || type == 2 || type == 3 || type == 18 || type == 19))
        throw Error(Errc::InvalidConfig, "cannot encode message type " + std::to_string(type));
    const auto lon_raw = static_cast<std::int64_t>(std::llround(r.lon * 600000.0));
    const auto lat_raw = static_cast<std::int64_t>(std::llround(r.lat * 600000.0));
    const auto sog_raw =
        static_cast<std::uint64_t>(std::min<long long>(1022, std::llround(std::max(0.0, r.sog) * 10.0)));
    const auto second = static_cast<std::uint64_t>(
        static_cast<long long>(std::floor(r.timestamp_s)) % 60);

    BitWriter w;
    w.put_unsigned(static_cast<std::uint64_t>(type), 6);
    w.put_unsigned(0, 2);  // repeat indicator
    w.put_unsigned(r.mmsi, 30);
    if (type <= 3) {
        w.put_unsigned(r.sog < 0.5 ? 1 : 0, 4);  // nav status: at anchor / under way
        w.put_signed(-128, 8);                   // rate of turn not available
        w.put_unsigned(sog_raw, 10);
        w.put_unsigned(0, 1);
        w.put_signed(lon_raw, 28);
        w.put_signed(lat_raw, 27);
        w.put_unsigned(3600, 12);  // course not available
        w.put_unsigned(511, 9);    // heading not available
        w.put_unsigned(second, 6);
        w.put_unsigned(0, 2);
        w.put_unsigned(0, 3);
        w.put_unsigned(0, 1);
        w.put_unsigned(0, 19);
    } else {
        w.put_unsigned(0, 8);
        w.put_unsigned(sog_raw, 10);
        w.put_unsigned(0, 1);
        w.put_signed(lon_raw, 28);
        w.put_signed(lat_raw, 27);
        w.put_unsigned(3600, 12);
        w.put_unsigned(511, 9);
        w.put_unsigned(second, 6);
        if (type == 18) {
            w.put_unsigned(0, 2);
            w.put_unsigned(1, 1);  // carrier-sense unit
            w.put_unsigned(0, 6);
            w.put_unsigned(0, 20);
        } else {
            w.put_unsigned(0, 4);
            for (int i = 0; i < 20; ++i) w.put_unsigned(0, 6);  // name "@@@..."
            w.put_unsigned(30, 8);                              // ship type: fishing
            w.put_unsigned(0, 9 + 9 + 6 + 6);
            w.put_unsigned(1, 4);  // EPFD: GPS
            w.put_unsigned(0, 1 + 1 + 1 + 4);
        }
    }
    const auto [payload, fill] = w.armor();
    return make_sentences(payload, fill, channel, std::nullopt).front();
}

std::vector<std::string> encode_static_voyage(std::uint32_t mmsi, std::string_view name,
                                              int sequence_id, char channel) {
    BitWriter w;
    w.put_unsigned(5, 6);
    w.put_unsigned(0, 2);
    w.put_unsigned(mmsi, 30);
    w.put_unsigned(0, 2);
    w.put_unsigned(0, 30);  // IMO
    for (int i = 0; i < 7; ++i) w.put_unsigned(0, 6);
    for (std::size_t i = 0; i < 20; ++i)
        w.put_unsigned(static_cast<std::uint64_t>(i < name.size() ? text_code(name[i]) : 0), 6);
    w.put_unsigned(70, 8);  // cargo
    w.put_unsigned(0, 9 + 9 + 6 + 6);
    w.put_unsigned(1, 4);
    w.put_unsigned(0, 4 + 5 + 5 + 6 + 8);
    for (int i = 0; i < 20; ++i) w.put_unsigned(0, 6);
    w.put_unsigned(0, 2);
    const auto [payload, fill] = w.armor();
    return make_sentences(payload, fill, channel, sequence_id);
}

StampedLine split_timestamp(std::string_view line) {
    line = trim(line);
    StampedLine out{std::nullopt, line};
    if (line.starts_with('\\')) {
        const std::size_t close = line.find('\\', 1);
        if (close == std::string_view::npos) return out;
        const std::string_view tag = line.substr(1, close - 1);
        out.sentence = line.substr(close + 1);
        const std::string_view fields = tag.substr(0, tag.find('*'));
        for (auto f : split(fields, ',')) {
            if (f.starts_with("c:")) {
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(f.data() + 2, f.data() + f.size(), v);
                if (ec == std::errc() && ptr == f.data() + f.size()) out.rx_time = v;
            }
        }
        return out;
    }
    const std::size_t tab = line.find('\t');
    if (tab != std::string_view::npos) {
        const std::string_view stamp = line.substr(0, tab);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(stamp.data(), stamp.data() + stamp.size(), v);
        if (ec != std::errc() || ptr != stamp.data() + stamp.size())
            malformed("bad reception timestamp '" + std::string(stamp) + "'");
        out.rx_time = v;
        out.sentence = line.substr(tab + 1);
    }
    return out;
}

std::optional<DynamicReport> StreamDecoder::feed(std::string_view line) {
    ++stats_.lines;
    try {
        const StampedLine stamped = split_timestamp(line);
        if (stamped.rx_time) clock_ = *stamped.rx_time;
        const auto sentence = sentences_.decode_sentence(stamped.sentence, clock_);
        if (!sentence) return std::nullopt;
        const auto report = extract_dynamic(*sentence, clock_);
        if (!report) {
            const BitReader bits(sentence->payload, sentence->fill_bits);
            const auto type = bits.size() >= 6 ? bits.unsigned_field(0, 6) : 0;
            if (type == 1 || type == 2 || type == 3 || type == 18 || type == 19)
                ++stats_.unavailable;
            else
                ++stats_.non_dynamic;
            return std::nullopt;
        }
        ++stats_.reports;
        return report;
    } catch (const Error& e) {
        ++stats_.errors[std::string(to_string(e.code()))];
        return std::nullopt;
    }
}

}  // namespace aisgap::ais
