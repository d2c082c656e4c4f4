#include <doctest.h>

#include <cstdio>
#include <string>

#include "aisgap/ais.hpp"
#include "aisgap/error.hpp"
#include "aisgap/random.hpp"

using namespace aisgap;
using namespace aisgap::ais;

namespace {

// Independent checksum: XOR of the bytes between the leading '!' and '*'.
std::string with_checksum(const std::string& body) {
    unsigned x = 0;
    for (unsigned char c : body) x ^= c;
    char buf[8];
    std::snprintf(buf, sizeof buf, "*%02X", x);
    return "!" + body + buf;
}

// Independent armoring table: values 0..39 map to '0'..'W', 40..63 to '`'..'w'.
char armor(int v) { return static_cast<char>(v < 40 ? v + 48 : v + 56); }

// Packs (value, width) fields MSB first into an armored payload.
struct Packer {
    std::string bits;
    void put(std::int64_t v, int width) {
        for (int i = width - 1; i >= 0; --i) bits.push_back(((v >> i) & 1) ? '1' : '0');
    }
    std::pair<std::string, int> payload() const {
        std::string b = bits;
        const int fill = static_cast<int>((6 - b.size() % 6) % 6);
        b.append(static_cast<std::size_t>(fill), '0');
        std::string out;
        for (std::size_t i = 0; i < b.size(); i += 6) out.push_back(armor(std::stoi(b.substr(i, 6), nullptr, 2)));
        return {out, fill};
    }
};

std::string type18_line(std::uint32_t mmsi, int sog10, std::int64_t lon, std::int64_t lat) {
    Packer p;
    p.put(18, 6);
    p.put(0, 2);
    p.put(mmsi, 30);
    p.put(0, 8);
    p.put(sog10, 10);
    p.put(1, 1);
    p.put(lon, 28);
    p.put(lat, 27);
    p.put(0, 12);
    p.put(511, 9);
    p.put(60, 6);
    p.put(0, 2);
    p.put(0, 7);
    p.put(0, 20);
    const auto [payload, fill] = p.payload();
    return with_checksum("AIVDM,1,1,,B," + payload + "," + std::to_string(fill));
}

std::string type1_line(std::uint32_t mmsi, int sog10, std::int64_t lon, std::int64_t lat) {
    Packer p;
    p.put(1, 6);
    p.put(0, 2);
    p.put(mmsi, 30);
    p.put(0, 4);
    p.put(-128, 8);
    p.put(sog10, 10);
    p.put(0, 1);
    p.put(lon, 28);
    p.put(lat, 27);
    p.put(3600, 12);
    p.put(511, 9);
    p.put(60, 6);
    p.put(0, 6);
    p.put(0, 19);
    const auto [payload, fill] = p.payload();
    return with_checksum("AIVDM,1,1,,A," + payload + "," + std::to_string(fill));
}

}  // namespace

TEST_CASE("armoring alphabet") {
    CHECK(sixbit_value('0') == 0);
    CHECK(sixbit_value('w') == 63);
    CHECK(sixbit_value('W') == 39);
    CHECK(sixbit_value('`') == 40);
    for (int v = 0; v < 64; ++v) {
        CHECK(sixbit_value(armor(v)) == v);
        CHECK(sixbit_char(v) == armor(v));
    }
    for (char c : std::string("XYZ[\\]^_x!~ ")) CHECK_THROWS_AS(sixbit_value(c), Error);
    const BitReader zero("0", 0), ones("w", 0);
    CHECK(zero.unsigned_field(0, 6) == 0);
    CHECK(ones.unsigned_field(0, 6) == 0b111111);
}

TEST_CASE("checksum oracle") {
    const std::string body = "AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0";
    const std::string line = with_checksum(body);
    CHECK(line == "!AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0*4A");
    const auto s = parse_fragment(line);
    CHECK(s.checksum == 0x4A);
    CHECK(s.channel == 'A');
    CHECK(s.payload == "15RTgt0PAso;90TKcjM8h6g208CQ");

    std::string bad = line;
    bad.back() = 'B';
    try {
        parse_fragment(bad);
        FAIL("expected ChecksumMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ChecksumMismatch);
    }
}

TEST_CASE("single bit flips in the payload are rejected") {
    const std::string line = "!AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0*4A";
    const auto start = line.find(",A,") + 3;
    const auto end = line.find(",0*");
    for (auto i = start; i < end; ++i) {
        for (int b = 0; b < 7; ++b) {
            std::string flipped = line;
            flipped[i] = static_cast<char>(flipped[i] ^ (1 << b));
            try {
                parse_fragment(flipped);
                FAIL("flip accepted");
            } catch (const Error& e) {
                CHECK(e.code() == Errc::ChecksumMismatch);
            }
        }
    }
}

TEST_CASE("reference type 1 sentence") {
    SentenceDecoder dec;
    const auto s = dec.decode_sentence("!AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0*4A", 100.0);
    REQUIRE(s);
    const auto r = extract_dynamic(*s, 100.0);
    REQUIRE(r);
    CHECK(r->msg_type == 1);
    CHECK(r->mmsi == 371798000u);
    CHECK(r->sog == doctest::Approx(12.3));
    CHECK(r->lon == doctest::Approx(-123.395383).epsilon(1e-8));
    CHECK(r->lat == doctest::Approx(48.381633).epsilon(1e-8));
    CHECK(r->timestamp_s == 100.0);
}

TEST_CASE("type 18 with a valid position") {
    const auto line = type18_line(244123456, 87, 4 * 600000 + 12345, 52 * 600000 + 6789);
    SentenceDecoder dec;
    const auto r = extract_dynamic(*dec.decode_sentence(line, 5.0), 5.0);
    REQUIRE(r);
    CHECK(r->msg_type == 18);
    CHECK(r->mmsi == 244123456u);
    CHECK(r->sog == doctest::Approx(8.7));
    CHECK(r->lon == doctest::Approx(4.0 + 12345 / 600000.0));
    CHECK(r->lat == doctest::Approx(52.0 + 6789 / 600000.0));
}

TEST_CASE("sentinels and ranges") {
    SentenceDecoder dec;
    auto decode = [&](const std::string& l) { return extract_dynamic(*dec.decode_sentence(l, 0), 0); };
    CHECK_FALSE(decode(type1_line(1, 10, 181 * 600000, 0)));
    CHECK_FALSE(decode(type1_line(1, 10, 0, 91 * 600000)));
    CHECK_FALSE(decode(type1_line(1, 1023, 0, 0)));
    CHECK_THROWS_AS(decode(type1_line(1, 10, 0, 90 * 600000 + 1)), Error);
    CHECK_THROWS_AS(decode(type1_line(1, 10, -180 * 600000 - 1, 0)), Error);
    const auto wrap = decode(type1_line(1, 10, 180 * 600000, 0));
    REQUIRE(wrap);
    CHECK(wrap->lon == -180.0);
    try {
        decode(type1_line(1'000'000'000u, 10, 0, 0));
        FAIL("expected FieldOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::FieldOutOfRange);
    }
    const auto neg = decode(type1_line(1, 0, -(70 * 600000 + 1), -(33 * 600000 + 2)));
    REQUIRE(neg);
    CHECK(neg->lon == doctest::Approx(-(70 + 1 / 600000.0)));
    CHECK(neg->lat == doctest::Approx(-(33 + 2 / 600000.0)));
}

TEST_CASE("multi-fragment static report is not dynamic") {
    SentenceDecoder dec;
    const std::string a =
        "!AIVDM,2,1,1,A,55?MbV02;H;s<HtKR20EHE:0@T4@Dn2222222216L961O5Gf0NSQEp6ClRp8,0*1C";
    const std::string b = "!AIVDM,2,2,1,A,88888888880,2*25";
    CHECK_FALSE(dec.decode_sentence(a, 0));
    CHECK(dec.pending_groups() == 1);
    const auto s = dec.decode_sentence(b, 1);
    REQUIRE(s);
    CHECK(s->fragment_count == 2);
    CHECK(s->payload.size() == 71);
    CHECK_FALSE(extract_dynamic(*s, 1));
    CHECK(BitReader(s->payload, s->fill_bits).unsigned_field(8, 30) == 351759000u);
    CHECK(dec.pending_groups() == 0);
}

TEST_CASE("fragment grouping errors") {
    SentenceDecoder dec;
    const auto lines = encode_static_voyage(211000001, "TEST VESSEL", 3, 'B');
    REQUIRE(lines.size() >= 2);

    SUBCASE("continuation without a head") {
        try {
            dec.decode_sentence(lines[1], 0);
            FAIL("expected IncompleteFragmentGroup");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::IncompleteFragmentGroup);
        }
    }
    SUBCASE("expired group") {
        CHECK_FALSE(dec.decode_sentence(lines[0], 0));
        CHECK(dec.expire(100) == 1);
        CHECK_THROWS_AS(dec.decode_sentence(lines[1], 100), Error);
        // The expired group and the orphaned continuation.
        CHECK(dec.incomplete_groups() == 2);
    }
    SUBCASE("restarted group supersedes") {
        CHECK_FALSE(dec.decode_sentence(lines[0], 0));
        CHECK_FALSE(dec.decode_sentence(lines[0], 1));
        CHECK(dec.incomplete_groups() == 1);
        CHECK(dec.decode_sentence(lines[1], 2));
    }
    SUBCASE("interleaved sequence ids") {
        const auto other = encode_static_voyage(211000002, "OTHER", 4, 'B');
        CHECK_FALSE(dec.decode_sentence(lines[0], 0));
        CHECK_FALSE(dec.decode_sentence(other[0], 0));
        const auto s1 = dec.decode_sentence(other[1], 0);
        const auto s2 = dec.decode_sentence(lines[1], 0);
        REQUIRE(s1);
        REQUIRE(s2);
        CHECK(BitReader(s1->payload, s1->fill_bits).unsigned_field(8, 30) == 211000002u);
        CHECK(BitReader(s2->payload, s2->fill_bits).unsigned_field(8, 30) == 211000001u);
    }
}

TEST_CASE("malformed framing") {
    const char* bad[] = {
        "",
        "AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0*4A",
        "!GPGGA,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0*4A",
        "!AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0",
        "!AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0*4",
    };
    for (const char* l : bad) CHECK_THROWS_AS(parse_fragment(l), Error);
    CHECK_THROWS_AS(parse_fragment(with_checksum("AIVDM,1,1,,A,15RT,0,9")), Error);
    CHECK_THROWS_AS(parse_fragment(with_checksum("AIVDM,0,1,,A,15RT,0")), Error);
    CHECK_THROWS_AS(parse_fragment(with_checksum("AIVDM,1,2,,A,15RT,0")), Error);
    CHECK_THROWS_AS(parse_fragment(with_checksum("AIVDM,1,1,,A,15R~,0")), Error);
    CHECK_THROWS_AS(parse_fragment(with_checksum("AIVDM,1,1,,A,15RT,6")), Error);
    CHECK(parse_fragment(with_checksum("AIVDO,1,1,,2,15RT,0")).own_vessel);
    CHECK(parse_fragment(with_checksum("AIVDO,1,1,,2,15RT,0")).channel == 'B');
    // Short payloads parse but cannot hold a position report.
    SentenceDecoder dec;
    const auto s = dec.decode_sentence(with_checksum("AIVDM,1,1,,A,15RT,0"), 0);
    REQUIRE(s);
    CHECK_THROWS_AS(extract_dynamic(*s, 0), Error);
}

TEST_CASE("encoder round trip") {
    rnd::Engine rng(17);
    SentenceDecoder dec;
    for (int i = 0; i < 2000; ++i) {
        DynamicReport r;
        const int types[] = {1, 2, 3, 18, 19};
        r.msg_type = types[rnd::below(rng, 5)];
        r.mmsi = static_cast<std::uint32_t>(rnd::below(rng, 1'000'000'000));
        r.lat = rnd::uniform(rng, -90, 90);
        r.lon = rnd::uniform(rng, -180, 180);
        r.sog = rnd::uniform(rng, 0, 102.2);
        const auto line = encode_position_report(r, i % 2 ? 'A' : 'B');
        const auto s = dec.decode_sentence(line, 1.0);
        REQUIRE(s);
        const auto back = extract_dynamic(*s, 1.0);
        REQUIRE(back);
        CHECK(back->mmsi == r.mmsi);
        CHECK(back->msg_type == r.msg_type);
        CHECK(back->lat == std::round(r.lat * 600000) / 600000);
        const double lon_q = std::round(r.lon * 600000) / 600000;
        CHECK(back->lon == (lon_q == 180.0 ? -180.0 : lon_q));
        CHECK(back->sog == std::round(r.sog * 10) / 10);
    }
}

TEST_CASE("timestamp prefixes") {
    const auto plain = split_timestamp("!AIVDM,x");
    CHECK_FALSE(plain.rx_time);
    CHECK(plain.sentence == "!AIVDM,x");
    const auto tab = split_timestamp("1704067200.5\t!AIVDM,x");
    REQUIRE(tab.rx_time);
    CHECK(*tab.rx_time == 1704067200.5);
    CHECK(tab.sentence == "!AIVDM,x");
    const auto tag = split_timestamp("\\c:1704067201*4A\\!AIVDM,x");
    REQUIRE(tag.rx_time);
    CHECK(*tag.rx_time == 1704067201.0);
    CHECK(tag.sentence == "!AIVDM,x");
}

TEST_CASE("stream decoder counts failures by kind") {
    StreamDecoder sd;
    const std::string good = "!AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0*4A";
    CHECK(sd.feed("10\t" + good));
    CHECK(sd.feed(good)->timestamp_s == 10.0);
    CHECK_FALSE(sd.feed("11\t" + good.substr(0, good.size() - 1) + "B"));
    CHECK_FALSE(sd.feed("garbage"));
    CHECK_FALSE(sd.feed("12\t" + type1_line(5, 10, 181 * 600000, 0)));
    const auto& st = sd.stats();
    CHECK(st.lines == 5);
    CHECK(st.reports == 2);
    CHECK(st.unavailable == 1);
    CHECK(st.errors.at("ChecksumMismatch") == 1);
    CHECK(st.errors.at("MalformedSentence") == 1);
}

TEST_CASE("decoder never fails untyped on arbitrary input") {
    rnd::Engine rng(99);
    StreamDecoder sd;
    const std::string seed_line = "!AIVDM,1,1,,A,15RTgt0PAso;90TKcjM8h6g208CQ,0*4A";
    const std::string alphabet = "!AIVDM,*0123456789ABCDEFw`;:<>\\c\t-. ";
    for (int i = 0; i < 20000; ++i) {
        std::string l;
        if (i % 2) {
            l = seed_line;
            const auto edits = 1 + rnd::below(rng, 4);
            for (std::uint64_t e = 0; e < edits; ++e) {
                const auto pos = rnd::below(rng, l.size());
                switch (rnd::below(rng, 3)) {
                    case 0: l[pos] = static_cast<char>(rnd::below(rng, 256)); break;
                    case 1: l.erase(pos, 1); break;
                    default: l.insert(pos, 1, alphabet[rnd::below(rng, alphabet.size())]);
                }
            }
        } else {
            const auto n = rnd::below(rng, 90);
            for (std::uint64_t k = 0; k < n; ++k)
                l.push_back(k % 3 ? alphabet[rnd::below(rng, alphabet.size())]
                                  : static_cast<char>(rnd::below(rng, 256)));
        }
        CHECK_NOTHROW(sd.feed(l));
        try {
            SentenceDecoder dec;
            if (const auto s = dec.decode_sentence(l, 0)) (void)extract_dynamic(*s, 0);
        } catch (const Error&) {
        }
    }
    CHECK(sd.stats().lines == 20000);
}
