#include <doctest.h>

#include <cmath>
#include <random>

#include "ampsentinel/analytics.hpp"
#include "ampsentinel/text.hpp"
#include "ampsentinel/reports.hpp"
#include <filesystem>
#include <fstream>
#include "oracles.hpp"

using namespace ampsentinel;
using testutil::make_event;

TEST_CASE("cidr parsing") {
    auto c = parse_cidr("192.168.1.0/24");
    REQUIRE(c.has_value());
    CHECK(c->prefix_len == 24);
    CHECK(c->contains(0xC0A8014Du));   // 192.168.1.77
    CHECK(!c->contains(0xC0A80201u));  // 192.168.2.1
    CHECK(parse_cidr("10.0.0.1")->prefix_len == 32);
    CHECK(parse_cidr("10.0.0.77/24")->addr == 0x0A000000u);  // host bits masked
    CHECK(parse_cidr("0.0.0.0/0")->contains(0xDEADBEEFu));
    CHECK(!parse_cidr("10.0.0.1/33").has_value());
    CHECK(!parse_cidr("10.0.0/24").has_value());
    CHECK(format_cidr(*parse_cidr("10.1.2.0/23")) == "10.1.2.0/23");
}

TEST_CASE("protocol stats on a single event") {
    std::vector<AttackEvent> events = {
        make_event(7, "NTP", 0, 59'999, 2'000'000'000, 100'000, 50, 15'000'000'000ull, 31'000'000)};
    auto stats = protocol_stats(events);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].protocol == "NTP");
    CHECK(stats[0].max_gbps == doctest::Approx(2.0));
    CHECK(stats[0].avg_gbps == doctest::Approx(2.0));
    CHECK(stats[0].max_mpps == doctest::Approx(0.1));
    CHECK(stats[0].target_count == 1);
    CHECK(stats[0].attack_count == 1);
    CHECK(stats[0].avg_duration_min == doctest::Approx(1.0));
    CHECK(stats[0].max_reflectors == 50);
    CHECK(stats[0].avg_pkt_size_bytes == doctest::Approx(15e9 / 31e6));
}

TEST_CASE("protocol stats equal a brute-force recomputation on random corpora") {
    std::mt19937_64 rng(4242);
    const char* protos[] = {"DNS", "NTP", "CLDAP", "SSDP", "Memcached"};
    std::vector<AttackEvent> events;
    for (int i = 0; i < 10'000; ++i) {
        const std::int64_t start = static_cast<std::int64_t>(rng() % 1'000) * 60'000;
        const std::int64_t windows = 1 + static_cast<std::int64_t>(rng() % 30);
        const std::uint64_t packets = 1'000'000 + rng() % 50'000'000;
        const std::uint64_t bytes = packets * (100 + rng() % 1400);
        events.push_back(make_event(static_cast<IPv4>(rng() % 200), protos[rng() % 5], start,
                                    start + windows * 60'000 - 1,
                                    1'000'000'001 + static_cast<std::int64_t>(rng() % 90'000'000'000ull),
                                    static_cast<double>(rng() % 10'000'000) + 1,
                                    1 + static_cast<std::int64_t>(rng() % 3000), bytes, packets));
    }
    auto stats = protocol_stats(events);
    auto oracle = testutil::oracle_protocol_stats(events);
    REQUIRE(stats.size() == oracle.size());
    for (const ProtocolStats& row : stats) {
        const auto& expect = oracle.at(row.protocol);
        CHECK(row.max_gbps == doctest::Approx(expect.max_gbps).epsilon(1e-12));
        CHECK(row.avg_gbps == doctest::Approx(expect.avg_gbps).epsilon(1e-12));
        CHECK(row.max_mpps == doctest::Approx(expect.max_mpps).epsilon(1e-12));
        CHECK(row.avg_mpps == doctest::Approx(expect.avg_mpps).epsilon(1e-12));
        CHECK(row.target_count == expect.targets);
        CHECK(row.attack_count == expect.attacks);
        CHECK(row.max_duration_days == doctest::Approx(expect.max_duration_days).epsilon(1e-12));
        CHECK(row.avg_duration_min == doctest::Approx(expect.avg_duration_min).epsilon(1e-12));
        CHECK(row.max_reflectors == expect.max_reflectors);
        CHECK(row.avg_reflectors == doctest::Approx(expect.avg_reflectors).epsilon(1e-12));
        CHECK(row.avg_pkt_size_bytes == doctest::Approx(expect.avg_pkt_size).epsilon(1e-9));
        CHECK(row.pkt_size_std_bytes == doctest::Approx(expect.pkt_size_std).epsilon(1e-6));
        CHECK(row.max_gbps >= row.avg_gbps);
        CHECK(row.max_mpps >= row.avg_mpps);
    }
    CHECK(protocol_stats({}).empty());
}

TEST_CASE("multi-protocol victim shares") {
    SUBCASE("half the victims see two protocols") {
        std::vector<AttackEvent> events = {
            make_event(1, "DNS", 0, 59'999, 2e9, 1000, 10),
            make_event(1, "NTP", 0, 59'999, 2e9, 1000, 10),
            make_event(2, "DNS", 0, 59'999, 2e9, 1000, 10),
        };
        auto report = multi_protocol_victims(events);
        CHECK(report.victim_count == 2);
        CHECK(report.share_ge2 == doctest::Approx(0.5));
        CHECK(report.share_gt2 == doctest::Approx(0.0));
        CHECK(report.per_victim_protocol_counts.at(1) == 2);
    }
    SUBCASE("single-protocol corpus has zero shares") {
        std::vector<AttackEvent> events = {make_event(1, "DNS", 0, 59'999, 2e9, 1000, 10),
                                           make_event(2, "DNS", 0, 59'999, 2e9, 1000, 10)};
        auto report = multi_protocol_victims(events);
        CHECK(report.share_ge2 == 0.0);
    }
    SUBCASE("three protocols count toward the gt2 share") {
        std::vector<AttackEvent> events = {make_event(1, "DNS", 0, 59'999, 2e9, 1000, 10),
                                           make_event(1, "NTP", 0, 59'999, 2e9, 1000, 10),
                                           make_event(1, "CLDAP", 0, 59'999, 2e9, 1000, 10)};
        auto report = multi_protocol_victims(events);
        CHECK(report.share_ge2 == doctest::Approx(1.0));
        CHECK(report.share_gt2 == doctest::Approx(1.0));
    }
}

TEST_CASE("rate/volume regression") {
    SUBCASE("noiseless proportional data recovers the slope exactly") {
        const double c = 1474 * 8;  // bits per packet
        std::vector<AttackEvent> events;
        std::mt19937_64 rng(11);
        for (int i = 0; i < 40; ++i) {
            const double pps = 50'000 + static_cast<double>(rng() % 5'000'000);
            events.push_back(make_event(static_cast<IPv4>(i), "DNS", 0, 59'999,
                                        static_cast<std::int64_t>(pps * c), pps, 10));
        }
        auto fit = fit_rate_volume(events);
        CHECK(std::abs(fit.slope_bits_per_packet - c) / c < 1e-6);
        CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.segment_count == 1);
        CHECK(std::abs(fit.intercept_bps) < 1.0);
    }
    SUBCASE("two amplification modes trigger the segmented refit") {
        std::vector<AttackEvent> events;
        std::mt19937_64 rng(12);
        for (int i = 0; i < 30; ++i) {
            const double pps = 100'000 + static_cast<double>(rng() % 2'000'000);
            const double ratio = i % 2 == 0 ? 347 * 8 : 1216 * 8;
            events.push_back(make_event(static_cast<IPv4>(i), "WS-Discovery", 0, 59'999,
                                        static_cast<std::int64_t>(pps * ratio), pps, 10));
        }
        auto fit = fit_rate_volume(events);
        CHECK(fit.segment_count == 2);
        REQUIRE(fit.segments.size() == 2);
        CHECK(fit.segments[0].slope_bits_per_packet == doctest::Approx(347 * 8).epsilon(1e-6));
        CHECK(fit.segments[1].slope_bits_per_packet == doctest::Approx(1216 * 8).epsilon(1e-6));
        CHECK(fit.segments[0].event_count + fit.segments[1].event_count == 30);
    }
    SUBCASE("fewer than three events is an error") {
        std::vector<AttackEvent> events = {make_event(1, "DNS", 0, 59'999, 2e9, 1000, 10),
                                           make_event(2, "DNS", 0, 59'999, 2e9, 1000, 10)};
        CHECK_THROWS_AS(fit_rate_volume(events), InsufficientDataError);
    }
}

TEST_CASE("theoretical maximum estimate") {
    constexpr std::int64_t kWeek = 7ll * 86'400'000;
    SUBCASE("uniform corpus matches the stated arithmetic") {
        // avg 2 Gbps over avg 100 reflectors -> 20 Mbps per reflector;
        // 1000 unique reflectors in the week -> 20 Gbps.
        std::vector<AttackEvent> events;
        for (int i = 0; i < 10; ++i) {
            auto ev = make_event(7, "DNS", static_cast<std::int64_t>(i) * 3'600'000,
                                 static_cast<std::int64_t>(i) * 3'600'000 + 59'999, 2'000'000'000,
                                 1000, 100, 15'000'000'000ull, 10'000'000,
                                 0x0A000000u + static_cast<IPv4>(i) * 100);
            events.push_back(ev);
        }
        events.push_back(make_event(7, "DNS", kWeek + 60'000, kWeek + 119'999, 2'000'000'000, 1000,
                                    100, 15'000'000'000ull, 10'000'000, 0x0BBB0000u));
        // 10 events inside the horizon, disjoint reflector blocks of 100 each.
        const std::int64_t estimate = theoretical_max_bps(events);
        CHECK(estimate == doctest::Approx(20'000'000'000.0).epsilon(1e-9));
    }
    SUBCASE("splitting one event in two leaves the estimate unchanged") {
        std::vector<AttackEvent> events;
        std::mt19937_64 rng(5);
        for (int i = 0; i < 8; ++i) {
            const std::int64_t start = static_cast<std::int64_t>(i) * 86'400'000;
            const std::int64_t windows = 2 + static_cast<std::int64_t>(rng() % 6);
            const std::uint64_t bytes = 60'000'000'000ull + rng() % 60'000'000'000ull;
            events.push_back(make_event(static_cast<IPv4>(i), "NTP", start,
                                        start + windows * 60'000 - 1, 3'000'000'000, 5000,
                                        50 + static_cast<std::int64_t>(rng() % 100), bytes,
                                        bytes / 481, 0x0A000000u + static_cast<IPv4>(i) * 200));
        }
        const std::int64_t whole = theoretical_max_bps(events);

        // split the first event at a window boundary
        AttackEvent original = events[0];
        AttackEvent first = original, second = original;
        first.end_ms = original.start_ms + 60'000 - 1;
        first.total_bytes = original.total_bytes / (original.span_ms() / 60'000);
        first.total_packets = original.total_packets / (original.span_ms() / 60'000);
        second.start_ms = first.end_ms + 1;
        second.total_bytes = original.total_bytes - first.total_bytes;
        second.total_packets = original.total_packets - first.total_packets;
        events[0] = first;
        events.push_back(second);
        const std::int64_t split = theoretical_max_bps(events);
        CHECK(std::abs(static_cast<double>(whole - split)) /
                  static_cast<double>(whole) < 1e-9);
    }
    SUBCASE("a corpus shorter than the horizon is an error") {
        std::vector<AttackEvent> events = {make_event(1, "DNS", 0, 59'999, 2e9, 1000, 10),
                                           make_event(2, "DNS", 3'600'000, 3'659'999, 2e9, 1000, 10)};
        CHECK_THROWS_AS(theoretical_max_bps(events), InsufficientDataError);
    }
}

TEST_CASE("capacity impact utilizations and longest-prefix matching") {
    std::vector<CapacityRecord> capacity = {
        {"memberA", *parse_cidr("10.1.0.0/16"), 10'000'000'000},
        {"memberB", *parse_cidr("10.1.2.0/24"), 1'000'000'000},
        {"memberC", *parse_cidr("192.0.2.5/32"), 2'000'000'000},
    };
    std::vector<AttackEvent> events = {
        make_event(*parse_ipv4("10.1.9.9"), "DNS", 0, 59'999, 5'000'000'000, 1000, 10),
        make_event(*parse_ipv4("10.1.2.3"), "DNS", 0, 59'999, 1'200'000'000, 1000, 10),
        make_event(*parse_ipv4("192.0.2.5"), "NTP", 0, 59'999, 12'000'000'000, 1000, 10),
        make_event(*parse_ipv4("198.51.100.1"), "NTP", 0, 59'999, 2'000'000'000, 1000, 10),
    };
    auto report = capacity_impact(events, capacity);
    CHECK(report.total_events == 4);
    CHECK(report.matched_events == 3);
    CHECK(report.unmatched_events == 1);
    CHECK(report.per_event[0].member_id == "memberA");
    CHECK(report.per_event[0].utilization == doctest::Approx(0.5));
    CHECK(report.per_event[1].member_id == "memberB");  // /24 beats /16
    CHECK(report.per_event[1].utilization == doctest::Approx(1.2));
    CHECK(report.per_event[2].utilization == doctest::Approx(6.0));
    CHECK(!report.per_event[3].matched);
    CHECK(report.over_100_count == 2);
    CHECK(report.over_50_count == 2);  // 1.2 and 6.0; 0.5 is not strictly above 0.5
    CHECK(report.per_network_over_100.at("memberB") == 1);
    CHECK(report.per_network_over_100.at("memberC") == 1);

    SUBCASE("doubling every capacity halves every utilization") {
        std::vector<CapacityRecord> doubled = capacity;
        for (auto& rec : doubled) rec.capacity_bps *= 2;
        auto half = capacity_impact(events, doubled);
        for (std::size_t i = 0; i < events.size(); ++i) {
            if (!report.per_event[i].matched) continue;
            CHECK(half.per_event[i].utilization == report.per_event[i].utilization / 2);
        }
    }
}

TEST_CASE("mitigation correlation delays and priors") {
    std::vector<AttackEvent> events = {
        make_event(*parse_ipv4("10.1.1.1"), "DNS", 600'000, 899'999, 2e9, 1000, 10),
        make_event(*parse_ipv4("10.1.1.2"), "NTP", 600'000, 899'999, 2e9, 1000, 10),
        make_event(*parse_ipv4("10.9.9.9"), "NTP", 600'000, 899'999, 2e9, 1000, 10),
    };
    std::vector<MitigationLabel> labels = {
        {MitigationKind::Blackhole, *parse_cidr("10.1.1.1/32"), 660'000, std::nullopt},
        {MitigationKind::Scrub, *parse_cidr("10.1.1.2/32"), 300'000, 1'000'000},
    };
    auto report = mitigation_correlate(events, labels);
    REQUIRE(report.per_event.size() == 3);
    CHECK(report.per_event[0].mitigated);
    CHECK(report.per_event[0].delay_ms == 60'000);
    CHECK(report.per_event[0].kind == MitigationKind::Blackhole);
    CHECK(report.per_event[1].mitigated);
    CHECK(report.per_event[1].delay_ms == -300'000);
    CHECK(!report.per_event[2].mitigated);
    CHECK(report.mitigated_count == 2);
    CHECK(report.prior_count == 1);
    CHECK(report.positive_count == 1);
    CHECK(report.mean_positive_delay_ms == doctest::Approx(60'000.0));
    CHECK(report.cdf_4min == doctest::Approx(1.0));

    SUBCASE("mitigated share grows monotonically with slack") {
        std::vector<MitigationLabel> far = {
            {MitigationKind::Blackhole, *parse_cidr("10.9.9.9/32"), 2'000'000, 2'100'000}};
        double last_share = -1;
        for (std::int64_t slack : {0ll, 300'000ll, 600'000ll, 1'200'000ll, 3'000'000ll}) {
            auto r = mitigation_correlate(events, far, slack);
            CHECK(r.mitigated_share >= last_share);
            last_share = r.mitigated_share;
        }
        CHECK(last_share == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("event files round-trip through CSV with analytics intact") {
    std::mt19937_64 rng(777);
    std::vector<AttackEvent> events;
    const char* protos[] = {"DNS", "NTP", "SSDP"};
    for (int i = 0; i < 60; ++i) {
        const std::uint64_t packets = 1'000'000 + rng() % 5'000'000;
        auto ev = make_event(static_cast<IPv4>(rng() % 30), protos[rng() % 3],
                             static_cast<std::int64_t>(rng() % 100) * 60'000,
                             static_cast<std::int64_t>(rng() % 100) * 60'000 + 119'999,
                             1'100'000'000 + static_cast<std::int64_t>(rng() % 5'000'000'000),
                             static_cast<double>(rng() % 1'000'000 + 1),
                             10 + static_cast<std::int64_t>(rng() % 50),
                             packets * (200 + rng() % 1000), packets);
        ev.packet_size_std_bytes = static_cast<double>(rng() % 100);
        ev.pkt_size_m2 = (ev.packet_size_std_bytes * ev.packet_size_std_bytes +
                          ev.mean_packet_size_bytes * ev.mean_packet_size_bytes) *
                         static_cast<double>(ev.total_packets);
        ev.port0_surplus_bytes = rng() % 1'000'000;
        events.push_back(std::move(ev));
    }

    const auto path = std::filesystem::temp_directory_path() / "ampsentinel_events_roundtrip.csv";
    {
        std::ofstream out(path);
        write_events_csv(events, out);
    }
    auto loaded = read_events_csv(path.string());
    REQUIRE(loaded.size() == events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(loaded[i].dst_ip == events[i].dst_ip);
        CHECK(loaded[i].protocol == events[i].protocol);
        CHECK(loaded[i].start_ms == events[i].start_ms);
        CHECK(loaded[i].end_ms == events[i].end_ms);
        CHECK(loaded[i].peak_rate_bps == events[i].peak_rate_bps);
        CHECK(loaded[i].peak_rate_pps == events[i].peak_rate_pps);
        CHECK(loaded[i].total_bytes == events[i].total_bytes);
        CHECK(loaded[i].reflector_count == events[i].reflector_count);
        CHECK(loaded[i].port0_surplus_bytes == events[i].port0_surplus_bytes);
    }
    // pooled packet-size statistics survive the round trip
    auto before = protocol_stats(events);
    auto after = protocol_stats(loaded);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(after[i].avg_pkt_size_bytes ==
              doctest::Approx(before[i].avg_pkt_size_bytes).epsilon(1e-9));
        CHECK(after[i].pkt_size_std_bytes ==
              doctest::Approx(before[i].pkt_size_std_bytes).epsilon(1e-6));
    }
    std::filesystem::remove(path);
}

TEST_CASE("theoretical max from a persisted census matches the in-memory estimate") {
    std::vector<AttackEvent> events;
    for (int i = 0; i < 12; ++i) {
        const std::int64_t start = static_cast<std::int64_t>(i) * 86'400'000;
        const std::uint64_t bytes = 54'000'000'000ull;
        events.push_back(make_event(7, "DNS", start, start + 179'999, 2'400'000'000, 200'000, 300,
                                    bytes, bytes / 1474, 0x14000000u + static_cast<IPv4>(i) * 300));
    }
    const std::int64_t direct = theoretical_max_bps(events);

    auto census = reflector_census(events);
    const auto path = std::filesystem::temp_directory_path() / "ampsentinel_census_roundtrip.csv";
    {
        std::ofstream out(path);
        write_census_csv(census, out);
    }
    auto loaded_census = read_census_csv(path.string());
    CHECK(loaded_census.size() == census.size());

    std::vector<AttackEvent> stripped = events;  // as if loaded from events.csv
    for (auto& ev : stripped) ev.reflector_ips.clear();
    const std::int64_t via_census = theoretical_max_bps(stripped, loaded_census);
    CHECK(via_census == direct);
    CHECK_THROWS_AS(theoretical_max_bps(stripped), InsufficientDataError);
    std::filesystem::remove(path);
}
