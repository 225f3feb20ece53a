#include <doctest.h>

#include <algorithm>
#include <random>

#include "ampsentinel/detector.hpp"
#include "oracles.hpp"

using namespace ampsentinel;
using testutil::make_flow;

namespace {

// Bucket with `n` distinct sources splitting `total_bytes` evenly.
std::vector<FlowRecord> bucket_of(int n, std::uint64_t total_bytes, std::uint16_t sport = 123,
                                  IPv4 dst = 0x0A000002u, std::int64_t window = 0) {
    std::vector<FlowRecord> flows;
    std::uint64_t remaining = total_bytes;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t share = i + 1 == n ? remaining : total_bytes / static_cast<std::uint64_t>(n);
        remaining -= share;
        flows.push_back(make_flow(window * 60'000, 0x0A010000u + static_cast<IPv4>(i), dst, sport,
                                  std::max<std::uint64_t>(1, share / 1200), share));
    }
    return flows;
}

AttackObservation observation_of(std::int64_t window, IPv4 dst, std::uint16_t sport,
                                 std::uint64_t bytes, int reflectors,
                                 const DetectionConfig& config) {
    auto obs = classify_window(WindowKey{window, dst, sport},
                               bucket_of(reflectors, bytes, sport, dst, window), config);
    REQUIRE(obs.has_value());
    return *obs;
}

}  // namespace

TEST_CASE("classifier examples at and around the thresholds") {
    DetectionConfig config;
    const WindowKey key{0, 0x0A000002u, 123};

    SUBCASE("10 sources at 1.2 Gbps classifies") {
        auto obs = classify_window(key, bucket_of(10, 9'000'000'000ull), config);
        REQUIRE(obs.has_value());
        CHECK(obs->reflector_count == 10);
        CHECK(obs->rate_bps == 1'200'000'000);
        CHECK(obs->protocol.name == "NTP");
        CHECK(obs->bytes == 9'000'000'000ull);
        CHECK(obs->reflector_ips.size() == 10);
    }
    SUBCASE("9 sources at 2 Gbps stays below k") {
        CHECK(!classify_window(key, bucket_of(9, 15'000'000'000ull), config).has_value());
    }
    SUBCASE("exactly 1.0 Gbps is not strictly above t") {
        CHECK(!classify_window(key, bucket_of(10, 7'500'000'000ull), config).has_value());
    }
    SUBCASE("one byte over the exact threshold classifies") {
        auto obs = classify_window(key, bucket_of(10, 7'500'000'001ull), config);
        REQUIRE(obs.has_value());
        CHECK(obs->rate_bps > config.t_rate_bps);  // stored rate rounds up
    }
    SUBCASE("port 0 buckets classify as the PORT0 pseudo-protocol") {
        auto obs = classify_window(WindowKey{0, 0x0A000002u, 0}, bucket_of(10, 9'000'000'000ull, 0),
                                   config);
        REQUIRE(obs.has_value());
        CHECK(obs->protocol.name == "PORT0");
    }
}

TEST_CASE("classifier agrees with the brute-force oracle on random buckets") {
    std::mt19937_64 rng(99);
    DetectionConfig config;
    int positives = 0;
    for (int i = 0; i < 2000; ++i) {
        auto flows = testutil::random_bucket(rng, config, 0x0A000002u, 123, 0);
        const bool expected = testutil::oracle_positive(flows, config);
        const bool actual =
            classify_window(WindowKey{0, 0x0A000002u, 123}, flows, config).has_value();
        CHECK(actual == expected);
        positives += actual;
    }
    CHECK(positives > 100);  // the generator must exercise both outcomes
}

TEST_CASE("adding a flow never turns a positive bucket negative") {
    std::mt19937_64 rng(7);
    DetectionConfig config;
    for (int i = 0; i < 500; ++i) {
        auto flows = testutil::random_bucket(rng, config, 2, 123, 0);
        if (!classify_window(WindowKey{0, 2, 123}, flows, config)) continue;
        flows.push_back(make_flow(0, static_cast<IPv4>(rng()), 2, 123, 1, 20 + rng() % 2000));
        CHECK(classify_window(WindowKey{0, 2, 123}, flows, config).has_value());
    }
}

TEST_CASE("coalescing groups consecutive windows and honors hysteresis") {
    DetectionConfig config;
    auto obs_at = [&](std::initializer_list<std::int64_t> windows) {
        std::vector<AttackObservation> obs;
        for (std::int64_t w : windows)
            obs.push_back(observation_of(w, 0x0A000002u, 123, 9'000'000'000ull, 10, config));
        return obs;
    };

    SUBCASE("consecutive run forms one event") {
        auto events = coalesce_events(obs_at({5, 6, 7}), config);
        REQUIRE(events.size() == 1);
        CHECK(events[0].start_window == 5);
        CHECK(events[0].end_window == 7);
        CHECK(events[0].start_ms == 5 * 60'000);
        CHECK(events[0].end_ms == 8 * 60'000 - 1);
        CHECK(events[0].active_windows == 3);
        CHECK(events[0].duration_ms(config) == 180'000);
    }
    SUBCASE("a missed window splits the run at hysteresis 0") {
        auto events = coalesce_events(obs_at({5, 7}), config);
        CHECK(events.size() == 2);
    }
    SUBCASE("hysteresis 1 bridges a single missed window") {
        config.hysteresis_windows = 1;
        auto events = coalesce_events(obs_at({5, 7}), config);
        REQUIRE(events.size() == 1);
        CHECK(events[0].start_window == 5);
        CHECK(events[0].end_window == 7);
        CHECK(events[0].active_windows == 2);  // the bridged window stays inactive
    }
    SUBCASE("different targets never merge") {
        auto obs = obs_at({5});
        obs.push_back(observation_of(6, 0x0A000003u, 123, 9'000'000'000ull, 10, config));
        CHECK(coalesce_events(std::move(obs), config).size() == 2);
    }
    SUBCASE("different protocols never merge") {
        auto obs = obs_at({5});
        obs.push_back(observation_of(6, 0x0A000002u, 53, 9'000'000'000ull, 10, config));
        CHECK(coalesce_events(std::move(obs), config).size() == 2);
    }
}

TEST_CASE("event aggregates are conserved and invariant-clean") {
    std::mt19937_64 rng(31337);
    DetectionConfig config;
    std::vector<AttackObservation> observations;
    std::uint64_t obs_bytes = 0;
    std::size_t obs_count = 0;
    for (IPv4 dst = 2; dst < 12; ++dst) {
        for (std::int64_t w = 0; w < 20; ++w) {
            if (rng() % 3 == 0) continue;
            const std::uint64_t bytes = 7'500'000'001ull + rng() % 5'000'000'000ull;
            observations.push_back(observation_of(w, dst, 123, bytes, 10 + rng() % 5, config));
            obs_bytes += bytes;
            ++obs_count;
        }
    }
    auto events = coalesce_events(observations, config);

    std::uint64_t event_bytes = 0;
    std::int64_t event_windows = 0;
    for (const AttackEvent& ev : events) {
        event_bytes += ev.total_bytes;
        event_windows += ev.active_windows;
        CHECK(ev.start_ms <= ev.end_ms);
        CHECK(ev.peak_rate_bps >= ev.avg_rate_bps);
        CHECK(ev.avg_rate_bps > config.t_rate_bps);
        CHECK(ev.mean_packet_size_bytes >= 20.0);
        CHECK(ev.reflector_count == static_cast<std::int64_t>(ev.reflector_ips.size()));
    }
    CHECK(event_bytes == obs_bytes);
    CHECK(event_windows == static_cast<std::int64_t>(obs_count));
}

TEST_CASE("daily grouping keys on target, protocol, start day") {
    DetectionConfig config;
    auto event_at = [&](IPv4 dst, std::uint16_t sport, std::int64_t start_ms) {
        auto obs = observation_of(start_ms / 60'000, dst, sport, 9'000'000'000ull, 10, config);
        auto events = coalesce_events({obs}, config);
        REQUIRE(events.size() == 1);
        return events[0];
    };
    constexpr std::int64_t kDay = 86'400'000;

    SUBCASE("three same-day events on one protocol merge") {
        std::vector<AttackEvent> events = {event_at(9, 123, 0), event_at(9, 123, 7'200'000),
                                           event_at(9, 123, 14'400'000)};
        auto grouped = group_daily(events);
        REQUIRE(grouped.size() == 1);
        CHECK(grouped[0].event_count == 3);
        CHECK(grouped[0].start_ms == 0);
    }
    SUBCASE("protocols split groups") {
        std::vector<AttackEvent> events = {event_at(9, 123, 0), event_at(9, 53, 0)};
        CHECK(group_daily(events).size() == 2);
    }
    SUBCASE("an event is grouped under its start day even if it crosses midnight") {
        auto late = event_at(9, 123, kDay - 60'000);  // 23:59, runs past midnight
        auto next_day = event_at(9, 123, kDay + 60'000);
        std::vector<AttackEvent> events = {late, next_day};
        auto grouped = group_daily(events);
        REQUIRE(grouped.size() == 2);
        CHECK(grouped[0].day_index == 0);
        CHECK(grouped[1].day_index == 1);
    }
}

TEST_CASE("port-0 attribution requires a unique concurrent event") {
    DetectionConfig config;
    auto dns_obs = observation_of(10, 7, 53, 9'000'000'000ull, 10, config);
    auto events = coalesce_events({dns_obs}, config);
    REQUIRE(events.size() == 1);

    SUBCASE("unique active event absorbs the bytes") {
        std::vector<Port0Aggregate> port0 = {{10, 7, 5'000'000ull, 400}};
        auto report = attribute_port0(events, port0);
        CHECK(events[0].port0_surplus_bytes == 5'000'000ull);
        CHECK(report.attributed_bytes == 5'000'000ull);
        CHECK(report.ambiguous_bytes == 0);
        CHECK(report.orphan_bytes == 0);
    }
    SUBCASE("two concurrent events make the bytes ambiguous") {
        auto ntp_obs = observation_of(10, 7, 123, 9'000'000'000ull, 10, config);
        auto both = coalesce_events({dns_obs, ntp_obs}, config);
        REQUIRE(both.size() == 2);
        std::vector<Port0Aggregate> port0 = {{10, 7, 5'000'000ull, 400}};
        auto report = attribute_port0(both, port0);
        CHECK(both[0].port0_surplus_bytes == 0);
        CHECK(both[1].port0_surplus_bytes == 0);
        CHECK(report.ambiguous_bytes == 5'000'000ull);
    }
    SUBCASE("no active event leaves an orphan") {
        std::vector<Port0Aggregate> port0 = {{99, 7, 5'000'000ull, 400},   // wrong window
                                             {10, 8, 1'000'000ull, 80}};   // wrong target
        auto report = attribute_port0(events, port0);
        CHECK(events[0].port0_surplus_bytes == 0);
        CHECK(report.orphan_bytes == 6'000'000ull);
    }
}

TEST_CASE("port-0 byte conservation over random aggregates") {
    std::mt19937_64 rng(555);
    DetectionConfig config;
    std::vector<AttackObservation> observations;
    for (IPv4 dst = 2; dst < 8; ++dst)
        for (std::int64_t w = 0; w < 10; ++w)
            if (rng() % 2)
                observations.push_back(
                    observation_of(w, dst, rng() % 2 ? 123 : 53, 9'000'000'000ull, 10, config));
    auto events = coalesce_events(observations, config);

    std::vector<Port0Aggregate> port0;
    std::uint64_t total = 0;
    for (int i = 0; i < 200; ++i) {
        Port0Aggregate agg{static_cast<std::int64_t>(rng() % 12), static_cast<IPv4>(2 + rng() % 8),
                           rng() % 1'000'000 + 1, rng() % 100 + 1};
        total += agg.bytes;
        port0.push_back(agg);
    }
    auto report = attribute_port0(events, port0);
    std::uint64_t surplus = 0;
    for (const AttackEvent& ev : events) surplus += ev.port0_surplus_bytes;
    CHECK(report.total_bytes() == total);
    CHECK(report.attributed_bytes == surplus);
}

TEST_CASE("detection pipeline is shard-invariant") {
    std::mt19937_64 rng(2024);
    DetectionConfig config;
    std::vector<FlowRecord> flows;
    for (IPv4 dst = 1; dst <= 40; ++dst) {
        for (std::int64_t w = 0; w < 6; ++w) {
            if (rng() % 4 == 0) continue;
            auto bucket = testutil::random_bucket(rng, config, dst, rng() % 2 ? 123 : 1900, w);
            flows.insert(flows.end(), bucket.begin(), bucket.end());
        }
    }
    std::shuffle(flows.begin(), flows.end(), rng);

    auto baseline = run_detection(flows, config, 1);
    for (unsigned shards : {2u, 3u, 8u}) {
        auto sharded = run_detection(flows, config, shards);
        REQUIRE(sharded.events.size() == baseline.events.size());
        for (std::size_t i = 0; i < baseline.events.size(); ++i) {
            CHECK(sharded.events[i].dst_ip == baseline.events[i].dst_ip);
            CHECK(sharded.events[i].protocol.name == baseline.events[i].protocol.name);
            CHECK(sharded.events[i].start_ms == baseline.events[i].start_ms);
            CHECK(sharded.events[i].total_bytes == baseline.events[i].total_bytes);
            CHECK(sharded.events[i].reflector_ips == baseline.events[i].reflector_ips);
        }
        CHECK(sharded.port0.attributed_bytes == baseline.port0.attributed_bytes);
    }
}

TEST_CASE("reflector census tracks first and last sighting per protocol") {
    DetectionConfig config;
    auto obs1 = observation_of(0, 7, 53, 9'000'000'000ull, 10, config);
    auto obs2 = observation_of(100, 7, 53, 9'000'000'000ull, 10, config);
    auto events = coalesce_events({obs1, obs2}, config);
    REQUIRE(events.size() == 2);
    auto census = reflector_census(events);
    CHECK(census.size() == 10);  // same synthetic reflector IPs in both events
    for (const auto& sighting : census) {
        CHECK(sighting.protocol == "DNS");
        CHECK(sighting.first_seen_ms == 0);
        CHECK(sighting.last_seen_ms == 100 * 60'000);
    }
}
