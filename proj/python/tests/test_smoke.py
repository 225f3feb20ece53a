"""Smoke tests for the python bindings: generate, detect, analyze."""

import math

import pytest

import ampsentinel as amp


SCENARIO = {
    "attacks": [
        {
            "protocol": "DNS",
            "dst_ip": "203.0.113.7",
            "reflector_count": 60,
            "start_ms": 0,
            "duration_ms": 300000,
            "target_rate_bps": 2_000_000_000,
            "pkt_size_mean_bytes": 1474,
            "pkt_size_std_bytes": 59,
            "fragment_share": 0.2,
        },
        {
            "protocol": "NTP",
            "dst_ip": "203.0.113.8",
            "reflector_count": 40,
            "start_ms": 60000,
            "duration_ms": 240000,
            "target_rate_bps": 3_000_000_000,
            "pkt_size_mean_bytes": 482,
            "pkt_size_std_bytes": 10,
        },
    ],
    "background": {
        "client_count": 25,
        "server_ports": [53, 443],
        "total_rate_bps": 100_000_000,
        "start_ms": 0,
        "duration_ms": 300000,
    },
}


@pytest.fixture(scope="module")
def corpus():
    flows, truth = amp.generate_corpus(SCENARIO, seed=7)
    return flows, truth


def test_registry():
    assert amp.lookup_protocol(123) == "NTP"
    assert amp.lookup_protocol(11211) == "Memcached"
    assert amp.lookup_protocol(443) is None
    registry = amp.protocol_registry()
    assert len(registry) == 13
    assert registry[0] == "PORT0"


def test_generate_and_detect(corpus):
    flows, truth = corpus
    assert len(flows) > 0
    assert len(truth["events"]) == 2

    events = amp.detect_flows(flows)
    assert len(events) == len(truth["events"])
    by_target = {ev.dst_ip: ev for ev in events}
    dns = by_target["203.0.113.7"]
    assert dns.protocol == "DNS"
    assert abs(dns.peak_bps - 2_000_000_000) / 2e9 < 0.05
    assert dns.reflector_count == 60
    assert dns.port0_surplus_bytes > 0  # fragment share 0.2
    assert math.isclose(
        dns.port0_surplus_bytes / dns.total_bytes, 0.2 / 0.8, rel_tol=0.02
    )


def test_detect_file_round_trip(tmp_path, corpus):
    flows, truth = corpus
    path = tmp_path / "flows.csv"
    amp.write_flows_csv(flows, str(path))
    events, report = amp.detect_file(str(path))
    assert report["parse_errors"] == 0
    assert report["flows_parsed"] == len(flows)
    assert len(events) == len(truth["events"])


def test_analytics(corpus):
    flows, _ = corpus
    events = amp.detect_flows(flows)

    stats = amp.protocol_stats(events)
    assert {row["protocol"] for row in stats} == {"DNS", "NTP"}
    ntp = next(row for row in stats if row["protocol"] == "NTP")
    assert abs(ntp["avg_pkt_size"] - 482) / 482 < 0.02

    multi = amp.multi_protocol_victims(events)
    assert multi["victims"] == 2
    assert multi["share_ge2"] == 0.0

    daily = amp.group_daily(events)
    assert len(daily) == 2
    assert daily[0]["day"] == "1970-01-01"

    capacity = amp.capacity_impact(events, [("netA", "203.0.113.0/24", 10_000_000_000)])
    assert capacity["matched_events"] == 2
    assert capacity["over_100_count"] == 0

    mitigation = amp.mitigation_correlate(
        events, [("blackhole", "203.0.113.7/32", 70_000, None)]
    )
    assert mitigation["mitigated_count"] == 1
    assert mitigation["mean_positive_delay_ms"] == 70_000.0

    overlap = amp.correlate_honeypot(
        events, [("203.0.113.7", 0, 300_000, 53, "feed")]
    )
    assert overlap["matched_events"] == 1
    assert overlap["event_match_share"] == 0.5


def test_detection_config():
    config = amp.DetectionConfig()
    assert config.k_min_reflectors == 10
    assert config.t_rate_bps == 1_000_000_000
    config.k_min_reflectors = 1
    with pytest.raises(amp.ConfigError):
        config.validate()


def test_infeasible_scenario():
    bad = {
        "attacks": [
            {
                "protocol": "NTP",
                "dst_ip": "203.0.113.9",
                "reflector_count": 9,
                "duration_ms": 120000,
                "target_rate_bps": 2_000_000_000,
                "expect_event": True,
            }
        ]
    }
    with pytest.raises(amp.InfeasibleScenarioError):
        amp.generate_corpus(bad, seed=1)
