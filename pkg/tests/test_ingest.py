import pytest
from hypothesis import given
from hypothesis import strategies as st

from bistream.clique import Clique, is_clique
from bistream.ingest import (
    LabelSet,
    PacketRecord,
    ParseError,
    PartitionError,
    PartitionRule,
    PlantedClique,
    PlantedScan,
    Scenario,
    ScenarioError,
    assign_sides,
    generate_synthetic,
    load_labels,
    load_partition,
    load_scenario,
    parse_packet_csv,
    write_packet_csv,
)
from bistream.stream import stream_from_packets


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_parse_two_rows(tmp_path):
    p = write(tmp_path, "p.csv", "2.0,u,a\n2.8,a,u")
    assert parse_packet_csv(p) == [PacketRecord(2.0, "u", "a"), PacketRecord(2.8, "a", "u")]


def test_parse_header_and_order(tmp_path):
    p = write(tmp_path, "p.csv", "timestamp,src,dst\n5,u,a\n1.25,u,a\n")
    assert [r.timestamp for r in parse_packet_csv(p)] == [5.0, 1.25]
    with pytest.raises(ParseError):
        parse_packet_csv(write(tmp_path, "q.csv", "5,u,a\n"), header=True)


@pytest.mark.parametrize(
    "text, line",
    [("x,u,a\n", 1), ("1,u,a\n2,u\n", 2), ("1,u,a\n1e3,u,a\n", 2), ("1,u,a\n2,u,u\n", 2), ("nan,u,a\n", 1), ("1,5,u,a\n", 1)],
)
def test_parse_errors_carry_line(tmp_path, text, line):
    with pytest.raises(ParseError) as err:
        parse_packet_csv(write(tmp_path, "p.csv", text))
    assert err.value.line == line


def test_parse_empty(tmp_path):
    assert parse_packet_csv(write(tmp_path, "p.csv", "")) == []


ids = st.text(alphabet="abcdef0123456789.:", min_size=1, max_size=8)


@given(st.lists(st.tuples(st.integers(0, 10**9).map(lambda k: k / 1e6), ids, ids).filter(lambda r: r[1] != r[2]), max_size=30))
def test_csv_roundtrip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    records = [PacketRecord(*r) for r in rows]
    write_packet_csv(records, path)
    assert parse_packet_csv(path) == records


def test_prefix_rule_with_default():
    rule = PartitionRule(prefixes=[("10.", "top")], default="bottom")
    top, bottom, kept = assign_sides([PacketRecord(1, "10.0.0.1", "203.0.113.5")], rule)
    assert top == {"10.0.0.1"} and bottom == {"203.0.113.5"} and len(kept) == 1


def test_strict_same_side_error():
    rule = PartitionRule(prefixes=[("10.", "top")], default="bottom")
    with pytest.raises(PartitionError, match="packet 0"):
        assign_sides([PacketRecord(1, "10.0.0.1", "10.0.0.2")], rule)


def test_lenient_drops_same_side():
    rule = PartitionRule(prefixes=[("10.", "top")], default="bottom", strict=False)
    top, bottom, kept = assign_sides([PacketRecord(1, "10.0.0.1", "10.0.0.2"), PacketRecord(2, "10.0.0.1", "8.8.8.8")], rule)
    assert kept == [PacketRecord(2, "10.0.0.1", "8.8.8.8")]
    assert len(top) + len(bottom) == 3


def test_explicit_map_identity():
    mapping = {"u": "top", "v": "top", "a": "bottom"}
    rule = PartitionRule(exact=mapping)
    top, bottom, _ = assign_sides([PacketRecord(1, "u", "a"), PacketRecord(2, "a", "v")], rule)
    assert top == {"u", "v"} and bottom == {"a"}


def test_unmatched_without_default():
    with pytest.raises(PartitionError):
        PartitionRule(exact={"u": "top"}).side_of("zz")


def test_longest_prefix_wins_and_exact_beats_prefix(tmp_path):
    p = write(tmp_path, "part.txt", "# WIDE\n10.*,top\n10.9.*,bottom\n10.9.0.1,top\ndefault,bottom\n")
    rule = load_partition(p)
    assert rule.side_of("10.1.1.1") == "top"
    assert rule.side_of("10.9.1.1") == "bottom"
    assert rule.side_of("10.9.0.1") == "top"
    assert rule.side_of("8.8.8.8") == "bottom"


def test_partition_file_errors(tmp_path):
    with pytest.raises(ParseError):
        load_partition(write(tmp_path, "a.txt", "default,top\ndefault,bottom\n"))
    with pytest.raises(ParseError):
        load_partition(write(tmp_path, "b.txt", "x,left\n"))
    with pytest.raises(ParseError):
        load_partition(write(tmp_path, "c.txt", "x,top\nx,bottom\n"))


def test_labels(tmp_path):
    labels = load_labels(write(tmp_path, "l.txt", "# flagged\n1.2.3.4\n5.6.7.8  # scanner\n1.2.3.4\n\n"))
    assert labels == {"1.2.3.4", "5.6.7.8"}
    assert len(load_labels(write(tmp_path, "e.txt", ""))) == 0
    assert labels.unmatched(["1.2.3.4"]) == {"5.6.7.8"}
    with pytest.raises(OSError):
        load_labels(tmp_path / "missing.txt")


def planted_scenario(seed=0, noise=0.0):
    return Scenario(
        timespan=(0, 300),
        noise_rate=noise,
        seed=seed,
        cliques=[PlantedClique("k3", 3, 3, 100, 160, period=0.9)],
    )


def test_synthetic_deterministic():
    a = generate_synthetic(planted_scenario(seed=4, noise=2.0))
    b = generate_synthetic(planted_scenario(seed=4, noise=2.0))
    c = generate_synthetic(planted_scenario(seed=5, noise=2.0))
    assert a.packets == b.packets and a.events == b.events
    assert a.packets != c.packets


def test_synthetic_noise_only_zero_rate():
    with pytest.raises(ScenarioError):
        generate_synthetic(Scenario(timespan=(0, 10), noise_rate=0.0))


def test_synthetic_inconsistent():
    with pytest.raises(ScenarioError):
        generate_synthetic(Scenario(timespan=(0, 10), cliques=[PlantedClique("x", 2, 2, 5, 20)]))
    with pytest.raises(ScenarioError):
        generate_synthetic(Scenario(timespan=(0, 10), cliques=[PlantedClique("x", 2, 2, 1, 5, period=1.5)]))
    with pytest.raises(ScenarioError):
        generate_synthetic(Scenario(timespan=(0, 10), scans=[PlantedScan("s", 2, 3, 9.8)]))


@pytest.mark.parametrize("seed", range(5))
def test_planted_clique_ground_truth(seed):
    trace = generate_synthetic(planted_scenario(seed=seed, noise=5.0))
    stream = stream_from_packets(trace.packets, trace.partition)
    (event,) = trace.events
    hw = 0.5
    c = Clique.of(event["top"], event["bottom"], (event["begin"] + hw, event["end"] - hw))
    assert is_clique(stream, c)


def test_scan_labels_and_sides():
    trace = generate_synthetic(Scenario(timespan=(0, 100), scans=[PlantedScan("s", 2, 10, 50)]))
    (event,) = trace.events
    assert trace.labels == set(event["bottom"])
    assert all(trace.partition.side_of(n) == "top" for n in event["top"])
    assert all(trace.partition.side_of(n) == "bottom" for n in event["bottom"])
    assert len(trace.packets) == 20


def test_load_scenario(tmp_path):
    p = write(
        tmp_path,
        "s.ini",
        "[scenario]\ntimespan = 0:600\nseed = 3\nnoise_rate = 1.5\n\n"
        "[clique.a]\ntop = 4\nbottom = 4\nbegin = 100\nend = 160\nperiod = 0.9\n\n"
        "[scan.b]\nsources = 2\ndestinations = 228\nbegin = 300\n",
    )
    sc = load_scenario(p)
    assert sc.timespan == (0, 600) and sc.seed == 3 and sc.noise_rate == 1.5
    assert sc.cliques[0].n_top == 4 and sc.scans[0].destinations == 228 and sc.scans[0].flagged
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "bad.ini", "[scenario]\ntimespan = 0:10\n[clique.x]\ntop = 2\n"))
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "bad2.ini", "[scenario]\ntimespan = 0:10\n[bogus]\n"))
