import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bistream.ingest import PacketRecord, PartitionRule
from bistream.intervals import Interval, IntervalSet, normalize
from bistream.stream import (
    BipartiteLinkStream,
    StreamError,
    UnknownNodeError,
    group_intersection,
    links,
    load_stream,
    pair_intervals,
    prune_degree_one,
    save_stream,
    stream_from_packets,
)
from support import TOY_LINKS, TOY_PARTITION, toy_packets, toy_stream, random_stream

UA = PartitionRule(exact={"u": "top", "w": "top", "a": "bottom", "c": "bottom"})


def pkts(*rows):
    return [PacketRecord(*r) for r in rows]


def test_close_packets_merge():
    s = stream_from_packets(pkts((2.0, "u", "a"), (2.8, "a", "u")), UA)
    assert pair_intervals(s, "u", "a") == normalize([(1.5, 3.3)])


def test_distant_packets_split():
    s = stream_from_packets(pkts((2.0, "u", "a"), (3.5, "u", "a")), UA)
    assert pair_intervals(s, "u", "a") == normalize([(1.5, 2.5), (3.0, 4.0)])


def test_chain_of_packets_one_link():
    s = stream_from_packets(pkts((0.0, "u", "a"), (1.0, "u", "a"), (2.0, "u", "a")), UA)
    assert pair_intervals(s, "u", "a") == normalize([(-0.5, 2.5)])
    (link,) = links(s)
    assert link.duration == 3.0


def test_single_packet_link():
    s = stream_from_packets(pkts((5, "u", "a")), UA)
    assert [(l.begin, l.end) for l in links(s)] == [(4.5, 5.5)]
    assert s.timespan == Interval(4.5, 5.5)


def test_same_side_packet_rejected():
    with pytest.raises(StreamError, match="packet 1"):
        stream_from_packets(pkts((1, "u", "a"), (2, "u", "w")), UA)


def test_empty_packets_rejected():
    with pytest.raises(StreamError):
        stream_from_packets([], UA)


def test_timespan_override_clips():
    s = stream_from_packets(pkts((0, "u", "a"), (10, "u", "c")), UA, timespan=(0, 10))
    assert s.timespan == Interval(0, 10)
    assert pair_intervals(s, "u", "a") == normalize([(0, 0.5)])
    assert pair_intervals(s, "u", "c") == normalize([(9.5, 10)])


def test_toy_from_packets():
    s = stream_from_packets(toy_packets(), TOY_PARTITION)
    assert s == toy_stream()
    assert {(l.begin, l.end, l.top_node, l.bottom_node) for l in links(s)} == TOY_LINKS


def test_pair_intervals_fig1():
    s = toy_stream()
    assert pair_intervals(s, "u", "a") == normalize([(1, 6), (8, 10)])
    assert pair_intervals(s, "a", "u") == normalize([(1, 6), (8, 10)])
    assert pair_intervals(s, "v", "b") == normalize([(3, 6)])


def test_pair_intervals_absent_and_unknown():
    s = BipartiteLinkStream((0, 10), ["u", "v"], ["a"], {("u", "a"): [(0, 1)]})
    assert pair_intervals(s, "v", "a") == IntervalSet()
    with pytest.raises(UnknownNodeError):
        pair_intervals(s, "zz", "a")


def test_group_intersection_examples():
    s = toy_stream()
    assert group_intersection(s, "b", ["u", "v"], (0, 10)) == normalize([(3, 5)])
    assert group_intersection(s, "a", ["u"], (2, 9)) == normalize([(2, 6), (8, 9)])
    assert group_intersection(s, "a", [], (0, 10)) == normalize([(0, 10)])


def test_group_intersection_side_violation():
    with pytest.raises(StreamError):
        group_intersection(toy_stream(), "a", ["b"], (0, 10))


def test_links_counts():
    assert len(links(toy_stream())) == 6
    empty = BipartiteLinkStream((0, 1), ["u"], ["a"], {})
    assert links(empty) == []


def test_audit_clean():
    assert toy_stream().audit() == []


def test_constructor_rejects_bad_pairs():
    with pytest.raises(StreamError):
        BipartiteLinkStream((0, 10), ["u"], ["a"], {("a", "u"): [(0, 1)]})
    with pytest.raises(StreamError):
        BipartiteLinkStream((0, 10), ["u"], ["a"], {("u", "a"): [(0, 11)]})
    with pytest.raises(StreamError):
        BipartiteLinkStream((0, 10), ["u"], ["u"], {})


def test_prune_star_cascades_to_empty():
    pairs = {("hub", f"leaf{i}"): [(0, 1)] for i in range(5)}
    s = BipartiteLinkStream((0, 1), ["hub"], [f"leaf{i}" for i in range(5)], pairs)
    p = prune_degree_one(s)
    assert links(p) == [] and p.nodes == ()
    assert len(links(s)) == 5  # original untouched


def test_prune_keeps_toy_and_complete():
    assert prune_degree_one(toy_stream()) == toy_stream()
    k22 = BipartiteLinkStream((0, 10), ["x1", "x2"], ["y1", "y2"], {(x, y): [(0, 10)] for x in ["x1", "x2"] for y in ["y1", "y2"]})
    assert prune_degree_one(k22) == k22


def test_prune_chain():
    # path t0-b0-t1-b1: both ends peel off, then the rest
    s = BipartiteLinkStream((0, 5), ["t0", "t1"], ["b0", "b1"], {("t0", "b0"): [(0, 1)], ("t1", "b0"): [(0, 1)], ("t1", "b1"): [(0, 1)]})
    assert prune_degree_one(s).nodes == ()


def test_save_load_roundtrip(tmp_path):
    s = stream_from_packets(toy_packets(), TOY_PARTITION)
    save_stream(s, tmp_path / "s.json")
    assert load_stream(tmp_path / "s.json") == s


@given(
    st.floats(0, 100, allow_nan=False),
    st.floats(0, 3, allow_nan=False),
    st.sampled_from([0.25, 0.5, 1.0]),
)
def test_packet_merge_law(t1, gap, hw):
    t2 = t1 + gap
    s = stream_from_packets(pkts((t1, "u", "a"), (t2, "a", "u")), UA, half_window=hw)
    n = len(links(s))
    # compare through the same float arithmetic the windows use
    assert (n == 1) == (t2 - hw <= t1 + hw)


@given(st.lists(st.tuples(st.integers(0, 40), st.sampled_from(["u", "w"]), st.sampled_from(["a", "c"])), min_size=1, max_size=20), st.randoms())
def test_order_insensitive(rows, rnd):
    packets = [PacketRecord(t / 4, u, v) for t, u, v in rows]
    shuffled = list(packets)
    rnd.shuffle(shuffled)
    assert stream_from_packets(packets, UA) == stream_from_packets(shuffled, UA)


def test_random_streams_audit():
    rng = random.Random(11)
    for _ in range(50):
        s = random_stream(rng)
        assert s.audit() == []
        assert prune_degree_one(s).audit() == []
