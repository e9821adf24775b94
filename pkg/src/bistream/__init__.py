"""Balanced clique sampling in bipartite link streams built from packet traces."""

from .clique import (
    Clique,
    CliqueSet,
    SamplerConfig,
    enumerate_maximal_balanced_bruteforce,
    extend_time,
    format_clique,
    is_balanced,
    is_clique,
    is_maximal_balanced,
    parse_clique,
    sample_many,
    sample_trajectory,
    trajectory_states,
)
from .ingest import (
    LabelSet,
    PacketRecord,
    PartitionRule,
    assign_sides,
    generate_synthetic,
    load_labels,
    parse_packet_csv,
)
from .intervals import Interval, IntervalSet, intersect, normalize
from .stream import (
    BipartiteLinkStream,
    Link,
    group_intersection,
    links,
    pair_intervals,
    prune_degree_one,
    stream_from_packets,
)

__version__ = "0.1.0"
