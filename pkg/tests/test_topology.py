import pytest
from hypothesis import given, strategies as st

from gathernoc.errors import ConfigError
from gathernoc.topology import (
    BUFFER_SINK,
    NodeId,
    Port,
    hop_path,
    manhattan_hops,
    xy_route,
)


def test_xy_route_same_row_goes_east():
    assert xy_route(NodeId(2, 0), NodeId(2, 5), cols=6) == Port.EAST


def test_xy_route_local_buffer_delivery():
    assert xy_route(NodeId(2, 5), NodeId(2, 5), cols=6, sink_is_buffer=True) == Port.BUFFER


def test_xy_route_same_column_goes_south():
    assert xy_route(NodeId(0, 3), NodeId(4, 3), cols=6) == Port.SOUTH


def test_xy_route_resolves_column_before_row():
    assert xy_route(NodeId(3, 1), NodeId(0, 4), cols=6) == Port.EAST
    assert xy_route(NodeId(3, 4), NodeId(0, 4), cols=6) == Port.NORTH


def test_buffer_port_only_on_right_edge():
    with pytest.raises(ConfigError):
        xy_route(NodeId(1, 2), NodeId(1, 2), cols=6, sink_is_buffer=True)


def test_fig1_unicast_hop_total_is_15():
    # one 6x6 row, every PE to the right-edge node of its row
    dst = NodeId(2, 5)
    total = sum(manhattan_hops(NodeId(2, c), dst) for c in range(6))
    assert total == 15


def test_fig1_gather_hop_count_is_5():
    assert manhattan_hops(NodeId(2, 0), NodeId(2, 5)) == 5


def test_manhattan_identity_and_buffer_hop():
    assert manhattan_hops(NodeId(3, 3), NodeId(3, 3)) == 0
    assert manhattan_hops(NodeId(3, 3), NodeId(3, 3), plus_buffer=True) == 1


def test_node_index_bijection_6x6():
    seen = set()
    for r in range(6):
        for c in range(6):
            idx = NodeId(r, c).index(6)
            assert NodeId.from_index(idx, 6) == NodeId(r, c)
            seen.add(idx)
    assert seen == set(range(36))


def test_xy_route_path_length_matches_manhattan_exhaustive_6x6():
    nodes = [NodeId(r, c) for r in range(6) for c in range(6)]
    for src in nodes:
        for dst in nodes:
            path = hop_path(src, dst, cols=6)
            assert len(path) - 1 == manhattan_hops(src, dst)
            assert path[0] == src and path[-1] == dst


def test_hop_path_to_buffer_appends_sink():
    path = hop_path(NodeId(2, 0), NodeId(2, 5), cols=6, sink_is_buffer=True)
    assert path[-1] is BUFFER_SINK
    assert path[-2] == NodeId(2, 5)
    # consecutive routers are mesh neighbors
    for a, b in zip(path, path[1:-1]):
        assert manhattan_hops(a, b) == 1


@given(
    st.integers(min_value=0, max_value=15), st.integers(min_value=0, max_value=15),
    st.integers(min_value=0, max_value=15), st.integers(min_value=0, max_value=15),
)
def test_route_iteration_reaches_destination(r1, c1, r2, c2):
    src, dst = NodeId(r1, c1), NodeId(r2, c2)
    path = hop_path(src, dst, cols=16)
    assert len(path) - 1 == manhattan_hops(src, dst)
