import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from linkshare.multiplex import InteractionEvent, LayerKind, MultiplexNetwork

LAYERS = [k.value for k in LayerKind]


def build(events):
    net = MultiplexNetwork()
    for layer, s, d, t in events:
        net.ingest_event(InteractionEvent(layer, s, d, t))
    return net


event_lists = st.lists(
    st.tuples(st.sampled_from(LAYERS), st.integers(0, 7), st.integers(0, 7), st.integers(0, 30))
    .filter(lambda e: e[1] != e[2]), max_size=40)


@settings(max_examples=150, deadline=None)
@given(event_lists, st.integers(0, 7), st.integers(0, 7), st.integers(0, 32))
def test_queries_match_set_oracles(events, i, j, as_of):
    net = build(events)
    fr = oracles.friend_sets(events, as_of)
    assert net.friends(i, as_of) == fr.get(i, set())
    assert net.clustering_coefficient(i, as_of) == pytest.approx(oracles.clustering(fr, i), abs=0)
    assert net.edge_overlap(i, j, as_of) == pytest.approx(oracles.overlap(fr, i, j), abs=0)
    for layer in LAYERS:
        assert net.layer_weight(layer, i, j, as_of) == oracles.layer_weight(events, layer, i, j, as_of)
    sent = sum(1 for lay, s, d, t in events if lay == "share" and s == i and t < as_of)
    recv = sum(1 for lay, s, d, t in events if lay == "share" and d == i and t < as_of)
    assert net.share_out_degree([i], as_of)[0] == sent
    assert net.share_in_degree([i], as_of)[0] == recv


def test_as_of_is_strict():
    net = build([("listening", 1, 2, 10)])
    assert net.friends(1, 10) == set()
    assert net.friends(1, 11) == {2}


def test_share_friendship_needs_both_directions():
    net = build([("share", 1, 2, 5)])
    assert net.friends(1, 100) == set()
    net.ingest_event(InteractionEvent("share", 2, 1, 20))
    assert net.friends(1, 20) == set()
    assert net.friends(1, 21) == {2}
    assert net.layer_weight(LayerKind.LINK_SHARE, 1, 2, 100) == 1
    assert net.layer_weight(LayerKind.LINK_SHARE, 2, 1, 100) == 1


def test_undirected_layers_are_symmetric():
    net = build([("playlist", 4, 3, 1), ("playlist", 3, 4, 2)])
    assert net.layer_weight("playlist", 3, 4, 10) == 2
    assert net.layer_weight("playlist", 4, 3, 10) == 2


def test_star_has_zero_clustering_and_triangle_one():
    star = build([("listening", 0, k, 1) for k in (1, 2, 3)])
    assert star.clustering_coefficient(0, 5) == 0.0
    tri = build([("listening", 0, 1, 1), ("listening", 1, 2, 1), ("listening", 0, 2, 1)])
    assert tri.clustering_coefficient(0, 5) == 1.0


def test_overlap_excludes_endpoints_and_empty_is_zero():
    net = build([("listening", 1, 2, 0), ("listening", 1, 3, 0), ("listening", 2, 3, 0),
                 ("listening", 2, 4, 0)])
    # friends(1) \ {1,2} = {3}; friends(2) \ {1,2} = {3,4}
    assert net.edge_overlap(1, 2, 10) == 0.5
    assert net.edge_overlap(8, 9, 10) == 0.0


def test_invalid_events_rejected():
    with pytest.raises(ValueError):
        InteractionEvent("share", 1, 1, 0)
    with pytest.raises(ValueError):
        InteractionEvent("follow", 1, 2, 0)
    with pytest.raises(ValueError):
        MultiplexNetwork().ingest_arrays("share", [1], [1], [0])
    with pytest.raises(ValueError):
        MultiplexNetwork().ingest_arrays("share", [1, 2], [3], [0])


def test_unknown_users_have_empty_answers():
    net = build([("listening", 1, 2, 0)])
    assert net.friends(99, 10) == set()
    assert net.layer_weight("listening", 1, 99, 10) == 0
    assert net.friend_counts([99, 1], 10).tolist() == [0, 1]


def test_batch_matches_scalar(rng):
    ev = [(LAYERS[rng.integers(3)], int(a), int(b), int(t))
          for a, b, t in rng.integers(0, 30, (400, 3)) if a != b]
    net = build(ev)
    users = rng.integers(0, 30, 50)
    times = rng.integers(0, 31, 50)
    q, f = net.friends_batch(users, times)
    for n, (u, t) in enumerate(zip(users, times)):
        assert set(f[q == n].tolist()) == net.friends(int(u), int(t))
    assert net.friend_counts(users, times).tolist() == [len(net.friends(int(u), int(t)))
                                                        for u, t in zip(users, times)]


@pytest.mark.parametrize("fmt", ["npz", "jsonl"])
def test_roundtrip(tmp_path, rng, fmt):
    ev = [(LAYERS[rng.integers(3)], int(a), int(b), int(t))
          for a, b, t in rng.integers(0, 20, (200, 3)) if a != b]
    net = build(ev)
    path = tmp_path / f"net.{fmt}"
    if fmt == "npz":
        net.save(path)
        back = MultiplexNetwork.load(path)
    else:
        net.to_jsonl(path)
        back = MultiplexNetwork.from_jsonl(path)
    for kind in LayerKind:
        for a, b in zip(net.layer_arrays(kind), back.layer_arrays(kind)):
            assert np.array_equal(a, b)


def test_bad_jsonl_reports_line(tmp_path):
    p = tmp_path / "n.jsonl"
    p.write_text('{"layer": "share", "src": 1, "dst": 2, "ts": 3}\n{"layer": "share", "src": 1}\n')
    with pytest.raises(ValueError, match=":2:"):
        MultiplexNetwork.from_jsonl(p)
