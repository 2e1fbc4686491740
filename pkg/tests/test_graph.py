import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpmech.chromophore import anchor_structure
from fpmech.errors import EmptyLocalNeighbourhood
from fpmech.graph import (
    ACTIVATED_CHANNELS,
    ChannelId,
    build_graph,
    hydrophobic_weight,
    residue_distance,
    steric_weight,
    write_edge_list,
)
from fpmech.ingest import AtomRecord, Residue, Structure
from fpmech.synthetic import chromophore_residue, random_local_structure, random_rotation, rigid_transform


def res(seq, points, aa3="ALA"):
    return Residue("A", seq, aa3, tuple(AtomRecord("C" + str(i), "C", tuple(map(float, p))) for i, p in enumerate(points)))


def test_residue_distance_examples():
    u = res(1, [(0, 0, 0), (5, 0, 0)])
    v = res(2, [(3, 0, 0)])
    assert residue_distance(u, u) == 0.0
    assert residue_distance(u, v) == pytest.approx(2.0, abs=1e-12)
    assert residue_distance(v, u) == residue_distance(u, v)


@given(st.lists(st.tuples(*[st.floats(-50, 50)] * 3), min_size=1, max_size=6),
       st.lists(st.tuples(*[st.floats(-50, 50)] * 3), min_size=1, max_size=6))
def test_residue_distance_symmetric_and_brute_force(a, b):
    u, v = res(1, a), res(2, b)
    brute = min(math.dist(p, q) for p in a for q in b)
    assert residue_distance(u, v) == pytest.approx(brute, abs=1e-9)
    assert residue_distance(u, v) == residue_distance(v, u)


def test_weight_formulas():
    assert steric_weight(0.0) == 1.0 and hydrophobic_weight(0.0) == 1.0
    assert steric_weight(3.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert hydrophobic_weight(3.0) == 0.25


def locality_fixture(distance):
    cro = chromophore_residue()
    a = anchor_structure(Structure("c", (cro,)))
    p = a.cro_centre + np.array([distance, 0.0, 0.0])
    near = a.cro_centre + np.array([0.0, 4.0, 0.0])
    return Structure("loc", (cro, res(100, [near]), res(101, [p])))


def test_locality_is_strict():
    s = locality_fixture(12.0)
    g = build_graph(s, anchor_structure(s))
    assert g.node_keys == ["A:100"]
    s = locality_fixture(11.999)
    g = build_graph(s, anchor_structure(s))
    assert g.node_keys == ["A:100", "A:101"]


def test_empty_neighbourhood_raises():
    cro = chromophore_residue()
    s = Structure("e", (cro, res(5, [(80.0, 0.0, 0.0)])))
    with pytest.raises(EmptyLocalNeighbourhood):
        build_graph(s, anchor_structure(s))


def test_channels_and_weights(rng):
    s = random_local_structure(rng, n_residues=15)
    g = build_graph(s, anchor_structure(s))
    assert set(g.weights) == set(ACTIVATED_CHANNELS)
    assert not ChannelId.HBOND.activated
    for ch in ACTIVATED_CHANNELS:
        w = g.weights[ch]
        assert np.all((w > 0) & (w <= 1))
        W = g.dense_weights(ch)
        assert np.array_equal(W, W.T)
    assert np.all(g.distances < 8.0)
    assert np.all(g.src < g.dst)
    assert g.beta.shape == (g.n_nodes, 3)
    assert np.all((g.alpha > 0) & (g.alpha <= 1))


def test_radius_monotone(rng):
    s = random_local_structure(rng, n_residues=20, radius=14)
    a = anchor_structure(s)
    prev = None
    for r in (14.0, 12.0, 10.0, 8.0, 6.0):
        try:
            keys = set(build_graph(s, a, locality_radius=r).node_keys)
        except EmptyLocalNeighbourhood:
            keys = set()
        if prev is not None:
            assert keys <= prev
        prev = keys
    assert len(build_graph(s, a, locality_radius=14.0).nodes) <= 20


def test_rigid_invariance(rng):
    for _ in range(5):
        s = random_local_structure(rng, n_residues=15)
        g = build_graph(s, anchor_structure(s))
        t = rigid_transform(s, random_rotation(rng), rng.normal(scale=30, size=3))
        h = build_graph(t, anchor_structure(t))
        assert g.node_keys == h.node_keys
        assert np.array_equal(g.src, h.src) and np.array_equal(g.dst, h.dst)
        for ch in ACTIVATED_CHANNELS:
            assert np.allclose(g.weights[ch], h.weights[ch], atol=1e-9)
        assert np.allclose(g.alpha, h.alpha, atol=1e-9)
        assert np.allclose(g.beta, h.beta, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_edge_cutoff_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    s = random_local_structure(rng, n_residues=10)
    g = build_graph(s, anchor_structure(s))
    edges = set(zip(g.src.tolist(), g.dst.tolist()))
    for i in range(g.n_nodes):
        for j in range(i + 1, g.n_nodes):
            d = residue_distance(g.nodes[i], g.nodes[j])
            assert ((i, j) in edges) == (d < 8.0)


def test_write_edge_list(tmp_path, rng):
    s = random_local_structure(rng, n_residues=6)
    g = build_graph(s, anchor_structure(s))
    p = tmp_path / "edges.csv"
    write_edge_list(g, p, "hydrophobic")
    lines = p.read_text().splitlines()
    assert lines[0] == "u_id,v_id,weight"
    assert len(lines) == 1 + len(g.src)
