import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_lab.channel import make_fig3_channel, make_identity_channel, make_independent_bec, make_two_step_bec
from consensus_lab.coding import rel_distance
from consensus_lab.common import build_common_structure, find_mixing_kernel, gamma_margin
from consensus_lab.errors import SingletonEffectiveAlphabet

from conftest import random_channel


def test_two_step_components():
    cs = build_common_structure(make_two_step_bec(0.5, 0.3))
    assert cs.graph.n_components == 3
    assert cs.u_symbols == ["0", "1"]
    assert np.allclose(cs.wv, [[0.5, 0, 0.5], [0, 0.5, 0.5]], rtol=0, atol=1e-15)
    assert cs.gamma == pytest.approx(1.0)


def test_fig3_structure():
    cs = build_common_structure(make_fig3_channel(0.25))
    assert cs.u_symbols == ["0", "1"]
    # "e" is the midpoint of the two vertices
    assert cs.p_tilde[1].tolist() == pytest.approx([0.5, 0.5])
    assert cs.eta == pytest.approx(0.5)
    assert cs.gamma == pytest.approx(1.0)


def test_identity_eta_is_one():
    cs = build_common_structure(make_identity_channel(3))
    assert cs.eta == 1.0
    assert not cs.eta_vacuous


def test_singleton_alphabet():
    cs = build_common_structure(make_two_step_bec(1.0, 0.3))
    assert cs.graph.n_components == 1
    assert len(cs.effective) == 1
    assert cs.gamma is None
    with pytest.raises(SingletonEffectiveAlphabet):
        gamma_margin(cs.wv, cs.effective)


def test_independent_bec_is_single_component():
    cs = build_common_structure(make_independent_bec(0.5))
    assert cs.graph.n_components == 1


def _components_oracle(w):
    """Union-find over Y+Z nodes joined by jointly reachable pairs."""
    nx, ny, nz = w.shape
    parent = list(range(ny + nz))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for y, z in itertools.product(range(ny), range(nz)):
        if w[:, y, z].sum() > 0:
            parent[find(y)] = find(ny + z)
    return [find(i) for i in range(ny + nz)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_components_match_union_find(seed):
    ch = random_channel(np.random.default_rng(seed))
    cs = build_common_structure(ch)
    roots = _components_oracle(ch.w)
    lab = np.concatenate([cs.graph.phi1, cs.graph.phi2])
    for i, j in itertools.combinations(range(len(roots)), 2):
        assert (roots[i] == roots[j]) == (lab[i] == lab[j])
    # phi1 and phi2 agree on every jointly reachable pair
    for y, z in zip(*np.nonzero(ch.w.sum(axis=0))):
        assert cs.graph.phi1[y] == cs.graph.phi2[z]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_p_tilde_reproduces_common_channel(seed):
    cs = build_common_structure(random_channel(np.random.default_rng(seed)))
    assert np.allclose(cs.p_tilde.sum(axis=1), 1.0)
    recon = cs.p_tilde @ cs.wv[cs.effective]
    assert np.abs(recon - cs.wv).sum(axis=1).max() <= 1e-7


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_binary_output_vertices_are_extremes(seed):
    """With two components the columns lie on a segment; the vertices are its endpoints."""
    rng = np.random.default_rng(seed)
    cs = None
    for _ in range(50):
        cs = build_common_structure(random_channel(rng))
        if cs.graph.n_components == 2:
            break
    else:
        return
    col = cs.wv[:, 0]
    ends = {float(col.min()), float(col.max())}
    assert {float(col[u]) for u in cs.effective} == ends


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mixing_kernel_preserves_common_output(seed):
    cs = build_common_structure(random_channel(np.random.default_rng(seed)))
    k = find_mixing_kernel(cs.wv).matrix
    assert np.all(k >= 0)
    assert np.allclose(k.sum(axis=1), 1.0)
    assert np.abs(k @ cs.wv - cs.wv).max() <= 1e-9


def test_mixing_kernel_two_step_moves_nothing():
    k = find_mixing_kernel(build_common_structure(make_two_step_bec(0.5, 0.5)).wv)
    assert k.off_diagonal_mass() == pytest.approx(0.0)


def test_rel_distance_fig3():
    cs = build_common_structure(make_fig3_channel(0.25))
    u = [0, 0, 2, 2]
    assert rel_distance(u, [0, 1, 1, 2], cs) == pytest.approx((0 + 0.5 + 0.5 + 0) / 4)
    with pytest.raises(ValueError):
        rel_distance([1, 0, 0, 0], [0, 0, 0, 0], cs)
