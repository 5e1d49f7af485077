import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_lab.adversary import (
    Attack,
    AttackContext,
    all_inputs,
    attack_menu,
    boundary_attack,
    boundary_batch,
    boundary_flips,
    hybrid_attack,
    mixing_batch,
)
from consensus_lab.channel import make_fig3_channel
from consensus_lab.coding import constant_type_codebook, linear_codebook
from consensus_lab.common import build_common_structure, find_mixing_kernel
from consensus_lab.errors import BudgetExceeded


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.data())
def test_boundary_flips_exact_count(n, data):
    flips = data.draw(st.integers(0, n))
    cw = np.random.default_rng(n).integers(0, 2, n)
    x, pos = boundary_batch(cw, flips, 20, np.random.default_rng(flips))
    assert np.all((x != cw).sum(axis=1) == flips)
    for row, p in zip(x, pos):
        assert set(np.flatnonzero(row != cw)) == set(p.tolist())


def test_boundary_single():
    a = boundary_attack(np.zeros(8, dtype=int), 3, np.random.default_rng(0))
    assert a.x_vec.sum() == 3
    assert a.provenance["positions"] == sorted(np.flatnonzero(a.x_vec).tolist())
    with pytest.raises(ValueError):
        boundary_batch(np.array([0, 2]), 1, 1, np.random.default_rng(0))


def test_hybrid():
    a, b = np.zeros(6, dtype=int), np.ones(6, dtype=int)
    assert hybrid_attack(a, b, 2).x_vec.tolist() == [1, 1, 0, 0, 0, 0]
    assert hybrid_attack(a, b, 0).x_vec.tolist() == a.tolist()
    assert hybrid_attack(a, b, 6).x_vec.tolist() == b.tolist()
    with pytest.raises(ValueError):
        hybrid_attack(a, b, 7)


def test_mixing_batch_frequencies():
    kernel = np.array([[0.7, 0.3, 0.0], [0.0, 1.0, 0.0], [0.2, 0.3, 0.5]])
    cw = np.array([0, 2, 1])
    x = mixing_batch(cw, kernel, 100_000, np.random.default_rng(4))
    for i, c in enumerate(cw):
        freq = np.bincount(x[:, i], minlength=3) / len(x)
        assert np.allclose(freq, kernel[c], atol=0.006)


def test_fig3_mixing_attack_keeps_common_output():
    ch = make_fig3_channel(0.25)
    cs = build_common_structure(ch)
    k = find_mixing_kernel(cs.wv)
    assert k.off_diagonal_mass() > 0
    cb = constant_type_codebook(8, 0.0, [0.5, 0.5], 0.1, 0.05, np.random.default_rng(0), ("0", "1"), K=2)
    ctx = AttackContext(cb, cs, k)
    x = Attack("mixing", "mixing", {"m": 0}).sample(ctx, 5000, np.random.default_rng(1))
    base = ctx.inputs(0)
    dist_v = cs.wv[x].mean(axis=0)
    assert np.allclose(dist_v, cs.wv[base], atol=0.03)


def test_menu_and_context():
    cb = linear_codebook(32, 0.25, 8)
    menu = attack_menu(32, 0.1, cb.K)
    names = [a.name for a in menu]
    assert names == ["boundary-1", "boundary-2", "hybrid-k8", "hybrid-k16", "hybrid-k24", "mixing"]
    assert boundary_flips(32, 0.1) == 2
    assert boundary_flips(10, 0.05) == 0
    assert [a.to_dict()["strategy"] for a in menu][-1] == "mixing"


def test_all_inputs():
    assert all_inputs(3, 2).shape == (9, 2)
    with pytest.raises(BudgetExceeded):
        all_inputs(2, 20, limit=1000)
