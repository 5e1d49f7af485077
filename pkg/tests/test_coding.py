import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_lab import gf2
from consensus_lab.coding import (
    codebook_from_dict,
    constant_type_codebook,
    dump_codebook,
    gv_codebook,
    joint_type,
    linear_codebook,
    load_codebook,
    verify_codebook_properties,
)
from consensus_lab.errors import BudgetExceeded, ConstructionFailed, TypeInfeasible


def _min_pairwise(rows):
    return min(int(np.sum(a != b)) for a, b in itertools.combinations(rows, 2))


def _brute_min_weight(gen):
    k = gen.shape[0]
    best = gen.shape[1]
    for info in itertools.product((0, 1), repeat=k):
        if any(info):
            best = min(best, int((np.array(info) @ gen % 2).sum()))
    return best


@pytest.mark.parametrize("n,d,K", [(8, 3, 8), (12, 4, 16), (16, 5, 20), (24, 8, 12)])
def test_gv_pairwise_distance_exhaustive(n, d, K):
    cb = gv_codebook(n, None, d, np.random.default_rng(n), K=K)
    assert cb.K == K
    assert _min_pairwise(cb.codewords) >= d
    assert cb.min_rel_distance == d / n


def test_gv_impossible():
    with pytest.raises(ConstructionFailed):
        gv_codebook(6, None, 5, np.random.default_rng(0), K=8, retries=2)


def test_gv_rate_sets_K():
    cb = gv_codebook(10, 0.3, 3, np.random.default_rng(0))
    assert cb.K == 8


@pytest.mark.parametrize("n,R", [(15, 0.34), (16, 0.3), (31, 0.36), (32, 0.2), (20, 0.3)])
def test_bch_distance_certificate(n, R):
    cb = linear_codebook(n, R)
    assert cb.k == int(np.ceil(n * R - 1e-12))
    assert _brute_min_weight(cb.generator) >= cb.code.distance
    assert gf2.rank(cb.generator) == cb.k


def test_bch_code_too_demanding():
    with pytest.raises(ConstructionFailed):
        linear_codebook(256, 0.2, 68)


def test_exact_min_distance_matches_brute():
    rng = np.random.default_rng(4)
    for _ in range(10):
        g = rng.integers(0, 2, (5, 12)).astype(np.uint8)
        if gf2.rank(g) < 5:
            continue
        assert gf2.exact_min_distance(g) == _brute_min_weight(g)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solve_batch(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, (4, 6, 9)).astype(np.uint8)
    x = rng.integers(0, 2, (4, 9)).astype(np.uint8)
    b = np.einsum("tij,tj->ti", a, x) % 2
    sol = gf2.solve_batch(a, b)
    assert sol.consistent.all()
    for t in range(4):
        assert np.array_equal(a[t] @ sol.particular[t] % 2, b[t])
        for v in sol.basis[t]:
            assert not (a[t] @ v % 2).any()
        assert len(sol.basis[t]) == 9 - gf2.rank(a[t])


def test_parity_check_and_information_set():
    code = linear_codebook(31, 0.36).code
    h = gf2.parity_check(code.generator)
    assert not (code.generator.astype(int) @ h.T.astype(int) % 2).any()
    assert h.shape[0] == code.n - code.k
    cols, inv = gf2.information_set(code.generator)
    info = np.random.default_rng(0).integers(0, 2, (50, code.k))
    cw = gf2.encode(info, code.generator)
    assert np.array_equal(cw[:, cols].astype(int) @ inv.astype(int) % 2, info)


@pytest.mark.parametrize("n,k", [(15, 5), (16, 5), (31, 11), (32, 6), (20, 6), (30, 8)])
def test_bounded_distance_decoder_vs_brute_force(n, k):
    code = gf2.best_linear_code(n, k)
    dec = gf2.BoundedDistanceDecoder(code)
    rng = np.random.default_rng(n * 100 + k)
    info = (np.arange(1 << k)[:, None] >> np.arange(k)) & 1
    cws = gf2.encode(info, code.generator)
    T = 1500
    m = rng.integers(0, 1 << k, T)
    x = cws[m].copy()
    for i, f in enumerate(rng.integers(0, code.distance, T)):
        x[i, rng.choice(n, f, replace=False)] ^= 1
    erased = rng.random((T, n)) < rng.uniform(0, 0.4, T)[:, None]
    t = rng.integers(0, code.distance // 2 + 1, T)
    status, got = dec.decode(x, erased, t)
    accepted = ((cws[None] != x[:, None]) & ~erased[:, None]).sum(axis=2) <= t[:, None]
    for i in range(T):
        hits = np.flatnonzero(accepted[i]).tolist()
        if status[i] == dec.FOUND:
            assert hits == [int((got[i].astype(np.int64) << np.arange(k)).sum())]
        elif status[i] == dec.NONE:
            assert hits == []
    # every row below the designed radius is settled
    cyc = erased[:, : dec.nc].sum(axis=1)
    assert np.all(status[2 * t + cyc < dec.bose] != dec.UNRESOLVED)


def test_bdd_rejects_foreign_generator():
    code = gf2.best_linear_code(15, 5)
    bad = gf2.LinearCode(np.eye(5, 15, dtype=np.uint8), 1, "identity", code.bch)
    with pytest.raises(ValueError):
        gf2.BoundedDistanceDecoder(bad)


def test_linear_roundtrip(tmp_path):
    cb = linear_codebook(64, 0.2, 24)
    path = tmp_path / "cb.json"
    dump_codebook(cb, path)
    back = load_codebook(path)
    assert np.array_equal(back.generator, cb.generator)
    assert back.code.bch == cb.code.bch
    assert back.codeword(12345) .tolist() == cb.codeword(12345).tolist()


def test_linear_messages():
    cb = linear_codebook(16, 0.25, 4)
    for m in (0, 1, 7, cb.K - 1):
        assert cb.message(cb.info_bits(m)) == m
    assert cb.codewords.shape == (cb.K, 16)
    with pytest.raises(BudgetExceeded):
        _ = linear_codebook(256, 0.5).codewords


def test_explicit_roundtrip(tmp_path):
    cb = gv_codebook(10, None, 3, np.random.default_rng(2), K=5)
    back = codebook_from_dict(json.loads(json.dumps(cb.to_dict())))
    assert np.array_equal(back.codewords, cb.codewords)


def test_constant_type():
    cb = constant_type_codebook(12, 0.0, [0.5, 0.25, 0.25], 0.2, 0.05, np.random.default_rng(1), ("0", "e", "1"), K=6)
    assert cb.K == 6
    for row in cb.codewords:
        assert np.bincount(row, minlength=3).tolist() == [6, 3, 3]
    assert _min_pairwise(cb.codewords) >= int(np.ceil(2 * 0.2 * 12))
    with pytest.raises(TypeInfeasible):
        constant_type_codebook(10, 0.1, [0.33, 0.67], 0.1, 0.05, np.random.default_rng(0))


def test_joint_type_and_properties():
    jt = joint_type([["0", "1", "1", "0"], ["a", "a", "b", "b"]])
    assert jt.n == 4
    assert jt.prob("1", "b") == pytest.approx(0.25)
    cb = gv_codebook(10, None, 2, np.random.default_rng(0), K=16)
    rep = verify_codebook_properties(cb, np.zeros(10, dtype=int), 0.5)
    assert sum(r["count"] for r in rep.rows) == 16
