"""Codebooks, joint types and the relative distance d."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import gf2
from .common import CommonStructure
from .errors import BudgetExceeded, ConstructionFailed, SchemaError, TypeInfeasible

DEFAULT_RETRIES = 50
# codebooks with more messages than this are never materialized
MATERIALIZE_LIMIT = 1 << 20


# --- joint types -----------------------------------------------------------------


@dataclass(frozen=True)
class JointType:
    """Exact count table of a tuple of equal-length sequences."""

    counts: np.ndarray = field(repr=False)
    alphabets: tuple[tuple[str, ...], ...]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def prob(self, *symbols: str) -> Fraction:
        idx = tuple(a.index(s) for a, s in zip(self.alphabets, symbols))
        return Fraction(int(self.counts[idx]), self.n)

    def as_array(self) -> np.ndarray:
        return self.counts / self.n

    def marginal(self, axes: Sequence[int]) -> "JointType":
        drop = tuple(i for i in range(self.counts.ndim) if i not in axes)
        return JointType(self.counts.sum(axis=drop), tuple(self.alphabets[i] for i in axes))


def joint_type(seqs: Sequence[Sequence[Any]], alphabets: Sequence[Sequence[str]] | None = None) -> JointType:
    seqs = [list(s) for s in seqs]
    if len({len(s) for s in seqs}) != 1:
        raise ValueError("sequences must have equal length")
    if alphabets is None:
        alphabets = [tuple(dict.fromkeys(sorted(map(str, s)))) for s in seqs]
    alphabets = tuple(tuple(a) for a in alphabets)
    idx = [np.array([a.index(str(v)) for v in s], dtype=np.int64) for a, s in zip(alphabets, seqs)]
    counts = np.zeros(tuple(len(a) for a in alphabets), dtype=np.int64)
    np.add.at(counts, tuple(idx), 1)
    return JointType(counts, alphabets)


def _type_counts(a: np.ndarray, b: np.ndarray, na: int, nb: int) -> np.ndarray:
    """Joint count tables of rows of `a` (K, n) against one sequence `b` (n,)."""
    flat = a * nb + b[None, :]
    out = np.zeros((a.shape[0], na * nb), dtype=np.int64)
    rows = np.repeat(np.arange(a.shape[0]), a.shape[1])
    np.add.at(out, (rows, flat.ravel()), 1)
    return out.reshape(a.shape[0], na, nb)


# --- codebooks -------------------------------------------------------------------


@dataclass
class Codebook:
    """Explicit encoder f: [0, K) -> symbols^n, stored as symbol indices."""

    n: int
    symbols: tuple[str, ...]
    codewords: np.ndarray = field(repr=False)  # (K, n) int
    min_rel_distance: float = 0.0
    type_profile: tuple[float, ...] | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return int(self.codewords.shape[0])

    @property
    def rate(self) -> float:
        return math.log2(self.K) / self.n if self.K > 0 else 0.0

    @property
    def is_linear(self) -> bool:
        return False

    def codeword(self, m: int) -> np.ndarray:
        return self.codewords[m]

    def to_dict(self) -> dict:
        sep = "" if all(len(s) == 1 for s in self.symbols) else " "
        return {
            "kind": "explicit",
            "n": self.n,
            "K": self.K,
            "symbols": list(self.symbols),
            "codewords": [sep.join(self.symbols[i] for i in row) for row in self.codewords],
            "min_rel_distance": self.min_rel_distance,
            "type_profile": None if self.type_profile is None else list(self.type_profile),
            "metadata": self.metadata,
        }


@dataclass
class LinearCodebook:
    """Binary linear code; message m is the info vector of its bits, least significant first."""

    code: gf2.LinearCode
    metadata: dict = field(default_factory=dict)
    symbols: tuple[str, ...] = ("0", "1")
    type_profile: None = None

    @property
    def n(self) -> int:
        return self.code.n

    @property
    def k(self) -> int:
        return self.code.k

    @property
    def K(self) -> int:
        return 1 << self.code.k

    @property
    def rate(self) -> float:
        return self.code.k / self.code.n

    @property
    def min_rel_distance(self) -> float:
        return self.code.distance / self.code.n

    @property
    def is_linear(self) -> bool:
        return True

    @property
    def generator(self) -> np.ndarray:
        return self.code.generator

    def info_bits(self, m: int) -> np.ndarray:
        return np.array([(m >> i) & 1 for i in range(self.k)], dtype=np.uint8)

    def message(self, info: np.ndarray) -> int:
        return sum(int(b) << i for i, b in enumerate(info))

    def codeword(self, m: int) -> np.ndarray:
        return gf2.encode(self.info_bits(m), self.generator)

    @property
    def codewords(self) -> np.ndarray:
        if self.K > MATERIALIZE_LIMIT:
            raise BudgetExceeded(f"refusing to list {self.K} codewords")
        info = (np.arange(self.K)[:, None] >> np.arange(self.k)[None, :]) & 1
        return gf2.encode(info, self.generator)

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "n": self.n,
            "K": str(self.K),
            "symbols": list(self.symbols),
            "generator": ["".join(map(str, row)) for row in self.generator],
            "min_distance": self.code.distance,
            "construction": self.code.construction,
            "bch": None if self.code.bch is None else self.code.bch.to_dict(),
            "metadata": self.metadata,
        }


def codebook_from_dict(d: dict) -> Codebook | LinearCodebook:
    try:
        symbols = tuple(d["symbols"])
        n = int(d["n"])
        if d.get("kind") == "linear":
            gen = np.array([[int(c) for c in row] for row in d["generator"]], dtype=np.uint8)
            if gen.shape[1] != n:
                raise SchemaError("generator rows must have length n", "generator")
            bch = gf2.BCHParams.from_dict(d["bch"]) if d.get("bch") else None
            code = gf2.LinearCode(gen, int(d["min_distance"]), d.get("construction", "file"), bch)
            return LinearCodebook(code, d.get("metadata", {}))
        rows = []
        for i, s in enumerate(d["codewords"]):
            parts = list(s) if all(len(x) == 1 for x in symbols) else s.split()
            if len(parts) != n:
                raise SchemaError(f"codeword {i} has length {len(parts)}, expected {n}", f"codewords[{i}]")
            rows.append([symbols.index(p) for p in parts])
        if int(d["K"]) != len(rows):
            raise SchemaError("K does not match the number of codewords", "K")
    except KeyError as exc:
        raise SchemaError(f"missing field {exc.args[0]}", str(exc.args[0])) from None
    except ValueError as exc:
        raise SchemaError(f"bad codeword symbol: {exc}", "codewords") from None
    prof = d.get("type_profile")
    return Codebook(
        n,
        symbols,
        np.array(rows, dtype=np.int64).reshape(-1, n),
        float(d.get("min_rel_distance", 0.0)),
        None if prof is None else tuple(prof),
        d.get("metadata", {}),
    )


def dump_codebook(cb: Codebook | LinearCodebook, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cb.to_dict(), indent=2), encoding="utf-8")


def load_codebook(path: str | Path) -> Codebook | LinearCodebook:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}: {exc.msg}", f"line {exc.lineno}") from None
    return codebook_from_dict(d)


# --- relative distance -----------------------------------------------------------


def rel_distance(u_vec: Sequence[int], x_vec: Sequence[int], structure: CommonStructure | None = None) -> float:
    """d(u, x) = P(U != U~) under the joint type of (u, x) composed with P~(U~|X).

    Both vectors hold input-symbol indices; entries of `u_vec` must be representatives
    of the effective alphabet. Without a structure, P~ is the identity (Hamming/n).
    """
    u = np.asarray(u_vec, dtype=np.int64)
    x = np.asarray(x_vec, dtype=np.int64)
    if u.shape != x.shape:
        raise ValueError("length mismatch")
    if u.size == 0:
        return 0.0
    if structure is None:
        return float(np.mean(u != x))
    pos = {rep: j for j, rep in enumerate(structure.effective)}
    try:
        j = np.array([pos[int(a)] for a in u])
    except KeyError:
        raise ValueError("u_vec contains a symbol outside the effective alphabet") from None
    return float(np.mean(1.0 - structure.p_tilde[x, j]))


def _hamming_to_set(cands: np.ndarray, kept: np.ndarray) -> np.ndarray:
    """Min Hamming distance from each candidate row to the kept rows."""
    if kept.shape[0] == 0:
        return np.full(cands.shape[0], np.iinfo(np.int64).max)
    return (cands[:, None, :] != kept[None, :, :]).sum(axis=2).min(axis=1)


def gv_codebook(
    n: int,
    R: float | None,
    min_distance: int,
    rng: np.random.Generator,
    K: int | None = None,
    retries: int = DEFAULT_RETRIES,
) -> Codebook:
    """Greedy random binary code with pairwise Hamming distance >= min_distance."""
    if K is None:
        if R is None:
            raise ValueError("give R or K")
        K = int(math.floor(2.0 ** (n * R) + 1e-9))
    if K > MATERIALIZE_LIMIT:
        raise BudgetExceeded(f"K={K} codewords is too many to list; use a linear code")
    if K <= 1:
        return Codebook(n, ("0", "1"), np.zeros((max(K, 0), n), dtype=np.int64), 1.0, metadata={"construction": "trivial"})
    for attempt in range(retries):
        kept = np.zeros((0, n), dtype=np.int64)
        if n <= 16:
            # sweep every vector once in random order
            order = rng.permutation(1 << n)
            pool = (order[:, None] >> np.arange(n)[None, :]) & 1
            for start in range(0, pool.shape[0], 256):
                for c in pool[start:start + 256]:
                    if _hamming_to_set(c[None, :], kept)[0] >= min_distance:
                        kept = np.vstack([kept, c])
                        if kept.shape[0] == K:
                            break
                if kept.shape[0] == K:
                    break
        else:
            budget = 64 * K + 1000
            misses = 0
            while kept.shape[0] < K and misses < budget:
                cands = rng.integers(0, 2, size=(256, n))
                ok = _hamming_to_set(cands, kept) >= min_distance
                for c, good in zip(cands, ok):
                    if kept.shape[0] == K:
                        break
                    if good and _hamming_to_set(c[None, :], kept)[0] >= min_distance:
                        kept = np.vstack([kept, c])
                    else:
                        misses += 1
        if kept.shape[0] == K:
            return Codebook(
                n,
                ("0", "1"),
                kept,
                min_distance / n,
                metadata={"construction": "greedy random", "min_hamming_distance": min_distance, "attempts": attempt + 1},
            )
    raise ConstructionFailed(f"no binary code with K={K}, n={n}, distance>={min_distance} after {retries} attempts")


def linear_codebook(n: int, R: float, min_distance: int = 1) -> LinearCodebook:
    """Binary linear code of dimension ceil(nR) with certified distance >= min_distance."""
    k = max(1, math.ceil(n * R - 1e-12))
    code = gf2.best_linear_code(n, k, min_distance)
    if code is None:
        raise ConstructionFailed(f"no linear [{n},{k}] code with distance >= {min_distance}")
    return LinearCodebook(code, {"construction": code.construction, "rate_requested": R})


def _as_counts(n: int, P: Sequence[float]) -> np.ndarray:
    counts = np.asarray(P, dtype=float) * n
    rounded = np.round(counts)
    if np.any(np.abs(counts - rounded) > 1e-9) or int(rounded.sum()) != n or np.any(rounded < 0):
        raise TypeInfeasible(f"{list(P)} is not an n-type for n={n}")
    return rounded.astype(np.int64)


def constant_type_codebook(
    n: int,
    R: float,
    P: Sequence[float],
    delta: float,
    epsilon: float,
    rng: np.random.Generator,
    symbols: Sequence[str] = ("0", "1"),
    K: int | None = None,
    retries: int = DEFAULT_RETRIES,
) -> Codebook:
    """Codewords drawn from the type class of P, keeping only those at relative distance >= 2*delta from earlier ones."""
    symbols = tuple(symbols)
    if len(P) != len(symbols):
        raise ValueError("type and symbol list differ in length")
    counts = _as_counts(n, P)
    if K is None:
        K = int(math.floor(2.0 ** (n * R) + 1e-9))
    if K > MATERIALIZE_LIMIT:
        raise BudgetExceeded(f"K={K} codewords is too many to list")
    base = np.repeat(np.arange(len(symbols)), counts)
    need = math.ceil(2 * delta * n - 1e-9)
    for attempt in range(retries):
        cands = np.array([rng.permutation(base) for _ in range(2 * K)]).reshape(2 * K, n)
        kept = np.zeros((0, n), dtype=np.int64)
        for c in cands:
            if _hamming_to_set(c[None, :], kept)[0] >= need:
                kept = np.vstack([kept, c])
                if kept.shape[0] == K:
                    break
        # fail the attempt when expurgation removed more than half of the draws
        if kept.shape[0] == K:
            return Codebook(
                n,
                symbols,
                kept,
                2 * delta,
                tuple(float(c) / n for c in counts),
                {"construction": "constant type", "delta": delta, "epsilon": epsilon, "attempts": attempt + 1},
            )
    raise ConstructionFailed(f"constant-type construction failed for n={n}, K={K}, delta={delta} after {retries} attempts")


def _mi_from_counts(c: np.ndarray) -> float:
    p = c / c.sum()
    pu = p.sum(axis=1, keepdims=True)
    px = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log2(p / (pu * px)), 0.0)
    return float(t.sum())


@dataclass
class PropertyReport:
    rate: float
    epsilon: float
    rows: list[dict]

    @property
    def violations(self) -> list[dict]:
        return [r for r in self.rows if r["count"] > r["bound"]]

    def to_dict(self) -> dict:
        return {"rate": self.rate, "epsilon": self.epsilon, "types": self.rows, "violations": self.violations}


def verify_codebook_properties(codebook: Codebook, probe: Sequence[int], epsilon: float, x_size: int | None = None) -> PropertyReport:
    """Count codewords per realized joint type with the probe and compare with 2^{n(|R - I|^+ + eps)}."""
    probe = np.asarray(probe, dtype=np.int64)
    if probe.shape != (codebook.n,):
        raise ValueError("probe length differs from n")
    nx = x_size or int(max(probe.max() + 1, len(codebook.symbols)))
    tables = _type_counts(codebook.codewords, probe, len(codebook.symbols), nx)
    keys, inverse, counts = np.unique(tables.reshape(len(tables), -1), axis=0, return_inverse=True, return_counts=True)
    rows = []
    R = codebook.rate
    for key, cnt in zip(keys, counts):
        table = key.reshape(len(codebook.symbols), nx)
        mi = _mi_from_counts(table)
        bound = 2.0 ** (codebook.n * (max(R - mi, 0.0) + epsilon))
        rows.append({"joint_counts": table.tolist(), "count": int(cnt), "mutual_information": mi, "bound": bound})
    return PropertyReport(R, epsilon, rows)
