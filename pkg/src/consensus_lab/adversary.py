"""Byzantine sender strategies: mixing kernels, boundary flips and hybrid prefix swaps.

All vectors here are channel-input index arrays. Batch samplers return arrays of
shape (T, n) so the simulation layer can feed them straight into channel sampling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coding import Codebook, LinearCodebook
from .common import CommonStructure, MixingKernel, find_mixing_kernel
from .errors import BudgetExceeded


@dataclass(frozen=True)
class AttackInput:
    x_vec: np.ndarray
    provenance: dict


def codeword_inputs(codebook: Codebook | LinearCodebook, x_symbols: Sequence[str], m: int) -> np.ndarray:
    """Channel-input indices of f(m)."""
    lookup = np.array([list(x_symbols).index(s) for s in codebook.symbols], dtype=np.int64)
    return lookup[np.asarray(codebook.codeword(m), dtype=np.int64)]


def mixing_attack(codeword: np.ndarray, kernel: MixingKernel, rng: np.random.Generator) -> AttackInput:
    x = mixing_batch(np.asarray(codeword), kernel.matrix, 1, rng)[0]
    return AttackInput(x, {"strategy": "mixing", "kernel": kernel.matrix.tolist()})


def mixing_batch(codeword: np.ndarray, kernel: np.ndarray, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Pass every coordinate of the codeword independently through the kernel."""
    cdf = np.cumsum(kernel, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random((trials, codeword.size))
    rows = cdf[codeword]  # (n, X)
    return (u[:, :, None] >= rows[None, :, :]).sum(axis=2).astype(np.int64)


def boundary_attack(
    codeword: np.ndarray, flips: int, rng: np.random.Generator, pair: tuple[int, int] = (0, 1)
) -> AttackInput:
    x, pos = boundary_batch(np.asarray(codeword), flips, 1, rng, pair)
    return AttackInput(x[0], {"strategy": "boundary", "flips": flips, "positions": sorted(pos[0].tolist())})


def boundary_batch(
    codeword: np.ndarray, flips: int, trials: int, rng: np.random.Generator, pair: tuple[int, int] = (0, 1)
) -> tuple[np.ndarray, np.ndarray]:
    """Swap pair[0] <-> pair[1] at `flips` distinct uniform coordinates; returns (x, flipped positions)."""
    codeword = np.asarray(codeword, dtype=np.int64)
    n = codeword.size
    if not 0 <= flips <= n:
        raise ValueError(f"flips={flips} must lie in [0, {n}]")
    if not np.isin(codeword, pair).all():
        raise ValueError("boundary attack needs a codeword over the flipped pair of symbols")
    pos = np.argsort(rng.random((trials, n)), axis=1)[:, :flips]
    x = np.repeat(codeword[None, :], trials, axis=0)
    rows = np.arange(trials)[:, None]
    a, b = pair
    x[rows, pos] = np.where(x[rows, pos] == a, b, a)
    return x, pos


def boundary_flips(n: int, delta: float) -> int:
    """floor(n delta) - 1 flips sits just inside the distance tolerance."""
    return max(math.floor(n * delta + 1e-12) - 1, 0)


def hybrid_attack(codeword_m: np.ndarray, codeword_mhat: np.ndarray, k: int) -> AttackInput:
    a = np.asarray(codeword_m)
    b = np.asarray(codeword_mhat)
    if a.shape != b.shape:
        raise ValueError("codewords must have equal length")
    if not 0 <= k <= a.size:
        raise ValueError(f"k={k} must lie in [0, {a.size}]")
    x = np.concatenate([b[:k], a[k:]])
    return AttackInput(x, {"strategy": "hybrid", "k": k})


@dataclass(frozen=True)
class Attack:
    """One entry of an attack menu; `sample` draws T attacked input vectors."""

    name: str
    strategy: str
    params: dict = field(default_factory=dict)

    def sample(self, ctx: "AttackContext", trials: int, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.strategy == "honest":
            return np.repeat(ctx.inputs(p.get("m", 0))[None, :], trials, axis=0)
        if self.strategy == "fixed":
            return np.repeat(np.asarray(p["x"], dtype=np.int64)[None, :], trials, axis=0)
        if self.strategy == "boundary":
            return boundary_batch(ctx.inputs(p.get("m", 0)), p["flips"], trials, rng, ctx.binary_pair())[0]
        if self.strategy == "hybrid":
            x = hybrid_attack(ctx.inputs(p.get("m", 0)), ctx.inputs(p.get("mhat", 1)), p["k"]).x_vec
            return np.repeat(x[None, :], trials, axis=0)
        if self.strategy == "mixing":
            return mixing_batch(ctx.inputs(p.get("m", 0)), ctx.kernel().matrix, trials, rng)
        raise ValueError(f"unknown attack strategy {self.strategy!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "strategy": self.strategy, "params": _jsonable(self.params)}


def _jsonable(d: dict) -> dict:
    return {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}


class AttackContext:
    """Codebook and channel data an attack needs; the mixing kernel is computed lazily."""

    def __init__(self, codebook, structure: CommonStructure, kernel: MixingKernel | None = None):
        self.codebook = codebook
        self.structure = structure
        self.x_symbols = list(structure.channel.x_alphabet.symbols)
        self._kernel = kernel
        self._lookup = np.array([self.x_symbols.index(s) for s in codebook.symbols], dtype=np.int64)

    def inputs(self, m: int) -> np.ndarray:
        return self._lookup[np.asarray(self.codebook.codeword(m), dtype=np.int64)]

    def binary_pair(self) -> tuple[int, int]:
        if len(self._lookup) != 2:
            raise ValueError("boundary attacks need a binary codebook")
        return int(self._lookup[0]), int(self._lookup[1])

    def kernel(self) -> MixingKernel:
        if self._kernel is None:
            self._kernel = find_mixing_kernel(self.structure.wv)
        return self._kernel


def attack_menu(n: int, delta: float, K: int, include_mixing: bool = True) -> list[Attack]:
    """Default strategy menu: two boundary attacks, a hybrid sweep and the maximal mixing kernel."""
    menu = [Attack("boundary-1", "boundary", {"flips": min(1, n)})]
    edge = boundary_flips(n, delta)
    if edge > 1:
        menu.append(Attack(f"boundary-{edge}", "boundary", {"flips": edge}))
    if K >= 2:
        for k in sorted({n // 4, n // 2, (3 * n) // 4}):
            menu.append(Attack(f"hybrid-k{k}", "hybrid", {"k": k, "m": 0, "mhat": 1}))
    if include_mixing:
        menu.append(Attack("mixing", "mixing", {"m": 0}))
    return menu


def all_inputs(nx: int, n: int, limit: int = 1 << 16) -> np.ndarray:
    """Every vector in X^n, for exhaustive worst-input search at small n."""
    if nx**n > limit:
        raise BudgetExceeded(f"{nx}^{n} input vectors exceed the limit {limit}")
    return np.array(list(itertools.product(range(nx), repeat=n)), dtype=np.int64).reshape(-1, n)
