"""Erasure-scheme, general type-based and shared-randomness decoders.

Outcomes are message indices in [0, K) or BOT. Batch methods take output
index arrays of shape (T, n) and return one outcome per row; outcome arrays
are int64, or object arrays of Python ints when K exceeds 2^62.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gf2
from .coding import Codebook, LinearCodebook
from .common import CommonStructure
from .errors import BudgetExceeded

BOT = -1
# outcome of a decoding the bounded-distance search cannot settle; simulations count it as a failure
UNRESOLVED = -2
# tolerance added to the 3*epsilon threshold of the general decoder
SOLVER_TOL = 1e-7
MAX_KERNEL_DIM = 20
_CELLS = 1 << 24


@dataclass(frozen=True)
class DecoderConfig:
    delta: float
    epsilon: float = 0.05
    ell: int | None = None

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise ValueError(f"delta={self.delta} must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon={self.epsilon} must be positive")
        if self.ell is not None and self.ell < 0:
            raise ValueError("ell must be nonnegative")


def choose_ell(n: int, delta: float) -> int:
    """Integer ell with n*delta/8 < 2^ell <= n*delta/4."""
    lo, hi = n * delta / 8, n * delta / 4
    ell = 0
    while 2**ell <= lo:
        ell += 1
    if 2**ell > hi:
        raise ValueError(f"no integer ell with {lo:g} < 2^ell <= {hi:g} (n too small for delta)")
    return ell


def h_index(s_vec: Sequence[int], ell: int) -> int:
    """1 + the integer whose binary digits are the first ell bits of s (most significant first)."""
    if ell > len(s_vec):
        raise ValueError("ell exceeds the length of the shared string")
    v = 0
    for b in list(s_vec)[:ell]:
        v = 2 * v + int(b)
    return v + 1


def _h_batch(s: np.ndarray, ell: int) -> np.ndarray:
    if ell == 0:
        return np.ones(s.shape[0], dtype=np.int64)
    w = 1 << np.arange(ell - 1, -1, -1)
    return s[:, :ell].astype(np.int64) @ w + 1


def _outcome_array(size: int, K: int) -> np.ndarray:
    return np.full(size, BOT, dtype=np.int64 if K <= (1 << 62) else object)


def _unique(accept: np.ndarray, K: int) -> np.ndarray:
    """accept (T, K) -> unique accepted index per row or BOT."""
    out = _outcome_array(accept.shape[0], K)
    one = accept.sum(axis=1) == 1
    out[one] = accept[one].argmax(axis=1)
    return out


class _Supports:
    """Support tables of W_V, W_Y, W_Z on the channel input alphabet."""

    def __init__(self, structure: CommonStructure, symbols: Sequence[str]):
        ch = structure.channel
        self.structure = structure
        self.x_of_symbol = np.array([ch.x_alphabet.index(s) for s in symbols], dtype=np.int64)
        self.v = structure.wv[self.x_of_symbol] > 0  # (|symbols|, V)
        self.out = {
            "B": ch.w.sum(axis=2)[self.x_of_symbol] > 0,
            "C": ch.w.sum(axis=1)[self.x_of_symbol] > 0,
        }
        self.phi = {"B": structure.graph.phi1, "C": structure.graph.phi2}


def _side(side: str) -> str:
    s = side.upper()
    if s in ("B", "Y"):
        return "B"
    if s in ("C", "Z"):
        return "C"
    raise ValueError(f"unknown side {side!r}")


class ErasureDecoder:
    """Accept m iff f(m) is consistent with the common-channel output and an explaining
    vector within fewer than delta*n disagreements exists; unique acceptance decodes.

    With `lozenge=False, max_unexplained=0` this is the naive decoder that accepts m iff
    f(m) explains the output exactly.
    """

    name = "erasure"

    def __init__(
        self,
        codebook: Codebook | LinearCodebook,
        structure: CommonStructure,
        delta: float | None,
        lozenge: bool = True,
        max_unexplained: int | None = None,
    ):
        self.codebook = codebook
        self.sup = _Supports(structure, codebook.symbols)
        self.lozenge = lozenge
        n = codebook.n
        if max_unexplained is None:
            if delta is None:
                raise ValueError("give delta or max_unexplained")
            max_unexplained = math.ceil(delta * n - 1e-12) - 1
        self.max_unexplained = max_unexplained
        self.delta = delta
        self._cw = None if codebook.is_linear and codebook.K > (1 << 12) else codebook.codewords

    # -- single-output API --------------------------------------------------------

    def decode(self, y_vec: Sequence[int], side: str) -> int:
        y = np.asarray(y_vec, dtype=np.int64)[None, :]
        return self.decode_batch(y, side)[0]

    def accepted(self, y_vec: Sequence[int], side: str) -> list[int]:
        """All messages passing both conditions (explicit codebooks only)."""
        cw = self._codewords()
        ok = self._accept_explicit(np.asarray(y_vec)[None, :], _side(side), cw)[0]
        return [int(m) for m in np.flatnonzero(ok)]

    def unexplained(self, y_vec: Sequence[int], m: int, side: str) -> int:
        """Number of positions where f(m) cannot produce y."""
        s = _side(side)
        c = self.codebook.codeword(m)
        return int((~self.sup.out[s][c, np.asarray(y_vec)]).sum())

    # -- batch API ----------------------------------------------------------------

    def decode_batch(self, outputs: np.ndarray, side: str) -> np.ndarray:
        s = _side(side)
        if self._cw is not None:
            return self._explicit(outputs, s)
        return self._linear({s: outputs})[s]

    def decode_pair(self, y: np.ndarray, z: np.ndarray, shared: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        if self._cw is not None:
            return self._explicit(y, "B"), self._explicit(z, "C")
        out = self._linear({"B": y, "C": z})
        return out["B"], out["C"]

    def _codewords(self) -> np.ndarray:
        return self._cw if self._cw is not None else self.codebook.codewords

    def _accept_explicit(self, outputs: np.ndarray, s: str, cw: np.ndarray) -> np.ndarray:
        sup_out = self.sup.out[s][cw[None, :, :], outputs[:, None, :]]  # (T, K, n)
        ok = (~sup_out).sum(axis=2) <= self.max_unexplained
        if self.lozenge:
            v = self.sup.phi[s][outputs]
            ok &= self.sup.v[cw[None, :, :], v[:, None, :]].all(axis=2)
        return ok

    def _explicit(self, outputs: np.ndarray, s: str) -> np.ndarray:
        outputs = np.asarray(outputs, dtype=np.int64)
        cw = self._cw
        K, n = cw.shape
        out = _outcome_array(outputs.shape[0], K)
        step = max(1, _CELLS // max(K * n, 1))
        for a in range(0, outputs.shape[0], step):
            out[a:a + step] = _unique(self._accept_explicit(outputs[a:a + step], s, cw), K)
        return out

    # -- linear codes -------------------------------------------------------------

    @staticmethod
    def _fixed_bits(table: np.ndarray, symbols_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per position: is the input bit forced, its forced value, and whether no bit fits."""
        allowed = table[:, symbols_out]  # (2, T, n)
        fixed = allowed[0] ^ allowed[1]
        value = allowed[1] & ~allowed[0]
        none = ~(allowed[0] | allowed[1])
        return fixed, value.astype(np.uint8), none

    def _linear(self, outputs: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        cb = self.codebook
        if len(cb.symbols) != 2:
            raise ValueError("linear codebooks need a binary input alphabet")
        g = cb.generator
        res = {}
        cache: dict[bytes, gf2.AffineSolution] = {}
        for s, o in outputs.items():
            o = np.asarray(o, dtype=np.int64)
            fy, by, ny = self._fixed_bits(self.sup.out[s], o)
            const = ny.sum(axis=1)
            mask = np.zeros(o.shape, dtype=bool)
            bits = np.zeros(o.shape, dtype=np.uint8)
            dead = const > self.max_unexplained
            if self.lozenge:
                fv, bv, nv = self._fixed_bits(self.sup.v, self.sup.phi[s][o])
                mask |= fv
                bits |= bv & fv
                dead |= nv.any(axis=1)
            if self.max_unexplained == 0:
                # zero tolerance turns the forced private positions into equations
                dead |= (mask & fy & (bits != by)).any(axis=1)
                bits = np.where(fy, by, bits)
                mask |= fy
            key = mask.tobytes() + bits.tobytes()
            if key not in cache:
                a = np.where(mask[:, :, None], g.T[None, :, :], 0).astype(np.uint8)
                cache[key] = gf2.solve_batch(a, bits & mask)
            res[s] = self._resolve(cache[key], g, dead, fy, by, const)
        return res

    def _resolve(self, sol: gf2.AffineSolution, g, dead, fy, by, const) -> np.ndarray:
        cb = self.codebook
        t = dead.shape[0]
        out = _outcome_array(t, cb.K)
        for i in range(t):
            if dead[i] or not sol.consistent[i]:
                continue
            basis = sol.basis[i]
            if basis.shape[0] > MAX_KERNEL_DIM:
                raise BudgetExceeded(f"{2 ** basis.shape[0]} candidate codewords in one decoding")
            combos = (np.arange(1 << basis.shape[0])[:, None] >> np.arange(basis.shape[0])[None, :]) & 1
            info = (sol.particular[i][None, :] + combos @ basis) & 1
            cw = gf2.encode(info, g)
            cost = ((cw != by[i][None, :]) & fy[i][None, :]).sum(axis=1) + const[i]
            ok = np.flatnonzero(cost <= self.max_unexplained)
            if ok.size == 1:
                out[i] = cb.message(info[ok[0]])
        return out


def naive_decoder(codebook: Codebook | LinearCodebook, structure: CommonStructure) -> ErasureDecoder:
    d = ErasureDecoder(codebook, structure, None, lozenge=False, max_unexplained=0)
    d.name = "naive"
    return d


def decode_erasure(y_vec, codebook, config: DecoderConfig, structure: CommonStructure, side: str) -> int:
    return ErasureDecoder(codebook, structure, config.delta).decode(y_vec, side)


# --- general type-based decoder ---------------------------------------------------


def _kl_bits(p: np.ndarray, q: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any((p > 0) & (q <= 0)):
            return math.inf
        t = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0) / np.where(q > 0, q, 1.0)), 0.0)
    return float(t.sum())


def lozenge_divergence(u_idx: np.ndarray, v_idx: np.ndarray, wv: np.ndarray) -> float:
    """D(P_{XV} || P_X W_{V|X}) in bits for the joint type of (u, v); u holds input indices."""
    nx, nv = wv.shape
    counts = np.zeros((nx, nv))
    np.add.at(counts, (u_idx, v_idx), 1.0)
    p = counts / counts.sum()
    return _kl_bits(p, p.sum(axis=1, keepdims=True) * wv)


@dataclass
class ExplainResult:
    divergence: float  # bits
    distance: float
    mu: float
    conditional: np.ndarray  # Q(x | u, y)


def _mixture_weights(p: np.ndarray, a: np.ndarray, r0: np.ndarray, iters: int = 500, tol: float = 1e-13) -> np.ndarray:
    """argmax over the simplex of sum_y p_y log (A r)_y.

    Newton steps on the current support, EM steps as a monotone fallback; stops on the
    Frank-Wolfe gap max_x g_x - sum(p), which bounds the suboptimality by concavity.
    """
    nx = a.shape[1]
    keep = p > 0
    p, a = p[keep], a[keep]
    if p.size == 0:
        return r0
    total = p.sum()
    r = np.where(r0 > 1e-12, r0, 0.0)
    if np.any(a @ r <= 0) or r.sum() <= 0:
        r = np.full(nx, 1.0 / nx)
    r = r / r.sum()
    f = lambda v: float(p @ np.log(a @ v))
    for _ in range(iters):
        ar = a @ r
        g = a.T @ (p / ar)
        gap = float(g.max() - total)
        if gap <= tol * max(total, 1.0):
            break
        f0 = f(r)
        # let the most violating coordinate enter the support
        j = int(np.argmax(g))
        if r[j] == 0.0:
            # Frank-Wolfe step toward vertex j; its slope is the positive gap
            t = 1e-3
            while t > 1e-15:
                cand = (1 - t) * r
                cand[j] += t
                if f(cand) > f0:
                    r = cand
                    break
                t *= 0.5
            continue
        idx = np.flatnonzero(r > 0)
        h = (a[:, idx] * (p / ar**2)[:, None]).T @ a[:, idx]
        m = len(idx)
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = h + 1e-14 * np.eye(m)
        kkt[:m, m] = 1.0
        kkt[m, :m] = 1.0
        d = np.linalg.lstsq(kkt, np.concatenate([g[idx], [0.0]]), rcond=None)[0][:m]
        neg = d < 0
        ratios = np.where(neg, -r[idx] / np.where(neg, d, -1.0), np.inf)
        amax = float(ratios.min())
        step = min(1.0, amax)
        moved = False
        while step > 1e-12:
            cand = r.copy()
            cand[idx] = r[idx] + step * d
            if step == amax:
                cand[idx[int(np.argmin(ratios))]] = 0.0
            cand = np.maximum(cand, 0.0)
            cand /= cand.sum()
            if np.all(a @ cand > 0) and f(cand) > f0:
                moved = True
                break
            step *= 0.5
        if not moved:
            cand = r * g / total  # EM update never decreases the objective
            cand /= cand.sum()
        r = cand
    return r


def _lagrangian_solution(puy: np.ndarray, w: np.ndarray, cost: np.ndarray, mu: float, r0: np.ndarray):
    """Minimize D(J || J_UX W) + mu * E_J[cost] over Q(x|u,y) with J = P_UY Q.

    For fixed mixture weights r(x|u) the optimal Q is proportional to r W exp(-mu cost);
    the outer problem in r splits over u into concave mixture-weight problems.
    """
    r = np.empty_like(r0)
    for u in range(puy.shape[0]):
        a = w.T * np.exp(-mu * cost[u])[None, :]  # (Y, X)
        r[u] = _mixture_weights(puy[u], a, r0[u])
    q = r[:, None, :] * w.T[None, :, :] * np.exp(-mu * cost)[:, None, :]
    q /= np.maximum(q.sum(axis=2, keepdims=True), 1e-300)
    j = puy[:, :, None] * q
    jux = j.sum(axis=1)
    div = _kl_bits(j, jux[:, None, :] * w.T[None, :, :])
    return div, float((jux * cost).sum()), q, r


def min_explaining_divergence(puy: np.ndarray, w: np.ndarray, cost: np.ndarray, delta: float) -> ExplainResult:
    """min over Q(x|u,y) of D(P_UXY || P_UX W_{Y|X}) subject to E[cost(U,X)] < delta.

    puy: joint type of (u, y) over (U, Y); w: W_{Y|X} (X, Y); cost[u, x] = 1 - P~(u|x).
    Returns divergence inf when the constraint set is empty.
    """
    reach = w.T > 0  # (Y, X)
    mask = puy > 0
    best_cost = np.where(reach[None, :, :], cost[:, None, :], np.inf).min(axis=2)
    dmin = float((puy * np.where(mask, best_cost, 0.0)).sum())
    if not dmin < delta:
        return ExplainResult(math.inf, dmin, math.inf, np.zeros(puy.shape + (w.shape[0],)))
    r0 = 0.5 * np.full(cost.shape, 1.0 / cost.shape[1]) + 0.5 * (cost == 0) / np.maximum((cost == 0).sum(axis=1, keepdims=True), 1)
    div, dist, q, r = _lagrangian_solution(puy, w, cost, 0.0, r0)
    if dist < delta:
        return ExplainResult(div, dist, 0.0, q)
    lo, hi = 0.0, 1.0
    low = (div, dist, q)
    while True:
        div_h, dist_h, q_h, r_h = _lagrangian_solution(puy, w, cost, hi, r)
        if dist_h < delta or hi > 1e6:
            break
        lo, hi, low = hi, hi * 4, (div_h, dist_h, q_h)
    high = (div_h, dist_h, q_h)
    r = r_h
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        div_m, dist_m, q_m, r = _lagrangian_solution(puy, w, cost, mid, r)
        if dist_m < delta:
            hi, high = mid, (div_m, dist_m, q_m)
        else:
            lo, low = mid, (div_m, dist_m, q_m)
        if hi - lo < 1e-9 * max(1.0, hi):
            break
    # the Lagrangian may be flat in mu; mix the bracketing joints to sit just inside the constraint
    best = ExplainResult(high[0], high[1], hi, high[2])
    if low[1] > high[1]:
        theta = max((delta - high[1]) / (low[1] - high[1]) - 1e-9, 0.0)
        j = theta * puy[:, :, None] * low[2] + (1 - theta) * puy[:, :, None] * high[2]
        jux = j.sum(axis=1)
        div_mix = _kl_bits(j, jux[:, None, :] * w.T[None, :, :])
        dist_mix = float((jux * cost).sum())
        if dist_mix < delta and div_mix < best.divergence:
            q = j / np.maximum(puy[:, :, None], 1e-300)
            best = ExplainResult(div_mix, dist_mix, hi, q)
    return best


class GeneralTypeDecoder:
    """Type-based decoder for codebooks over the effective alphabet of any channel."""

    name = "general"

    def __init__(self, codebook: Codebook, structure: CommonStructure, config: DecoderConfig):
        self.codebook = codebook
        self.cs = structure
        self.config = config
        ch = structure.channel
        self.u_x = np.array([ch.x_alphabet.index(s) for s in codebook.symbols], dtype=np.int64)
        col = {u: j for j, u in enumerate(structure.effective)}
        try:
            self.u_col = np.array([col[int(x)] for x in self.u_x])
        except KeyError:
            raise ValueError("codebook symbols must belong to the effective alphabet") from None
        # cost[u, x] = 1 - P~(u | x) for codebook symbol u
        self.cost = 1.0 - structure.p_tilde[:, self.u_col].T
        self.w = {"B": ch.w.sum(axis=2), "C": ch.w.sum(axis=1)}
        self.threshold = 3 * config.epsilon + SOLVER_TOL

    def conditions(self, y_vec: Sequence[int], m: int, side: str) -> tuple[float, float]:
        """(lozenge divergence, minimal explaining divergence) for message m."""
        s = _side(side)
        y = np.asarray(y_vec, dtype=np.int64)
        u = self.codebook.codewords[m]
        phi = self.cs.graph.phi1 if s == "B" else self.cs.graph.phi2
        d1 = lozenge_divergence(self.u_x[u], phi[y], self.cs.wv)
        if d1 > self.threshold:
            return d1, math.inf
        w = self.w[s]
        puy = np.zeros((len(self.codebook.symbols), w.shape[1]))
        np.add.at(puy, (u, y), 1.0)
        puy /= len(y)
        return d1, min_explaining_divergence(puy, w, self.cost, self.config.delta).divergence

    def accepts(self, y_vec, m: int, side: str) -> bool:
        d1, d2 = self.conditions(y_vec, m, side)
        return d1 <= self.threshold and d2 <= self.threshold

    def decode(self, y_vec, side: str) -> int:
        hits = [m for m in range(self.codebook.K) if self.accepts(y_vec, m, side)]
        return hits[0] if len(hits) == 1 else BOT

    def decode_batch(self, outputs: np.ndarray, side: str) -> np.ndarray:
        return np.array([self.decode(o, side) for o in outputs], dtype=np.int64)

    def decode_pair(self, y, z, shared=None):
        return self.decode_batch(y, "B"), self.decode_batch(z, "C")


def decode_general_type(y_vec, codebook: Codebook, config: DecoderConfig, structure: CommonStructure, side: str) -> int:
    return GeneralTypeDecoder(codebook, structure, config).decode(y_vec, side)


# --- shared-randomness decoder ----------------------------------------------------


class SharedRandomnessDecoder:
    """Accept m iff at most h(s) unerased output bits disagree with f(m).

    Outputs use the independent-BEC labels {0, 1, e} with indices 0, 1, 2. Explicit
    codebooks are searched directly; BCH-derived linear codes use bounded-distance
    decoding, which is exact when 2 h(s) + #erasures is below the designed distance
    and returns UNRESOLVED otherwise.
    """

    name = "shared"
    ERASED = 2

    def __init__(self, codebook: Codebook | LinearCodebook, config: DecoderConfig):
        self.codebook = codebook
        self.config = config
        self.ell = config.ell if config.ell is not None else choose_ell(codebook.n, config.delta)
        self._bdd = None
        if codebook.is_linear and codebook.K > (1 << 12):
            self._bdd = gf2.BoundedDistanceDecoder(codebook.code)

    def thresholds(self, shared: np.ndarray) -> np.ndarray:
        return _h_batch(np.asarray(shared), self.ell)

    def disagreements(self, outputs: np.ndarray, cw: np.ndarray) -> np.ndarray:
        """(T, K) counts of unerased positions where the output differs from the codeword."""
        outputs = np.asarray(outputs)
        return ((outputs[:, None, :] != cw[None, :, :]) & (outputs[:, None, :] != self.ERASED)).sum(axis=2)

    def decode(self, y_vec, s_vec) -> int:
        return self.decode_batch(np.asarray(y_vec)[None, :], np.asarray(s_vec)[None, :])[0]

    def decode_batch(self, outputs: np.ndarray, shared: np.ndarray, side: str = "B") -> np.ndarray:
        outputs = np.asarray(outputs, dtype=np.int64)
        t = self.thresholds(shared)
        K = self.codebook.K
        out = _outcome_array(outputs.shape[0], K)
        if self._bdd is not None:
            erased = outputs == self.ERASED
            status, info = self._bdd.decode(np.where(erased, 0, outputs), erased, t)
            out[status == gf2.BoundedDistanceDecoder.UNRESOLVED] = UNRESOLVED
            for i in np.flatnonzero(status == gf2.BoundedDistanceDecoder.FOUND):
                out[i] = self.codebook.message(info[i])
            return out
        cw = self.codebook.codewords
        n = cw.shape[1]
        step = max(1, _CELLS // max(K * n, 1))
        for a in range(0, outputs.shape[0], step):
            acc = self.disagreements(outputs[a:a + step], cw) <= t[a:a + step, None]
            out[a:a + step] = _unique(acc, K)
        return out

    def decode_pair(self, y, z, shared):
        return self.decode_batch(y, shared), self.decode_batch(z, shared)


def decode_shared_rand(y_vec, s_vec, codebook, config: DecoderConfig, side: str = "B") -> int:
    return SharedRandomnessDecoder(codebook, config).decode(y_vec, s_vec)
