"""Point-to-point, common-message and consensus capacities (bits per channel use).

Both max-min problems are solved as one relative-entropy cone program. Every
reported value is bracketed by an independent lower bound (inner minima at
the recovered input law) and upper bound (the minimization objective at the
solver's dual point).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import BroadcastChannel, PointToPointChannel, marginal
from .common import CommonStructure, build_common_structure
from .errors import ConsensusLabError, NonConvergence

DEFAULT_TOL = 1e-4
_DCLIP = 1e3


class OrderingViolation(ConsensusLabError):
    exit_code = 3


@dataclass
class CapacityResult:
    value: float
    argmax: np.ndarray
    input_symbols: list[str]
    kernel: dict[str, np.ndarray] | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "argmax": dict(zip(self.input_symbols, map(float, self.argmax))),
            "diagnostics": self.diagnostics,
        }
        if self.kernel is not None:
            out["inner_kernel"] = {k: v.tolist() for k, v in self.kernel.items()}
        return out


# --- information functionals -------------------------------------------------


def _entropy(m: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(m > 0, m * np.log2(np.where(m > 0, m, 1.0)), 0.0)
    return -t.sum(axis=-1)


def _matrix(channel: PointToPointChannel | np.ndarray) -> np.ndarray:
    return channel.matrix if isinstance(channel, PointToPointChannel) else np.asarray(channel, dtype=float)


def mutual_information(p: np.ndarray, channel: PointToPointChannel | np.ndarray) -> float:
    """I(X;Y) in bits for input distribution p through row-stochastic W."""
    w = _matrix(channel)
    p = np.asarray(p, dtype=float)
    q = p @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(w > 0, w / np.where(q > 0, q, 1.0)[None, :], 1.0)
        terms = np.where((w > 0) & (p[:, None] > 0), p[:, None] * w * np.log2(ratio), 0.0)
    return max(float(terms.sum()), 0.0)


def _mi_batch(p: np.ndarray, w: np.ndarray, hw: np.ndarray) -> np.ndarray:
    """Mutual information for a batch of inputs p[..., x]."""
    return np.maximum(_entropy(p @ w) - p @ hw, 0.0)


def _divergences(w: np.ndarray, q: np.ndarray, hw: np.ndarray) -> np.ndarray:
    """D(W_x || q) in bits for every row x (clipped where q misses the support)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logq = np.log2(np.where(q > 0, q, 1.0))
        cross = -(w * logq).sum(axis=1)
        missing = ((w > 0) & (q[None, :] <= 0)).any(axis=1)
    d = -hw + cross
    d[missing] = _DCLIP
    return np.minimum(d, _DCLIP)


# --- point-to-point -----------------------------------------------------------


def p2p_capacity(channel: PointToPointChannel | np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = 100000) -> CapacityResult:
    """Blahut-Arimoto until the capacity bracket is narrower than tol."""
    w = _matrix(channel)
    symbols = list(channel.input_alphabet) if isinstance(channel, PointToPointChannel) else [str(i) for i in range(w.shape[0])]
    nx = w.shape[0]
    hw = _entropy(w)
    p = np.full(nx, 1.0 / nx)
    lo = hi = 0.0
    for it in range(1, max_iter + 1):
        q = p @ w
        d = _divergences(w, q, hw)
        lo = float(p @ d)
        hi = float(d.max())
        if hi - lo < tol:
            break
        c = np.exp2(d - hi)
        p = p * c
        p /= p.sum()
    else:
        raise NonConvergence(f"Blahut-Arimoto bracket {hi - lo:.3e} after {max_iter} iterations")
    value = mutual_information(p, w)
    return CapacityResult(value, p, symbols, diagnostics={"iterations": it, "bracket": hi - lo, "upper_bound": hi})


# --- max-min machinery ---------------------------------------------------------
#
# For inputs grouped into classes (singletons for the common-message problem),
#   C = max_P min( min_{K_Y} I(P, K_Y W_Y), min_{K_Z} I(P, K_Z W_Z) ).
# Writing I(P, A) = min_r sum_u P(u) D(A_u || r) and exchanging max and min
# twice (the objective is linear in P and in the weight lam) gives
#   C = min_{lam, K, r} max_u [ lam D(K_Y,u W_Y || r_Y) + (1-lam) D(K_Z,u W_Z || r_Z) ],
# which is jointly convex after scaling (K, r) by lam and 1-lam. The optimal
# P is the dual vector of the per-u constraints.


def simplex_grid(dim: int, resolution: float) -> np.ndarray:
    steps = int(round(1.0 / resolution))
    pts = [c for c in itertools.product(range(steps + 1), repeat=dim - 1) if sum(c) <= steps]
    arr = np.array([list(c) + [steps - sum(c)] for c in pts], dtype=float)
    return arr / steps


@dataclass
class _InnerProblem:
    """min over kernels P_{X|U} supported on the classes of I(U; out) for fixed P_U."""

    w: np.ndarray  # W_{out|X}
    classes: list[np.ndarray]  # x-indices per effective symbol

    def compose(self, kern: list[np.ndarray]) -> np.ndarray:
        return np.stack([k @ self.w[c] for k, c in zip(kern, self.classes)])

    @property
    def trivial(self) -> bool:
        return all(len(c) == 1 for c in self.classes)

    def solve(self, pu: np.ndarray, tol: float, start: list[np.ndarray] | None = None, max_iter: int = 5000) -> tuple[float, list[np.ndarray], float]:
        """Exponentiated-gradient descent; returns (value, kernel, Frank-Wolfe gap)."""
        kern = [np.full(len(c), 1.0 / len(c)) for c in self.classes] if start is None else [k.copy() for k in start]
        if self.trivial:
            return mutual_information(pu, self.compose(kern)), kern, 0.0
        step = 1.0
        val, grads = self._value_grad(pu, kern)
        gap = math.inf
        for _ in range(max_iter):
            gap = sum(pu[u] * (grads[u] @ kern[u] - grads[u].min()) for u in range(len(kern)))
            if gap < tol:
                break
            while True:
                cand = []
                for k, g in zip(kern, grads):
                    z = np.log(np.maximum(k, 1e-300)) - step * (g - g.min())
                    z = np.exp(z - z.max())
                    cand.append(z / z.sum())
                cv, cg = self._value_grad(pu, cand)
                if cv <= val + 1e-15 or step < 1e-10:
                    break
                step *= 0.5
            kern, val, grads = cand, cv, cg
            step = min(step * 1.5, 50.0)
        return val, kern, gap

    def _value_grad(self, pu: np.ndarray, kern: list[np.ndarray]) -> tuple[float, list[np.ndarray]]:
        a = self.compose(kern)
        q = pu @ a
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.where(a > 0, np.log2(np.where(a > 0, a, 1.0) / np.where(q > 0, q, 1.0)[None, :]), 0.0)
        grads = [self.w[c] @ lr[u] for u, c in enumerate(self.classes)]
        return mutual_information(pu, a), grads

    def grid_min(self, pu: np.ndarray, max_points: int = 200000) -> float:
        sizes = [len(c) for c in self.classes]
        res = 0.01
        while math.prod(1 if s == 1 else len(simplex_grid(s, res)) for s in sizes) > max_points:
            res *= 2
        grids = [np.ones((1, 1)) if s == 1 else simplex_grid(s, res) for s in sizes]
        return min(mutual_information(pu, self.compose(list(combo))) for combo in itertools.product(*grids))


@dataclass
class _ConicSolution:
    pu: np.ndarray
    lam: float
    kernels: dict[str, list[np.ndarray]]
    refs: dict[str, np.ndarray]
    value: float


def _conic_maxmin(inner: dict[str, _InnerProblem]) -> _ConicSolution:
    import cvxpy as cp

    classes = inner["Y"].classes
    lam = cp.Variable()
    t = cp.Variable()
    cons = [lam >= 0, lam <= 1]
    kv: dict[str, list] = {}
    rv: dict[str, object] = {}
    div = {}
    for side, weight in (("Y", lam), ("Z", 1 - lam)):
        w = inner[side].w
        rv[side] = cp.Variable(w.shape[1], nonneg=True)
        cons.append(cp.sum(rv[side]) == weight)
        kv[side] = []
        terms = []
        for c in classes:
            k = cp.Variable(len(c), nonneg=True)
            cons.append(cp.sum(k) == weight)
            kv[side].append(k)
            terms.append(cp.sum(cp.rel_entr(k @ w[c], rv[side])))
        div[side] = terms
    ucons = [div["Y"][u] + div["Z"][u] <= t * math.log(2.0) for u in range(len(classes))]
    prob = cp.Problem(cp.Minimize(t), cons + ucons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.SolverError as exc:
        raise NonConvergence(f"conic solver failed: {exc}") from None
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise NonConvergence(f"conic solver status {prob.status}")
    pu = np.clip(np.array([float(c.dual_value) for c in ucons]), 0.0, None)
    pu = pu / pu.sum() if pu.sum() > 0 else np.full(len(classes), 1.0 / len(classes))
    lv = float(np.clip(lam.value, 0.0, 1.0))
    kernels, refs = {}, {}
    for side, weight in (("Y", lv), ("Z", 1 - lv)):
        ks = []
        for k, c in zip(kv[side], classes):
            x = np.clip(np.asarray(k.value, dtype=float), 0.0, None)
            ks.append(x / x.sum() if x.sum() > 1e-12 else np.full(len(c), 1.0 / len(c)))
        kernels[side] = ks
        r = np.clip(np.asarray(rv[side].value, dtype=float), 0.0, None)
        refs[side] = r / r.sum() if r.sum() > 1e-12 else np.full(len(r), 1.0 / len(r))
    return _ConicSolution(pu, lv, kernels, refs, float(t.value))


def _upper_bound(inner: dict[str, _InnerProblem], sol: _ConicSolution) -> float:
    """Objective of the minimization side at the solver's (lam, K, r); valid for any feasible point."""
    total = np.zeros(len(inner["Y"].classes))
    for side, weight in (("Y", sol.lam), ("Z", 1 - sol.lam)):
        if weight <= 0:
            continue
        a = inner[side].compose(sol.kernels[side])
        r = sol.refs[side]
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(a > 0, a * np.log2(np.where(a > 0, a, 1.0) / np.where(r > 0, r, 1.0)[None, :]), 0.0)
        d = d.sum(axis=1)
        d[((a > 0) & (r[None, :] <= 0)).any(axis=1)] = math.inf
        total += weight * d
    return float(total.max())


def _solve_maxmin(inner: dict[str, _InnerProblem], tol: float) -> tuple[float, np.ndarray, dict]:
    sol = _conic_maxmin(inner)
    itol = tol / 20
    lower = min(inner[s].solve(sol.pu, itol)[0] for s in inner)
    upper = _upper_bound(inner, sol)
    diag: dict = {"lambda": sol.lam, "solver_value": sol.value, "lower_bound": lower, "upper_bound": upper}
    dim = len(inner["Y"].classes)
    if dim <= 3:
        if inner["Y"].trivial:
            grid = simplex_grid(dim, 0.01)
            ay, az = inner["Y"].compose([np.ones(1)] * dim), inner["Z"].compose([np.ones(1)] * dim)
            gv = np.minimum(_mi_batch(grid, ay, _entropy(ay)), _mi_batch(grid, az, _entropy(az)))
            res = 0.01
        else:
            grid = simplex_grid(dim, 0.05)
            gv = np.array([min(inner[s].solve(g, itol)[0] for s in inner) for g in grid])
            res = 0.05
        gi = int(gv.argmax())
        diag["grid_resolution"] = res
        diag["grid_value"] = float(gv[gi])
        if gv[gi] > lower + 5 * tol:
            raise NonConvergence(f"optimizer value {lower:.6f} below grid value {gv[gi]:.6f}", diag)
    diag["duality_gap"] = max(upper - lower, 0.0)
    if upper - lower > 5 * tol:
        raise NonConvergence(f"duality gap {upper - lower:.3e} exceeds 5*tol", diag)
    return lower, sol.pu, diag


def common_message_capacity(channel: BroadcastChannel, tol: float = DEFAULT_TOL) -> CapacityResult:
    """max over P_X of min(I(X;Y), I(X;Z))."""
    singles = [np.array([x]) for x in range(len(channel.x_alphabet))]
    inner = {s: _InnerProblem(marginal(channel, s).matrix, singles) for s in ("Y", "Z")}
    value, p, diag = _solve_maxmin(inner, tol)
    return CapacityResult(value, p, list(channel.x_alphabet), diagnostics=diag)


# --- consensus capacity --------------------------------------------------------


def consensus_capacity(
    channel: BroadcastChannel,
    tol: float = DEFAULT_TOL,
    structure: CommonStructure | None = None,
) -> CapacityResult:
    """max over P_U of min over class-supported P_{X|U} of min(I(U;Y), I(U;Z))."""
    cs = structure or build_common_structure(channel)
    usyms = cs.u_symbols
    if len(cs.effective) < 2:
        return CapacityResult(0.0, np.ones(1), usyms, diagnostics={"singleton_effective_alphabet": True})
    classes = [np.array(cs.classes[u]) for u in cs.effective]
    inner = {s: _InnerProblem(marginal(channel, s).matrix, classes) for s in ("Y", "Z")}
    best, best_p, diag = _solve_maxmin(inner, tol)
    diag["inner_trivial"] = inner["Y"].trivial
    itol = tol / 20
    kernel_mats = {}
    nx = len(channel.x_alphabet)
    for s, prob in inner.items():
        val, kern, gap = prob.solve(best_p, itol)
        diag[f"inner_gap_{s}"] = float(gap)
        if not prob.trivial and sum(len(c) for c in classes) <= 6:
            gmin = prob.grid_min(best_p)
            diag[f"inner_grid_{s}"] = gmin
            if gmin < val - 5 * tol:
                raise NonConvergence(f"inner minimizer for {s} above grid minimum", diag)
        m = np.zeros((len(classes), nx))
        for u, (k, c) in enumerate(zip(kern, classes)):
            m[u, c] = k
        kernel_mats[s] = m
    return CapacityResult(float(best), best_p, usyms, kernel=kernel_mats, diagnostics=diag)


@dataclass
class CapacityReport:
    c_p2p_common: CapacityResult
    c_byz: CapacityResult
    c_com_msg: CapacityResult

    @property
    def values(self) -> tuple[float, float, float]:
        return self.c_p2p_common.value, self.c_byz.value, self.c_com_msg.value

    def to_dict(self) -> dict:
        return {
            "c_p2p_common": self.c_p2p_common.value,
            "c_byz": self.c_byz.value,
            "c_com_msg": self.c_com_msg.value,
            "argmaxes": {
                "c_p2p_common": self.c_p2p_common.to_dict()["argmax"],
                "c_byz": self.c_byz.to_dict()["argmax"],
                "c_com_msg": self.c_com_msg.to_dict()["argmax"],
            },
            "diagnostics": {
                "c_p2p_common": self.c_p2p_common.diagnostics,
                "c_byz": self.c_byz.diagnostics,
                "c_com_msg": self.c_com_msg.diagnostics,
            },
        }


def capacity_report(channel: BroadcastChannel, tol: float = DEFAULT_TOL, structure: CommonStructure | None = None) -> CapacityReport:
    cs = structure or build_common_structure(channel)
    lo = p2p_capacity(cs.common_channel, tol)
    mid = consensus_capacity(channel, tol, cs)
    hi = common_message_capacity(channel, tol)
    a, b, c = lo.value, mid.value, hi.value
    if a > b + 2 * tol or b > c + 2 * tol:
        raise OrderingViolation(f"capacity ordering violated: p2p={a:.6f} byz={b:.6f} com={c:.6f}")
    return CapacityReport(lo, mid, hi)
