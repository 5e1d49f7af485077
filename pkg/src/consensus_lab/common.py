"""Characteristic graph, common channel W_{V|X}, effective alphabet and margins."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .channel import DIST_TOL, Alphabet, BroadcastChannel, PointToPointChannel
from .errors import LPFailure, SingletonEffectiveAlphabet

# LP residual below which a column counts as inside a hull
HULL_TOL = 1e-8
VACUOUS = math.inf


@dataclass(frozen=True)
class CharacteristicGraph:
    """Bipartite graph on Y and Z; labels phi1, phi2 map outputs to component indices."""

    edges: tuple[tuple[int, int], ...]
    n_components: int
    phi1: np.ndarray = field(repr=False)
    phi2: np.ndarray = field(repr=False)
    component_labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class CommonStructure:
    channel: BroadcastChannel = field(repr=False)
    graph: CharacteristicGraph
    common_channel: PointToPointChannel = field(repr=False)
    conditional: np.ndarray = field(repr=False)  # W_{YZ|XV}[x, v, y, z]
    effective: list[int]  # x-indices of representatives, declaration order
    classes: dict[int, list[int]]  # representative -> all x in its class
    p_tilde: np.ndarray = field(repr=False)  # [x, j] over effective[j]
    gamma: float | None
    eta: float

    @property
    def u_symbols(self) -> list[str]:
        return [self.channel.x_alphabet[i] for i in self.effective]

    @property
    def wv(self) -> np.ndarray:
        return self.common_channel.matrix

    @property
    def eta_vacuous(self) -> bool:
        return math.isinf(self.eta)

    def phi(self, side: str) -> np.ndarray:
        return self.graph.phi1 if side.upper() in ("B", "Y") else self.graph.phi2

    def to_dict(self) -> dict:
        xs = self.channel.x_alphabet
        return {
            "components": {
                "count": self.graph.n_components,
                "labels": list(self.graph.component_labels),
                "phi1": dict(zip(self.channel.y_alphabet, map(int, self.graph.phi1))),
                "phi2": dict(zip(self.channel.z_alphabet, map(int, self.graph.phi2))),
            },
            "common_channel": self.wv.tolist(),
            "effective_alphabet": self.u_symbols,
            "classes": {xs[u]: [xs[x] for x in self.classes[u]] for u in self.effective},
            "p_tilde": {xs[x]: dict(zip(self.u_symbols, map(float, row))) for x, row in enumerate(self.p_tilde)},
            "gamma": self.gamma,
            "eta": None if self.eta_vacuous else self.eta,
            "eta_vacuous": self.eta_vacuous,
            "singleton_effective_alphabet": len(self.effective) < 2,
        }

    def class_of(self) -> np.ndarray:
        """For every x, the position in `effective` of its class, or -1 if x is not on a vertex."""
        out = np.full(len(self.channel.x_alphabet), -1, dtype=np.int64)
        for j, u in enumerate(self.effective):
            out[self.classes[u]] = j
        return out


def characteristic_graph(channel: BroadcastChannel) -> CharacteristicGraph:
    nx, ny, nz = channel.shape
    support = channel.w.sum(axis=0) > 0
    ys, zs = np.nonzero(support)
    adj = coo_matrix((np.ones(len(ys)), (ys, ny + zs)), shape=(ny + nz, ny + nz))
    _, raw = connected_components(adj, directed=False)
    # relabel components by first appearance in Y order, then Z order; outputs that never
    # occur form no component of their own and are mapped to component 0
    reached = np.concatenate([support.any(axis=1), support.any(axis=0)])
    order: dict[int, int] = {}
    for r in raw[reached]:
        order.setdefault(int(r), len(order))
    lab = np.array([order.get(int(r), 0) for r in raw], dtype=np.int64)
    names = []
    for c in range(len(order)):
        members = [channel.y_alphabet[i] for i in np.flatnonzero((lab[:ny] == c) & reached[:ny])]
        members += [channel.z_alphabet[i] for i in np.flatnonzero((lab[ny:] == c) & reached[ny:])]
        name = "{" + ",".join(dict.fromkeys(members)) + "}"
        # isolated outputs on both sides can share a symbol name
        if name in names:
            name += f"#{c}"
        names.append(name)
    phi1, phi2 = lab[:ny], lab[ny:]
    phi1.setflags(write=False)
    phi2.setflags(write=False)
    return CharacteristicGraph(tuple(zip(ys.tolist(), zs.tolist())), len(order), phi1, phi2, tuple(names))


def _hull_l1(target: np.ndarray, points: np.ndarray) -> tuple[float, np.ndarray]:
    """min ||points^T lam - target||_1 over the simplex; returns (distance, lam)."""
    if points.size == 0:
        return math.inf, np.zeros(0)
    m, d = points.shape
    # variables: lam (m), s (d); minimize sum s; -s <= A lam - t <= s
    a = points.T
    c = np.concatenate([np.zeros(m), np.ones(d)])
    a_ub = np.block([[a, -np.eye(d)], [-a, -np.eye(d)]])
    b_ub = np.concatenate([target, -target])
    a_eq = np.concatenate([np.ones(m), np.zeros(d)])[None, :]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        raise LPFailure(f"hull-distance LP failed: {res.message}")
    lam = np.clip(res.x[:m], 0.0, None)
    return float(res.fun), lam / lam.sum()


def effective_alphabet(
    wv: np.ndarray, order: Sequence[int] | None = None
) -> tuple[list[int], dict[int, list[int]], np.ndarray]:
    """Vertex representatives of the column polytope of W_{V|X}, their classes, and P~_{U|X}.

    `order` is the preference order for choosing class representatives
    (defaults to declaration order).
    """
    nx = wv.shape[0]
    pref = list(range(nx)) if order is None else list(order)
    reps: list[int] = []
    members: dict[int, list[int]] = {}
    for x in pref:
        for r in reps:
            if np.abs(wv[x] - wv[r]).sum() <= DIST_TOL:
                members[r].append(x)
                break
        else:
            reps.append(x)
            members[x] = [x]
    vertices = []
    for r in reps:
        others = np.array([wv[o] for o in reps if o != r]).reshape(-1, wv.shape[1])
        dist, _ = _hull_l1(wv[r], others)
        if dist > HULL_TOL:
            vertices.append(r)
    vertices.sort()
    classes = {u: sorted(members[u]) for u in vertices}
    cols = wv[vertices]
    pt = np.zeros((nx, len(vertices)))
    for x in range(nx):
        owner = next((j for j, u in enumerate(vertices) if x in classes[u]), None)
        if owner is not None:
            pt[x, owner] = 1.0
        else:
            _, lam = _hull_l1(wv[x], cols)
            lam[lam < 1e-13] = 0.0
            pt[x] = lam / lam.sum()
    return vertices, classes, pt


def gamma_margin(wv: np.ndarray, effective: Sequence[int]) -> float:
    """Smallest L1 distance from a U-column to the hull of the other U-columns."""
    if len(effective) < 2:
        raise SingletonEffectiveAlphabet("gamma needs at least two effective input symbols")
    best = math.inf
    for u in effective:
        others = np.array([wv[o] for o in effective if o != u]).reshape(-1, wv.shape[1])
        dist, _ = _hull_l1(wv[u], others)
        best = min(best, dist)
    return best


def eta_margin(effective: Sequence[int], classes: dict[int, list[int]], p_tilde: np.ndarray) -> float:
    """min over u and x outside the class of u of 1 - P~(u|x); +inf when that set is empty."""
    nx = p_tilde.shape[0]
    vals = [
        1.0 - p_tilde[x, j]
        for j, u in enumerate(effective)
        for x in range(nx)
        if x not in classes[u]
    ]
    return min(vals) if vals else VACUOUS


def build_common_structure(channel: BroadcastChannel, order: Sequence[int] | None = None) -> CommonStructure:
    g = characteristic_graph(channel)
    nx, ny, nz = channel.shape
    wv = np.zeros((nx, g.n_components))
    comp = g.phi1[:, None] * np.ones((1, nz), dtype=np.int64)
    for v in range(g.n_components):
        wv[:, v] = channel.w[:, comp == v].sum(axis=1)
    wv = np.clip(wv, 0.0, 1.0)
    common = PointToPointChannel(channel.x_alphabet, Alphabet(g.component_labels), wv / wv.sum(axis=1, keepdims=True))
    cond = np.zeros((nx, g.n_components, ny, nz))
    for v in range(g.n_components):
        mask = (g.phi1[:, None] == v) & (g.phi2[None, :] == v)
        for x in range(nx):
            if wv[x, v] > 0:
                cond[x, v] = np.where(mask, channel.w[x] / wv[x, v], 0.0)
    effective, classes, pt = effective_alphabet(common.matrix, order)
    gamma = gamma_margin(common.matrix, effective) if len(effective) >= 2 else None
    eta = eta_margin(effective, classes, pt)
    return CommonStructure(channel, g, common, cond, effective, classes, pt, gamma, eta)


@dataclass(frozen=True)
class MixingKernel:
    matrix: np.ndarray

    def off_diagonal_mass(self) -> float:
        return float(self.matrix.shape[0] - np.trace(self.matrix))


def find_mixing_kernel(wv: np.ndarray, restrict_to: np.ndarray | None = None) -> MixingKernel:
    """Row-stochastic P with P @ W_V = W_V, maximizing off-diagonal mass."""
    nx, nv = wv.shape
    allowed = np.ones((nx, nx), dtype=bool) if restrict_to is None else np.asarray(restrict_to, dtype=bool).copy()
    np.fill_diagonal(allowed, True)
    nvar = nx * nx
    c = np.zeros(nvar)
    c[[x * nx + x for x in range(nx)]] = 1.0
    a_eq = []
    b_eq = []
    for x in range(nx):
        row = np.zeros(nvar)
        row[x * nx:(x + 1) * nx] = 1.0
        a_eq.append(row)
        b_eq.append(1.0)
        for v in range(nv):
            row = np.zeros(nvar)
            row[x * nx:(x + 1) * nx] = wv[:, v]
            a_eq.append(row)
            b_eq.append(wv[x, v])
    bounds = [(0.0, None if allowed[i // nx, i % nx] else 0.0) for i in range(nvar)]
    res = linprog(c, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=bounds, method="highs")
    if res.status != 0:
        raise LPFailure(f"mixing-kernel LP failed: {res.message}")
    p = np.clip(res.x.reshape(nx, nx), 0.0, None)
    p[p < 1e-13] = 0.0
    p /= p.sum(axis=1, keepdims=True)
    return MixingKernel(p)
