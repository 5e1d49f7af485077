"""Finite memoryless broadcast channels W_{YZ|X} and point-to-point channels."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import NegativeEntry, NonStochasticRow, SchemaError, UnreachableOutputSymbol

ROW_TOL = 1e-12
DIST_TOL = 1e-9


@dataclass(frozen=True)
class Alphabet:
    """Ordered tuple of distinct string labels; declaration order is the index order."""

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        syms = tuple(str(s) for s in self.symbols)
        if not syms:
            raise SchemaError("alphabet must be non-empty")
        if len(set(syms)) != len(syms):
            raise SchemaError(f"duplicate symbols in alphabet {syms}")
        object.__setattr__(self, "symbols", syms)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, i: int) -> str:
        return self.symbols[i]

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise SchemaError(f"unknown symbol {symbol!r}; alphabet is {self.symbols}") from None

    def encode(self, seq: Sequence[str]) -> np.ndarray:
        lookup = {s: i for i, s in enumerate(self.symbols)}
        try:
            return np.array([lookup[s] for s in seq], dtype=np.int64)
        except KeyError as exc:
            raise SchemaError(f"unknown symbol {exc.args[0]!r}") from None

    def decode(self, idx: Sequence[int]) -> list[str]:
        return [self.symbols[int(i)] for i in idx]


def _as_alphabet(a: Alphabet | Sequence[str]) -> Alphabet:
    return a if isinstance(a, Alphabet) else Alphabet(tuple(a))


@dataclass(frozen=True)
class PointToPointChannel:
    """Row-stochastic matrix W[x, y]."""

    input_alphabet: Alphabet
    output_alphabet: Alphabet
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(self.input_alphabet), len(self.output_alphabet)):
            raise SchemaError(f"matrix shape {m.shape} does not match alphabets")
        if (m < 0).any():
            raise NegativeEntry("negative transition probability")
        dev = np.abs(m.sum(axis=1) - 1.0)
        if dev.max() > ROW_TOL:
            row = int(dev.argmax())
            raise NonStochasticRow(f"row {self.input_alphabet[row]!r} deviates from 1 by {dev[row]:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True)
class BroadcastChannel:
    """Stochastic tensor w[x, y, z] = W_{YZ|X}(y, z | x)."""

    x_alphabet: Alphabet
    y_alphabet: Alphabet
    z_alphabet: Alphabet
    w: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.w.shape

    def marginal(self, receiver: str) -> PointToPointChannel:
        return marginal(self, receiver)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BroadcastChannel):
            return NotImplemented
        return (
            self.x_alphabet == other.x_alphabet
            and self.y_alphabet == other.y_alphabet
            and self.z_alphabet == other.z_alphabet
            and np.array_equal(self.w, other.w)
        )

    def __hash__(self) -> int:
        return hash((self.x_alphabet, self.y_alphabet, self.z_alphabet, self.w.tobytes()))


def validate_channel(
    w: Any,
    x_symbols: Alphabet | Sequence[str],
    y_symbols: Alphabet | Sequence[str],
    z_symbols: Alphabet | Sequence[str],
    *,
    allow_unreachable: bool = False,
) -> BroadcastChannel:
    """Check shape, sign, row sums and output reachability; return an immutable channel."""
    xa, ya, za = _as_alphabet(x_symbols), _as_alphabet(y_symbols), _as_alphabet(z_symbols)
    t = np.array(w, dtype=float)
    if t.shape != (len(xa), len(ya), len(za)):
        raise SchemaError(f"tensor shape {t.shape} does not match alphabet sizes {(len(xa), len(ya), len(za))}")
    if (t < 0).any():
        i = np.argwhere(t < 0)[0]
        raise NegativeEntry(f"negative entry at (x={xa[i[0]]}, y={ya[i[1]]}, z={za[i[2]]})")
    dev = np.abs(t.sum(axis=(1, 2)) - 1.0)
    if dev.max() > ROW_TOL:
        row = int(dev.argmax())
        raise NonStochasticRow(f"row x={xa[row]!r} sums to {t[row].sum():.15g} (deviation {dev[row]:.3e})")
    if not allow_unreachable:
        bad = unreachable_symbols(t, ya, za)
        if bad:
            raise UnreachableOutputSymbol(f"output symbols with zero probability under every input: {bad}")
    t.setflags(write=False)
    return BroadcastChannel(xa, ya, za, t)


def unreachable_symbols(w: np.ndarray, ya: Alphabet, za: Alphabet) -> list[str]:
    ymass = w.sum(axis=(0, 2))
    zmass = w.sum(axis=(0, 1))
    return [f"Y:{ya[i]}" for i in np.flatnonzero(ymass <= 0)] + [f"Z:{za[i]}" for i in np.flatnonzero(zmass <= 0)]


def prune_unreachable(channel: BroadcastChannel) -> BroadcastChannel:
    """Drop output symbols that no input can produce."""
    w = channel.w
    ykeep = np.flatnonzero(w.sum(axis=(0, 2)) > 0)
    zkeep = np.flatnonzero(w.sum(axis=(0, 1)) > 0)
    return validate_channel(
        w[:, ykeep][:, :, zkeep],
        channel.x_alphabet,
        [channel.y_alphabet[i] for i in ykeep],
        [channel.z_alphabet[i] for i in zkeep],
    )


def marginal(channel: BroadcastChannel, receiver: str) -> PointToPointChannel:
    r = receiver.upper()
    if r in ("Y", "B"):
        return PointToPointChannel(channel.x_alphabet, channel.y_alphabet, channel.w.sum(axis=2))
    if r in ("Z", "C"):
        return PointToPointChannel(channel.x_alphabet, channel.z_alphabet, channel.w.sum(axis=1))
    raise ValueError(f"receiver must be 'Y' or 'Z', got {receiver!r}")


# --- constructors -----------------------------------------------------------

TWO_STEP_OUTPUTS = ("0", "1", "0~", "1~", "e")


def _check_prob(name: str, v: float, lo: float = 0.0, hi: float = 1.0, open_lo: bool = False) -> None:
    if not (lo < v <= hi if open_lo else lo <= v <= hi):
        raise ValueError(f"{name}={v} outside {'(' if open_lo else '['}{lo}, {hi}]")


def make_two_step_bec(p: float, q: float) -> BroadcastChannel:
    """Binary input; with prob 1-p both receivers see x, otherwise each independently sees x~ or e.

    Output labels: "0", "1" (unerased), "0~", "1~" (survived the first erasure step), "e".
    Symbols that are unreachable (e.g. "0", "1" at p=1) are kept; use `prune_unreachable`.
    """
    _check_prob("p", p)
    _check_prob("q", q, open_lo=True)
    w = np.zeros((2, 5, 5))
    for x in (0, 1):
        w[x, x, x] = 1.0 - p
        priv = {2 + x: 1.0 - q, 4: q}
        for y, qy in priv.items():
            for z, qz in priv.items():
                w[x, y, z] += p * qy * qz
    return validate_channel(w, ("0", "1"), TWO_STEP_OUTPUTS, TWO_STEP_OUTPUTS, allow_unreachable=True)


def make_independent_bec(q: float) -> BroadcastChannel:
    """Two independent BEC(q) links with outputs {0, 1, e}."""
    _check_prob("q", q)
    w = np.zeros((2, 3, 3))
    for x in (0, 1):
        qx = {x: 1.0 - q, 2: q}
        for y, a in qx.items():
            for z, b in qx.items():
                w[x, y, z] += a * b
    return validate_channel(w, ("0", "1"), ("0", "1", "e"), ("0", "1", "e"), allow_unreachable=True)


def make_fig3_channel(p: float) -> BroadcastChannel:
    """Ternary-input example channel over {0, e, 1} with outputs {a, b, c, d}."""
    _check_prob("p", p, 0.0, 0.5)
    xs, ys = ("0", "e", "1"), ("a", "b", "c", "d")
    triples = {
        ("0", "a", "a"): 1.0 - p,
        ("1", "d", "d"): 1.0 - p,
        ("0", "c", "c"): p,
        ("1", "b", "b"): p,
        ("e", "a", "b"): 0.5,
        ("e", "c", "d"): 0.5,
    }
    w = np.zeros((3, 4, 4))
    for (x, y, z), v in triples.items():
        w[xs.index(x), ys.index(y), ys.index(z)] += v
    return validate_channel(w, xs, ys, ys, allow_unreachable=True)


def make_identity_channel(k: int = 2) -> BroadcastChannel:
    syms = tuple(str(i) for i in range(k))
    w = np.zeros((k, k, k))
    for x in range(k):
        w[x, x, x] = 1.0
    return validate_channel(w, syms, syms, syms)


FAMILIES = {
    "two-step-bec": (make_two_step_bec, ("p", "q")),
    "independent-bec": (make_independent_bec, ("q",)),
    "fig3": (make_fig3_channel, ("p",)),
    "identity": (make_identity_channel, ("k",)),
}


def make_family(name: str, **params: float) -> BroadcastChannel:
    try:
        ctor, names = FAMILIES[name]
    except KeyError:
        raise SchemaError(f"unknown channel family {name!r}; choose from {sorted(FAMILIES)}") from None
    missing = [k for k in names if k not in params and not (name == "identity" and k == "k")]
    extra = sorted(set(params) - set(names))
    if missing or extra:
        raise SchemaError(f"family {name!r} takes parameters {names}; missing={missing} unexpected={extra}")
    if name == "identity":
        return ctor(int(params.get("k", 2)))
    return ctor(**{k: float(params[k]) for k in names})


# --- sampling ---------------------------------------------------------------


def sample_output(channel: BroadcastChannel, x: str, rng: np.random.Generator) -> tuple[str, str]:
    xi = channel.x_alphabet.index(x)
    y, z = sample_outputs(channel, np.array([xi]), rng)
    return channel.y_alphabet[int(y[0])], channel.z_alphabet[int(z[0])]


def sample_outputs(
    channel: BroadcastChannel, x_idx: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Memoryless sampling for an integer input array of any shape; returns (y_idx, z_idx)."""
    return sample_pairs(channel.w.reshape(len(channel.x_alphabet), -1), len(channel.z_alphabet), x_idx, rng)


def sample_pairs(
    flat: np.ndarray, nz: int, x_idx: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    cdf = np.cumsum(flat, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(x_idx.shape)
    # first flat index whose cdf exceeds u, per input row
    out = np.empty(x_idx.shape, dtype=np.int64)
    for xi in np.unique(x_idx):
        mask = x_idx == xi
        out[mask] = np.searchsorted(cdf[xi], u[mask], side="right")
    np.minimum(out, flat.shape[1] - 1, out=out)
    return out // nz, out % nz


# --- serialization ----------------------------------------------------------


def _parse_prob(v: Any, where: str) -> float:
    if isinstance(v, bool):
        raise SchemaError(f"{where}: probability must be a number or 'n/d' string")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise SchemaError(f"{where}: cannot parse probability {v!r}") from None
    raise SchemaError(f"{where}: probability must be a number or 'n/d' string, got {type(v).__name__}")


def channel_from_dict(d: dict[str, Any]) -> BroadcastChannel:
    if not isinstance(d, dict):
        raise SchemaError("channel file must hold a JSON object")
    for key in ("x_symbols", "y_symbols", "z_symbols", "w"):
        if key not in d:
            raise SchemaError(f"missing field {key!r}")
    alph = []
    for key in ("x_symbols", "y_symbols", "z_symbols"):
        v = d[key]
        if not isinstance(v, list) or not all(isinstance(s, str) for s in v):
            raise SchemaError(f"field {key!r} must be an array of strings")
        alph.append(Alphabet(tuple(v)))
    xa, ya, za = alph
    if not isinstance(d["w"], list):
        raise SchemaError("field 'w' must be an array of [x, y, z, prob] quadruples")
    w = np.zeros((len(xa), len(ya), len(za)))
    seen: set[tuple[int, int, int]] = set()
    for k, quad in enumerate(d["w"]):
        where = f"w[{k}]"
        if not isinstance(quad, list) or len(quad) != 4:
            raise SchemaError(f"{where}: expected [x, y, z, prob]")
        try:
            key = (xa.index(quad[0]), ya.index(quad[1]), za.index(quad[2]))
        except SchemaError as exc:
            raise SchemaError(f"{where}: {exc}") from None
        if key in seen:
            raise SchemaError(f"{where}: duplicate triple {quad[:3]}")
        seen.add(key)
        w[key] = _parse_prob(quad[3], where)
    return validate_channel(w, xa, ya, za)


def channel_to_dict(channel: BroadcastChannel) -> dict[str, Any]:
    xa, ya, za = channel.x_alphabet, channel.y_alphabet, channel.z_alphabet
    quads = [
        [xa[x], ya[y], za[z], float(channel.w[x, y, z])]
        for x, y, z in zip(*np.nonzero(channel.w))
    ]
    return {"x_symbols": list(xa), "y_symbols": list(ya), "z_symbols": list(za), "w": quads}


def load_channel(path: str | Path) -> BroadcastChannel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read channel file {path}: {exc}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return channel_from_dict(d)


def dump_channel(channel: BroadcastChannel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(channel), indent=2) + "\n", encoding="utf-8")
