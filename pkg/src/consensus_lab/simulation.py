"""Error estimation for consensus codes.

Monte Carlo runs are split into fixed-size chunks; chunk c of stream s draws from
SeedSequence([seed, s, c]), so results do not depend on the thread count.
Exact mode sums channel probabilities over every reachable output pair.
"""

from __future__ import annotations

import itertools
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binomtest, norm

from . import gf2
from .adversary import Attack, AttackContext, all_inputs, attack_menu, boundary_batch
from .channel import BroadcastChannel, make_independent_bec, sample_outputs
from .coding import Codebook, LinearCodebook, linear_codebook
from .common import CommonStructure, build_common_structure
from .decoding import (
    BOT,
    UNRESOLVED,
    DecoderConfig,
    ErasureDecoder,
    SharedRandomnessDecoder,
    choose_ell,
)
from .errors import BudgetExceeded

CHUNK = 2048
CONFIDENCE = 0.95
EXACT_BUDGET = 10**8
# exhaustive decoder search: (decoder pairs) x (inputs) evaluations
ORACLE_BUDGET = 10**7
# type-count enumeration cap for the conditional estimator; larger cases use inner sampling
_ENUM_CAP = 200_000
_INNER_SAMPLES = 4096


# --- estimates -------------------------------------------------------------------


@dataclass
class Estimate:
    value: float
    trials: int
    count: int | None = None
    ci_low: float = 0.0
    ci_high: float = 1.0
    method: str = "wilson"

    @property
    def radius(self) -> float:
        return max(self.value - self.ci_low, self.ci_high - self.value)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radius"] = self.radius
        return d


def wilson(count: int, trials: int, confidence: float = CONFIDENCE) -> Estimate:
    if trials == 0:
        return Estimate(0.0, 0, 0, 0.0, 1.0)
    ci = binomtest(int(count), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return Estimate(count / trials, trials, int(count), float(ci.low), float(ci.high))


def _mean_estimate(samples: np.ndarray, confidence: float = CONFIDENCE, method: str = "conditional") -> Estimate:
    t = samples.size
    mean = float(samples.mean()) if t else 0.0
    half = float(norm.ppf(0.5 + confidence / 2) * samples.std(ddof=1) / math.sqrt(t)) if t > 1 else 1.0
    return Estimate(mean, t, None, max(mean - half, 0.0), min(mean + half, 1.0), method)


def _exact(value: float) -> Estimate:
    v = min(max(value, 0.0), 1.0)
    return Estimate(v, 0, None, v, v, "exact")


@dataclass
class ErrorReport:
    lambda_max: float
    eta_max: float
    p_e: float
    lambda_by_message: dict[str, Estimate]
    eta_by_attack: dict[str, Estimate]
    trials: int
    exact: bool
    eta_regime: str  # "strategy menu", "exhaustive" or "none"
    ci_radius: float
    confidence: float = CONFIDENCE
    seed: int | None = None
    attacks: dict[str, dict] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "eta_max": self.eta_max,
            "p_e": self.p_e,
            "trials": self.trials,
            "exact": self.exact,
            "eta_regime": self.eta_regime,
            "ci_radius": self.ci_radius,
            "confidence": self.confidence,
            "seed": self.seed,
            "lambda_by_message": {k: v.to_dict() for k, v in self.lambda_by_message.items()},
            "eta_by_attack": {k: v.to_dict() for k, v in self.eta_by_attack.items()},
            "attacks": self.attacks,
            "extras": self.extras,
        }


def make_report(
    lambdas: dict[str, Estimate],
    etas: dict[str, Estimate],
    *,
    exact: bool,
    regime: str,
    seed: int | None = None,
    attacks: dict[str, dict] | None = None,
    extras: dict | None = None,
) -> ErrorReport:
    lam_key = max(lambdas, key=lambda k: lambdas[k].value) if lambdas else None
    eta_key = max(etas, key=lambda k: etas[k].value) if etas else None
    lam = lambdas[lam_key].value if lam_key is not None else 0.0
    eta = etas[eta_key].value if eta_key is not None else 0.0
    worst = lambdas[lam_key] if lam >= eta and lam_key is not None else (etas[eta_key] if eta_key is not None else None)
    trials = sum(e.trials for e in lambdas.values()) + sum(e.trials for e in etas.values())
    return ErrorReport(
        lambda_max=lam,
        eta_max=eta,
        p_e=max(lam, eta),
        lambda_by_message=lambdas,
        eta_by_attack=etas,
        trials=trials,
        exact=exact,
        eta_regime=regime if etas else "none",
        ci_radius=0.0 if exact or worst is None else worst.radius,
        seed=seed,
        attacks=attacks or {},
        extras=extras or {},
    )


# --- chunked deterministic streams -------------------------------------------------


def _stream_id(label: str) -> int:
    return zlib.crc32(label.encode())


def _chunks(trials: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(c, min(chunk, trials - c * chunk)) for c in range(-(-trials // chunk))]


def _run_chunks(fn: Callable[[int, np.random.Generator], np.ndarray], seed: int, label: str, trials: int, threads: int | None):
    """Apply fn(size, rng) to every chunk and concatenate the results in chunk order."""
    sid = _stream_id(label)
    jobs = _chunks(trials)

    def run(job):
        c, size = job
        return fn(size, np.random.default_rng(np.random.SeedSequence([seed, sid, c])))

    if len(jobs) <= 1 or (threads is not None and threads <= 1):
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    return np.concatenate(parts) if parts else np.zeros(0)


def _needs_shared(decoder) -> bool:
    return isinstance(decoder, SharedRandomnessDecoder)


def _shared_bits(decoder, trials: int, rng: np.random.Generator) -> np.ndarray | None:
    if not _needs_shared(decoder):
        return None
    return rng.integers(0, 2, size=(trials, decoder.ell), dtype=np.int64)


def _equal(out: np.ndarray, m: int) -> np.ndarray:
    return np.asarray(out == m, dtype=bool)


def default_messages(K: int) -> list[int]:
    return list(range(K)) if K <= 16 else [0, 1, K - 1]


# --- Monte Carlo ---------------------------------------------------------------------


def run_honest_trials(
    channel: BroadcastChannel,
    codebook,
    decoder,
    trials: int,
    seed: int = 0,
    messages: Sequence[int] | None = None,
    structure: CommonStructure | None = None,
    threads: int | None = None,
) -> dict[str, Estimate]:
    """Per-message estimate of 1 - P(both receivers decode m | f(m) sent)."""
    cs = structure or build_common_structure(channel)
    ctx = AttackContext(codebook, cs)
    out = {}
    for m in messages if messages is not None else default_messages(codebook.K):
        x = ctx.inputs(m)

        def chunk(size, rng, x=x, m=m):
            y, z = sample_outputs(channel, np.repeat(x[None, :], size, axis=0), rng)
            b, c = decoder.decode_pair(y, z, _shared_bits(decoder, size, rng))
            return ~(_equal(b, m) & _equal(c, m))

        fails = _run_chunks(chunk, seed, f"honest/{m}", trials, threads)
        out[str(m)] = wilson(int(fails.sum()), trials)
    return out


def run_attack_trials(
    channel: BroadcastChannel,
    codebook,
    decoder,
    menu: Sequence[Attack],
    trials: int,
    seed: int = 0,
    structure: CommonStructure | None = None,
    threads: int | None = None,
    lenient: bool = False,
) -> dict[str, Estimate]:
    """Per-attack estimate of P(g_B != g_C). A (BOT, m) pair counts as disagreement;
    `lenient=True` counts it as agreement instead, for comparison only."""
    cs = structure or build_common_structure(channel)
    ctx = AttackContext(codebook, cs)
    out = {}
    for attack in menu:

        def chunk(size, rng, attack=attack):
            x = attack.sample(ctx, size, rng)
            y, z = sample_outputs(channel, x, rng)
            b, c = decoder.decode_pair(y, z, _shared_bits(decoder, size, rng))
            bad = np.asarray(b != c, dtype=bool)
            if lenient:
                bad &= np.asarray(b != BOT, dtype=bool) & np.asarray(c != BOT, dtype=bool)
            return bad

        bad = _run_chunks(chunk, seed, f"attack/{attack.name}", trials, threads)
        out[attack.name] = wilson(int(bad.sum()), trials)
    return out


# --- conditional estimator for linear codes under the erasure decoder ---------------


class _ErasureModel:
    """Per-input probabilities that drive honest failures of the erasure decoder.

    For a binary input x: s[x] = P(common output allows both bits), and given that,
    a[side][x] = P(private output rules out the other bit). Requires the two private
    outputs to be conditionally independent given (x, ambiguous common output).
    """

    def __init__(self, cs: CommonStructure, symbols: Sequence[str], lozenge: bool):
        ch = cs.channel
        xs = [ch.x_alphabet.index(s) for s in symbols]
        if len(xs) != 2:
            raise ValueError("the conditional estimator needs a binary codebook")
        wv = cs.wv[xs]  # (2, V)
        amb_v = (wv > 0).all(axis=0) if lozenge else np.ones(wv.shape[1], dtype=bool)
        wy = ch.w.sum(axis=2)[xs] > 0
        wz = ch.w.sum(axis=1)[xs] > 0
        phi1, phi2 = cs.graph.phi1, cs.graph.phi2
        self.s = np.zeros(2)
        self.a = {"B": np.zeros(2), "C": np.zeros(2)}
        for b in range(2):
            w = ch.w[xs[b]]  # (Y, Z)
            amb = amb_v[phi1][:, None] & amb_v[phi2][None, :] if lozenge else np.ones(w.shape, dtype=bool)
            mass = w * amb
            self.s[b] = mass.sum()
            if self.s[b] <= 0:
                continue
            joint = mass / self.s[b]
            rule_y = ~wy[1 - b]  # y that the other bit cannot produce
            rule_z = ~wz[1 - b]
            py, pz = joint[rule_y].sum(), joint[:, rule_z].sum()
            both = joint[np.ix_(rule_y, rule_z)].sum()
            if abs(both - py * pz) > 1e-12:
                raise ValueError("private outputs are not conditionally independent; use plain Monte Carlo")
            self.a["B"][b], self.a["C"][b] = py, pz


def _prob_some_light(classes: list[tuple[int, int, float]], patterns: np.ndarray, dim: int, t: int, rng: np.random.Generator) -> float:
    """P(some nonzero combination a has sum over its classes of U_j <= t).

    classes: (pattern index, size, p) with U_j ~ Binomial(size, p) independent;
    patterns: bit patterns as ints over `dim` basis words. Combination a covers class j iff
    popcount(a & pattern_j) is odd.
    """
    combos = np.arange(1, 1 << dim)
    pat = np.array([patterns[c[0]] for c in classes], dtype=np.int64)
    cover = (np.bitwise_count(combos[:, None] & pat[None, :]) % 2).astype(bool) if hasattr(np, "bitwise_count") else (
        np.array([[bin(int(a) & int(p)).count("1") % 2 for p in pat] for a in combos], dtype=bool)
    )
    sizes = np.array([c[1] for c in classes])
    probs = np.array([c[2] for c in classes])
    cap = np.minimum(sizes, t + 1)
    states = int(np.prod(cap + 1, dtype=float))
    if states <= _ENUM_CAP:
        from scipy.stats import binom

        grids = []
        weights = []
        for s, p, c in zip(sizes, probs, cap):
            pmf = binom.pmf(np.arange(c + 1), s, p)
            pmf[c] = binom.sf(c - 1, s, p)  # lump the tail above t
            grids.append(np.arange(c + 1))
            weights.append(pmf)
        mesh = np.array(list(itertools.product(*grids)))  # (S, J)
        w = np.prod([weights[j][mesh[:, j]] for j in range(len(classes))], axis=0)
        light = ((mesh @ cover.T) <= t).any(axis=1)
        return float(w[light].sum())
    u = rng.binomial(sizes[None, :], probs[None, :], size=(_INNER_SAMPLES, len(classes)))
    return float(((u @ cover.T) <= t).any(axis=1).mean())


def conditional_honest_lambda(
    channel: BroadcastChannel,
    codebook: LinearCodebook,
    decoder: ErasureDecoder,
    trials: int,
    seed: int = 0,
    m: int = 0,
    structure: CommonStructure | None = None,
    threads: int | None = None,
) -> Estimate:
    """Rao-Blackwellized estimate of lambda_m for a linear code and the erasure decoder.

    Samples only the set S of positions whose common output fits both bits. Given S, the
    receivers fail independently, each when some nonzero codeword supported in S has at most
    max_unexplained positions where its private output rules out the other bit; those
    probabilities are computed exactly by type-count enumeration.
    """
    cs = structure or build_common_structure(channel)
    model = _ErasureModel(cs, codebook.symbols, decoder.lozenge)
    g = codebook.generator
    c = codebook.codeword(m).astype(np.int64)
    n = codebook.n
    t = decoder.max_unexplained
    ps = model.s[c]

    def chunk(size, rng):
        in_s = rng.random((size, n)) < ps[None, :]
        a = np.where(~in_s[:, :, None], g.T[None, :, :], 0).astype(np.uint8)
        sol = gf2.solve_batch(a, np.zeros((size, n), dtype=np.uint8))
        lam = np.zeros(size)
        for i in range(size):
            basis = sol.basis[i]
            if basis.shape[0] == 0:
                continue
            words = gf2.encode(basis, g).astype(np.int64)  # (d, n), zero outside S
            pattern = (words * (1 << np.arange(words.shape[0]))[:, None]).sum(axis=0)
            fail = {}
            for side in ("B", "C"):
                classes = []
                uniq = []
                for pv in np.unique(pattern[pattern > 0]):
                    for bit in (0, 1):
                        sel = (pattern == pv) & (c == bit)
                        if sel.any():
                            if pv not in uniq:
                                uniq.append(int(pv))
                            classes.append((uniq.index(int(pv)), int(sel.sum()), float(model.a[side][bit])))
                fail[side] = _prob_some_light(classes, np.array(uniq), words.shape[0], t, rng)
            lam[i] = 1.0 - (1.0 - fail["B"]) * (1.0 - fail["C"])
        return lam

    samples = _run_chunks(chunk, seed, f"conditional/{m}", trials, threads)
    return _mean_estimate(samples)


# --- full reports --------------------------------------------------------------------


def estimate_error(
    channel: BroadcastChannel,
    codebook,
    decoder,
    trials: int,
    seed: int = 0,
    menu: Sequence[Attack] | None = None,
    messages: Sequence[int] | None = None,
    honest_estimator: str = "plain",
    structure: CommonStructure | None = None,
    threads: int | None = None,
) -> ErrorReport:
    """Monte Carlo ErrorReport over honest transmissions and an attack menu."""
    cs = structure or build_common_structure(channel)
    extras = {}
    if honest_estimator == "conditional":
        if not (isinstance(codebook, LinearCodebook) and isinstance(decoder, ErasureDecoder)):
            raise ValueError("the conditional estimator needs a linear codebook and the erasure decoder")
        msgs = list(messages) if messages is not None else [0]
        lambdas = {str(m): conditional_honest_lambda(channel, codebook, decoder, trials, seed, m, cs, threads) for m in msgs}
        extras["honest_plain"] = {
            k: v.to_dict() for k, v in run_honest_trials(channel, codebook, decoder, trials, seed, msgs, cs, threads).items()
        }
    elif honest_estimator == "plain":
        lambdas = run_honest_trials(channel, codebook, decoder, trials, seed, messages, cs, threads)
    else:
        raise ValueError(f"unknown honest estimator {honest_estimator!r}")
    menu = list(menu) if menu is not None else []
    etas = run_attack_trials(channel, codebook, decoder, menu, trials, seed, cs, threads) if menu else {}
    return make_report(
        lambdas,
        etas,
        exact=False,
        regime="strategy menu",
        seed=seed,
        attacks={a.name: a.to_dict() for a in menu},
        extras=extras,
    )


# --- exact enumeration ---------------------------------------------------------------


def _pair_tables(channel: BroadcastChannel, dist: np.ndarray) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per coordinate: reachable (y, z) index arrays and their probabilities under input distribution dist[i]."""
    nz = len(channel.z_alphabet)
    flat = channel.w.reshape(channel.w.shape[0], -1)
    out = []
    for row in dist:
        p = row @ flat
        idx = np.flatnonzero(p > 0)
        out.append((idx // nz, idx % nz, p[idx]))
    return out


def _enumerate(channel: BroadcastChannel, dist: np.ndarray, budget: int, chunk: int = 1 << 16):
    """Yield (y, z, prob) blocks covering every reachable output pair of a product input distribution."""
    tables = _pair_tables(channel, dist)
    sizes = np.array([len(t[2]) for t in tables], dtype=np.int64)
    total = int(np.prod(sizes.astype(float)))
    if total > budget:
        raise BudgetExceeded(f"{total} reachable output pairs exceed the enumeration budget {budget}")
    total = int(np.prod(sizes))
    radix = np.concatenate([[1], np.cumprod(sizes[:-1])])
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // radix[None, :]) % sizes[None, :]
        y = np.stack([tables[i][0][digits[:, i]] for i in range(len(tables))], axis=1)
        z = np.stack([tables[i][1][digits[:, i]] for i in range(len(tables))], axis=1)
        prob = np.prod(np.stack([tables[i][2][digits[:, i]] for i in range(len(tables))], axis=1), axis=1)
        yield y, z, prob


def _all_shared(decoder) -> list[np.ndarray | None]:
    if not _needs_shared(decoder):
        return [None]
    ell = decoder.ell
    return [np.array(bits, dtype=np.int64) for bits in itertools.product((0, 1), repeat=ell)] or [np.zeros(0, dtype=np.int64)]


def exact_outcome_probs(channel: BroadcastChannel, decoder, dist: np.ndarray, m: int | None = None, budget: int = EXACT_BUDGET) -> dict:
    """Exact P(g_B = g_C = m) and P(g_B != g_C) under a product input distribution (n, |X|)."""
    agree_m = 0.0
    disagree = 0.0
    lenient = 0.0
    shared = _all_shared(decoder)
    for y, z, prob in _enumerate(channel, np.asarray(dist, dtype=float), budget):
        for s in shared:
            ss = None if s is None else np.repeat(s[None, :], y.shape[0], axis=0)
            b, c = decoder.decode_pair(y, z, ss)
            w = prob / len(shared)
            if m is not None:
                agree_m += float(w[_equal(b, m) & _equal(c, m)].sum())
            bad = np.asarray(b != c, dtype=bool)
            disagree += float(w[bad].sum())
            lenient += float(w[bad & np.asarray(b != BOT, dtype=bool) & np.asarray(c != BOT, dtype=bool)].sum())
    return {"agree_m": agree_m, "disagree": disagree, "disagree_lenient": lenient}


def point_mass(x: np.ndarray, nx: int) -> np.ndarray:
    d = np.zeros((len(x), nx))
    d[np.arange(len(x)), np.asarray(x, dtype=np.int64)] = 1.0
    return d


def kernel_expanded(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Per-coordinate input distribution of x passed through a mixing kernel."""
    return np.asarray(kernel)[np.asarray(x, dtype=np.int64)]


def exact_error(
    channel: BroadcastChannel,
    codebook,
    decoder,
    inputs: Sequence | str | None = None,
    messages: Sequence[int] | None = None,
    structure: CommonStructure | None = None,
    budget: int = EXACT_BUDGET,
) -> ErrorReport:
    """Exact lambda_m and eta for the given inputs.

    `inputs` items are input index vectors, (n, |X|) per-coordinate distributions, or
    Attack objects with deterministic samples; "all" enumerates every vector in X^n.
    """
    cs = structure or build_common_structure(channel)
    ctx = AttackContext(codebook, cs)
    nx = len(channel.x_alphabet)
    lambdas = {}
    for m in messages if messages is not None else default_messages(codebook.K):
        r = exact_outcome_probs(channel, decoder, point_mass(ctx.inputs(m), nx), m, budget)
        lambdas[str(m)] = _exact(1.0 - r["agree_m"])
    regime = "strategy menu"
    named: list[tuple[str, np.ndarray]] = []
    if isinstance(inputs, str):
        if inputs != "all":
            raise ValueError("inputs must be a list or 'all'")
        regime = "exhaustive"
        named = [("x=" + "".join(map(str, x)), point_mass(x, nx)) for x in all_inputs(nx, codebook.n)]
    elif inputs is not None:
        for i, item in enumerate(inputs):
            if isinstance(item, Attack):
                if item.strategy == "mixing":
                    named.append((item.name, kernel_expanded(ctx.inputs(item.params.get("m", 0)), ctx.kernel().matrix)))
                elif item.strategy in ("boundary",):
                    raise ValueError("random attacks other than mixing have no exact product form")
                else:
                    named.append((item.name, point_mass(item.sample(ctx, 1, np.random.default_rng(0))[0], nx)))
            else:
                arr = np.asarray(item, dtype=float)
                named.append((f"input{i}", arr if arr.ndim == 2 else point_mass(arr.astype(np.int64), nx)))
    etas = {name: _exact(exact_outcome_probs(channel, decoder, d, None, budget)["disagree"]) for name, d in named}
    return make_report(lambdas, etas, exact=True, regime=regime)


# --- exhaustive impossibility oracle ---------------------------------------------------


@dataclass
class OracleResult:
    value: float
    encoder: list[list[int]]
    decoder_b: list[int]
    decoder_c: list[int]
    lambdas: list[float]
    eta_max: float
    worst_input: list[int]
    evaluated: int
    n: int
    K: int

    def to_dict(self) -> dict:
        return asdict(self)


def _product_tensor(channel: BroadcastChannel, n: int) -> tuple[np.ndarray, np.ndarray]:
    """P(y^n, z^n | x^n) for every input vector, as (|X|^n, |Y|^n, |Z|^n)."""
    nx, ny, nz = channel.shape
    xs = all_inputs(nx, n)
    tensor = np.ones((len(xs), 1, 1))
    for i in range(n):
        w = channel.w[xs[:, i]]  # (N, Y, Z)
        tensor = (tensor[:, :, None, :, None] * w[:, None, :, None, :]).reshape(len(xs), tensor.shape[1] * ny, tensor.shape[2] * nz)
    return xs, tensor


def _all_maps(size: int, labels: int) -> np.ndarray:
    return np.array(list(itertools.product(range(labels), repeat=size)), dtype=np.int64).reshape(-1, size)


def exhaustive_min_error(channel: BroadcastChannel, n: int = 1, K: int = 2, budget: int = ORACLE_BUDGET) -> OracleResult:
    """min over encoders [K] -> X^n and decoder pairs of max(lambda_max, eta_max), exactly.

    Decoders map each output vector to a message or BOT (label K). The encoder choice
    decouples per message, so only decoder pairs are enumerated.
    """
    nx, ny, nz = channel.shape
    nb, nc, ninp = (K + 1) ** (ny**n), (K + 1) ** (nz**n), nx**n
    work = nb * nc * ninp
    if work > budget:
        raise BudgetExceeded(f"{work} decoder-pair evaluations exceed the oracle budget {budget}")
    xs, tensor = _product_tensor(channel, n)
    gb, gc = _all_maps(ny**n, K + 1), _all_maps(nz**n, K + 1)
    onehot_c = np.eye(K + 1)[gc]  # (NC, Z, K+1)
    best = (math.inf, None)
    diag = np.arange(K)
    for ib, g in enumerate(gb):
        onehot_b = np.eye(K + 1)[g]  # (Y, K+1)
        mb = np.einsum("xyz,ya->xza", tensor, onehot_b)
        joint = np.einsum("xza,czb->cxab", mb, onehot_c)  # (NC, X, K+1, K+1)
        agree = np.trace(joint, axis1=2, axis2=3)
        eta = 1.0 - agree.min(axis=1)  # worst input
        lam_each = 1.0 - joint[:, :, diag, diag].max(axis=1)  # best codeword per message, (NC, K)
        value = np.maximum(eta, lam_each.max(axis=1))
        ic = int(np.argmin(value))
        if value[ic] < best[0] - 1e-15:
            enc = joint[ic][:, diag, diag].argmax(axis=0)
            best = (
                float(value[ic]),
                dict(
                    encoder=[xs[e].tolist() for e in enc],
                    decoder_b=g.tolist(),
                    decoder_c=gc[ic].tolist(),
                    lambdas=lam_each[ic].tolist(),
                    eta_max=float(eta[ic]),
                    worst_input=xs[int(np.argmin(agree[ic]))].tolist(),
                ),
            )
    return OracleResult(value=best[0], evaluated=work, n=n, K=K, **best[1])


# --- error curves --------------------------------------------------------------------


@dataclass
class CurveRow:
    n: int
    lambda_hat: float
    eta_hat: float
    p_e_hat: float
    ci: float
    detail: dict = field(default_factory=dict)


@dataclass
class Curve:
    rows: list[CurveRow]
    slope_p_e: float
    slope_lambda: float
    slope_eta: float
    params: dict

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "slope_p_e": self.slope_p_e,
            "slope_lambda": self.slope_lambda,
            "slope_eta": self.slope_eta,
            "params": self.params,
        }


def loglog_slope(ns: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(n) over the positive values; nan if fewer than two."""
    pts = [(math.log(n), math.log(v)) for n, v in zip(ns, values) if v > 0]
    if len(pts) < 2:
        return math.nan
    a = np.array(pts)
    return float(np.polyfit(a[:, 0], a[:, 1], 1)[0])


def shared_rand_error_curve(
    q: float,
    R: float,
    delta: float,
    n_grid: Sequence[int],
    trials: int,
    seed: int = 0,
    relaxed: bool = False,
    distance_points: int = 8,
    threads: int | None = None,
) -> Curve:
    """Honest and boundary-attack error of the shared-randomness scheme over independent BEC(q).

    Codes need Hamming distance > n(2q + delta); `relaxed=True` drops that requirement and
    uses the best available code of rate R instead (diagnostic only). Attacks place the sent
    vector at distances t0 from 1 to n(2q + delta/3). UNRESOLVED decodings count as failures.
    """
    channel = make_independent_bec(q)
    rows = []
    for n in n_grid:
        ell = choose_ell(n, delta)
        need = math.floor(n * (2 * q + delta) + 1e-12) + 1
        cb = linear_codebook(n, R, 1 if relaxed else need)
        dec = SharedRandomnessDecoder(cb, DecoderConfig(delta=delta, ell=ell))
        m_rng = np.random.default_rng(np.random.SeedSequence([seed, _stream_id(f"shared/msg/{n}")]))
        m = cb.message(m_rng.integers(0, 2, cb.k))
        c = cb.codeword(m).astype(np.int64)

        def run(t0: int, label: str):
            def chunk(size, rng):
                if t0:
                    x = boundary_batch(c, t0, size, rng)[0]
                else:
                    x = np.repeat(c[None, :], size, axis=0)
                y, z = sample_outputs(channel, x, rng)
                s = rng.integers(0, 2, size=(size, ell), dtype=np.int64)
                b, cc = dec.decode_pair(y, z, s)
                unresolved = _equal(b, UNRESOLVED) | _equal(cc, UNRESOLVED)
                if t0 == 0:
                    bad = ~(_equal(b, m) & _equal(cc, m))
                else:
                    bad = np.asarray(b != cc, dtype=bool)
                return np.stack([bad | unresolved, unresolved], axis=1)

            return _run_chunks(chunk, seed, f"shared/{label}/{n}", trials, threads).reshape(-1, 2)

        honest = run(0, "honest")
        lam = wilson(int(honest[:, 0].sum()), trials)
        top = max(1, math.floor(n * (2 * q + delta / 3)))
        t0s = sorted({int(round(v)) for v in np.geomspace(1, top, distance_points)})
        per_t0 = {}
        for t0 in t0s:
            res = run(t0, f"t0={t0}")
            per_t0[t0] = (wilson(int(res[:, 0].sum()), trials), int(res[:, 1].sum()))
        worst = max(per_t0, key=lambda k: per_t0[k][0].value)
        eta = per_t0[worst][0]
        p_e = max(lam.value, eta.value)
        rows.append(
            CurveRow(
                n,
                lam.value,
                eta.value,
                p_e,
                (lam if lam.value >= eta.value else eta).radius,
                {
                    "code": cb.code.construction,
                    "k": cb.k,
                    "distance": cb.code.distance,
                    "required_distance": need,
                    "ell": ell,
                    "worst_t0": worst,
                    "eta_by_t0": {str(k): v[0].value for k, v in per_t0.items()},
                    "unresolved_by_t0": {str(k): v[1] for k, v in per_t0.items()},
                    "unresolved_honest": int(honest[:, 1].sum()),
                },
            )
        )
    ns = [r.n for r in rows]
    return Curve(
        rows,
        loglog_slope(ns, [r.p_e_hat for r in rows]),
        loglog_slope(ns, [r.lambda_hat for r in rows]),
        loglog_slope(ns, [r.eta_hat for r in rows]),
        {"q": q, "R": R, "delta": delta, "trials": trials, "seed": seed, "relaxed": relaxed},
    )


def erasure_error_curve(
    channel: BroadcastChannel,
    R: float,
    delta: float,
    n_grid: Sequence[int],
    trials: int,
    seed: int = 0,
    honest_estimator: str = "conditional",
    include_attacks: bool = True,
    threads: int | None = None,
) -> Curve:
    """Erasure-scheme error over n: linear codes with distance >= 2 delta n, attack menu per n."""
    cs = build_common_structure(channel)
    rows = []
    for n in n_grid:
        cb = linear_codebook(n, R, math.ceil(2 * delta * n - 1e-12))
        dec = ErasureDecoder(cb, cs, delta)
        menu = attack_menu(n, delta, cb.K) if include_attacks else []
        rep = estimate_error(channel, cb, dec, trials, seed, menu, [0], honest_estimator, cs, threads)
        rows.append(
            CurveRow(
                n,
                rep.lambda_max,
                rep.eta_max,
                rep.p_e,
                rep.ci_radius,
                {"code": cb.code.construction, "k": cb.k, "distance": cb.code.distance, "report": rep.to_dict()},
            )
        )
    ns = [r.n for r in rows]
    return Curve(
        rows,
        loglog_slope(ns, [r.p_e_hat for r in rows]),
        loglog_slope(ns, [r.lambda_hat for r in rows]),
        loglog_slope(ns, [r.eta_hat for r in rows]),
        {"R": R, "delta": delta, "trials": trials, "seed": seed, "honest_estimator": honest_estimator},
    )
