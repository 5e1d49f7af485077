"""Binary linear algebra and BCH-derived linear codes with certified minimum distance."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# primitive polynomials over GF(2), bit i = coefficient of x^i
_PRIMITIVE = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
}

_WORD = 64


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array into little-endian uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    length = bits.shape[-1]
    nw = max(1, -(-length // _WORD))
    pad = nw * _WORD - length
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), dtype=np.uint8)], axis=-1)
    by = np.packbits(bits, axis=-1, bitorder="little")
    return by.view(np.uint64).reshape(bits.shape[:-1] + (nw,))


def unpack_rows(words: np.ndarray, length: int) -> np.ndarray:
    by = np.ascontiguousarray(words).view(np.uint8)
    return np.unpackbits(by, axis=-1, bitorder="little")[..., :length]


def _bit(words: np.ndarray, col: int) -> np.ndarray:
    return ((words[..., col // _WORD] >> np.uint64(col % _WORD)) & np.uint64(1)).astype(bool)


@dataclass
class AffineSolution:
    """Solutions of a batch of systems A a = b over GF(2); `basis[t]` spans the kernel."""

    consistent: np.ndarray  # (T,)
    particular: np.ndarray  # (T, C) uint8
    basis: list[np.ndarray]  # per trial, (dim, C) uint8


def solve_batch(a: np.ndarray, b: np.ndarray) -> AffineSolution:
    """Gaussian elimination on T systems at once; rows of zeros are allowed."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    t, r, c = a.shape
    # move rows with any nonzero entry to the front and drop the all-zero tail
    live = a.any(axis=2) | b.astype(bool)
    order = np.argsort(~live, axis=1, kind="stable")
    r = max(int(live.sum(axis=1).max()), 1)
    order = order[:, :r]
    a = np.take_along_axis(a, order[:, :, None], axis=1)
    b = np.take_along_axis(b, order, axis=1)
    aug = pack_rows(np.concatenate([a, b[..., None]], axis=-1))
    used = np.zeros((t, r), dtype=bool)
    pivot_row = np.full((t, c), -1, dtype=np.int64)
    ar = np.arange(t)
    for j in range(c):
        col = _bit(aug, j)
        cand = col & ~used
        has = cand.any(axis=1)
        if not has.any():
            continue
        piv = cand.argmax(axis=1)
        prow = aug[ar, piv]  # (T, W)
        hit = col & has[:, None]
        hit[ar, piv] = False
        aug ^= np.where(hit[:, :, None], prow[:, None, :], np.uint64(0))
        used[ar[has], piv[has]] = True
        pivot_row[has, j] = piv[has]
    rhs = _bit(aug, c)
    zero_lhs = np.ones((t, r), dtype=bool)
    for w in range(aug.shape[-1]):
        word = aug[..., w].copy()
        if w == c // _WORD:
            word &= np.uint64((1 << (c % _WORD)) - 1)
        zero_lhs &= word == 0
    consistent = ~(zero_lhs & rhs).any(axis=1)
    particular = np.zeros((t, c), dtype=np.uint8)
    has_piv = pivot_row >= 0
    tt, jj = np.nonzero(has_piv)
    particular[tt, jj] = rhs[tt, pivot_row[tt, jj]]
    basis = []
    bits = unpack_rows(aug, c)  # (T, R, C)
    for k in range(t):
        free = np.flatnonzero(~has_piv[k])
        if free.size == 0:
            basis.append(np.zeros((0, c), dtype=np.uint8))
            continue
        piv_cols = np.flatnonzero(has_piv[k])
        vec = np.zeros((free.size, c), dtype=np.uint8)
        vec[np.arange(free.size), free] = 1
        # pivot variable j equals the sum of free variables present in its row
        vec[:, piv_cols] = bits[k][pivot_row[k, piv_cols]][:, free].T
        basis.append(vec)
    return AffineSolution(consistent, particular, basis)


def rank(m: np.ndarray) -> int:
    m = np.asarray(m, dtype=np.uint8).copy()
    rows, cols = m.shape
    rk = 0
    for j in range(cols):
        nz = np.flatnonzero(m[rk:, j])
        if nz.size == 0:
            continue
        p = rk + nz[0]
        m[[rk, p]] = m[[p, rk]]
        others = np.flatnonzero(m[:, j])
        others = others[others != rk]
        m[others] ^= m[rk]
        rk += 1
        if rk == rows:
            break
    return rk


def encode(info: np.ndarray, generator: np.ndarray) -> np.ndarray:
    """Rows of `info` (…, k) times the generator (k, n) over GF(2)."""
    return (np.asarray(info, dtype=np.int64) @ generator.astype(np.int64)) & 1


def exact_min_distance(generator: np.ndarray, max_dim: int = 22) -> int | None:
    """Minimum weight over all nonzero codewords, or None when the dimension is too large."""
    k, n = generator.shape
    if k > max_dim or k == 0:
        return None
    g = pack_rows(generator)
    best = n
    # Gray-code walk visits every nonzero codeword once
    cur = np.zeros(g.shape[1], dtype=np.uint64)
    chunk = []
    for i in range(1, 1 << k):
        cur = cur ^ g[(i & -i).bit_length() - 1]
        chunk.append(cur)
        if len(chunk) == 65536 or i == (1 << k) - 1:
            arr = np.array(chunk)
            w = np.bitwise_count(arr).sum(axis=1) if hasattr(np, "bitwise_count") else _popcount(arr).sum(axis=1)
            best = min(best, int(w.min()))
            chunk = []
    return best


def _popcount(a: np.ndarray) -> np.ndarray:
    by = a.view(np.uint8)
    return np.unpackbits(by, axis=-1).reshape(a.shape + (64,)).sum(axis=-1)


# --- BCH codes -----------------------------------------------------------------


def _gf_tables(m: int) -> tuple[np.ndarray, np.ndarray]:
    size = (1 << m) - 1
    exp = np.zeros(2 * size, dtype=np.int64)
    log = np.zeros(size + 1, dtype=np.int64)
    x = 1
    for i in range(size):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x >> m:
            x ^= _PRIMITIVE[m]
    exp[size:] = exp[:size]
    return exp, log


def _gf_mul(a: int, b: int, exp: np.ndarray, log: np.ndarray) -> int:
    if a == 0 or b == 0:
        return 0
    return int(exp[log[a] + log[b]])


def _minimal_poly(coset: list[int], m: int) -> int:
    exp, log = _gf_tables(m)
    poly = [1]  # coefficients in GF(2^m), low degree first
    for e in coset:
        root = int(exp[e])
        new = [0] * (len(poly) + 1)
        for i, c in enumerate(poly):
            new[i + 1] ^= c
            new[i] ^= _gf_mul(c, root, exp, log)
        poly = new
    assert all(c in (0, 1) for c in poly)
    return sum(c << i for i, c in enumerate(poly))


def _clmul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


@lru_cache(maxsize=None)
def bch_generators(m: int) -> tuple[tuple[int, int, int], ...]:
    """(generator polynomial, dimension, Bose distance) for each distinct narrow-sense BCH code of length 2^m-1."""
    size = (1 << m) - 1
    seen: set[int] = set()
    g = 1
    out = []
    for s in range(1, size):
        if s in seen:
            continue
        coset = []
        e = s
        while e not in coset:
            coset.append(e)
            e = (2 * e) % size
        seen.update(coset)
        g = _clmul(g, _minimal_poly(coset, m))
        bose = 1
        while bose < size and bose in seen:
            bose += 1
        k = size - (g.bit_length() - 1)
        if k <= 0:
            break
        if out and out[-1][1] == k:
            continue
        out.append((g, k, bose))
    return tuple(out)


@dataclass(frozen=True)
class BCHParams:
    """Parent narrow-sense BCH code: the first `cyclic_length` positions are a shortened
    cyclic codeword with roots alpha^1..alpha^(bose-1); an extended code appends overall parity."""

    m: int
    poly: int
    bose: int
    extended: bool

    def to_dict(self) -> dict:
        return {"m": self.m, "poly": self.poly, "bose": self.bose, "extended": self.extended}

    @classmethod
    def from_dict(cls, d: dict) -> "BCHParams":
        return cls(int(d["m"]), int(d["poly"]), int(d["bose"]), bool(d["extended"]))


@dataclass(frozen=True)
class LinearCode:
    generator: np.ndarray  # (k, n) uint8
    distance: int  # certified lower bound on the minimum distance
    construction: str
    bch: BCHParams | None = None

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    def subcode(self, k: int) -> "LinearCode":
        if k > self.k:
            raise ValueError("subcode dimension exceeds code dimension")
        return LinearCode(self.generator[:k].copy(), self.distance, f"{self.construction}, first {k} rows", self.bch)


def _shifted_rows(g: int, n: int) -> np.ndarray:
    deg = g.bit_length() - 1
    k = n - deg
    coeffs = np.array([(g >> i) & 1 for i in range(deg + 1)], dtype=np.uint8)
    gen = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        gen[i, i:i + deg + 1] = coeffs
    return gen


def bch_candidates(n: int) -> list[tuple[int, int, str, callable, BCHParams]]:
    """(dimension, certified distance, label, builder, parent) for BCH codes shortened or extended to length n."""
    out = []
    for m in sorted(_PRIMITIVE):
        size = (1 << m) - 1
        if size + 1 < n:
            continue
        for g, k, bose in bch_generators(m):
            deg = g.bit_length() - 1
            if n <= size and n - deg > 0:
                out.append((n - deg, bose, f"BCH({size},{k},{bose}) shortened to {n}", lambda g=g: _shifted_rows(g, n), BCHParams(m, g, bose, False)))
            if n - 1 <= size and n - 1 - deg > 0 and bose % 2 == 1:
                def build(g=g):
                    base = _shifted_rows(g, n - 1)
                    return np.concatenate([base, base.sum(axis=1, keepdims=True) % 2], axis=1).astype(np.uint8)
                out.append((n - 1 - deg, bose + 1, f"BCH({size},{k},{bose}) extended to {n}", build, BCHParams(m, g, bose, True)))
        if size + 1 >= 2 * n:
            break
    return out


def best_linear_code(n: int, k: int, min_distance: int = 1) -> LinearCode | None:
    """Largest certified distance among BCH-derived [n, >=k] codes, cut to dimension k."""
    cands = [c for c in bch_candidates(n) if c[0] >= k and c[1] >= 1]
    if k <= 1:
        gen = np.ones((1, n), dtype=np.uint8)
        code = LinearCode(gen, n, "repetition")
        return code if code.distance >= min_distance else None
    if not cands or max(c[1] for c in cands) < min(min_distance, 2):
        return _trivial_code(n, k, min_distance)
    dim, dist, label, build, parent = max(cands, key=lambda c: (c[1], -c[0]))
    code = LinearCode(build(), dist, label, parent).subcode(k)
    exact = exact_min_distance(code.generator, max_dim=16)
    if exact is not None and exact > code.distance:
        code = LinearCode(code.generator, exact, code.construction + " (exhaustive distance)", parent)
    return code if code.distance >= min_distance else None


def _trivial_code(n: int, k: int, min_distance: int) -> LinearCode | None:
    """Single parity check (distance 2) for k < n, identity (distance 1) for k = n."""
    if k > n:
        return None
    gen = np.zeros((k, n), dtype=np.uint8)
    gen[:, :k] = np.eye(k, dtype=np.uint8)
    if k < n:
        gen[:, n - 1] = 1
        code = LinearCode(gen, 2, f"single parity check [{n},{k}]")
    else:
        code = LinearCode(gen, 1, f"identity [{n},{n}]")
    return code if code.distance >= min_distance else None


# --- bounded-distance decoding -------------------------------------------------


def _gf_mul_vec(a: np.ndarray, b: np.ndarray, exp: np.ndarray, log: np.ndarray) -> np.ndarray:
    return np.where((a > 0) & (b > 0), exp[log[a] + log[b]], 0)


def parity_check(generator: np.ndarray) -> np.ndarray:
    """Rows spanning the dual code."""
    k, n = generator.shape
    sol = solve_batch(generator[None, :, :], np.zeros((1, k), dtype=np.uint8))
    return sol.basis[0]


def information_set(generator: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Columns J with G[:, J] invertible and that inverse, so info = c[J] @ inverse (mod 2)."""
    k, n = generator.shape
    cols: list[int] = []
    for j in range(n):
        if rank(generator[:, cols + [j]]) == len(cols) + 1:
            cols.append(j)
            if len(cols) == k:
                break
    sub = generator[:, cols]
    # column i of the inverse solves sub v = e_i
    sol = solve_batch(np.repeat(sub[None], k, axis=0), np.eye(k, dtype=np.uint8))
    return np.array(cols), sol.particular.T.copy()


class BoundedDistanceDecoder:
    """All codewords within `t` disagreements of a binary word on its unerased positions.

    Erasures are filled with all zeros and with all ones; one filling leaves at most half of
    them wrong, so when 2t + (erasures among the cyclic positions) < bose the unique
    qualifying codeword, if any, lies within the designed radius of that filling and
    Berlekamp-Massey finds it. Other rows are reported as unresolved.
    """

    FOUND, NONE, UNRESOLVED = 1, 0, -1

    def __init__(self, code: LinearCode):
        if code.bch is None:
            raise ValueError("bounded-distance decoding needs a BCH-derived code")
        p = code.bch
        self.code = code
        self.size = (1 << p.m) - 1
        self.exp, self.log = _gf_tables(p.m)
        self.exp = np.concatenate([self.exp, self.exp])  # room for log sums
        self.nc = code.n - 1 if p.extended else code.n
        self.bose = p.bose
        self.tau = (p.bose - 1) // 2
        self.nsyn = 2 * self.tau
        i = np.arange(self.nc)
        j = np.arange(1, self.nsyn + 1)
        self.powers = self.exp[(np.outer(j, i)) % self.size]  # alpha^(j i), (2tau, nc)
        # bit planes of the powers, for syndromes as a 0/1 matrix product
        self.planes = ((self.powers[:, :, None] >> np.arange(p.m)) & 1).transpose(1, 0, 2).reshape(self.nc, -1).astype(np.float32)
        self.inv_powers = self.exp[(-np.outer(i, np.arange(self.tau + 1))) % self.size]  # alpha^(-i d), (nc, tau+1)
        self.h = parity_check(code.generator)
        self.info_cols, self.info_inv = information_set(code.generator)
        self.m = p.m
        if self._syndromes(code.generator[:, : self.nc]).any():
            raise ValueError("generator rows are not codewords of the stated BCH code")
        if p.extended and (code.generator.sum(axis=1) % 2).any():
            raise ValueError("extended code rows must have even weight")

    def _syndromes(self, r: np.ndarray) -> np.ndarray:
        bits = (r.astype(np.float32) @ self.planes).astype(np.int64) & 1  # (T, 2tau*m)
        bits = bits.reshape(r.shape[0], self.nsyn, self.m)
        return (bits << np.arange(self.m)).sum(axis=2)

    def _berlekamp_massey(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        t = s.shape[0]
        w = self.nsyn + 2
        lam = np.zeros((t, w), dtype=np.int64)
        lam[:, 0] = 1
        prev = lam.copy()
        length = np.zeros(t, dtype=np.int64)
        shift = np.ones(t, dtype=np.int64)
        b = np.ones(t, dtype=np.int64)
        cols = np.arange(w)
        exp, log, size = self.exp, self.log, self.size
        for r in range(self.nsyn):
            terms = _gf_mul_vec(lam[:, : r + 1], s[:, r::-1], exp, log)
            d = np.bitwise_xor.reduce(terms, axis=1)
            nz = d != 0
            # coefficient d / b
            coef = np.where(nz, exp[(log[np.maximum(d, 1)] - log[b]) % size], 0)
            src = cols[None, :] - shift[:, None]
            shifted = np.where(src >= 0, np.take_along_axis(prev, np.clip(src, 0, None), axis=1), 0)
            update = lam ^ _gf_mul_vec(np.repeat(coef[:, None], w, axis=1), shifted, exp, log)
            grow = nz & (2 * length <= r)
            new_prev = np.where(grow[:, None], lam, prev)
            lam = np.where(nz[:, None], update, lam)
            prev = new_prev
            length = np.where(grow, r + 1 - length, length)
            b = np.where(grow, d, b)
            shift = np.where(grow, 1, shift + 1)
        return lam, length

    def _chien(self, lam: np.ndarray) -> np.ndarray:
        """(T, nc) mask of positions i with Lambda(alpha^-i) = 0."""
        coeffs = lam[:, : self.tau + 1]
        out = np.zeros((lam.shape[0], self.nc), dtype=np.int64)
        for d in range(self.tau + 1):
            out ^= _gf_mul_vec(coeffs[:, d : d + 1], self.inv_powers[None, :, d], self.exp, self.log)
        return out == 0

    def _candidate(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Decode a filled word of the cyclic part; returns (success, corrected cyclic part)."""
        s = self._syndromes(r)
        lam, length = self._berlekamp_massey(s)
        ok = length <= self.tau
        roots = self._chien(lam)
        ok &= roots.sum(axis=1) == length
        return ok, (r ^ roots).astype(np.uint8)

    def decode(self, y: np.ndarray, erased: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (status per row, info bits per row for FOUND rows)."""
        y = np.asarray(y, dtype=np.uint8)
        erased = np.asarray(erased, dtype=bool)
        t = np.asarray(t, dtype=np.int64)
        rows, n = y.shape
        status = np.full(rows, self.NONE, dtype=np.int64)
        info = np.zeros((rows, self.code.k), dtype=np.uint8)
        resolvable = 2 * t + erased[:, : self.nc].sum(axis=1) < self.bose
        status[~resolvable] = self.UNRESOLVED
        for fill in (0, 1):
            todo = np.flatnonzero(status == self.NONE)
            if todo.size == 0:
                break
            yy, ee = y[todo], erased[todo]
            r = np.where(ee, fill, yy).astype(np.uint8)[:, : self.nc]
            ok, cyc = self._candidate(r)
            full = cyc if self.nc == n else np.concatenate([cyc, cyc.sum(axis=1, keepdims=True) % 2], axis=1).astype(np.uint8)
            ok &= ~((full.astype(np.int64) @ self.h.T.astype(np.int64)) & 1).any(axis=1)
            ok &= ((full != yy) & ~ee).sum(axis=1) <= t[todo]
            hit = todo[ok]
            status[hit] = self.FOUND
            info[hit] = (full[ok][:, self.info_cols].astype(np.int64) @ self.info_inv.astype(np.int64) & 1).astype(np.uint8)
        return status, info
