"""Slow reference computations, written independently of the fast paths.

Geometry is rebuilt here from the shift bits with exact fractions, Haar
functions are rebuilt from that geometry, and every operator is evaluated by
direct summation over rectangles.  Only the domain types are shared.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

BASIS_CAP = 1 << 16


@dataclass
class OracleReport:
    quantity: str
    oracle: float
    fast: float
    deviation: float
    tol: float
    instance: dict

    @property
    def ok(self) -> bool:
        return self.deviation <= self.tol

    @property
    def status(self) -> str:
        return "PASS" if self.ok else "FAIL"


def compare(quantity: str, oracle, fast, tol: float, **instance) -> OracleReport:
    o = np.asarray(oracle, dtype=float)
    f = np.asarray(fast, dtype=float)
    scale = max(1.0, float(np.max(np.abs(o))) if o.size else 1.0)
    dev = float(np.max(np.abs(o - f))) / scale if o.size else 0.0
    return OracleReport(quantity, float(np.max(np.abs(o))) if o.size else 0.0, float(np.max(np.abs(f))) if f.size else 0.0, dev, tol, instance)


# ---------------------------------------------------------------------------
# geometry


class _Axis:
    """Intervals of one shifted axis as explicit leaf lists, built from endpoints."""

    def __init__(self, L: int, bits):
        self.L = L
        self.N = 1 << L
        self.cells = []  # cells[k][m] -> leaf indices in cyclic order from the left endpoint
        for k in range(L + 1):
            omega = sum(Fraction(bits[j - 1], 1 << j) for j in range(k + 1, L + 1))
            row = []
            for m in range(1 << k):
                left = (Fraction(m, 1 << k) + omega) % 1
                length = Fraction(1, 1 << k)
                inside = []
                for x in range(self.N):
                    rel = (Fraction(x, self.N) - left) % 1
                    if rel < length:
                        inside.append((rel, x))
                row.append([x for _, x in sorted(inside)])
            self.cells.append(row)

    def indicator(self, k, m) -> np.ndarray:
        v = np.zeros(self.N)
        v[self.cells[k][m]] = 1.0
        return v

    def haar(self, k, m) -> np.ndarray:
        leaves = self.cells[k][m]
        half = len(leaves) // 2
        v = np.zeros(self.N)
        v[leaves[:half]] = -1.0
        v[leaves[half:]] = 1.0
        return v * np.sqrt(2.0**k)

    def descendants(self, k, m, i) -> list[int]:
        """m-indices at generation k+i inside (k, m), ordered by position from the left endpoint."""
        parent = self.cells[k][m]
        pos = {x: n for n, x in enumerate(parent)}
        kids = [mm for mm in range(1 << (k + i)) if self.cells[k + i][mm][0] in pos]
        return sorted(kids, key=lambda mm: pos[self.cells[k + i][mm][0]])

    def flat(self, k, m) -> int:
        return (1 << k) - 1 + m

    def containing(self, x) -> list[tuple[int, int]]:
        return [(k, m) for k in range(self.L + 1) for m in range(1 << k) if x in self.cells[k][m]]


def axes_of(grid):
    spec = grid.spec
    return [_Axis(spec.L, bits) for bits in spec.shift_bits]


# ---------------------------------------------------------------------------
# Haar coefficients and operators


def haar_coefficients(values: np.ndarray, grid) -> np.ndarray:
    """Bicancellative coefficients by direct pairing with rebuilt Haar functions."""
    ax = axes_of(grid)
    values = np.asarray(values, dtype=float)
    if len(ax) == 1:
        a = ax[0]
        out = np.zeros((a.N - 1,) + values.shape[1:])
        for k in range(a.L):
            for m in range(1 << k):
                out[a.flat(k, m)] = np.tensordot(a.haar(k, m), values, axes=(0, 0)) / a.N
        return out
    a1, a2 = ax
    out = np.zeros((a1.N - 1, a2.N - 1) + values.shape[2:])
    for k1 in range(a1.L):
        for m1 in range(1 << k1):
            h1 = a1.haar(k1, m1)
            for k2 in range(a2.L):
                for m2 in range(1 << k2):
                    h = np.outer(h1, a2.haar(k2, m2))
                    out[a1.flat(k1, m1), a2.flat(k2, m2)] = np.tensordot(h, values, axes=([0, 1], [0, 1])) / (a1.N * a2.N)
    return out


def _synth(coeffs: dict, ax, d: int) -> np.ndarray:
    a1, a2 = ax
    out = np.zeros((a1.N, a2.N, d))
    for (k1, m1, k2, m2), v in coeffs.items():
        out += np.outer(a1.haar(k1, m1), a2.haar(k2, m2))[..., None] * v
    return out


def _rects(ax, max1=None, max2=None):
    a1, a2 = ax
    for k1 in range(a1.L if max1 is None else max1):
        for m1 in range(1 << k1):
            for k2 in range(a2.L if max2 is None else max2):
                for m2 in range(1 << k2):
                    yield k1, m1, k2, m2


def multiplier(sigma: np.ndarray, values: np.ndarray, grid) -> np.ndarray:
    ax = axes_of(grid)
    a1, a2 = ax
    N = a1.N * a2.N
    terms = {}
    for k1, m1, k2, m2 in _rects(ax):
        h = np.outer(a1.haar(k1, m1), a2.haar(k2, m2))
        fR = np.tensordot(h, values, axes=([0, 1], [0, 1])) / N
        terms[(k1, m1, k2, m2)] = sigma[a1.flat(k1, m1), a2.flat(k2, m2)] * fR
    return _synth(terms, ax, values.shape[-1])


def shift(i, j, coeffs: np.ndarray, values: np.ndarray, grid) -> np.ndarray:
    """sum_R sum_{P in ch_i(R)} sum_{Q in ch_j(R)} a_{PQR} f_P h_Q."""
    ax = axes_of(grid)
    a1, a2 = ax
    N = a1.N * a2.N
    d = values.shape[-1]
    out = np.zeros_like(values, dtype=float)
    top1 = a1.L - max(i[0], j[0])
    top2 = a2.L - max(i[1], j[1])
    for k1, m1, k2, m2 in _rects(ax, top1, top2):
        r1, r2 = a1.flat(k1, m1), a2.flat(k2, m2)
        P1 = a1.descendants(k1, m1, i[0])
        P2 = a2.descendants(k2, m2, i[1])
        Q1 = a1.descendants(k1, m1, j[0])
        Q2 = a2.descendants(k2, m2, j[1])
        for p1, mp1 in enumerate(P1):
            for p2, mp2 in enumerate(P2):
                hP = np.outer(a1.haar(k1 + i[0], mp1), a2.haar(k2 + i[1], mp2))
                fP = np.tensordot(hP, values, axes=([0, 1], [0, 1])) / N
                for q1, mq1 in enumerate(Q1):
                    for q2, mq2 in enumerate(Q2):
                        a = coeffs[r1, r2, p1, p2, q1, q2]
                        hQ = np.outer(a1.haar(k1 + j[0], mq1), a2.haar(k2 + j[1], mq2))
                        out += a * hQ[..., None] * fP.reshape(1, 1, d)
    return out


def paraproduct(kind: str, a: np.ndarray, values: np.ndarray, grid) -> np.ndarray:
    """Direct sum over rectangles of the four full paraproduct forms."""
    ax = axes_of(grid)
    a1, a2 = ax
    N = a1.N * a2.N
    out = np.zeros_like(values, dtype=float)
    for k1, m1, k2, m2 in _rects(ax):
        h1, h2 = a1.haar(k1, m1), a2.haar(k2, m2)
        e1 = a1.indicator(k1, m1) * 2.0**k1  # 1_I / |I|
        e2 = a2.indicator(k2, m2) * 2.0**k2
        aR = np.sum(np.outer(h1, h2) * a) / N
        if kind == "11":
            c = np.tensordot(np.outer(e1, e2), values, axes=([0, 1], [0, 1])) / N  # (f)_R
            out += aR * np.outer(h1, h2)[..., None] * c
        elif kind == "00":
            c = np.tensordot(np.outer(h1, h2), values, axes=([0, 1], [0, 1])) / N
            out += aR * np.outer(e1, e2)[..., None] * c
        elif kind == "01":
            c = np.tensordot(np.outer(h1, e2), values, axes=([0, 1], [0, 1])) / N  # (f^1_{R1})_{R2}
            out += aR * np.outer(e1, h2)[..., None] * c
        elif kind == "10":
            c = np.tensordot(np.outer(e1, h2), values, axes=([0, 1], [0, 1])) / N
            out += aR * np.outer(h1, e2)[..., None] * c
        else:
            raise ValueError(kind)
    return out


def partial_paraproduct(i: int, j: int, symbols: np.ndarray, values: np.ndarray, grid, star: bool = False) -> np.ndarray:
    """sum_{R1, P1, Q1, R2} a^{P1 Q1 R1}_{R2} f_{P1 x R2} h_{Q1} (x) 1_{R2}/|R2| (axes swapped when star)."""
    ax = axes_of(grid)
    if star:
        ax = ax[::-1]
        values = np.swapaxes(values, 0, 1)
    s, o = ax
    N = s.N * o.N
    out = np.zeros_like(values, dtype=float)
    top = s.L - max(i, j)
    for k1 in range(top):
        for m1 in range(1 << k1):
            r = s.flat(k1, m1)
            P = s.descendants(k1, m1, i)
            Q = s.descendants(k1, m1, j)
            for pi, mp in enumerate(P):
                for qi, mq in enumerate(Q):
                    sym = symbols[r, pi, qi]  # leaf values on the other axis
                    for k2 in range(o.L):
                        for m2 in range(1 << k2):
                            h2 = o.haar(k2, m2)
                            aR2 = np.dot(sym, h2) / o.N
                            if aR2 == 0.0:
                                continue
                            hP = np.outer(s.haar(k1 + i, mp), h2)
                            fPR = np.tensordot(hP, values, axes=([0, 1], [0, 1])) / N
                            e2 = o.indicator(k2, m2) * 2.0**k2
                            out += aR2 * np.outer(s.haar(k1 + j, mq), e2)[..., None] * fPR
    return np.swapaxes(out, 0, 1) if star else out


# ---------------------------------------------------------------------------
# weights, maximal and square functions


def _pow(M: np.ndarray, s: float) -> np.ndarray:
    lam, V = np.linalg.eigh(M)
    return (V * lam**s) @ V.T


def maximal(variant: str, Wvals, p: float, values: np.ndarray, grid, reducing=None) -> np.ndarray:
    """Loop over leaves and every rectangle containing them.

    reducing: callable (cell leaf mask) -> matrix, needed for the modified variant.
    """
    ax = axes_of(grid)
    a1, a2 = ax
    out = np.zeros((a1.N, a2.N))
    cells = [(k1, m1, k2, m2) for k1 in range(a1.L + 1) for m1 in range(1 << k1) for k2 in range(a2.L + 1) for m2 in range(1 << k2)]
    for x1 in range(a1.N):
        for x2 in range(a2.N):
            best = 0.0
            for k1, m1, k2, m2 in cells:
                if x1 not in a1.cells[k1][m1] or x2 not in a2.cells[k2][m2]:
                    continue
                pts = [(y1, y2) for y1 in a1.cells[k1][m1] for y2 in a2.cells[k2][m2]]
                if variant == "unweighted":
                    v = np.mean([np.linalg.norm(values[y]) for y in pts])
                elif variant == "christ_goldberg":
                    A = _pow(Wvals[x1, x2], 1.0 / p)
                    v = np.mean([np.linalg.norm(A @ values[y]) for y in pts])
                elif variant == "modified":
                    A = reducing(k1, m1, k2, m2)
                    v = np.mean([np.linalg.norm(A @ values[y]) for y in pts])
                else:
                    raise ValueError(variant)
                best = max(best, v)
            out[x1, x2] = best
    return out


def square_p2(values: np.ndarray, Wvals, grid, pointwise: bool) -> np.ndarray:
    """S_W (pointwise=False, closed-form p=2 reducing matrices) or S~_W at p=2 by direct sums."""
    ax = axes_of(grid)
    a1, a2 = ax
    N = a1.N * a2.N
    out = np.zeros((a1.N, a2.N))
    for k1, m1, k2, m2 in _rects(ax):
        h = np.outer(a1.haar(k1, m1), a2.haar(k2, m2))
        fR = np.tensordot(h, values, axes=([0, 1], [0, 1])) / N
        ind = np.outer(a1.indicator(k1, m1), a2.indicator(k2, m2))
        if pointwise:
            for x1, x2 in zip(*np.nonzero(ind)):
                out[x1, x2] += fR @ Wvals[x1, x2] @ fR * 2.0 ** (k1 + k2)
        else:
            mean = sum(Wvals[x1, x2] for x1, x2 in zip(*np.nonzero(ind))) / ind.sum()
            v = _pow(mean, 0.5) @ fR
            out += (v @ v) * ind * 2.0 ** (k1 + k2)
    return np.sqrt(out)


def integral_characteristic(Wvals, p: float, grid) -> float:
    """sup over all rectangles of avg_x (avg_y |W(x)^{1/p} W(y)^{-1/p}|^{p'})^{p/p'}."""
    ax = axes_of(grid)
    pp = p / (p - 1.0)
    best = 0.0
    if len(ax) == 1:
        a = ax[0]
        cells = [a.cells[k][m] for k in range(a.L + 1) for m in range(1 << k)]
        idx = [[(x,) for x in c] for c in cells]
    else:
        a1, a2 = ax
        idx = [
            [(y1, y2) for y1 in a1.cells[k1][m1] for y2 in a2.cells[k2][m2]]
            for k1 in range(a1.L + 1)
            for m1 in range(1 << k1)
            for k2 in range(a2.L + 1)
            for m2 in range(1 << k2)
        ]
    for pts in idx:
        X = [_pow(Wvals[x], 1.0 / p) for x in pts]
        Y = [_pow(Wvals[y], -1.0 / p) for y in pts]
        outer = 0.0
        for A in X:
            inner = np.mean([np.linalg.norm(A @ B, 2) ** pp for B in Y])
            outer += inner ** (p / pp)
        best = max(best, outer / len(pts))
    return best


# ---------------------------------------------------------------------------
# operator norms


def _block_power(Wvals, s: float) -> np.ndarray:
    mats = np.asarray(Wvals, dtype=float)
    d = mats.shape[-1]
    mats = mats.reshape(-1, d, d)
    n = mats.shape[0]
    B = np.zeros((n * d, n * d))
    for x in range(n):
        B[x * d : (x + 1) * d, x * d : (x + 1) * d] = _pow(mats[x], s)
    return B


def _mixed_norm(v: np.ndarray, n: int, p: float) -> float:
    blocks = np.linalg.norm(v.reshape(n, -1), axis=1)
    return float(np.mean(blocks**p) ** (1.0 / p))


def brute_force_operator_norm(T: np.ndarray, W_in, W_out, p: float, restarts: int = 32, iters: int = 150, seed: int = 0, d: int | None = None):
    """||T||_{Lp(W_in) -> Lp(W_out)} on leaf fields, exact for p = 2.

    T acts on flattened leaf fields (n_leaves * d).  W_in / W_out are leaf
    matrix arrays or None.  For p != 2 the value is the best of `restarts`
    nonlinear power iterations, a lower bound.  Returns (value, history) with
    history the running maximum after each restart.
    """
    T = np.asarray(T, dtype=float)
    m = T.shape[0]
    if m > BASIS_CAP:
        raise ValueError(f"basis size {m} exceeds cap {BASIS_CAP}")
    if d is None:
        d = 1 if W_in is None and W_out is None else np.asarray(W_in if W_in is not None else W_out).shape[-1]
    n = m // d
    A = T
    if W_out is not None:
        A = _block_power(W_out, 1.0 / p) @ A
    if W_in is not None:
        A = A @ _block_power(W_in, -1.0 / p)
    if p == 2.0:
        s = float(np.linalg.svd(A, compute_uv=False)[0])
        return s, [s]
    pp = p / (p - 1.0)
    rng = np.random.default_rng(seed)

    def dual(v, q):
        b = np.linalg.norm(v.reshape(n, -1), axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(b > 0, b ** (q - 2.0), 0.0) * v.reshape(n, -1)
        return w.ravel()

    best, hist = 0.0, []
    for _ in range(restarts):
        y = rng.normal(size=m)
        for _ in range(iters):
            ny = _mixed_norm(y, n, p)
            if ny == 0:
                break
            y = y / ny
            z = A @ y
            best = max(best, _mixed_norm(z, n, p))
            y = dual(A.T @ dual(z, p), pp)
        hist.append(best)
    return best, hist


# ---------------------------------------------------------------------------
# sparse families and reducing matrices


def brute_force_carleson_check(masks, delta) -> tuple[bool, Fraction]:
    """sum_{R ⊆ Omega} |R| <= |Omega| / delta over every union Omega of family members.

    masks: boolean leaf masks of the rectangles (at most 12).  Returns (ok, worst packing ratio).
    """
    masks = [np.asarray(m, dtype=bool) for m in masks]
    if len(masks) > 12:
        raise ValueError("brute force limited to 12 rectangles")
    delta = Fraction(delta).limit_denominator(10**9)
    sizes = [int(m.sum()) for m in masks]
    worst = Fraction(0)
    for r in range(1, len(masks) + 1):
        for sub in combinations(range(len(masks)), r):
            omega = np.zeros_like(masks[0])
            for s in sub:
                omega |= masks[s]
            area = int(omega.sum())
            packed = sum(sz for m, sz in zip(masks, sizes) if not np.any(m & ~omega))
            worst = max(worst, Fraction(packed, area))
    return worst <= 1 / delta, worst


def _oracle_directions(d: int, n: int) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        th = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if d == 3:
        k = np.arange(n) + 0.5
        z = 1.0 - 2.0 * k / n
        phi = np.pi * (1.0 + np.sqrt(5.0)) * k
        r = np.sqrt(1.0 - z * z)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    g = np.random.default_rng(12345).normal(size=(n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class DirectionCheck:
    ok: bool
    lower: float  # min |Ae| / rho(e)
    upper: float  # max |Ae| / (sqrt(d) rho(e))
    worst: np.ndarray


def dense_direction_check(A: np.ndarray, rho, d: int, slack: float = 1.05, n: int = 2048, refine: int = 8, lower_tol: float = 1e-10) -> DirectionCheck:
    """rho(e) <= |Ae| <= sqrt(d) slack rho(e) on n directions plus local refinement of the worst one."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    U = _oracle_directions(d, n)

    def ratios(E):
        r = np.asarray(rho(E), dtype=float)
        a = np.linalg.norm(E @ A.T, axis=1)
        return a / r

    r = ratios(U)

    def violation(rr):
        return np.maximum(1.0 - rr, rr / np.sqrt(d) / slack - 1.0)

    v = violation(r)
    k = int(np.argmax(v))
    e = U[k].copy()
    lo, hi = float(r.min()), float(r.max() / np.sqrt(d))
    step = 0.05
    rng = np.random.default_rng(7)
    for _ in range(refine):
        cand = e + step * rng.normal(size=(16, d))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        rc = ratios(cand)
        lo, hi = min(lo, float(rc.min())), max(hi, float(rc.max() / np.sqrt(d)))
        vc = violation(rc)
        j = int(np.argmax(vc))
        if vc[j] > violation(ratios(e[None]))[0]:
            e = cand[j]
        step /= 2.0
    ok = lo >= 1.0 - lower_tol and hi <= slack
    return DirectionCheck(ok, lo, hi, e)


def rho_oracle(Wvals_cell: np.ndarray, p: float):
    """e -> (avg over the cell |W(x)^{1/p} e|^p)^{1/p}, with W rebuilt by eigh here."""
    mats = np.asarray(Wvals_cell, dtype=float).reshape(-1, Wvals_cell.shape[-1], Wvals_cell.shape[-1])
    return _rho_from_roots(np.array([_pow(M, 1.0 / p) for M in mats]), p)


def rho_oracle_table(Wvals: np.ndarray, p: float):
    """mask -> rho_oracle of the masked cell, with leaf roots computed once."""
    d = Wvals.shape[-1]
    lead = Wvals.shape[:-2]
    roots = np.array([_pow(M, 1.0 / p) for M in np.asarray(Wvals, dtype=float).reshape(-1, d, d)]).reshape(lead + (d, d))
    return lambda mask: _rho_from_roots(roots[mask], p)


def _rho_from_roots(roots, p):
    def rho(E):
        E = np.atleast_2d(E)
        v = np.einsum("nij,kj->kni", roots, E)
        return np.mean(np.linalg.norm(v, axis=-1) ** p, axis=1) ** (1.0 / p)

    return rho
