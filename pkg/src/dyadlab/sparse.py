"""Sparse selection: biparameter level-set ladders and the one-parameter stopping time."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .grid import DyadicGrid, GridError, Rect, SparseFamily, check_dyadically_sparse, check_weakly_sparse, dyadic_to_weak, flat_index, unflat_index
from .haar import VectorField, coefficient_array, pairing
from .weights import MatrixWeight, ap_characteristic, conjugate_exponent, op_norm, reducing_field

DEFAULT_DELTA = Fraction(1, 4)
DEFAULT_EPS = Fraction(1, 2)
MAX_DOUBLINGS = 200


def _frac(x) -> Fraction:
    return Fraction(x).limit_denominator(10**9)


# ---------------------------------------------------------------------------
# biparameter selection


@dataclass
class LevelSetLadder:
    c: float
    a_f: float
    a_g: float
    omegas: list[np.ndarray]  # Omega_0, Omega_1, ... (leaf masks), last one empty
    r0: list[Rect]
    F: list[list[Rect]]


def _rect_order(grid: DyadicGrid, rects: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Decreasing area, then decreasing |R1|, then lower-left corner."""
    a1, a2 = grid.axes

    def key(t):
        k1, m1 = unflat_index(t[0])
        k2, m2 = unflat_index(t[1])
        return (k1 + k2, k1, a1.start(k1, m1), a2.start(k2, m2))

    return sorted(rects, key=key)


def _cancellative_rects(grid: DyadicGrid):
    n1, n2 = (n - 1 for n in grid.shape)
    return [(t1, t2) for t1 in range(n1) for t2 in range(n2)]


def _rect(t1: int, t2: int) -> Rect:
    k1, m1 = unflat_index(t1)
    k2, m2 = unflat_index(t2)
    return Rect(k1, m1, k2, m2)


def _counts(grid: DyadicGrid, mask: np.ndarray) -> np.ndarray:
    """|R ∩ mask| in leaf units for every rectangle (flat-indexed on both axes)."""
    M1, M2 = grid.axes[0].membership, grid.axes[1].membership
    return np.rint(M1 @ mask.astype(float) @ M2.T).astype(np.int64)


def build_ladder(grid: DyadicGrid, Phi: np.ndarray, Psi: np.ndarray, c: float) -> LevelSetLadder:
    a_f = c * float(np.mean(Phi))
    a_g = c * float(np.mean(Psi))
    omegas = []
    k = 0
    while True:
        om = (Phi > 2.0**k * a_f) | (Psi > 2.0**k * a_g)
        omegas.append(om)
        if not om.any():
            break
        k += 1
    a1, a2 = grid.axes
    area = np.outer(a1.counts, a2.counts)
    cnt = [_counts(grid, om) for om in omegas]
    rects = _cancellative_rects(grid)
    r0 = [(t1, t2) for t1, t2 in rects if 2 * cnt[0][t1, t2] <= area[t1, t2]]
    F = []
    for k in range(len(omegas) - 1):
        F.append([(t1, t2) for t1, t2 in rects if 2 * cnt[k][t1, t2] > area[t1, t2] and 2 * cnt[k + 1][t1, t2] <= area[t1, t2]])
    return LevelSetLadder(c, a_f, a_g, omegas, r0, F)


def _select(grid: DyadicGrid, ladder: LevelSetLadder, delta: Fraction):
    union = np.zeros(grid.shape, dtype=bool)
    cells, wits = [], []
    num, den = delta.numerator, delta.denominator
    for level in reversed(ladder.F):
        for t1, t2 in _rect_order(grid, level):
            R = _rect(t1, t2)
            m = grid.cell_mask(R)
            inter = int(np.count_nonzero(m & union))
            size = int(np.count_nonzero(m))
            # |R ∩ U| < (1 - delta) |R|
            if inter * den < (den - num) * size:
                cells.append(R)
                wits.append(m & ~union)
                union |= m
    return cells, wits, union


def biparameter_sparse_select(Phi: np.ndarray, Psi: np.ndarray, grid: DyadicGrid, delta=DEFAULT_DELTA):
    """Weakly delta-sparse family from the level sets of the pair (Phi, Psi).

    The root rectangle Q0 closes the family with witness Q0 minus the union of
    the other selected rectangles; c doubles from 2 until |Omega_0| <= |Q0|/2
    and that witness has measure >= delta |Q0|.  Returns (family, ladder).
    """
    delta = _frac(delta)
    if not (0 < delta < Fraction(1, 2)):
        raise ValueError("delta must lie in (0, 1/2)")
    Phi = np.asarray(Phi, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    if Phi.shape != grid.shape or Psi.shape != grid.shape:
        raise GridError("square function fields must live on the grid")
    total = Phi.size
    c = 2.0
    for _ in range(MAX_DOUBLINGS):
        ladder = build_ladder(grid, Phi, Psi, c)
        if 2 * int(ladder.omegas[0].sum()) <= total:
            cells, wits, union = _select(grid, ladder, delta)
            rest = ~union
            if int(rest.sum()) * delta.denominator >= delta.numerator * total:
                cells.append(Rect(0, 0, 0, 0))
                wits.append(rest)
                fam = SparseFamily(cells, wits, delta, grid)
                rep = check_weakly_sparse(fam)
                if not rep.ok:
                    raise AssertionError(f"selection produced a non-sparse family: {rep}")
                return fam, ladder
        c *= 2.0
    raise RuntimeError("constant doubling did not terminate")


def sparse_form_eval(family: SparseFamily, Phi: np.ndarray, Psi: np.ndarray) -> float:
    """sum_R (Phi)_R (Psi)_R |R| over the family (normalized measure)."""
    grid = family.grid
    n = Phi.size
    tot = 0.0
    for R in family.cells:
        m = grid.cell_mask(R)
        k = int(m.sum())
        tot += (Phi[m].sum() / k) * (Psi[m].sum() / k) * (k / n)
    return float(tot)


# ---------------------------------------------------------------------------
# domination reports


@dataclass
class DominationReport:
    lhs: float
    form: float
    constant: float
    ratio: float
    family: SparseFamily
    c: float
    extra: dict = field(default_factory=dict)


def _report(lhs, form, const, fam, ladder, **extra):
    den = const * form
    ratio = 0.0 if lhs == 0 else (np.inf if den == 0 else lhs / den)
    return DominationReport(float(lhs), float(form), float(const), float(ratio), fam, ladder.c, extra)


def multiplier_domination(sigma, f: VectorField, g: VectorField, W: MatrixWeight, p: float, delta=DEFAULT_DELTA, U: MatrixWeight | None = None):
    """One-weight (U None) or two-weight multiplier sparse domination report."""
    from .operators import haar_multiplier
    from .square import square_function

    pp = conjugate_exponent(p)
    Wc = W.conjugate(p)
    lhs = abs(pairing(haar_multiplier(sigma, f), g))
    if U is None:
        Phi = square_function(f, "St_W", W, p)
        Psi = square_function(g, "St_W", Wc, pp)
        const = sigma.bound
        extra = {}
    else:
        Phi = square_function(f, "S_W", U, p)
        Psi = square_function(g, "S_W", Wc, pp)
        two = ap_characteristic(W, p, "two_weight", U.conjugate(p)).value
        const = sigma.bound * two ** (1.0 / p)
        extra = {"two_weight_char": two}
    fam, ladder = biparameter_sparse_select(Phi, Psi, f.grid, delta)
    return _report(lhs, sparse_form_eval(fam, Phi, Psi), const, fam, ladder, **extra)


def shift_domination(K, f: VectorField, g: VectorField, W: MatrixWeight, p: float, delta=DEFAULT_DELTA, U: MatrixWeight | None = None):
    """One-weight (U None) or two-weight shift sparse domination report."""
    from .operators import haar_shift
    from .square import shifted_square_function

    pp = conjugate_exponent(p)
    Wc = W.conjugate(p)
    s = sum(K.i) + sum(K.j)
    lhs = abs(pairing(haar_shift(K, f), g))
    Psi = shifted_square_function(g, K.j, K.i, "S_W", Wc, pp)
    if U is None:
        Phi = shifted_square_function(f, K.i, K.j, "S_W", W, p)
        const = 2.0 ** (-s)
        extra = {}
    else:
        Phi = shifted_square_function(f, K.i, K.j, "S_W", U, p)
        two = ap_characteristic(W, p, "two_weight", U.conjugate(p)).value
        const = two ** (1.0 / p) * 2.0 ** (-s / 2.0)
        extra = {"two_weight_char": two}
    fam, ladder = biparameter_sparse_select(Phi, Psi, f.grid, delta)
    return _report(lhs, sparse_form_eval(fam, Phi, Psi), const, fam, ladder, **extra)


# ---------------------------------------------------------------------------
# one-parameter stopping time


def _one_axis(grid: DyadicGrid):
    if len(grid.shape) != 1:
        raise GridError("one-parameter construction needs a one-axis grid")
    return grid.axes[0]


def localized_shifted_square(f: VectorField, W: MatrixWeight, p: float, i: int, j: int, J: tuple[int, int]) -> np.ndarray:
    """2^{j/2} (sum_{R ⊆ J} (sum_{P in ch_i(R)} |W(x)^{1/p} f_P|)^2 1_R(x)/|R|)^{1/2}."""
    ax = _one_axis(f.grid)
    C = coefficient_array(f)
    Wp = W.power(1.0 / p)
    top = ax.L - max(i, j)
    out = np.zeros(ax.N)
    for x in ax.leaves(*J):
        tot = 0.0
        for k in range(J[0], top):
            t = ax.leaf_chain[x, k]
            P = ax.descendant_map[i][t]
            s = np.linalg.norm(C[P] @ Wp[x].T, axis=-1).sum()
            tot += s * s * 2.0**k
        out[x] = np.sqrt(2.0**j * tot)
    return out


def sparse_positive_operator(cells, W: MatrixWeight, p: float, f: VectorField) -> np.ndarray:
    """(sum_L (|W_L f|)_L^2 |W(x)^{1/p} W_L^{-1}|^2 1_L(x))^{1/2} for intervals L."""
    ax = _one_axis(f.grid)
    out = np.zeros(ax.N)
    if not cells:
        return out
    R = reducing_field(W, p).matrices
    Wp = W.power(1.0 / p)
    for k, m in cells:
        t = flat_index(k, m)
        lv = ax.leaves(k, m)
        avg = np.mean(np.linalg.norm(f.values[lv] @ R[t].T, axis=-1))
        nrm = op_norm(Wp[lv] @ np.linalg.inv(R[t]))
        out[lv] += avg**2 * nrm**2
    return np.sqrt(out)


def _stopping_children(ax, C, A, favg, T, i, j, c, ibar):
    """Maximal L ⊆ T with sum_{I ⊇ L, I ⊆ T} (sum_P |A f_P|)^2 / |I| > c^2 ibar^2 2^i avg^2."""
    top = ax.L - max(i, j)
    tau = c * c * ibar * ibar * 2.0**i * favg**2
    out = []
    stack = [(T, 0.0)]
    while stack:
        (k, m), acc = stack.pop()
        if k < top:
            s = np.linalg.norm(C[ax.descendant_map[i][flat_index(k, m)]] @ A.T, axis=-1).sum()
            acc += s * s * 2.0**k
        if acc > tau:
            out.append((k, m))
        elif k < ax.L:
            stack.extend((ch, acc) for ch in ax.children(k, m))
    out.sort()
    return out


def one_param_shifted_sparse(J: tuple[int, int], f: VectorField, W: MatrixWeight, p: float, i: int, j: int, eps=DEFAULT_EPS):
    """Stopping-time family inside J and the pointwise domination ratio.

    Returns (family of intervals, report) where report.ratio is
    sup_x S~_{W,J} f(x) / (ibar 2^{(i+j)/2} A_{S,W} f(x)) with ibar = max(i, 1).
    """
    ax = _one_axis(f.grid)
    eps = _frac(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if max(i, j) >= ax.L:
        raise GridError("complexity exceeds grid depth")
    C = coefficient_array(f)
    R = reducing_field(W, p).matrices
    ibar = max(i, 1)
    lv = ax.leaves(*J)
    if not np.any(f.values[lv]):
        fam = []
        cs = []
    else:
        fam, cs = [], []
        queue = [J]
        while queue:
            T = queue.pop(0)
            A = R[flat_index(*T)]
            favg = float(np.mean(np.linalg.norm(f.values[ax.leaves(*T)] @ A.T, axis=-1)))
            fam.append(T)
            if favg == 0.0:
                cs.append(0.0)
                continue
            c = 2.0
            for _ in range(MAX_DOUBLINGS):
                kids = _stopping_children(ax, C, A, favg, T, i, j, c, ibar)
                mass = sum(1 << (ax.L - k) for k, _ in kids)
                if mass * eps.denominator <= (eps.denominator - eps.numerator) * (1 << (ax.L - T[0])):
                    break
                c *= 2.0
            else:
                raise RuntimeError("constant doubling did not terminate")
            cs.append(c)
            queue.extend(kids)
    rep = check_dyadically_sparse(fam, ax, eps)
    if not rep.ok:
        raise AssertionError(f"stopping family not sparse: {rep}")
    lhs = localized_shifted_square(f, W, p, i, j, J)
    rhs = sparse_positive_operator(fam, W, p, f)
    scale = ibar * 2.0 ** ((i + j) / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(lhs > 0, lhs / (scale * rhs), 0.0)
    ratio = float(np.max(r)) if r.size else 0.0
    report = DominationReport(float(lhs.max()), float(rhs.max()), scale, ratio, dyadic_to_weak(fam, ax, eps) if fam else SparseFamily([], [], eps), max(cs, default=0.0), {"constants": cs})
    return fam, report
