"""Matrix weights, reducing matrices and A_p characteristics.

Weights are SPD-valued and constant on leaf cells.  Reducing matrices are
computed for whole families of cells at once ("cells": every interval or
rectangle of the grid; ("slice", axis): every interval of one axis at every
leaf of the other axis).  Cells are grouped by shape so that each group is
one batched array computation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import ellipsoid
from .grid import DyadicGrid, GridError, GridSpec, Rect, flat_index

EIG_FLOOR = 1e-10
CERT_DIRECTIONS = 2048
CERT_SLACK = 1.05


class WeightError(ValueError):
    pass


class ReducingError(RuntimeError):
    pass


def conjugate_exponent(p: float) -> float:
    if p <= 1:
        raise WeightError(f"exponent must exceed 1, got {p}")
    return p / (p - 1.0)


def _eigh_checked(M: np.ndarray):
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, np.swapaxes(M, -1, -2), rtol=1e-10, atol=1e-12):
        raise WeightError("matrix not symmetric")
    lam, V = np.linalg.eigh(0.5 * (M + np.swapaxes(M, -1, -2)))
    if np.any(lam <= EIG_FLOOR):
        raise WeightError(f"eigenvalue {lam.min():.3e} breaches floor {EIG_FLOOR}")
    return lam, V


def _recompose(lam, V):
    return np.einsum("...ij,...j,...kj->...ik", V, lam, V)


def matrix_power(M: np.ndarray, s: float) -> np.ndarray:
    """M^s for SPD M (batched over leading axes) via eigendecomposition."""
    lam, V = _eigh_checked(M)
    return _recompose(lam**s, V)


def op_norm(M: np.ndarray) -> np.ndarray:
    """Largest singular value, batched over leading axes."""
    M = np.asarray(M, dtype=float)
    if M.shape[-1] == 1 and M.shape[-2] == 1:
        return np.abs(M[..., 0, 0])
    if M.shape[-2:] == (2, 2):
        a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
        s = a * a + b * b + c * c + d * d
        det = a * d - b * c
        disc = np.sqrt(np.maximum(s * s - 4.0 * det * det, 0.0))
        return np.sqrt(0.5 * (s + disc))
    return np.linalg.norm(M, ord=2, axis=(-2, -1))


class MatrixWeight:
    """SPD d x d matrices on the leaf cells of a grid; values shape grid.shape + (d, d)."""

    def __init__(self, values, grid: DyadicGrid, p: float | None = None):
        values = np.asarray(values, dtype=float)
        if values.ndim == len(grid.shape):
            values = values[..., None, None]
        if values.shape[: len(grid.shape)] != grid.shape or values.shape[-1] != values.shape[-2]:
            raise GridError(f"weight shape {values.shape} does not fit grid {grid.shape}")
        self._lam, self._vec = _eigh_checked(values)
        self.values = values
        self.grid = grid
        self.p = p
        self._powers: dict[float, np.ndarray] = {}

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    @property
    def n_leaves(self) -> int:
        return int(np.prod(self.grid.shape))

    @property
    def key(self) -> str:
        h = hashlib.sha1(self.values.tobytes())
        h.update(json.dumps(self.grid.spec.to_json(), sort_keys=True).encode())
        return h.hexdigest()

    def power(self, s: float) -> np.ndarray:
        s = float(s)
        if s not in self._powers:
            self._powers[s] = _recompose(self._lam**s, self._vec)
        return self._powers[s]

    def flat_power(self, s: float) -> np.ndarray:
        return self.power(s).reshape(-1, self.d, self.d)

    def conjugate(self, p: float | None = None) -> "MatrixWeight":
        p = self.p if p is None else p
        if p is None:
            raise WeightError("exponent required")
        return MatrixWeight(self.power(-1.0 / (p - 1.0)), self.grid, conjugate_exponent(p))

    def slice(self, axis: int, index: int) -> "MatrixWeight":
        """One-axis weight obtained by freezing the other variable at a leaf.

        axis names the variable that stays free (1 or 2).
        """
        if len(self.grid.shape) != 2:
            raise GridError("slicing needs a two-axis weight")
        spec = self.grid.spec
        g1 = DyadicGrid(GridSpec(spec.L, (spec.shift_bits[axis - 1],), 1))
        vals = self.values[:, index] if axis == 1 else self.values[index, :]
        return MatrixWeight(vals, g1, self.p)

    def to_json(self) -> dict:
        return {"grid": self.grid.spec.to_json(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj) -> "MatrixWeight":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(np.array(obj["values"]), DyadicGrid(GridSpec.from_json(obj["grid"])))


def constant_weight(grid: DyadicGrid, C: np.ndarray) -> MatrixWeight:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return MatrixWeight(np.broadcast_to(C, grid.shape + C.shape).copy(), grid)


def conjugate_weight(W: MatrixWeight, p: float) -> MatrixWeight:
    return W.conjugate(p)


# ---------------------------------------------------------------------------
# cell families


@dataclass
class CellGroup:
    positions: np.ndarray  # flat positions into the family array
    leaves: np.ndarray  # (c, n) flat leaf indices


@dataclass
class CellFamily:
    name: str
    shape: tuple[int, ...]
    groups: list[CellGroup]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def _flat_leaf(grid: DyadicGrid, i1: np.ndarray, i2: np.ndarray) -> np.ndarray:
    return i1 * grid.shape[1] + i2


def cell_family(grid: DyadicGrid, family="cells") -> CellFamily:
    cache = grid.__dict__.setdefault("_families", {})
    if family in cache:
        return cache[family]
    groups = []
    if family == "cells" and len(grid.shape) == 1:
        ax = grid.axes[0]
        shape = (ax.n_cells,)
        for k in range(ax.L + 1):
            pos = flat_index(k, 0) + np.arange(1 << k)
            groups.append(CellGroup(pos, ax.gen_leaves[k]))
    elif family == "cells":
        a1, a2 = grid.axes
        shape = (a1.n_cells, a2.n_cells)
        for k1 in range(a1.L + 1):
            for k2 in range(a2.L + 1):
                l1, l2 = a1.gen_leaves[k1], a2.gen_leaves[k2]
                t1 = flat_index(k1, 0) + np.arange(1 << k1)
                t2 = flat_index(k2, 0) + np.arange(1 << k2)
                pos = (t1[:, None] * shape[1] + t2[None, :]).ravel()
                leaves = _flat_leaf(grid, l1[:, None, :, None], l2[None, :, None, :])
                groups.append(CellGroup(pos, leaves.reshape(pos.size, -1)))
    elif isinstance(family, tuple) and family[0] == "slice":
        axis = family[1]
        ax = grid.axes[axis - 1]
        n_other = grid.shape[2 - axis]
        shape = (ax.n_cells, n_other)
        for k in range(ax.L + 1):
            lk = ax.gen_leaves[k]
            t = flat_index(k, 0) + np.arange(1 << k)
            other = np.arange(n_other)
            pos = (t[:, None] * n_other + other[None, :]).ravel()
            if axis == 1:
                leaves = _flat_leaf(grid, lk[:, None, :], other[None, :, None])
            else:
                leaves = _flat_leaf(grid, other[None, :, None], lk[:, None, :])
            groups.append(CellGroup(pos, leaves.reshape(pos.size, -1)))
    else:
        raise GridError(f"unknown cell family {family!r}")
    fam = CellFamily(str(family), shape, groups)
    cache[family] = fam
    return fam


def family_mean(grid: DyadicGrid, family, leaf_values: np.ndarray) -> np.ndarray:
    """Average leaf_values (n_leaves, ...) over each cell of the family."""
    fam = cell_family(grid, family)
    out = np.empty((fam.size,) + leaf_values.shape[1:])
    for g in fam.groups:
        out[g.positions] = leaf_values[g.leaves].mean(axis=1)
    return out.reshape(fam.shape + leaf_values.shape[1:])


def _cell_leaves(grid: DyadicGrid, E) -> np.ndarray:
    """Flat leaf indices of a cell given as Rect, (k, m) interval, or boolean mask."""
    if isinstance(E, Rect):
        a1, a2 = grid.axes
        return _flat_leaf(grid, a1.leaves(*E.first)[:, None], a2.leaves(*E.second)[None, :]).ravel()
    if isinstance(E, np.ndarray) and E.dtype == bool:
        idx = np.flatnonzero(E.ravel())
        if idx.size == 0:
            raise WeightError("empty cell set")
        return idx
    k, m = E
    if len(grid.shape) != 1:
        raise GridError("interval cells need a one-axis grid")
    return grid.axes[0].leaves(k, m)


# ---------------------------------------------------------------------------
# reducing matrices


def rho_norm(E, W: MatrixWeight, p: float, e: np.ndarray) -> np.ndarray:
    """(avg_E |W^{1/p} e|^p)^{1/p}; e may be a single vector or a stack (J, d)."""
    idx = _cell_leaves(W.grid, E)
    Wp = W.flat_power(1.0 / p)[idx]
    e = np.asarray(e, dtype=float)
    v = np.einsum("nij,...j->...ni", Wp, e)
    return np.mean(np.linalg.norm(v, axis=-1) ** p, axis=-1) ** (1.0 / p)


@dataclass
class ReducingMatrix:
    matrix: np.ndarray
    method: str
    certified_slack: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass
class ReducingField:
    """Reducing matrices for every cell of a family."""

    matrices: np.ndarray  # shape family.shape + (d, d)
    methods: np.ndarray  # family.shape, str
    slack: np.ndarray  # family.shape
    lower: np.ndarray  # min over certification directions of |Ae| / rho(e)
    p: float
    family: str

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrices)

    def at(self, *pos) -> ReducingMatrix:
        return ReducingMatrix(self.matrices[pos], str(self.methods[pos]), float(self.slack[pos]))


def _rho_batch(Mp: np.ndarray, B: np.ndarray | None, U: np.ndarray, p: float) -> np.ndarray:
    """rho(B u_j) on each cell: Mp (c, n, d, d), B (c, d, d) or None, U (J, d) -> (c, J)."""
    if B is not None:
        Mp = Mp @ B[:, None]
    v = Mp @ U.T  # (c, n, d, J)
    return np.mean(np.sqrt(np.sum(v * v, axis=2)) ** p, axis=1) ** (1.0 / p)


def _leaf_rho_table(Wp: np.ndarray, U: np.ndarray, p: float) -> np.ndarray:
    """|W(x)^{1/p} u_j|^p for every leaf x, shape (n_leaves, J)."""
    v = Wp @ U.T
    return np.sqrt(np.sum(v * v, axis=1)) ** p


def _john_many(Mps: list[np.ndarray], p: float, n_dir: int, rounds: int) -> list[np.ndarray]:
    """Inscribed-ellipsoid reducing matrices for several cell groups, one MVEE batch per round.

    Each Mp has shape (c, n, d, d) holding W^{1/p} on the leaves of c cells.
    """
    if not Mps:
        return []
    d = Mps[0].shape[-1]
    U = ellipsoid.directions(d, n_dir)
    sizes = [m.shape[0] for m in Mps]
    cuts = np.cumsum(sizes)[:-1]
    # start from the L^2 ellipse and re-solve in the frame of the previous answer
    A = np.concatenate([ellipsoid.sym_sqrt(np.einsum("cnij,cnjk->cik", m, m) / m.shape[1]) for m in Mps])
    for _ in range(rounds):
        B = np.linalg.inv(A)
        Bs = np.split(B, cuts)
        rho = np.concatenate([_rho_batch(m, b, U, p) for m, b in zip(Mps, Bs)])
        A1, _ = ellipsoid.inscribed_from_rho(U, rho, tol=1e-2)
        # {|A1 v| <= 1} ⊆ B^{-1} K  =>  {|A1 B^{-1} x| <= 1} ⊆ K
        A2 = A1 @ A
        A = ellipsoid.sym_sqrt(np.swapaxes(A2, -1, -2) @ A2)
    return np.split(A, cuts)


def _john_cells(Mp: np.ndarray, p: float, n_dir: int, rounds: int) -> np.ndarray:
    return _john_many([Mp], p, n_dir, rounds)[0]


def _certify(Mp: np.ndarray, A: np.ndarray, p: float, U: np.ndarray, rho: np.ndarray | None = None):
    if rho is None:
        rho = _rho_batch(Mp, None, U, p)
    v = A @ U.T
    r = np.sqrt(np.sum(v * v, axis=1)) / rho
    d = A.shape[-1]
    return r.min(axis=1), r.max(axis=1) / np.sqrt(d)


_CACHE: dict = {}
_CACHE_LIMIT = 256


def clear_cache():
    _CACHE.clear()


def reducing_field(W: MatrixWeight, p: float, family="cells", n_dir: int | None = None, rounds: int = 3) -> ReducingField:
    """Reducing matrices of W (exponent p) over every cell of a family, certified."""
    key = (W.key, float(p), family, n_dir, rounds)
    if key in _CACHE:
        return _CACHE[key]
    fam = cell_family(W.grid, family)
    d = W.d
    n_dir = n_dir or (32 * d if d == 2 else 64 * d)
    Wp = W.flat_power(1.0 / p)
    Ucert = ellipsoid.directions(d, CERT_DIRECTIONS, fresh=True)
    table = _leaf_rho_table(Wp, Ucert, p)
    mats = np.empty((fam.size, d, d))
    methods = np.empty(fam.size, dtype=object)
    slack = np.empty(fam.size)
    lower = np.empty(fam.size)
    staged = []
    for g in fam.groups:
        Mp = Wp[g.leaves]
        c = Mp.shape[0]
        A = np.empty((c, d, d))
        meth = np.empty(c, dtype=object)
        if d == 1:
            A[:] = np.mean(Mp**p, axis=1) ** (1.0 / p)
            meth[:] = "scalar_power"
        elif p == 2.0:
            A[:] = ellipsoid.sym_sqrt(np.einsum("cnij,cnjk->cik", Mp, Mp) / Mp.shape[1])
            meth[:] = "closed_form_p2"
        else:
            const = np.all(Mp == Mp[:, :1], axis=(1, 2, 3))
            A[const] = Mp[const, 0]
            meth[const] = "constant"
            meth[~const] = "john_ellipsoid"
        staged.append((g, Mp, A, meth))
    todo = [(Mp[meth == "john_ellipsoid"]) for g, Mp, A, meth in staged]
    solved = _john_many([m for m in todo if m.shape[0]], p, n_dir, rounds)
    it = iter(solved)
    for (g, Mp, A, meth), m in zip(staged, todo):
        if m.shape[0]:
            A[meth == "john_ellipsoid"] = next(it)
        rho_cert = table[g.leaves].mean(axis=1) ** (1.0 / p)
        lo, hi = _certify(Mp, A, p, Ucert, rho_cert)
        john = meth == "john_ellipsoid"
        if john.any():
            # the inscribed construction gives lo >= 1 up to rounding; absorb that rounding
            fix = john & (lo < 1.0)
            if np.any(lo[fix] < 1.0 - 1e-6):
                raise ReducingError("inscribed ellipsoid escaped the unit ball of rho")
            A[fix] *= (1.0 / lo[fix])[:, None, None]
            hi[fix] /= lo[fix]
            lo[fix] = 1.0
            bad = john & (hi > CERT_SLACK)
            if bad.any():
                A[bad] = _john_cells(Mp[bad], p, 4 * n_dir, rounds + 2)
                lo2, hi2 = _certify(Mp[bad], A[bad], p, Ucert, rho_cert[bad])
                A[bad] *= np.maximum(1.0, 1.0 / lo2)[:, None, None]
                hi2 = hi2 / np.minimum(lo2, 1.0)
                lo[bad] = np.maximum(lo2, 1.0)
                hi[bad] = hi2
                if np.any(hi2 > CERT_SLACK):
                    worst = g.positions[bad][np.argmax(hi2)]
                    raise ReducingError(
                        f"certification failed at cell {np.unravel_index(worst, fam.shape)} slack {hi2.max():.4f}"
                    )
        mats[g.positions] = A
        methods[g.positions] = meth
        slack[g.positions] = np.maximum(1.0, hi)
        lower[g.positions] = lo
    out = ReducingField(
        mats.reshape(fam.shape + (d, d)),
        methods.reshape(fam.shape),
        slack.reshape(fam.shape),
        lower.reshape(fam.shape),
        float(p),
        str(family),
    )
    if len(_CACHE) >= _CACHE_LIMIT:
        _CACHE.pop(next(iter(_CACHE)))
    _CACHE[key] = out
    return out


def reducing_matrix(E, W: MatrixWeight, p: float) -> ReducingMatrix:
    """Reducing matrix of W over a single cell (Rect, interval, or leaf mask)."""
    idx = _cell_leaves(W.grid, E)
    Mp = W.flat_power(1.0 / p)[idx][None]
    d = W.d
    if d == 1:
        A, meth = np.mean(Mp**p, axis=1) ** (1.0 / p), "scalar_power"
    elif p == 2.0:
        A, meth = ellipsoid.sym_sqrt(np.einsum("cnij,cnjk->cik", Mp, Mp) / Mp.shape[1]), "closed_form_p2"
    elif np.all(Mp == Mp[:, :1]):
        A, meth = Mp[:, 0], "constant"
    else:
        A, meth = _john_cells(Mp, p, 32 * d if d == 2 else 64 * d, 3), "john_ellipsoid"
    U = ellipsoid.directions(d, CERT_DIRECTIONS, fresh=True)
    lo, hi = _certify(Mp, A, p, U)
    if meth == "john_ellipsoid":
        if lo[0] < 1.0 - 1e-6:
            raise ReducingError("inscribed ellipsoid escaped the unit ball of rho")
        if lo[0] < 1.0:
            A = A / lo[0]
            hi = hi / lo[0]
        if hi[0] > CERT_SLACK:
            A = _john_cells(Mp, p, 256 * d, 5)
            lo, hi = _certify(Mp, A, p, U)
            A = A / min(lo[0], 1.0)
            hi = hi / min(lo[0], 1.0)
            if hi[0] > CERT_SLACK:
                raise ReducingError(f"certification failed with slack {hi[0]:.4f}")
    return ReducingMatrix(A[0], meth, float(max(1.0, hi[0])))


# ---------------------------------------------------------------------------
# characteristics


def _pair_table(W: MatrixWeight, p: float, V: MatrixWeight | None = None) -> np.ndarray:
    """T[x, y] = |W(x)^{1/p} V(y)^{1/p'}| with V defaulting to W' (so V^{1/p'} = W^{-1/p})."""
    X = W.flat_power(1.0 / p)
    Y = W.flat_power(-1.0 / p) if V is None else V.flat_power(1.0 / conjugate_exponent(p))
    return op_norm(np.einsum("xij,yjk->xyik", X, Y))


def _integral_char_field(grid: DyadicGrid, T: np.ndarray, p: float, family="cells") -> np.ndarray:
    pp = conjugate_exponent(p)
    Tq = T**pp
    fam = cell_family(grid, family)
    out = np.empty(fam.size)
    for g in fam.groups:
        L = g.leaves  # (c, n)
        block = Tq[L[:, :, None], L[:, None, :]]  # (c, n, n)
        inner = block.mean(axis=2) ** (p / pp)
        out[g.positions] = inner.mean(axis=1)
    return out.reshape(fam.shape)


def averaging_constant(E, W: MatrixWeight, p: float) -> float:
    """C_E = avg_E (avg_E |W(x)^{1/p} W'(y)^{1/p'}|^{p'} dy)^{p/p'} dx."""
    idx = _cell_leaves(W.grid, E)
    X = W.flat_power(1.0 / p)[idx]
    Y = W.flat_power(-1.0 / p)[idx]
    T = op_norm(np.einsum("xij,yjk->xyik", X, Y))
    pp = conjugate_exponent(p)
    return float(np.mean(np.mean(T**pp, axis=1) ** (p / pp)))


@dataclass
class ApCharacteristic:
    value: float
    variant: str
    p: float
    argmax: tuple = ()
    field: np.ndarray | None = field(default=None, repr=False)


VARIANTS = ("one_param", "biparameter", "dyadic", "two_weight", "reducing_op_form")


def ap_characteristic(W: MatrixWeight, p: float, variant: str = "dyadic", V: MatrixWeight | None = None) -> ApCharacteristic:
    """Supremum over all grid cells of the integral form, or of |V_R W_R|^p in reducing form.

    For ``two_weight`` and for ``reducing_op_form`` with V given, V is the second
    weight and is reduced with exponent p'.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    axes = len(W.grid.shape)
    if variant == "one_param" and axes != 1:
        raise GridError("one_param characteristic needs a one-axis weight")
    if variant == "biparameter" and axes != 2:
        raise GridError("biparameter characteristic needs a two-axis weight")
    if variant == "two_weight" and V is None:
        raise ValueError("two_weight variant needs V")
    if variant == "reducing_op_form":
        pp = conjugate_exponent(p)
        Wr = reducing_field(W, p).matrices
        Vr = reducing_field(V if V is not None else W.conjugate(p), pp).matrices
        vals = op_norm(Vr @ Wr) ** p
    else:
        T = _pair_table(W, p, V if variant == "two_weight" else None)
        vals = _integral_char_field(W.grid, T, p)
    pos = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return ApCharacteristic(float(vals[pos]), variant, p, tuple(int(i) for i in pos), vals)


def slice_characteristics(W: MatrixWeight, p: float, axis: int = 1) -> np.ndarray:
    """[W(., x_other)]_{A_p} along `axis` for every leaf of the other axis."""
    n_other = W.grid.shape[2 - axis]
    return np.array([ap_characteristic(W.slice(axis, x), p, "one_param").value for x in range(n_other)])


# ---------------------------------------------------------------------------
# sliced and iterated reducing operators


def sliced_weight(W: MatrixWeight, axis: int, Q: tuple[int, int], p: float) -> MatrixWeight:
    """W_Q(x_other) = (reducing matrix of W restricted to Q x {x_other})^p, a one-axis weight.

    Q is an interval of the `axis` grid; the result lives on the other axis.
    """
    rf = reducing_field(W, p, ("slice", axis))
    t = flat_index(*Q)
    mats = rf.matrices[t]  # (N_other, d, d)
    spec = W.grid.spec
    other = 2 - axis
    g1 = DyadicGrid(GridSpec(spec.L, (spec.shift_bits[other],), 1))
    return MatrixWeight(matrix_power(mats, p), g1, p)


def iterated_reducing(W: MatrixWeight, p: float, I: tuple[int, int], J: tuple[int, int]) -> ReducingMatrix:
    """Reducing matrix over J of the sliced weight W_I(x2) = W_{x2, I}^p."""
    WI = sliced_weight(W, 1, I, p)
    return reducing_matrix(J, WI, p)


def iterated_ratio(W: MatrixWeight, p: float, I, J, n: int = 128, seed: int = 0) -> tuple[float, float]:
    """min and max over sampled e of |W_{I,J} e| / |W_{I x J} e|."""
    A = iterated_reducing(W, p, I, J).matrix
    B = reducing_field(W, p).matrices[flat_index(*I), flat_index(*J)]
    e = np.random.default_rng(seed).normal(size=(n, W.d))
    r = np.linalg.norm(e @ A.T, axis=1) / np.linalg.norm(e @ B.T, axis=1)
    return float(r.min()), float(r.max())


# ---------------------------------------------------------------------------
# scalar lemmas


@dataclass
class ReverseHolderReport:
    ok: bool
    admissible: bool
    characteristic: float
    delta: float
    worst_margin: float  # min over rectangles of 4 (w)^{1+delta} / (w^{1+delta})


def reverse_holder_check(w: np.ndarray | MatrixWeight, grid: DyadicGrid | None, p: float, delta: float) -> ReverseHolderReport:
    """Check (w^{1+delta})_R <= 4 (w)_R^{1+delta} on every rectangle."""
    if not isinstance(w, MatrixWeight):
        w = MatrixWeight(np.asarray(w, dtype=float), grid)
    if w.d != 1:
        raise WeightError("reverse Hoelder check takes a scalar weight")
    char = ap_characteristic(w, p).value
    admissible = 0 < delta < 1.0 / (16.0 * char)
    leaf = w.values.reshape(-1)
    m1 = family_mean(w.grid, "cells", leaf)
    m2 = family_mean(w.grid, "cells", leaf ** (1.0 + delta))
    margin = float(np.min(4.0 * m1 ** (1.0 + delta) / m2))
    return ReverseHolderReport(admissible and margin >= 1.0, admissible, char, delta, margin)


def sign_select(vectors: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Signs with sum |v_i| <= d |sum sigma_i v_i|: follow the heaviest coordinate."""
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    if v.shape[0] < 1:
        raise ValueError("need at least one vector")
    j = int(np.argmax(np.abs(v).sum(axis=0)))
    return np.where(v[:, j] >= 0, 1, -1)


@dataclass
class LemmaReport:
    inverse_vs_prime: float  # max |W^{-1} e| / |W' e| and |W'^{-1} e| / |W e|
    scalar_e_ratio: float  # max over e of [w_e]_E / C_E
    scalar_matrix_ratio: float  # max over A of [u]_E / C_E
    reducing_vs_average: float  # max |W_E e| / (C_E^{1/p} (|W^{1/p} e|)_E)
    averaging_constant: float
    witness: np.ndarray | None = None

    @property
    def inverse_ok(self) -> bool:
        return self.inverse_vs_prime <= 1.0 + 1e-9


def _scalar_ap(u: np.ndarray, p: float) -> float:
    return float(np.mean(u) * np.mean(u ** (-1.0 / (p - 1.0))) ** (p - 1.0))


def lemma_checks(W: MatrixWeight, p: float, E, n: int = 128, seed: int = 0) -> LemmaReport:
    pp = conjugate_exponent(p)
    RW = reducing_matrix(E, W, p).matrix
    RWp = reducing_matrix(E, W.conjugate(p), pp).matrix
    rng = np.random.default_rng(seed)
    e = rng.normal(size=(n, W.d))
    r1 = np.linalg.norm(e @ np.linalg.inv(RW).T, axis=1) / np.linalg.norm(e @ RWp.T, axis=1)
    r2 = np.linalg.norm(e @ np.linalg.inv(RWp).T, axis=1) / np.linalg.norm(e @ RW.T, axis=1)
    worst = float(max(r1.max(), r2.max()))
    witness = e[int(np.argmax(np.maximum(r1, r2)))]
    CE = averaging_constant(E, W, p)
    idx = _cell_leaves(W.grid, E)
    Wp = W.flat_power(1.0 / p)[idx]
    we = np.linalg.norm(np.einsum("xij,nj->nxi", Wp, e), axis=-1) ** p  # (n, |E|)
    se = max(_scalar_ap(row, p) for row in we) / CE
    mats = rng.normal(size=(n, W.d, W.d))
    u = op_norm(np.einsum("xij,njk->nxik", Wp, mats)) ** p
    sm = max(_scalar_ap(row, p) for row in u) / CE
    lhs = np.linalg.norm(e @ RW.T, axis=1)
    rhs = CE ** (1.0 / p) * np.mean(we ** (1.0 / p), axis=1)
    return LemmaReport(worst, float(se), float(sm), float(np.max(lhs / rhs)), CE, witness)


def hoelder_check(f: np.ndarray, g: np.ndarray, W: MatrixWeight, p: float) -> tuple[float, float]:
    """(|(f, g)|, ||f||_{Lp(W)} ||g||_{Lp'(W')}) on leaf-valued fields."""
    pp = conjugate_exponent(p)
    d = W.d
    F = f.reshape(-1, d)
    G = g.reshape(-1, d)
    lhs = abs(float(np.mean(np.sum(F * G, axis=1))))
    nf = np.mean(np.linalg.norm(np.einsum("xij,xj->xi", W.flat_power(1 / p), F), axis=1) ** p) ** (1 / p)
    ng = np.mean(np.linalg.norm(np.einsum("xij,xj->xi", W.flat_power(-1 / p), G), axis=1) ** pp) ** (1 / pp)
    return lhs, float(nf * ng)


def exact_scalar_characteristic(w: Sequence[Fraction], p: int = 2) -> Fraction:
    """Exact [w]_{A_2} of a one-axis scalar weight given on leaves (p = 2 only)."""
    if p != 2:
        raise ValueError("exact rational evaluation is implemented for p = 2")
    n = len(w)
    L = n.bit_length() - 1
    best = Fraction(0)
    for k in range(L + 1):
        size = n >> k
        for m in range(1 << k):
            blk = w[m * size : (m + 1) * size]
            a = sum(blk, Fraction(0)) / size
            b = sum((1 / x for x in blk), Fraction(0)) / size
            best = max(best, a * b)
    return best
