"""Dyadic model operators: Haar multipliers, biparameter shifts, paraproducts, maximal functions."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grid import DyadicGrid, GridError
from .haar import VectorField, coefficient_array, from_coefficients
from .weights import MatrixWeight, conjugate_exponent, op_norm, reducing_field


def _two_axis(grid: DyadicGrid):
    if len(grid.shape) != 2:
        raise GridError("operator needs a two-axis grid")
    return grid.axes


# ---------------------------------------------------------------------------
# multipliers


@dataclass
class MultiplierSymbol:
    """sigma_R on the bicancellative rectangles, shape (N1-1, N2-1)."""

    values: np.ndarray
    grid: DyadicGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        want = tuple(n - 1 for n in self.grid.shape)
        if self.values.shape != want:
            raise GridError(f"symbol shape {self.values.shape}, expected {want}")

    @property
    def bound(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_json(self):
        return {"kind": "multiplier", "grid": self.grid.spec.to_json(), "sigma": self.values.tolist()}


def haar_multiplier(sigma: MultiplierSymbol, f: VectorField) -> VectorField:
    C = coefficient_array(f)
    return from_coefficients(sigma.values[..., None] * C, f.grid)


def random_multiplier(grid: DyadicGrid, rng: np.random.Generator, signs: bool = False) -> MultiplierSymbol:
    shape = tuple(n - 1 for n in grid.shape)
    vals = rng.choice([-1.0, 1.0], size=shape) if signs else rng.uniform(-1.0, 1.0, size=shape)
    return MultiplierSymbol(vals, grid)


# ---------------------------------------------------------------------------
# shifts


class ShiftBoundError(ValueError):
    pass


def shift_rows(L: int, i: int, j: int) -> int:
    """Number of intervals R on an axis with ch_i(R) and ch_j(R) inside the cancellative range."""
    return (1 << (L - max(i, j))) - 1


@dataclass
class ShiftKernel:
    """a_{PQR} for P in ch_i(R), Q in ch_j(R).

    coeffs shape (nR1, nR2, 2^i1, 2^i2, 2^j1, 2^j2); R runs over rectangles
    whose generations admit the requested descendants below depth L.
    """

    i: tuple[int, int]
    j: tuple[int, int]
    coeffs: np.ndarray
    grid: DyadicGrid

    def __post_init__(self):
        a1, a2 = _two_axis(self.grid)
        self.i = tuple(int(v) for v in self.i)
        self.j = tuple(int(v) for v in self.j)
        if min(self.i + self.j) < 0:
            raise ShiftBoundError("complexities must be nonnegative")
        if max(self.i[0], self.j[0]) >= a1.L or max(self.i[1], self.j[1]) >= a2.L:
            raise ShiftBoundError("complexity exceeds grid depth")
        shape = (
            shift_rows(a1.L, self.i[0], self.j[0]),
            shift_rows(a2.L, self.i[1], self.j[1]),
            1 << self.i[0],
            1 << self.i[1],
            1 << self.j[0],
            1 << self.j[1],
        )
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != shape:
            raise ShiftBoundError(f"kernel shape {self.coeffs.shape}, expected {shape}")
        if np.any(np.abs(self.coeffs) > self.bound * (1 + 1e-12)):
            raise ShiftBoundError("coefficient exceeds sqrt(|P||Q|)/|R|")

    @property
    def bound(self) -> float:
        return 2.0 ** (-sum(self.i + self.j) / 2.0)

    def adjoint(self) -> "ShiftKernel":
        return ShiftKernel(self.j, self.i, np.transpose(self.coeffs, (0, 1, 4, 5, 2, 3)), self.grid)

    def to_json(self):
        return {
            "kind": "shift",
            "grid": self.grid.spec.to_json(),
            "i": list(self.i),
            "j": list(self.j),
            "coeffs": self.coeffs.tolist(),
        }


def random_shift(grid: DyadicGrid, i, j, rng: np.random.Generator) -> ShiftKernel:
    a1, a2 = _two_axis(grid)
    shape = (
        shift_rows(a1.L, i[0], j[0]),
        shift_rows(a2.L, i[1], j[1]),
        1 << i[0],
        1 << i[1],
        1 << j[0],
        1 << j[1],
    )
    bound = 2.0 ** (-(sum(i) + sum(j)) / 2.0)
    return ShiftKernel(i, j, rng.uniform(-bound, bound, size=shape), grid)


def _desc(grid: DyadicGrid, axis: int, i: int, n: int) -> np.ndarray:
    return grid.axes[axis].descendant_map[i][:n]


def haar_shift(K: ShiftKernel, f: VectorField) -> VectorField:
    g = f.grid
    C = coefficient_array(f)
    n1, n2 = K.coeffs.shape[:2]
    P1, P2 = _desc(g, 0, K.i[0], n1), _desc(g, 1, K.i[1], n2)
    Q1, Q2 = _desc(g, 0, K.j[0], n1), _desc(g, 1, K.j[1], n2)
    fP = C[P1[:, None, :, None], P2[None, :, None, :]]  # (n1, n2, p1, p2, d)
    gQ = np.einsum("abpqrs,abpqd->abrsd", K.coeffs, fP)
    out = np.zeros_like(C)
    np.add.at(out, (Q1[:, None, :, None], Q2[None, :, None, :]), gQ)
    return from_coefficients(out, g)


# ---------------------------------------------------------------------------
# paraproducts


def _cell_rows(grid: DyadicGrid, axis: int):
    ax = grid.axes[axis]
    n = ax.N - 1
    return ax.haar, ax.averaging[:n]


@dataclass
class ParaproductSymbol:
    """Scalar symbol function a on leaves and the paraproduct kind."""

    a: np.ndarray
    kind: str
    grid: DyadicGrid

    def __post_init__(self):
        _two_axis(self.grid)
        self.a = np.asarray(self.a, dtype=float)
        if self.a.shape != self.grid.shape:
            raise GridError("symbol must live on the leaves")
        if self.kind not in ("11", "00", "01", "10"):
            raise ValueError(f"unknown paraproduct kind {self.kind!r}")

    @property
    def coefficients(self) -> np.ndarray:
        return coefficient_array(VectorField(self.a, self.grid))[..., 0]

    def bmo(self) -> tuple[float, bool]:
        return bmo_prod_norm(self.a, self.grid)

    def to_json(self):
        return {"kind": "paraproduct", "type": self.kind, "grid": self.grid.spec.to_json(), "a": self.a.tolist()}


def paraproduct(sym: ParaproductSymbol, f: VectorField) -> VectorField:
    g = f.grid
    H1, E1 = _cell_rows(g, 0)
    H2, E2 = _cell_rows(g, 1)
    aR = sym.coefficients[..., None]
    F = f.values
    n = g.shape[0] * g.shape[1]
    if sym.kind == "11":
        X = aR * np.einsum("ax,by,xyd->abd", E1, E2, F, optimize=True) / n
        out = np.einsum("ax,by,abd->xyd", H1, H2, X, optimize=True)
    elif sym.kind == "00":
        X = aR * np.einsum("ax,by,xyd->abd", H1, H2, F, optimize=True) / n
        out = np.einsum("ax,by,abd->xyd", E1, E2, X, optimize=True)
    elif sym.kind == "01":
        X = aR * np.einsum("ax,by,xyd->abd", H1, E2, F, optimize=True) / n
        out = np.einsum("ax,by,abd->xyd", E1, H2, X, optimize=True)
    else:
        X = aR * np.einsum("ax,by,xyd->abd", E1, H2, F, optimize=True) / n
        out = np.einsum("ax,by,abd->xyd", H1, E2, X, optimize=True)
    return VectorField(out, g)


def adjoint_kind(kind: str) -> str:
    return {"11": "00", "00": "11", "01": "10", "10": "01"}[kind]


def bmo_1d(coeffs: np.ndarray, ax) -> float:
    """Dyadic BMO norm of a one-axis function from its Haar coefficients (gen < L)."""
    c2 = np.asarray(coeffs, dtype=float) ** 2
    best = 0.0
    n = ax.N - 1
    for t in range(n):
        k = int(np.log2(t + 1))
        # the cells inside J are its descendants at every depth
        tot = 0.0
        for i in range(ax.L - k):
            tot += c2[ax.descendant_map[i][t]].sum()
        best = max(best, tot * 2.0**k)
    return float(np.sqrt(best))


@dataclass
class PartialSymbol:
    """One-parameter symbols a^{P Q R} indexed by R on the shifted axis.

    values shape (nR, 2^i, 2^j, N_other): leaf values on the other axis.
    star=False: shifted axis 1, symbols live on axis 2.  star=True swaps the roles.
    """

    i: int
    j: int
    values: np.ndarray
    grid: DyadicGrid
    star: bool = False
    check: bool = True

    def __post_init__(self):
        _two_axis(self.grid)
        sa = 1 if self.star else 0
        ax = self.grid.axes[sa]
        nR = shift_rows(ax.L, self.i, self.j)
        n_other = self.grid.shape[1 - sa]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (nR, 1 << self.i, 1 << self.j, n_other):
            raise GridError(f"partial symbol shape {self.values.shape}")
        if self.check:
            b = self.bmo_norms().max(initial=0.0)
            if b > 2.0 ** (-(self.i + self.j) / 2.0) * (1 + 1e-9):
                raise ValueError(f"symbol BMO norm {b:.4g} exceeds 2^(-(i+j)/2)")

    @property
    def other_axis(self):
        return self.grid.axes[0 if self.star else 1]

    @property
    def coefficients(self) -> np.ndarray:
        return np.einsum("...y,ay->...a", self.values, self.other_axis.haar) / self.other_axis.N

    def bmo_norms(self) -> np.ndarray:
        C = self.coefficients
        ax = self.other_axis
        return np.array([bmo_1d(c, ax) for c in C.reshape(-1, C.shape[-1])]).reshape(C.shape[:-1])


def random_partial_symbol(grid: DyadicGrid, i: int, j: int, rng, star: bool = False) -> PartialSymbol:
    sa = 1 if star else 0
    ax = grid.axes[sa]
    other = grid.axes[1 - sa]
    nR = shift_rows(ax.L, i, j)
    vals = rng.normal(size=(nR, 1 << i, 1 << j, other.N))
    vals -= vals.mean(axis=-1, keepdims=True)
    sym = PartialSymbol(i, j, vals, grid, star, check=False)
    norms = sym.bmo_norms()
    target = 2.0 ** (-(i + j) / 2.0)
    scale = np.where(norms > 0, target / np.maximum(norms, 1e-300), 0.0)
    return PartialSymbol(i, j, vals * scale[..., None], grid, star)


def partial_paraproduct(sym: PartialSymbol, f: VectorField) -> VectorField:
    g = f.grid
    C = coefficient_array(f)
    if not sym.star:
        ax, ot = g.axes
        aR = sym.coefficients  # (nR, 2^i, 2^j, N2-1)
        nR = aR.shape[0]
        P = ax.descendant_map[sym.i][:nR]
        Q = ax.descendant_map[sym.j][:nR]
        fP = C[P]  # (nR, 2^i, N2-1, d)
        X = np.einsum("rpqb,rpbd->rqbd", aR, fP)
        Y = np.zeros((ax.N - 1, ot.N - 1, C.shape[-1]))
        np.add.at(Y, Q, X)
        out = np.einsum("ax,by,abd->xyd", ax.haar, ot.averaging[: ot.N - 1], Y, optimize=True)
    else:
        ot, ax = g.axes
        aR = sym.coefficients  # (nR, 2^i, 2^j, N1-1)
        nR = aR.shape[0]
        P = ax.descendant_map[sym.i][:nR]
        Q = ax.descendant_map[sym.j][:nR]
        fP = np.transpose(C[:, P], (1, 2, 0, 3))  # (nR, 2^i, N1-1, d)
        X = np.einsum("rpqa,rpad->rqad", aR, fP)
        Y = np.zeros((ax.N - 1, ot.N - 1, C.shape[-1]))
        np.add.at(Y, Q, X)
        out = np.einsum("by,ax,bad->xyd", ax.haar, ot.averaging[: ot.N - 1], Y, optimize=True)
    return VectorField(out, g)


# ---------------------------------------------------------------------------
# norms


def lp_weighted_norm(f: VectorField, W: MatrixWeight | None, p: float) -> float:
    d = f.d
    F = f.values.reshape(-1, d)
    if W is not None:
        F = np.einsum("xij,xj->xi", W.flat_power(1.0 / p), F)
    return float(np.mean(np.linalg.norm(F, axis=1) ** p) ** (1.0 / p))


def lp_norm(values: np.ndarray, p: float) -> float:
    """Lp norm of a nonnegative scalar field on leaves (normalized measure)."""
    return float(np.mean(np.abs(values) ** p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# maximal functions


def _containing(grid: DyadicGrid) -> np.ndarray:
    """Leaf-by-cell incidence 1_R(x) for every cell of the grid, shape grid.shape + cells shape."""
    if len(grid.shape) == 1:
        return grid.axes[0].membership.T.astype(bool)
    m1 = grid.axes[0].membership.T.astype(bool)
    m2 = grid.axes[1].membership.T.astype(bool)
    return m1[:, None, :, None] & m2[None, :, None, :]


def _cell_means(grid: DyadicGrid, vals: np.ndarray) -> np.ndarray:
    """Average over each cell of a leaf field vals (grid.shape + tail)."""
    if len(grid.shape) == 1:
        A = grid.axes[0].averaging / grid.shape[0]
        return np.tensordot(A, vals, axes=(1, 0))
    A1 = grid.axes[0].averaging / grid.shape[0]
    A2 = grid.axes[1].averaging / grid.shape[1]
    return np.einsum("ax,by,xy...->ab...", A1, A2, vals, optimize=True)


MAXIMAL_VARIANTS = ("christ_goldberg", "modified", "unweighted")


def maximal_function(variant: str, W: MatrixWeight | None, p: float, f: VectorField) -> np.ndarray:
    """Dyadic (strong, on two axes) maximal functions; exact sup over all cells containing x.

    christ_goldberg: sup_{R ∋ x} avg_R |W(x)^{1/p} f|
    modified:        sup_{R ∋ x} avg_R |W_R f|, W_R the reducing matrix
    unweighted:      sup_{R ∋ x} avg_R |f|
    """
    g = f.grid
    d = f.d
    inc = _containing(g)  # grid.shape + cells
    if variant == "unweighted" or W is None:
        m = _cell_means(g, np.linalg.norm(f.values, axis=-1))
        return np.max(np.where(inc, m, -np.inf), axis=tuple(range(len(g.shape), inc.ndim)))
    if variant == "modified":
        R = reducing_field(W, p).matrices  # cells + (d, d)
        # avg_R |W_R f(y)| over y in R
        v = np.einsum("...ij,xj->...xi", R.reshape(-1, d, d), f.values.reshape(-1, d))
        nrm = np.linalg.norm(v, axis=-1).reshape(R.shape[:-2] + g.shape)
        cells = R.shape[:-2]
        flat = nrm.reshape(int(np.prod(cells)), -1)
        member = inc.reshape(-1, int(np.prod(cells))).T  # cells x leaves
        m = (np.sum(flat * member, axis=1) / member.sum(axis=1)).reshape(cells)
        return np.max(np.where(inc, m, -np.inf), axis=tuple(range(len(g.shape), inc.ndim)))
    if variant == "christ_goldberg":
        Wp = W.flat_power(1.0 / p)
        G = np.linalg.norm(np.einsum("xij,yj->xyi", Wp, f.values.reshape(-1, d)), axis=-1)  # (x, y)
        G = G.reshape((-1,) + g.shape)
        m = np.stack([_cell_means(g, row) for row in G])  # (x, cells)
        m = m.reshape(g.shape + m.shape[1:])
        return np.max(np.where(inc, m, -np.inf), axis=tuple(range(len(g.shape), inc.ndim)))
    raise ValueError(f"unknown maximal variant {variant!r}")


def vector_maximal_ratio(variant: str, W: MatrixWeight | None, p: float, fs: list[VectorField]) -> float:
    """||(sum_k (M f_k)^2)^{1/2}||_p / ||(sum_k |W^{1/p} f_k|^2)^{1/2}||_p."""
    num = np.sqrt(sum(maximal_function(variant, W, p, f) ** 2 for f in fs))
    if W is None:
        den = np.sqrt(sum(np.sum(f.values**2, axis=-1) for f in fs))
    else:
        Wp = W.power(1.0 / p)
        den = np.sqrt(sum(np.sum(np.einsum("...ij,...j->...i", Wp, f.values) ** 2, axis=-1) for f in fs))
    return lp_norm(num, p) / lp_norm(den, p)


# ---------------------------------------------------------------------------
# product BMO


def _pack(mask: np.ndarray) -> np.ndarray:
    bits = np.packbits(mask.ravel().astype(np.uint8))
    pad = (-bits.size) % 8
    return np.frombuffer(np.concatenate([bits, np.zeros(pad, np.uint8)]).tobytes(), dtype=np.uint64)


def bmo_prod_norm(a: np.ndarray, grid: DyadicGrid, exact_limit: int = 20, samples: int = 20000, seed: int = 0):
    """Dyadic product BMO norm sup_Omega ((1/|Omega|) sum_{R ⊆ Omega} |a_R|^2)^{1/2}.

    Only unions of rectangles carrying nonzero coefficients matter: shrinking
    Omega to the union of the support rectangles it contains keeps the sum and
    reduces |Omega|.  Those unions are enumerated exactly when there are at most
    `exact_limit` of them; otherwise random unions give a lower bound.
    Returns (value, exact).
    """
    a = np.asarray(a, dtype=float)
    C = coefficient_array(VectorField(a, grid))[..., 0]
    # synthesis round-off leaves ~1e-17 residues on empty rectangles
    support = np.argwhere(np.abs(C) > 1e-13 * max(np.abs(C).max(initial=0.0), 1e-300))
    k = len(support)
    if k == 0:
        return 0.0, True
    a1, a2 = grid.axes
    masks = []
    for t1, t2 in support:
        m = np.zeros(grid.shape, dtype=bool)
        m[np.ix_(a1.membership[t1].astype(bool), a2.membership[t2].astype(bool))] = True
        masks.append(_pack(m))
    R = np.array(masks)  # (k, words)
    w2 = C[support[:, 0], support[:, 1]] ** 2
    n_leaves = grid.shape[0] * grid.shape[1]
    exact = k <= exact_limit
    if exact:
        U = np.zeros((1, R.shape[1]), dtype=np.uint64)
        for r in R:
            U = np.concatenate([U, U | r])
        U = U[1:]
    else:
        rng = np.random.default_rng(seed)
        pick = rng.random((samples, k)) < rng.random((samples, 1))
        pick[np.arange(samples), np.arange(samples) % k] = True
        U = np.zeros((samples, R.shape[1]), dtype=np.uint64)
        for i in range(k):
            U[pick[:, i]] |= R[i]
    measure = np.bitwise_count(U).sum(axis=1).astype(float)
    num = np.zeros(U.shape[0])
    for i in range(k):
        inside = np.all((U & R[i]) == R[i], axis=1)
        num += inside * w2[i]
    val = np.max(num / (measure / n_leaves))
    return float(np.sqrt(val)), exact


def symbol_from_coefficients(C: np.ndarray, grid: DyadicGrid) -> np.ndarray:
    return from_coefficients(np.asarray(C, dtype=float)[..., None], grid).values[..., 0]


def random_bmo_symbol(grid: DyadicGrid, rng, n_terms: int = 8, target: float = 1.0) -> np.ndarray:
    """Scalar symbol with few coefficients, rescaled to product BMO norm `target`."""
    shape = tuple(n - 1 for n in grid.shape)
    C = np.zeros(shape)
    idx = rng.choice(shape[0] * shape[1], size=min(n_terms, shape[0] * shape[1]), replace=False)
    t1, t2 = np.unravel_index(idx, shape)
    size = np.array([2.0 ** -(np.floor(np.log2(a + 1)) + np.floor(np.log2(b + 1))) for a, b in zip(t1, t2)])
    C[t1, t2] = rng.normal(size=idx.size) * np.sqrt(size)
    a = symbol_from_coefficients(C, grid)
    norm, _ = bmo_prod_norm(a, grid)
    return a * (target / norm)


# ---------------------------------------------------------------------------
# assembled matrices


def assemble(apply, grid: DyadicGrid, d: int, cap: int = 1 << 16) -> np.ndarray:
    """Matrix of a linear field map on the leaf-value space (n_leaves * d)."""
    n = int(np.prod(grid.shape)) * d
    if n > cap:
        raise ValueError(f"basis size {n} exceeds cap {cap}")
    cols = []
    for c in range(n):
        e = np.zeros(n)
        e[c] = 1.0
        cols.append(apply(VectorField(e.reshape(grid.shape + (d,)), grid)).values.ravel())
    return np.array(cols).T


def assemble_scalar(apply, grid: DyadicGrid, d: int) -> np.ndarray:
    """Same matrix as `assemble` for maps acting componentwise: all leaf indicators in one field, then kron with I_d."""
    n = int(np.prod(grid.shape))
    basis = np.eye(n).reshape(grid.shape + (n,))
    M = apply(VectorField(basis, grid)).values.reshape(n, n)
    return np.kron(M, np.eye(d))


def weighted_matrix(T: np.ndarray, W_in: MatrixWeight | None, W_out: MatrixWeight | None, p: float) -> np.ndarray:
    """W_out^{1/p} T W_in^{-1/p} as a dense matrix (block diagonal weights)."""
    from scipy.linalg import block_diag

    if W_out is not None:
        T = block_diag(*W_out.flat_power(1.0 / p)) @ T
    if W_in is not None:
        T = T @ block_diag(*W_in.flat_power(-1.0 / p))
    return T


def serialize_operator(op) -> str:
    return json.dumps(op.to_json())


def op_from_json(obj):
    from .grid import GridSpec

    if isinstance(obj, str):
        obj = json.loads(obj)
    grid = DyadicGrid(GridSpec.from_json(obj["grid"]))
    kind = obj["kind"]
    if kind == "multiplier":
        return MultiplierSymbol(np.array(obj["sigma"]), grid)
    if kind == "shift":
        return ShiftKernel(tuple(obj["i"]), tuple(obj["j"]), np.array(obj["coeffs"]), grid)
    if kind == "paraproduct":
        return ParaproductSymbol(np.array(obj["a"]), obj["type"], grid)
    raise ValueError(f"unknown operator kind {kind!r}")


def apply_operator(op, f: VectorField) -> VectorField:
    if isinstance(op, MultiplierSymbol):
        return haar_multiplier(op, f)
    if isinstance(op, ShiftKernel):
        return haar_shift(op, f)
    if isinstance(op, ParaproductSymbol):
        return paraproduct(op, f)
    if isinstance(op, PartialSymbol):
        return partial_paraproduct(op, f)
    raise TypeError(f"cannot apply {type(op).__name__}")


__all__ = [
    "MultiplierSymbol",
    "ShiftKernel",
    "ShiftBoundError",
    "ParaproductSymbol",
    "PartialSymbol",
    "MAXIMAL_VARIANTS",
    "haar_multiplier",
    "random_multiplier",
    "haar_shift",
    "random_shift",
    "shift_rows",
    "paraproduct",
    "adjoint_kind",
    "partial_paraproduct",
    "random_partial_symbol",
    "maximal_function",
    "vector_maximal_ratio",
    "lp_weighted_norm",
    "lp_norm",
    "bmo_prod_norm",
    "bmo_1d",
    "random_bmo_symbol",
    "symbol_from_coefficients",
    "assemble",
    "assemble_scalar",
    "weighted_matrix",
    "serialize_operator",
    "op_from_json",
    "apply_operator",
    "conjugate_exponent",
    "op_norm",
]
