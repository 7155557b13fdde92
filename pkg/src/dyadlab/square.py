"""Square functions: plain, reducing-matrix weighted, pointwise weighted, shifted, mixed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DyadicGrid, GridError
from .haar import VectorField, coefficient_array
from .weights import MatrixWeight, reducing_field

FAMILIES = ("S", "S_W", "St_W")
MIXED_KINDS = ("SMt", "MtS", "SiM", "MSi", "SjSt", "StSj", "SM", "MS", "StMt", "MtSt")
_ALIASES = {
    "SM̃": "SMt",
    "M̃S": "MtS",
    "S^{i0}M": "SiM",
    "MS^{i0}": "MSi",
    "S^{j0}S̃": "SjSt",
    "S̃S^{j0}": "StSj",
    "S̃M̃": "StMt",
    "M̃S̃": "MtSt",
    "S̃_W": "St_W",
}


@dataclass(frozen=True)
class SquareFunctionSpec:
    family: str = "S"
    p: float = 2.0
    i: tuple = (0, 0)
    j: tuple = (0, 0)
    starred: bool = False
    mixed: str | None = None

    def __post_init__(self):
        fam = _ALIASES.get(self.family, self.family)
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise ValueError(f"unknown square function family {self.family!r}")
        if self.mixed is not None:
            object.__setattr__(self, "mixed", _ALIASES.get(self.mixed, self.mixed))
            if self.mixed not in MIXED_KINDS:
                raise ValueError(f"unknown mixed kind {self.mixed!r}")


def _ints(v, n):
    t = (int(v),) * n if np.isscalar(v) else tuple(int(a) for a in v)
    if len(t) != n:
        raise GridError(f"complexity {v} does not match {n} axes")
    return t


def _shift_data(grid: DyadicGrid, i, j):
    """Per axis: ancestor chains of each leaf, their i-descendants and the two cell weights."""
    out = []
    for ax, ia, ja in zip(grid.axes, i, j):
        top = max(ia, ja)
        if top >= ax.L:
            raise GridError("shift complexity exceeds grid depth")
        K = ax.L - top
        nR = (1 << K) - 1
        chain = ax.leaf_chain[:, :K]  # (N, K) cells R containing x with ch_i, ch_j below depth
        P = ax.descendant_map[ia][chain]  # (N, K, 2^i)
        gens = np.arange(K)
        pref = 2.0 ** (gens + ja)  # 2^j / |R|
        Ej = ax.averaging[ax.descendant_map[ja][:nR]].sum(axis=1)  # (nR, N): sum_{Q in ch_j(R)} 1_Q/|Q|
        dbl = Ej[chain, np.arange(ax.N)[:, None]]  # (N, K)
        out.append((chain, P, pref, dbl))
    return out


def shifted_square_function(
    f: VectorField,
    i=0,
    j=0,
    family: str = "S",
    W: MatrixWeight | None = None,
    p: float = 2.0,
    starred: bool = False,
    form: str = "prefactor",
) -> np.ndarray:
    """Shifted square function of complexity (i, j) on a one- or two-axis grid.

    S:    sum_P |f_P|                 (unweighted)
    S_W:  sum_P |W_R f_P|             (reducing matrices of the cell R)
    St_W: sum_P |W(x)^{1/p} f_P|      (pointwise weight)
    starred puts the sum over P inside the norm.  form selects the prefactor
    2^{|j|} 1_R/|R| or the explicit sum over Q in ch_j(R) of 1_Q/|Q|.
    """
    family = _ALIASES.get(family, family)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if family != "S" and W is None:
        raise ValueError("weighted square function needs a weight")
    g = f.grid
    n = len(g.shape)
    i, j = _ints(i, n), _ints(j, n)
    C = coefficient_array(f)
    d = C.shape[-1]
    data = _shift_data(g, i, j)
    if n == 1:
        (chain, P, pref, dbl), = data
        fP = C[P]  # (N, K, 2^i, d)
        if family == "S_W":
            M = reducing_field(W, p).matrices[chain]  # (N, K, d, d)
            fP = np.einsum("xkab,xkpb->xkpa", M, fP)
        elif family == "St_W":
            fP = np.einsum("xab,xkpb->xkpa", W.power(1.0 / p), fP)
        v = np.linalg.norm(fP.sum(axis=2), axis=-1) if starred else np.linalg.norm(fP, axis=-1).sum(axis=2)
        w = pref[None, :] if form == "prefactor" else dbl
        return np.sqrt(np.sum(v**2 * w, axis=1))
    (c1, P1, pr1, db1), (c2, P2, pr2, db2) = data
    N1, K1, n1 = P1.shape
    N2, K2, n2 = P2.shape
    fP = C[P1[:, None, :, None, :, None], P2[None, :, None, :, None, :]]  # (N1, N2, K1, K2, n1, n2, d)
    if family == "S_W":
        M = reducing_field(W, p).matrices[c1[:, None, :, None], c2[None, :, None, :]]  # (N1, N2, K1, K2, d, d)
        fP = np.einsum("xykhab,xykhpqb->xykhpqa", M, fP, optimize=True)
    elif family == "St_W":
        fP = np.einsum("xyab,xykhpqb->xykhpqa", W.power(1.0 / p), fP, optimize=True)
    if starred:
        v = np.linalg.norm(fP.sum(axis=(4, 5)), axis=-1)
    else:
        v = np.linalg.norm(fP, axis=-1).sum(axis=(4, 5))
    if form == "prefactor":
        w = (pr1[:, None] * pr2[None, :])[None, None]
    else:
        w = db1[:, None, :, None] * db2[None, :, None, :]
    return np.sqrt(np.sum(v**2 * w, axis=(2, 3)))


def square_function(f: VectorField, family: str = "S", W: MatrixWeight | None = None, p: float = 2.0) -> np.ndarray:
    """S, S_W or St_W (unshifted), evaluated directly from the coefficient table."""
    family = _ALIASES.get(family, family)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if family != "S" and W is None:
        raise ValueError("weighted square function needs a weight")
    g = f.grid
    C = coefficient_array(f)
    Es = [ax.averaging[: ax.N - 1] for ax in g.axes]
    if family == "St_W":
        Q = np.einsum("...a,...b->...ab", C, C)
        if len(g.shape) == 1:
            Qx = np.einsum("rx,rab->xab", Es[0], Q)
        else:
            Qx = np.einsum("rx,sy,rsab->xyab", Es[0], Es[1], Q, optimize=True)
        return np.sqrt(np.maximum(np.einsum("...ab,...ba->...", W.power(2.0 / p), Qx), 0.0))
    if family == "S_W":
        R = reducing_field(W, p).matrices
        R = R[: g.shape[0] - 1] if len(g.shape) == 1 else R[: g.shape[0] - 1, : g.shape[1] - 1]
        C = np.einsum("...ab,...b->...a", R, C)
    v2 = np.sum(C**2, axis=-1)
    if len(g.shape) == 1:
        return np.sqrt(Es[0].T @ v2)
    return np.sqrt(Es[0].T @ v2 @ Es[1])


def evaluate(spec: SquareFunctionSpec, f: VectorField, W: MatrixWeight | None = None, i: int = 0) -> np.ndarray:
    if spec.mixed is not None:
        return mixed_operator(spec.mixed, f, W, spec.p, i)
    n = len(f.grid.shape)
    if not spec.starred and _ints(spec.i, n) == (0,) * n and _ints(spec.j, n) == (0,) * n:
        return square_function(f, spec.family, W, spec.p)
    return shifted_square_function(f, spec.i, spec.j, spec.family, W, spec.p, spec.starred)


# ---------------------------------------------------------------------------
# mixed operators


def _mixed_pieces(f: VectorField):
    g = f.grid
    if len(g.shape) != 2:
        raise GridError("mixed operators need a two-axis grid")
    a1, a2 = g.axes
    F = f.values
    n = g.shape[0] * g.shape[1]
    return g, a1, a2, F, n


def _reduce(R, X):
    return np.linalg.norm(np.einsum("...ab,...b->...a", R, X), axis=-1)


def mixed_operator(kind: str, f: VectorField, W: MatrixWeight | None, p: float = 2.0, i: int = 0) -> np.ndarray:
    """Mixed square/maximal compositions on a two-axis grid.

    SMt, MtS      joint reducing matrices W_{IxJ}, sup over all J (resp. I)
    SiM, MSi      slice matrices W_{x2,R1} (resp. W_{x1,R2}); shift i in the square variable
    SjSt, StSj    slice matrices with an inner square function in the other variable
    SM, MS        SiM, MSi at i = 0
    StMt, MtSt    slice matrices taken in the maximal variable
    W None means the identity weight.
    """
    kind = _ALIASES.get(kind, kind)
    if kind not in MIXED_KINDS:
        raise ValueError(f"unknown mixed kind {kind!r}")
    if kind in ("SM", "MS"):
        return mixed_operator({"SM": "SiM", "MS": "MSi"}[kind], f, W, p, 0)
    g, a1, a2, F, n = _mixed_pieces(f)
    d = F.shape[-1]
    N1, N2 = g.shape
    eye = np.broadcast_to(np.eye(d), (1, 1, d, d))

    def joint():
        return eye if W is None else reducing_field(W, p).matrices

    def slices(axis):
        return eye if W is None else reducing_field(W, p, ("slice", axis)).matrices

    if kind in ("MtS", "MSi", "StSj", "MtSt"):
        # mirror: swap the roles of the axes and transpose the result
        ft = VectorField(np.swapaxes(F, 0, 1), _swap_grid(g))
        Wt = None if W is None else MatrixWeight(np.swapaxes(W.values, 0, 1), ft.grid, W.p)
        mirror = {"MtS": "SMt", "MSi": "SiM", "StSj": "SjSt", "MtSt": "StMt"}[kind]
        return mixed_operator(mirror, ft, Wt, p, i).T

    H1 = a1.haar
    A1 = a1.averaging
    A2 = a2.averaging
    E1 = A1[: N1 - 1]
    ch2 = a2.leaf_chain  # (N2, L2+1)
    if kind == "SMt":
        X = np.einsum("ax,by,xyd->abd", H1, A2, F, optimize=True) / n  # (f^1_I)_J
        val = _reduce(joint()[: N1 - 1] if W is not None else eye, X)  # (I, J)
        m = val[:, ch2].max(axis=-1)  # (I, x2)
        return np.sqrt(E1.T @ m**2)
    if kind == "StMt":
        X = np.einsum("ax,by,xyd->abd", H1, A2, F, optimize=True) / n  # (I, J, d)
        Rs = slices(2)  # (J, x1) when weighted
        if W is None:
            val = np.broadcast_to(np.linalg.norm(X, axis=-1)[:, None], (N1 - 1, N1) + X.shape[1:2])
        else:
            val = np.linalg.norm(np.einsum("jxab,ijb->ixja", Rs, X, optimize=True), axis=-1)  # (I, x1, J)
        m = val[:, :, ch2].max(axis=-1)  # (I, x1, x2)
        return np.sqrt(np.einsum("ix,ixy->xy", E1, m**2))
    Rs = slices(1)  # (R1, x2)
    ia = int(i)
    if ia >= a1.L:
        raise GridError("complexity exceeds grid depth")
    nR = (1 << (a1.L - ia)) - 1
    P1 = a1.descendant_map[ia][:nR]  # (nR, 2^i)
    R1s = Rs[:nR] if W is not None else np.broadcast_to(np.eye(d), (nR, N2, d, d))
    if kind == "SiM":
        X = np.einsum("ax,by,xyd->abd", H1, A2, F, optimize=True) / n  # (P1, J, d)
        XP = X[P1][:, :, ch2]  # (nR, 2^i, x2, L2+1, d)
        val = np.linalg.norm(np.einsum("ryab,rpykb->rpyka", R1s, XP, optimize=True), axis=-1)
        u = val.max(axis=3).sum(axis=1)  # (nR, x2)
        return np.sqrt(A1[:nR].T @ u**2)
    if kind == "SjSt":
        C = coefficient_array(f)  # (N1-1, N2-1, d)
        chc = ch2[:, : a2.L]  # cancellative R2 containing x2
        CP = C[P1][:, :, chc]  # (nR, 2^j, x2, L2, d)
        val = np.linalg.norm(np.einsum("ryab,rpykb->rpyka", R1s, CP, optimize=True), axis=-1) ** 2
        inner = np.sqrt(np.sum(val * 2.0 ** np.arange(a2.L), axis=-1))  # (nR, 2^j, x2)
        u = inner.sum(axis=1)
        return np.sqrt(A1[:nR].T @ u**2)
    raise AssertionError(kind)


def _swap_grid(g: DyadicGrid) -> DyadicGrid:
    from .grid import GridSpec

    s = g.spec
    return DyadicGrid(GridSpec(s.L, (s.shift_bits[1], s.shift_bits[0]), 2))


def joint_vs_slice_ratio(W: MatrixWeight, p: float, n: int = 64, seed: int = 0) -> tuple[float, float]:
    """min/max over cells (I, J) and x2 in J of |W_{IxJ} e| / |W_{x2,I} e| on random e."""
    rng = np.random.default_rng(seed)
    e = rng.normal(size=(n, W.d))
    J = reducing_field(W, p).matrices
    S = reducing_field(W, p, ("slice", 1)).matrices
    a2 = W.grid.axes[1]
    lo, hi = np.inf, 0.0
    for k in range(a2.L + 1):
        rows = a2.leaf_chain[:, k]
        num = np.linalg.norm(np.einsum("ixab,nb->ixna", J[:, rows], e), axis=-1)
        den = np.linalg.norm(np.einsum("ixab,nb->ixna", S, e), axis=-1)
        r = num / den
        lo, hi = min(lo, r.min()), max(hi, r.max())
    return float(lo), float(hi)
