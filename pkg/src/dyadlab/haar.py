"""Haar analysis and synthesis on one- and two-axis dyadic grids.

Every axis carries the orthonormal basis {1} u {h_I : gen(I) < L} of functions
constant on leaves.  The biparameter spectrum is the full tensor array, whose
block ``[1:, 1:]`` holds the bicancellative coefficients f_R and whose zeroth
row and column hold the non-cancellative residue.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grid import DyadicGrid, GridError, GridSpec, Rect, flat_index


@dataclass
class VectorField:
    """R^d-valued function constant on leaf cells; values have shape grid.shape + (d,)."""

    values: np.ndarray
    grid: DyadicGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == len(self.grid.shape):
            self.values = self.values[..., None]
        if self.values.shape[:-1] != self.grid.shape:
            raise GridError(f"field shape {self.values.shape} does not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    def __add__(self, other):
        _same_grid(self.grid, other.grid)
        return VectorField(self.values + other.values, self.grid)

    def __sub__(self, other):
        _same_grid(self.grid, other.grid)
        return VectorField(self.values - other.values, self.grid)

    def __mul__(self, c: float):
        return VectorField(self.values * c, self.grid)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {"grid": self.grid.spec.to_json(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj) -> "VectorField":
        if isinstance(obj, str):
            obj = json.loads(obj)
        grid = DyadicGrid(GridSpec.from_json(obj["grid"]))
        return cls(np.array(obj["values"], dtype=float), grid)


def _same_grid(a: DyadicGrid, b: DyadicGrid):
    if a != b:
        raise GridError("grid mismatch")


@dataclass
class HaarSpectrum:
    """Full tensor spectrum; ``full[t+1, s+1]`` is the coefficient of h_{(t, s)}."""

    full: np.ndarray
    grid: DyadicGrid

    @property
    def coefficients(self) -> np.ndarray:
        """Cancellative coefficients, indexed by flat cell index on each axis."""
        if len(self.grid.shape) == 1:
            return self.full[1:]
        return self.full[1:, 1:]

    @property
    def residue(self) -> np.ndarray:
        """Non-cancellative remainder: the spectrum with the cancellative block zeroed."""
        out = self.full.copy()
        if len(self.grid.shape) == 1:
            out[1:] = 0.0
        else:
            out[1:, 1:] = 0.0
        return out

    @property
    def mean(self) -> np.ndarray:
        return self.full[(0,) * len(self.grid.shape)]

    def energy(self) -> float:
        return float(np.sum(self.full**2))

    def coefficient(self, cell, eps=None) -> np.ndarray:
        """Coefficient f_R^eps; signature bits default to the cancellative ones."""
        if isinstance(cell, Rect):
            e1, e2 = eps if eps is not None else (0, 0)
            if (e1, e2) != (0, 0):
                return project_coefficient(self, cell, (e1, e2))
            t1, t2 = cell.flat
            return self.full[t1 + 1, t2 + 1]
        k, m = cell
        return self.full[flat_index(k, m) + 1]

    def __add__(self, other):
        _same_grid(self.grid, other.grid)
        return HaarSpectrum(self.full + other.full, self.grid)

    def to_json(self) -> dict:
        trip = []
        if len(self.grid.shape) == 2:
            nz = np.argwhere(np.any(self.coefficients != 0, axis=-1))
            for t1, t2 in nz:
                trip.append([[int(t1), int(t2)], [0, 0], self.coefficients[t1, t2].tolist()])
        return {"grid": self.grid.spec.to_json(), "full": self.full.tolist(), "coefficients": trip}


def analyze(f: VectorField, grid: DyadicGrid | None = None) -> HaarSpectrum:
    if grid is not None:
        _same_grid(grid, f.grid)
    g = f.grid
    if len(g.shape) == 1:
        B = g.axes[0].basis
        full = B @ f.values / g.shape[0]
    else:
        B1, B2 = g.axes[0].basis, g.axes[1].basis
        full = np.einsum("ax,by,xyd->abd", B1, B2, f.values, optimize=True) / (g.shape[0] * g.shape[1])
    return HaarSpectrum(full, g)


def synthesize(s: HaarSpectrum) -> VectorField:
    g = s.grid
    if len(g.shape) == 1:
        vals = g.axes[0].basis.T @ s.full
    else:
        B1, B2 = g.axes[0].basis, g.axes[1].basis
        vals = np.einsum("ax,by,abd->xyd", B1, B2, s.full, optimize=True)
    return VectorField(vals, g)


def coefficient_array(f: VectorField) -> np.ndarray:
    """Bicancellative coefficients only, shape (N1-1, N2-1, d) (or (N-1, d))."""
    g = f.grid
    if len(g.shape) == 1:
        return g.axes[0].haar @ f.values / g.shape[0]
    H1, H2 = g.axes[0].haar, g.axes[1].haar
    return np.einsum("ax,by,xyd->abd", H1, H2, f.values, optimize=True) / (g.shape[0] * g.shape[1])


def from_coefficients(C: np.ndarray, grid: DyadicGrid) -> VectorField:
    """Synthesize from bicancellative coefficients (residue zero)."""
    if len(grid.shape) == 1:
        return VectorField(grid.axes[0].haar.T @ C, grid)
    H1, H2 = grid.axes[0].haar, grid.axes[1].haar
    return VectorField(np.einsum("ax,by,abd->xyd", H1, H2, C, optimize=True), grid)


def bicancellative_part(f: VectorField) -> VectorField:
    return from_coefficients(coefficient_array(f), f.grid)


def _axis_function(grid: DyadicGrid, axis: int, cell: tuple[int, int], eps: int) -> np.ndarray:
    ax = grid.axes[axis]
    k, m = cell
    if eps == 0:
        if k >= ax.L:
            raise GridError("no cancellative Haar function on leaf cells")
        return ax.haar[flat_index(k, m)]
    return ax.membership[flat_index(k, m)] * 2.0 ** (k / 2)


def haar_function(grid: DyadicGrid, cell, eps=None) -> np.ndarray:
    """Leaf values of h_R^eps (or h_I^eps on a one-axis grid)."""
    if isinstance(cell, Rect):
        e1, e2 = eps if eps is not None else (0, 0)
        return np.outer(_axis_function(grid, 0, cell.first, e1), _axis_function(grid, 1, cell.second, e2))
    return _axis_function(grid, 0, cell, 0 if eps is None else eps)


def partial_coefficient(f: VectorField, axis: int, I: tuple[int, int], eps: int = 0) -> np.ndarray:
    """f^axis_I: pairing with h_I^eps in the chosen variable; a function of the other one.

    Returns shape (N_other, d).
    """
    if axis not in (1, 2):
        raise GridError("axis must be 1 or 2")
    g = f.grid
    if len(g.shape) != 2:
        raise GridError("partial coefficients need a two-axis grid")
    h = _axis_function(g, axis - 1, I, eps)
    N = g.shape[axis - 1]
    if axis == 1:
        return np.einsum("x,xyd->yd", h, f.values) / N
    return np.einsum("y,xyd->xd", h, f.values) / N


def project_coefficient(s_or_f, R: Rect, eps=(0, 0)) -> np.ndarray:
    f = s_or_f if isinstance(s_or_f, VectorField) else synthesize(s_or_f)
    h = haar_function(f.grid, R, eps)
    return np.einsum("xy,xyd->d", h, f.values) / f.values[..., 0].size


def project(f: VectorField, R, eps=None) -> VectorField:
    """Rank-one projection Q_R^eps f = f_R^eps h_R^eps (1 or 2 axes)."""
    g = f.grid
    h = haar_function(g, R, eps)
    n = h.size
    if h.ndim == 1:
        c = h @ f.values / n
        return VectorField(np.outer(h, c), g)
    c = np.einsum("xy,xyd->d", h, f.values) / n
    return VectorField(h[..., None] * c, g)


def project_axis(f: VectorField, axis: int, I: tuple[int, int], eps: int = 0) -> VectorField:
    """One-variable projection Q_I^{eps,axis} acting in the chosen variable."""
    g = f.grid
    h = _axis_function(g, axis - 1, I, eps)
    coef = partial_coefficient(f, axis, I, eps)
    if axis == 1:
        return VectorField(h[:, None, None] * coef[None], g)
    return VectorField(coef[:, None] * h[None, :, None], g)


def l2_norm(f: VectorField) -> float:
    return float(np.sqrt(np.mean(np.sum(f.values**2, axis=-1))))


def pairing(f: VectorField, g: VectorField) -> float:
    """Unweighted (f, g) with normalized torus measure."""
    _same_grid(f.grid, g.grid)
    return float(np.mean(np.sum(f.values * g.values, axis=-1)))
