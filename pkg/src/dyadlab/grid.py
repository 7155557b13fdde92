"""Finite shifted dyadic grids on the torus, product rectangles and sparse families.

Intervals are addressed by ``(k, m)``: generation ``k`` in ``0..L`` and index
``m`` in ``[0, 2**k)``.  The realized set of ``(k, m)`` is the half-open arc
``[(m 2^-k + omega^k) mod 1, + 2^-k)`` where ``omega^k = sum_{j>k} omega_j 2^-j``.
All geometry is carried out on leaf indices, so every measure is an integer
count of leaf cells and comparisons are exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class GridError(ValueError):
    pass


def flat_index(k: int, m: int) -> int:
    """Generation-major position of interval (k, m)."""
    return (1 << k) - 1 + m


def unflat_index(t: int) -> tuple[int, int]:
    k = (t + 1).bit_length() - 1
    return k, t - ((1 << k) - 1)


@dataclass(frozen=True)
class GridSpec:
    L: int
    shift_bits: tuple[tuple[int, ...], ...]
    axes: int = 2

    def __post_init__(self):
        if self.L < 1:
            raise GridError(f"depth must be >= 1, got {self.L}")
        if self.axes not in (1, 2):
            raise GridError("axes must be 1 or 2")
        if len(self.shift_bits) != self.axes:
            raise GridError("need one shift-bit sequence per axis")
        for bits in self.shift_bits:
            if len(bits) != self.L or any(b not in (0, 1) for b in bits):
                raise GridError(f"shift bits must be {self.L} values in {{0,1}}")

    @classmethod
    def standard(cls, L: int, axes: int = 2) -> "GridSpec":
        return cls(L, tuple((0,) * L for _ in range(axes)), axes)

    def to_json(self) -> dict:
        out = {"L": self.L, "axes": self.axes}
        for a, bits in enumerate(self.shift_bits, start=1):
            out[f"shift_bits_axis{a}"] = list(bits)
        return out

    @classmethod
    def from_json(cls, obj: dict | str) -> "GridSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        axes = int(obj.get("axes", 2))
        L = int(obj["L"])
        bits = tuple(
            tuple(int(b) for b in obj.get(f"shift_bits_axis{a}", [0] * L))
            for a in range(1, axes + 1)
        )
        return cls(L, bits, axes)


def random_grid(seed: int, L: int, axes: int = 2) -> GridSpec:
    """Shift bits drawn i.i.d. fair from a seeded generator."""
    if L < 1:
        raise GridError(f"depth must be >= 1, got {L}")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(axes, L))
    return GridSpec(L, tuple(tuple(int(b) for b in row) for row in bits), axes)


class AxisGrid:
    """One axis of a shifted dyadic grid with generations 0..L."""

    def __init__(self, L: int, bits: Sequence[int] = ()):
        if L < 1:
            raise GridError(f"depth must be >= 1, got {L}")
        bits = tuple(bits) if bits else (0,) * L
        if len(bits) != L:
            raise GridError("shift bit count must equal depth")
        self.L = L
        self.bits = bits
        self.N = 1 << L
        # omega^k in units of leaf cells
        self.offsets = tuple(
            sum(bits[j - 1] << (L - j) for j in range(k + 1, L + 1)) for k in range(L + 1)
        )

    def __eq__(self, other):
        return isinstance(other, AxisGrid) and (self.L, self.bits) == (other.L, other.bits)

    def __hash__(self):
        return hash((self.L, self.bits))

    @property
    def n_cells(self) -> int:
        return 2 * self.N - 1

    @property
    def n_haar(self) -> int:
        return self.N - 1

    def omega(self, k: int) -> Fraction:
        return Fraction(self.offsets[k], self.N)

    def _check(self, k: int, m: int):
        if not (0 <= k <= self.L):
            raise GridError(f"generation {k} outside 0..{self.L}")
        if not (0 <= m < (1 << k)):
            raise GridError(f"index {m} outside generation {k}")

    def start(self, k: int, m: int) -> int:
        self._check(k, m)
        return (m * (1 << (self.L - k)) + self.offsets[k]) % self.N

    def leaves(self, k: int, m: int) -> np.ndarray:
        s = self.start(k, m)
        return (s + np.arange(1 << (self.L - k))) % self.N

    def endpoints(self, k: int, m: int) -> tuple[Fraction, Fraction]:
        s = Fraction(self.start(k, m), self.N)
        return s, s + Fraction(1, 1 << k)

    def children(self, k: int, m: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """(left, right) halves: I_- then I_+ in cyclic order from the start."""
        self._check(k, m)
        if k >= self.L:
            raise GridError("leaf cells have no children")
        b = self.bits[k]
        n = 1 << (k + 1)
        return (k + 1, (2 * m + b) % n), (k + 1, (2 * m + b + 1) % n)

    def parent(self, k: int, m: int) -> tuple[int, int]:
        self._check(k, m)
        if k == 0:
            raise GridError("generation 0 has no parent")
        b = self.bits[k - 1]
        return k - 1, ((m - b) % (1 << k)) // 2

    def children_at_depth(self, k: int, m: int, i: int) -> list[tuple[int, int]]:
        if i < 0:
            raise GridError("depth must be nonnegative")
        if k + i > self.L:
            raise GridError(f"generation {k}+{i} exceeds depth {self.L}")
        cur = [(k, m)]
        for _ in range(i):
            cur = [c for q in cur for c in self.children(*q)]
        return cur

    def ancestor_at_depth(self, k: int, m: int, i: int) -> tuple[int, int]:
        if i < 0:
            raise GridError("depth must be nonnegative")
        if i > k:
            raise GridError(f"ancestor {i} generations up is coarser than generation 0")
        cur = (k, m)
        for _ in range(i):
            cur = self.parent(*cur)
        return cur

    def leaf_cell(self, x: int, k: int) -> tuple[int, int]:
        """The generation-k interval containing leaf x."""
        rel = (x - self.offsets[k]) % self.N
        return k, rel >> (self.L - k)

    @cached_property
    def membership(self) -> np.ndarray:
        """(2N-1, N) 0/1 matrix; row flat_index(k, m) marks the leaves of (k, m)."""
        out = np.zeros((self.n_cells, self.N))
        for k in range(self.L + 1):
            for m in range(1 << k):
                out[flat_index(k, m), self.leaves(k, m)] = 1.0
        return out

    @cached_property
    def sizes(self) -> np.ndarray:
        """|I| for each flat cell."""
        return np.array([2.0 ** -unflat_index(t)[0] for t in range(self.n_cells)])

    @cached_property
    def counts(self) -> np.ndarray:
        return np.array([1 << (self.L - unflat_index(t)[0]) for t in range(self.n_cells)])

    @cached_property
    def averaging(self) -> np.ndarray:
        """Rows 1_I / |I| evaluated on leaves."""
        return self.membership / self.sizes[:, None]

    @cached_property
    def haar(self) -> np.ndarray:
        """(N-1, N) values of h_I = (1_{I+} - 1_{I-}) / sqrt|I| for generations < L."""
        out = np.zeros((self.n_haar, self.N))
        for k in range(self.L):
            for m in range(1 << k):
                lo, hi = self.children(k, m)
                t = flat_index(k, m)
                out[t, self.leaves(*lo)] = -1.0
                out[t, self.leaves(*hi)] = 1.0
                out[t] *= 2.0 ** (k / 2)
        return out

    @cached_property
    def basis(self) -> np.ndarray:
        """Orthonormal basis (constant first, then Haar) under (1/N) sum."""
        return np.vstack([np.ones((1, self.N)), self.haar])

    @cached_property
    def gen_leaves(self) -> list[np.ndarray]:
        """k -> (2**k, 2**(L-k)) leaf indices of the generation-k intervals."""
        return [np.array([self.leaves(k, m) for m in range(1 << k)]) for k in range(self.L + 1)]

    @cached_property
    def leaf_chain(self) -> np.ndarray:
        """(N, L+1) flat indices of the cells containing each leaf, by generation."""
        out = np.zeros((self.N, self.L + 1), dtype=int)
        for x in range(self.N):
            for k in range(self.L + 1):
                out[x, k] = flat_index(*self.leaf_cell(x, k))
        return out

    @cached_property
    def descendant_map(self) -> dict[int, np.ndarray]:
        """i -> (cells with generation + i <= L, 2**i) flat indices of ch_i."""
        out = {}
        for i in range(self.L + 1):
            rows = []
            for k in range(self.L + 1 - i):
                for m in range(1 << k):
                    rows.append([flat_index(*c) for c in self.children_at_depth(k, m, i)])
            out[i] = np.array(rows, dtype=int)
        return out

    def cells(self, max_gen: int | None = None) -> Iterable[tuple[int, int]]:
        top = self.L if max_gen is None else max_gen
        for k in range(top + 1):
            for m in range(1 << k):
                yield k, m


@dataclass(frozen=True)
class DyadicInterval:
    k: int
    m: int
    axis: AxisGrid = field(compare=False, hash=False, repr=False)

    @property
    def measure(self) -> Fraction:
        return Fraction(1, 1 << self.k)

    @property
    def flat(self) -> int:
        return flat_index(self.k, self.m)

    def leaves(self) -> np.ndarray:
        return self.axis.leaves(self.k, self.m)

    def endpoints(self):
        return self.axis.endpoints(self.k, self.m)


@dataclass(frozen=True, order=True)
class Rect:
    """Product rectangle (k1, m1) x (k2, m2)."""

    k1: int
    m1: int
    k2: int
    m2: int

    @property
    def measure(self) -> Fraction:
        return Fraction(1, 1 << (self.k1 + self.k2))

    @property
    def first(self) -> tuple[int, int]:
        return self.k1, self.m1

    @property
    def second(self) -> tuple[int, int]:
        return self.k2, self.m2

    @property
    def flat(self) -> tuple[int, int]:
        return flat_index(self.k1, self.m1), flat_index(self.k2, self.m2)

    def to_json(self):
        return [self.k1, self.m1, self.k2, self.m2]


class DyadicGrid:
    """Full hierarchy of a GridSpec: one AxisGrid per axis."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.axes = tuple(AxisGrid(spec.L, bits) for bits in spec.shift_bits)

    @property
    def L(self) -> int:
        return self.spec.L

    @property
    def N(self) -> int:
        return 1 << self.spec.L

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.N for a in self.axes)

    def __eq__(self, other):
        return isinstance(other, DyadicGrid) and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)

    def generation(self, k: int) -> list:
        if self.spec.axes == 1:
            return [DyadicInterval(k, m, self.axes[0]) for m in range(1 << k)]
        return [Rect(k, m1, k, m2) for m1 in range(1 << k) for m2 in range(1 << k)]

    def rectangles(self, max_gen: int | None = None) -> list[Rect]:
        a1, a2 = self.axes
        return [Rect(k1, m1, k2, m2) for k1, m1 in a1.cells(max_gen) for k2, m2 in a2.cells(max_gen)]

    def cell_mask(self, cell) -> np.ndarray:
        """Boolean leaf mask of an interval (1 axis) or rectangle."""
        if isinstance(cell, Rect):
            a1, a2 = self.axes
            mask = np.zeros(self.shape, dtype=bool)
            mask[np.ix_(a1.leaves(*cell.first), a2.leaves(*cell.second))] = True
            return mask
        k, m = (cell.k, cell.m) if isinstance(cell, DyadicInterval) else cell
        mask = np.zeros(self.shape[:1], dtype=bool)
        mask[self.axes[0].leaves(k, m)] = True
        return mask


def make_grid(spec: GridSpec) -> DyadicGrid:
    return DyadicGrid(spec)


def children_at_depth(grid: DyadicGrid, cell, i) -> list:
    """ch_i of an interval (int depth) or rectangle (pair of depths)."""
    if isinstance(cell, Rect):
        i1, i2 = (i, i) if isinstance(i, int) else i
        a1, a2 = grid.axes
        return [
            Rect(c1[0], c1[1], c2[0], c2[1])
            for c1 in a1.children_at_depth(*cell.first, i1)
            for c2 in a2.children_at_depth(*cell.second, i2)
        ]
    ax = grid.axes[0]
    return [DyadicInterval(k, m, ax) for k, m in ax.children_at_depth(cell.k, cell.m, i)]


def ancestor_at_depth(grid: DyadicGrid, cell, i):
    if isinstance(cell, Rect):
        i1, i2 = (i, i) if isinstance(i, int) else i
        a1, a2 = grid.axes
        k1, m1 = a1.ancestor_at_depth(*cell.first, i1)
        k2, m2 = a2.ancestor_at_depth(*cell.second, i2)
        return Rect(k1, m1, k2, m2)
    ax = grid.axes[0]
    k, m = ax.ancestor_at_depth(cell.k, cell.m, i)
    return DyadicInterval(k, m, ax)


# ---------------------------------------------------------------------------
# sparse families


@dataclass
class SparseFamily:
    """Cells with witness sets given as boolean leaf masks."""

    cells: list
    witnesses: list[np.ndarray]
    delta: Fraction
    grid: DyadicGrid | None = None

    def __post_init__(self):
        self.delta = Fraction(self.delta).limit_denominator(10**9)
        if len(self.cells) != len(self.witnesses):
            raise GridError("one witness set per cell required")

    def __len__(self):
        return len(self.cells)

    def to_json(self) -> dict:
        def cell_json(c):
            return c.to_json() if isinstance(c, Rect) else [c[0], c[1]]

        return {
            "rectangles": [cell_json(c) for c in self.cells],
            "witness_cells": [np.argwhere(w).tolist() for w in self.witnesses],
            "delta": str(self.delta),
        }


@dataclass
class SparseReport:
    ok: bool
    overlaps: list[tuple[int, int]]
    deficient: list[int]

    def __bool__(self):
        return self.ok


def _mask_of(grid: DyadicGrid, cell) -> np.ndarray:
    return grid.cell_mask(cell)


def check_weakly_sparse(family: SparseFamily, grid: DyadicGrid | None = None) -> SparseReport:
    """Exact check: witnesses inside their cells, pairwise disjoint, |E_R| >= delta |R|."""
    grid = grid or family.grid
    if grid is None:
        raise GridError("grid required")
    total = None
    overlaps: list[tuple[int, int]] = []
    deficient: list[int] = []
    owner = None
    for idx, (cell, w) in enumerate(zip(family.cells, family.witnesses)):
        cmask = _mask_of(grid, cell)
        if w.shape != cmask.shape:
            raise GridError("witness mask shape mismatch")
        if np.any(w & ~cmask):
            raise GridError(f"witness set of cell {idx} not contained in it")
        if total is None:
            total = np.zeros(cmask.shape, dtype=bool)
            owner = np.full(cmask.shape, -1, dtype=int)
        clash = w & total
        if clash.any():
            for j in np.unique(owner[clash]):
                overlaps.append((int(j), idx))
        total |= w
        owner[w & (owner < 0)] = idx
        # integer leaf counts: |E| >= delta |R|  <=>  count_E * den >= num * count_R
        if int(w.sum()) * family.delta.denominator < family.delta.numerator * int(cmask.sum()):
            deficient.append(idx)
    return SparseReport(not overlaps and not deficient, overlaps, deficient)


def check_dyadically_sparse(cells: Sequence[tuple[int, int]], axis: AxisGrid, eps) -> SparseReport:
    """One-parameter check: sum of maximal S-subintervals of Q is <= (1 - eps)|Q|."""
    eps = Fraction(eps).limit_denominator(10**9)
    cellset = set(cells)
    deficient = []
    for idx, (k, m) in enumerate(cells):
        # maximal S-descendants: walk down, stopping at the first member
        stack = list(axis.children(k, m)) if k < axis.L else []
        mass = 0
        while stack:
            c = stack.pop()
            if c in cellset:
                mass += 1 << (axis.L - c[0])
            elif c[0] < axis.L:
                stack.extend(axis.children(*c))
        full = 1 << (axis.L - k)
        if mass * eps.denominator > (eps.denominator - eps.numerator) * full:
            deficient.append(idx)
    return SparseReport(not deficient, [], deficient)


def dyadic_to_weak(cells: Sequence[tuple[int, int]], axis: AxisGrid, eps) -> SparseFamily:
    """Witness E_Q = Q minus its maximal S-descendants."""
    cellset = set(cells)
    wit = []
    for k, m in cells:
        mask = np.zeros(axis.N, dtype=bool)
        mask[axis.leaves(k, m)] = True
        stack = list(axis.children(k, m)) if k < axis.L else []
        while stack:
            c = stack.pop()
            if c in cellset:
                mask[axis.leaves(*c)] = False
            elif c[0] < axis.L:
                stack.extend(axis.children(*c))
        wit.append(mask)
    return SparseFamily(list(cells), wit, Fraction(eps).limit_denominator(10**9))
