"""Seeded corpora of grids, weights and test functions."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import DyadicGrid, GridSpec, random_grid
from .haar import VectorField, from_coefficients
from .weights import EIG_FLOOR, MatrixWeight, WeightError, ap_characteristic

log = logging.getLogger(__name__)

WEIGHT_MODELS = ("constant", "scalar_power", "random_log_field")
FUNCTION_MODELS = ("gaussian", "haar_sparse", "indicator")
MAX_REGEN = 60


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    L: int = 4
    d: int = 2
    p: float = 2.0
    weight_model: str = "random_log_field"
    amplitude: float = 1.0
    function_model: str = "gaussian"
    count: int = 50
    axes: int = 2
    shifted: bool = True

    def __post_init__(self):
        if self.weight_model not in WEIGHT_MODELS:
            raise ValueError(f"unknown weight model {self.weight_model!r}")
        if self.function_model not in FUNCTION_MODELS:
            raise ValueError(f"unknown function model {self.function_model!r}")
        if self.count < 0 or self.d < 1 or self.p <= 1 or self.amplitude < 0:
            raise ValueError("invalid corpus spec")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusSpec":
        return cls(**obj)


@dataclass
class Instance:
    seed: int
    grid: DyadicGrid
    W: MatrixWeight
    U: MatrixWeight
    f: VectorField
    g: VectorField
    amplitude: float
    characteristic: float
    regenerations: int = 0
    extra: dict = field(default_factory=dict)


def instance_rng(seed: int, k: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, k, stream]))


def _sym(rng, shape, d):
    A = rng.standard_normal(shape + (d, d))
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _expm_sym(S: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(S)
    return np.einsum("...ij,...j,...kj->...ik", V, np.exp(lam), V)


def _normalize(S: np.ndarray, amplitude: float) -> np.ndarray:
    top = np.max(np.abs(np.linalg.eigvalsh(S)))
    return S * (amplitude / top) if top > 0 else S


def log_field(grid: DyadicGrid, d: int, rng, amplitude: float) -> np.ndarray:
    """Symmetric field S = sum_R G_R h_R with sup_x |S(x)| = amplitude."""
    n = tuple(s - 1 for s in grid.shape)
    G = _sym(rng, n, d)
    # damp fine scales so the field is not pure noise
    for a, ax in enumerate(grid.axes):
        gen = np.array([(t + 1).bit_length() - 1 for t in range(ax.N - 1)])
        shape = [1] * len(n) + [1, 1]
        shape[a] = -1
        G = G * (2.0 ** (-gen / 2.0)).reshape(shape)
    S = from_coefficients(G.reshape(n + (d * d,)), grid).values.reshape(grid.shape + (d, d))
    return _normalize(S, amplitude)


def make_weight(grid: DyadicGrid, d: int, model: str, amplitude: float, rng) -> MatrixWeight:
    base = _expm_sym(_normalize(_sym(rng, (), d), 0.5))
    if model == "constant":
        vals = np.broadcast_to(_expm_sym(_normalize(_sym(rng, (), d), amplitude)), grid.shape + (d, d))
    elif model == "scalar_power":
        w = np.ones(grid.shape)
        for a, n in enumerate(grid.shape):
            x = (np.arange(n) + 0.5) / n
            sh = [1] * len(grid.shape)
            sh[a] = n
            w = w * x.reshape(sh) ** amplitude
        vals = w[..., None, None] * base
    elif model == "random_log_field":
        vals = _expm_sym(log_field(grid, d, rng, amplitude))
    else:
        raise ValueError(f"unknown weight model {model!r}")
    vals = np.array(vals)
    if np.min(np.linalg.eigvalsh(vals)) <= EIG_FLOOR * 10:
        raise WeightError("generated weight breaches eigenvalue floor")
    return MatrixWeight(vals, grid)


def make_function(grid: DyadicGrid, d: int, model: str, rng) -> VectorField:
    if model == "gaussian":
        return VectorField(rng.standard_normal(grid.shape + (d,)), grid)
    if model == "haar_sparse":
        n = tuple(s - 1 for s in grid.shape)
        C = np.zeros(n + (d,))
        idx = rng.integers(0, np.prod(n), size=6)
        C.reshape(-1, d)[idx] = rng.standard_normal((6, d))
        return from_coefficients(C, grid)
    if model == "indicator":
        vals = np.zeros(grid.shape + (d,))
        for _ in range(3):
            sl = []
            for n in grid.shape:
                a, b = sorted(rng.integers(0, n + 1, size=2))
                sl.append(slice(a, max(b, a + 1)))
            vals[tuple(sl)] += rng.standard_normal(d)
        return VectorField(vals, grid)
    raise ValueError(f"unknown function model {model!r}")


def generate_instance(spec: CorpusSpec, k: int) -> Instance:
    rng = instance_rng(spec.seed, k)
    gs = random_grid(int(rng.integers(2**31)), spec.L, spec.axes) if spec.shifted else GridSpec.standard(spec.L, spec.axes)
    grid = DyadicGrid(gs)
    amp = float(spec.amplitude)
    regen = 0
    while True:
        wrng = instance_rng(spec.seed, k, 1 + regen)
        try:
            W = make_weight(grid, spec.d, spec.weight_model, amp, wrng)
            U = make_weight(grid, spec.d, spec.weight_model, amp, wrng)
            break
        except WeightError:
            regen += 1
            if regen > MAX_REGEN:
                raise
            log.warning("instance %d: eigenvalue floor breached at amplitude %g, halving", k, amp)
            amp /= 2.0
    f = make_function(grid, spec.d, spec.function_model, rng)
    g = make_function(grid, spec.d, spec.function_model, rng)
    char = ap_characteristic(W, spec.p, "dyadic").value
    return Instance(int(spec.seed * 100003 + k), grid, W, U, f, g, amp, char, regen)


def generate_corpus(spec: CorpusSpec) -> list[Instance]:
    return [generate_instance(spec, k) for k in range(spec.count)]
