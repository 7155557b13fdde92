"""Exact exponent bookkeeping in rational arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


def as_fraction(p) -> Fraction:
    """Parse p (int, float, Fraction or 'a/b' string) into a Fraction."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p.strip())
    if isinstance(p, float):
        return Fraction(p).limit_denominator(10**9)
    return Fraction(p)


def conjugate(p) -> Fraction:
    p = as_fraction(p)
    if p <= 1:
        raise ValueError(f"exponent must exceed 1, got {p}")
    return p / (p - 1)


def gamma(p) -> Fraction:
    p = as_fraction(p)
    if p <= 1:
        raise ValueError(f"exponent must exceed 1, got {p}")
    if p <= 2:
        return 1 / (p - 1)
    return Fraction(1, 2) + 1 / (p * (p - 1))


def alpha(p) -> Fraction:
    p = as_fraction(p)
    return 2 * gamma(p) + 2 * gamma(conjugate(p)) / (p - 1)


def alpha1(p) -> Fraction:
    p = as_fraction(p)
    pp = conjugate(p)
    return 1 / p + (2 * gamma(pp) + alpha(pp)) / (p - 1)


def alpha2(p) -> Fraction:
    p = as_fraction(p)
    return 1 / p + 2 * gamma(p) + alpha(p)


@dataclass(frozen=True)
class FeffermanStein:
    """Exponents entering the vector-valued maximal constant C(q, r, n) for 1 < p < 2."""

    p: Fraction
    eps: Fraction
    a: Fraction
    q: Fraction
    r: Fraction
    theta: Fraction
    r_conj: Fraction
    b: Fraction

    @property
    def r_factor(self) -> float:
        """(r' + r/(q - r))^{1/r}."""
        return float(self.r_conj + self.b) ** (1.0 / float(self.r))


def fefferman_stein(p, eps=Fraction(1, 10)) -> FeffermanStein:
    p, eps = as_fraction(p), as_fraction(eps)
    if not (1 < p < 2):
        raise ValueError("the interpolation exponents need 1 < p < 2")
    if eps <= 0:
        raise ValueError("eps must be positive")
    a = p * (1 + eps) / (1 + p * eps)
    q, r = 2 / a, p / a
    theta = (1 / r - 1 / q) / (1 - 1 / q)
    return FeffermanStein(p, eps, a, q, r, theta, r / (r - 1), r / (q - r))


@dataclass(frozen=True)
class ExponentTable:
    p: Fraction
    pp: Fraction
    gamma: Fraction
    alpha: Fraction
    alpha1: Fraction
    alpha2: Fraction
    fs: FeffermanStein | None

    def to_json(self) -> dict:
        out = {k: str(getattr(self, k)) for k in ("p", "pp", "gamma", "alpha", "alpha1", "alpha2")}
        if self.fs is not None:
            out["fefferman_stein"] = {k: str(getattr(self.fs, k)) for k in ("eps", "a", "q", "r", "theta", "r_conj", "b")}
            out["fefferman_stein"]["r_factor"] = self.fs.r_factor
        return out


def exponent_table(p, eps=Fraction(1, 10)) -> ExponentTable:
    p = as_fraction(p)
    pp = conjugate(p)
    fs = fefferman_stein(p, eps) if p < 2 else None
    return ExponentTable(p, pp, gamma(p), alpha(p), alpha1(p), alpha2(p), fs)
