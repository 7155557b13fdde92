"""Table of verified inequalities: id -> characteristic powers and an evaluator."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .corpus import Instance, instance_rng
from .exponents import ExponentTable, exponent_table, gamma
from .haar import VectorField, bicancellative_part
from .operators import (
    ParaproductSymbol,
    assemble_scalar,
    haar_multiplier,
    haar_shift,
    lp_norm,
    lp_weighted_norm,
    maximal_function,
    paraproduct,
    partial_paraproduct,
    random_bmo_symbol,
    random_multiplier,
    random_partial_symbol,
    random_shift,
    vector_maximal_ratio,
    weighted_matrix,
)
from .sparse import localized_shifted_square, multiplier_domination, one_param_shifted_sparse, shift_domination, sparse_positive_operator
from .square import mixed_operator, shifted_square_function, square_function
from .weights import ap_characteristic

ONE_PARAM_COMPLEXITIES = ((0, 1), (1, 0), (1, 1), (2, 1), (1, 2))
SPARSE_ONE_PARAM_COMPLEXITIES = tuple((i, j) for i in range(3) for j in range(3))
SHIFT_COMPLEXITIES = (
    ((1, 0), (0, 1)),
    ((1, 1), (1, 1)),
    ((2, 1), (0, 2)),
    ((0, 1), (1, 0)),
    ((2, 2), (2, 2)),
)


@dataclass
class Measurement:
    lhs: float
    rhs_core: float
    characteristics: dict
    note: str = ""


@dataclass(frozen=True)
class Inequality:
    id: str
    axes: int
    applies: Callable[[Fraction], bool]
    exponents: Callable[[ExponentTable], dict]
    evaluate: Callable
    kind: str = "bound"


def _bar(n: int) -> int:
    return max(int(n), 1)


def _chars(inst: Instance, p: float, need: dict) -> dict:
    out = {}
    if "W" in need:
        out["W"] = inst.characteristic
    if "U" in need:
        out["U"] = ap_characteristic(inst.U, p, "dyadic").value
    if "WU" in need:
        out["WU"] = ap_characteristic(inst.W, p, "two_weight", inst.U.conjugate(p)).value
    return out


def _core(exps: dict, chars: dict, factor: float = 1.0) -> float:
    return factor * float(np.prod([chars[k] ** float(e) for k, e in exps.items()]))


def _op_ratio(apply, inst: Instance, p: float, W_in, W_out) -> float:
    """Operator norm for p = 2 (SVD of the weighted matrix), else ||Tf|| / ||f|| on the instance."""
    if p == 2:
        T = assemble_scalar(apply, inst.grid, inst.f.d)
        return float(np.linalg.norm(weighted_matrix(T, W_in, W_out, 2.0), 2))
    f = inst.f
    den = lp_weighted_norm(f, W_in, p)
    return lp_weighted_norm(apply(f), W_out, p) / den if den > 0 else 0.0


def _rng(inst: Instance, k: int, ident: str):
    return instance_rng(inst.seed, k, zlib.crc32(ident.encode()))


# ---------------------------------------------------------------------------
# exponent formulas


def _e_square_upper_tilde(t):
    return {"W": 2 * t.gamma}


def _e_square_upper(t):
    return {"W": 1 / t.p + 2 * t.gamma}


def _e_square_lower_tilde(t):
    return {"W": 2 * gamma(t.pp) / (t.p - 1)}


def _e_square_lower(t):
    return {"W": 1 / t.p + 2 * gamma(t.pp) / (t.p - 1)}


def _e_square_two_weight(t):
    if t.p == 2:
        return {"WU": Fraction(1, 2), "U": Fraction(2)}
    return {"WU": 1 / t.p, "U": 1 / t.p + 2 * t.gamma}


def _e_modified_maximal(t):
    return {"W": (t.p + 1) / (t.p * (t.p - 1))}


def _e_pi11(t):
    if t.p == 2:
        return {"W": Fraction(7, 2)}
    return {"W": (t.p + 1) / (t.p * (t.p - 1)) + 1 / t.p + 2 * gamma(t.pp) / (t.p - 1)}


def _e_pi00(t):
    # duality: the Pi11 bound at p' for W', with [W']_{A_p'} comparable to [W]_{A_p}^{1/(p-1)}
    if t.p == 2:
        return {"W": Fraction(7, 2)}
    return {"W": _e_pi11(exponent_table(t.pp))["W"] / (t.p - 1)}


def _e_multiplier_one(t):
    return {"W": t.alpha}


def _e_multiplier_two(t):
    if t.p == 2:
        return {"WU": Fraction(1, 2), "W": Fraction(2), "U": Fraction(2)}
    return {"WU": 1 / t.p, "W": 1 / t.p + 2 * gamma(t.pp) / (t.p - 1), "U": 1 / t.p + 2 * t.gamma}


def _e_shift_sparse_route(t):
    if t.p == 2:
        return {"W": Fraction(5)}
    return {"W": t.alpha1 + t.alpha2}


def _e_shifted_one_param(t):
    return {"W": t.gamma}


def _e_shifted_biparameter(t):
    return {"W": 1 / t.p + 2 * t.gamma + t.alpha}


def _e_vector_maximal(t):
    return {"W": 1 / (t.p - 1)}


def _const(e):
    return lambda t: {"W": Fraction(e)}


def _none(t):
    return {}


def _sparse_one(t):
    return {}


def _sparse_two(t):
    return {"WU": 1 / t.p}


# ---------------------------------------------------------------------------
# evaluators


def _ev_square_upper_tilde(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    lhs = lp_norm(square_function(inst.f, "St_W", inst.W, p), p) / lp_weighted_norm(inst.f, inst.W, p)
    return Measurement(lhs, _core(exps, ch), ch)


def _ev_square_upper(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    lhs = lp_norm(square_function(inst.f, "S_W", inst.W, p), p) / lp_weighted_norm(inst.f, inst.W, p)
    return Measurement(lhs, _core(exps, ch), ch)


def _ev_square_lower_tilde(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    f = bicancellative_part(inst.f)
    lhs = lp_weighted_norm(f, inst.W, p) / lp_norm(square_function(f, "St_W", inst.W, p), p)
    return Measurement(lhs, _core(exps, ch), ch)


def _ev_square_lower(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    f = bicancellative_part(inst.f)
    lhs = lp_weighted_norm(f, inst.W, p) / lp_norm(square_function(f, "S_W", inst.W, p), p)
    return Measurement(lhs, _core(exps, ch), ch)


def _ev_square_two_weight(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    lhs = lp_norm(square_function(inst.f, "S_W", inst.W, p), p) / lp_weighted_norm(inst.f, inst.U, p)
    return Measurement(lhs, _core(exps, ch), ch)


def _ev_p2_identity(inst, p, k, exps):
    a = lp_norm(square_function(inst.f, "S_W", inst.W, 2.0), 2.0)
    b = lp_norm(square_function(inst.f, "St_W", inst.W, 2.0), 2.0)
    return Measurement(a / b, 1.0, {"W": inst.characteristic})


def _ev_modified_maximal(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    lhs = lp_norm(maximal_function("modified", inst.W, p, inst.f), p) / lp_weighted_norm(inst.f, inst.W, p)
    return Measurement(lhs, _core(exps, ch), ch)


def _paraproduct_ev(kind):
    def ev(inst, p, k, exps):
        ch = _chars(inst, p, exps)
        a = random_bmo_symbol(inst.grid, _rng(inst, k, "pi" + kind))
        sym = ParaproductSymbol(a, kind, inst.grid)
        lhs = _op_ratio(lambda f: paraproduct(sym, f), inst, p, inst.W, inst.W)
        return Measurement(lhs, _core(exps, ch), ch)

    return ev


def _ev_partial(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    i, j = ONE_PARAM_COMPLEXITIES[k % len(ONE_PARAM_COMPLEXITIES)]
    sym = random_partial_symbol(inst.grid, i, j, _rng(inst, k, "partial"), star=bool(k % 2))
    lhs = _op_ratio(lambda f: partial_paraproduct(sym, f), inst, p, inst.W, inst.W)
    return Measurement(lhs, _core(exps, ch), ch, f"i={i};j={j}")


def _ev_multiplier_one(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    s = random_multiplier(inst.grid, _rng(inst, k, "mult"), signs=True)
    lhs = _op_ratio(lambda f: haar_multiplier(s, f), inst, p, inst.W, inst.W)
    return Measurement(lhs, _core(exps, ch, s.bound), ch)


def _ev_multiplier_two(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    s = random_multiplier(inst.grid, _rng(inst, k, "mult"), signs=True)
    lhs = _op_ratio(lambda f: haar_multiplier(s, f), inst, p, inst.U, inst.W)
    return Measurement(lhs, _core(exps, ch, s.bound), ch)


def _shift_of(inst, k, ident):
    i, j = SHIFT_COMPLEXITIES[k % len(SHIFT_COMPLEXITIES)]
    return random_shift(inst.grid, i, j, _rng(inst, k, ident))


def _ev_shift_direct(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    K = _shift_of(inst, k, "shift")
    lhs = _op_ratio(lambda f: haar_shift(K, f), inst, p, inst.W, inst.W)
    return Measurement(lhs, _core(exps, ch), ch, f"i={K.i};j={K.j}")


def _ev_shift_sparse_route(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    K = _shift_of(inst, k, "shift")
    lhs = _op_ratio(lambda f: haar_shift(K, f), inst, p, inst.W, inst.W)
    fac = 1.0 if p == 2 else float(np.prod([_bar(n) for n in K.i + K.j]))
    return Measurement(lhs, _core(exps, ch, fac), ch, f"i={K.i};j={K.j}")


def _ev_shifted_one_param(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    i, j = ONE_PARAM_COMPLEXITIES[k % len(ONE_PARAM_COMPLEXITIES)]
    S = shifted_square_function(inst.f, i, j, "St_W", inst.W, p)
    lhs = lp_norm(S, p) / lp_weighted_norm(inst.f, inst.W, p)
    return Measurement(lhs, _core(exps, ch, _bar(i) * 2.0 ** ((i + j) / 2)), ch, f"i={i};j={j}")


def _ev_shifted_biparameter(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    i, j = SHIFT_COMPLEXITIES[k % len(SHIFT_COMPLEXITIES)]
    S = shifted_square_function(inst.f, i, j, "S_W", inst.W, p)
    lhs = lp_norm(S, p) / lp_weighted_norm(inst.f, inst.W, p)
    fac = _bar(i[0]) * _bar(i[1]) * 2.0 ** (sum(i + j) / 2)
    return Measurement(lhs, _core(exps, ch, fac), ch, f"i={i};j={j}")


VECTOR_COUNT = 4


def _ev_vector_maximal(inst, p, k, exps):
    ch = _chars(inst, p, exps)
    rng = _rng(inst, k, "vector")
    fs = [VectorField(rng.standard_normal(inst.grid.shape + (inst.f.d,)), inst.grid) for _ in range(VECTOR_COUNT)]
    lhs = vector_maximal_ratio("modified", inst.W, p, fs)
    return Measurement(lhs, _core(exps, ch), ch)


def _mixed_ev(kind, shifted):
    def ev(inst, p, k, exps):
        ch = _chars(inst, p, exps)
        i = k % 3 if shifted else 0
        lhs = lp_norm(mixed_operator(kind, inst.f, inst.W, p, i), p) / lp_weighted_norm(inst.f, inst.W, p)
        return Measurement(lhs, _core(exps, ch, 2.0 ** (i / 2)), ch, f"i={i}")

    return ev


def _ev_sparse_multiplier(two):
    def ev(inst, p, k, exps):
        s = random_multiplier(inst.grid, _rng(inst, k, "smult"), signs=False)
        rep = multiplier_domination(s, inst.f, inst.g, inst.W, p, U=inst.U if two else None)
        ch = {"WU": rep.extra["two_weight_char"]} if two else {}
        return Measurement(rep.lhs, rep.constant * rep.form, ch, f"family={len(rep.family)};c={rep.c:g}")

    return ev


def _ev_sparse_shift(two):
    def ev(inst, p, k, exps):
        K = _shift_of(inst, k, "sshift")
        rep = shift_domination(K, inst.f, inst.g, inst.W, p, U=inst.U if two else None)
        ch = {"WU": rep.extra["two_weight_char"]} if two else {}
        return Measurement(rep.lhs, rep.constant * rep.form, ch, f"i={K.i};j={K.j};family={len(rep.family)}")

    return ev


def _ev_sparse_one_param(inst, p, k, exps):
    i, j = SPARSE_ONE_PARAM_COMPLEXITIES[k % len(SPARSE_ONE_PARAM_COMPLEXITIES)]
    fam, rep = one_param_shifted_sparse((0, 0), inst.f, inst.W, p, i, j)
    # pointwise domination: report the leaf where S~ / (ibar 2^{(i+j)/2} A) peaks
    S = localized_shifted_square(inst.f, inst.W, p, i, j, (0, 0))
    A = _bar(i) * 2.0 ** ((i + j) / 2) * sparse_positive_operator(fam, inst.W, p, inst.f)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(S > 0, S / A, 0.0)
    x = int(np.argmax(r))
    return Measurement(float(S[x]), float(A[x]), {}, f"i={i};j={j};family={len(fam)}")


def _any(p):
    return True


def _p2(p):
    return p == 2


def _le2(p):
    return p <= 2


TABLE: dict[str, Inequality] = {}


def _add(ident, axes, applies, exps, ev, kind="bound"):
    TABLE[ident] = Inequality(ident, axes, applies, exps, ev, kind)


_add("square_upper_tilde", 2, _any, _e_square_upper_tilde, _ev_square_upper_tilde)
_add("square_upper", 2, _any, _e_square_upper, _ev_square_upper)
_add("square_lower_tilde", 2, _any, _e_square_lower_tilde, _ev_square_lower_tilde)
_add("square_lower", 2, _any, _e_square_lower, _ev_square_lower)
_add("square_two_weight", 2, _any, _e_square_two_weight, _ev_square_two_weight)
_add("p2_square_identity", 2, _p2, _none, _ev_p2_identity, "identity")
_add("shifted_square_one_param", 1, _any, _e_shifted_one_param, _ev_shifted_one_param)
_add("shifted_square_biparameter", 2, _any, _e_shifted_biparameter, _ev_shifted_biparameter)
_add("modified_strong_maximal", 2, _any, _e_modified_maximal, _ev_modified_maximal)
_add("paraproduct_11", 2, _any, _e_pi11, _paraproduct_ev("11"))
_add("paraproduct_00", 2, _any, _e_pi00, _paraproduct_ev("00"))
_add("paraproduct_01", 2, _p2, _const(4), _paraproduct_ev("01"))
_add("paraproduct_10", 2, _p2, _const(4), _paraproduct_ev("10"))
_add("partial_paraproduct", 2, _p2, _const(5), _ev_partial)
_add("mixed_S_Mt", 2, _p2, _const(2), _mixed_ev("SMt", False))
_add("mixed_Si_M", 2, _p2, _const(Fraction(5, 2)), _mixed_ev("SiM", True))
_add("mixed_Sj_St", 2, _p2, _const(Fraction(5, 2)), _mixed_ev("SjSt", True))
_add("multiplier_one_weight", 2, _any, _e_multiplier_one, _ev_multiplier_one)
_add("multiplier_two_weight", 2, _any, _e_multiplier_two, _ev_multiplier_two)
_add("shift_direct", 2, _p2, _const(Fraction(9, 2)), _ev_shift_direct)
_add("shift_sparse_route", 2, _any, _e_shift_sparse_route, _ev_shift_sparse_route)
_add("vector_maximal", 1, _le2, _e_vector_maximal, _ev_vector_maximal)
_add("sparse_multiplier_one_weight", 2, _any, _sparse_one, _ev_sparse_multiplier(False), "sparse")
_add("sparse_multiplier_two_weight", 2, _any, _sparse_two, _ev_sparse_multiplier(True), "sparse")
_add("sparse_shift_one_weight", 2, _any, _sparse_one, _ev_sparse_shift(False), "sparse")
_add("sparse_shift_two_weight", 2, _any, _sparse_two, _ev_sparse_shift(True), "sparse")
_add("sparse_one_param", 1, _any, _none, _ev_sparse_one_param, "sparse")

DEFAULT_SUITE = tuple(TABLE)


def formula(ident: str, p) -> dict:
    """Characteristic exponents of the cited bound at exponent p."""
    return TABLE[ident].exponents(exponent_table(p))
