from fractions import Fraction

import pytest

from dyadlab import suites
from dyadlab.exponents import exponent_table, gamma


@pytest.mark.parametrize("p", ["3/2", "3", "5/4"])
def test_formulas_rederived_from_exponent_table(p):
    t = exponent_table(p)
    assert suites.formula("multiplier_one_weight", p) == {"W": t.alpha}
    assert suites.formula("shift_sparse_route", p) == {"W": t.alpha1 + t.alpha2}
    assert suites.formula("square_upper", p) == {"W": 1 / t.p + 2 * t.gamma}
    assert suites.formula("square_lower_tilde", p) == {"W": 2 * gamma(t.pp) / (t.p - 1)}


def test_p2_specializations():
    assert suites.formula("shift_sparse_route", 2) == {"W": 5}
    assert suites.formula("paraproduct_11", 2) == {"W": Fraction(7, 2)}
    assert suites.formula("shift_direct", 2) == {"W": Fraction(9, 2)}
    assert suites.formula("square_two_weight", 2) == {"WU": Fraction(1, 2), "U": 2}
    assert suites.formula("modified_strong_maximal", 2) == {"W": Fraction(3, 2)}
    assert suites.formula("vector_maximal", "3/2") == {"W": 2}


def test_pi00_is_dual_of_pi11():
    t = exponent_table(3)
    assert suites.formula("paraproduct_00", 3)["W"] == suites.formula("paraproduct_11", t.pp)["W"] / 2


def test_applicability():
    T = suites.TABLE
    assert not T["shift_direct"].applies(Fraction(3)) and T["shift_direct"].applies(Fraction(2))
    assert T["vector_maximal"].applies(Fraction(3, 2)) and not T["vector_maximal"].applies(Fraction(3))
    assert T["vector_maximal"].axes == 1 and T["sparse_one_param"].axes == 1
    assert set(suites.DEFAULT_SUITE) == set(T)


def test_complexity_tables_fit_default_depth():
    for i, j in suites.SHIFT_COMPLEXITIES:
        assert max(i + j) <= 2
    assert len(suites.SPARSE_ONE_PARAM_COMPLEXITIES) == 9
