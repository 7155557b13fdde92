from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadlab.exponents import alpha, alpha1, alpha2, conjugate, exponent_table, fefferman_stein, gamma

rational_p = st.fractions(min_value=Fraction(101, 100), max_value=20).filter(lambda p: p > 1)


def test_exponent_values():
    assert gamma(2) == 1
    assert gamma(4) == Fraction(7, 12)
    assert alpha(2) == 4
    t = exponent_table("3/2")
    assert (t.gamma, t.alpha, t.alpha1, t.alpha2) == (2, Fraction(20, 3), 10, Fraction(34, 3))
    assert exponent_table(3).alpha1 == Fraction(17, 3) and exponent_table(3).alpha2 == 5


def test_fefferman_stein_components():
    fs = fefferman_stein(Fraction(3, 2))
    assert (fs.a, fs.q, fs.r, fs.theta, fs.r_conj, fs.b) == (
        Fraction(33, 23),
        Fraction(46, 33),
        Fraction(23, 22),
        Fraction(11, 13),
        23,
        3,
    )
    assert fs.r_factor == pytest.approx(26 ** (22 / 23))
    assert exponent_table(2).fs is None
    with pytest.raises(ValueError):
        fefferman_stein(2)


@given(rational_p)
def test_identities(p):
    pp = conjugate(p)
    assert 1 / p + 1 / pp == 1
    assert alpha2(pp) / (p - 1) == alpha1(p)
    assert conjugate(pp) == p


def test_gamma_continuous_at_two():
    assert gamma(2) == Fraction(1, 2) + Fraction(1, 2)
    assert abs(float(gamma(Fraction(2) + Fraction(1, 10**9))) - 1) < 1e-8


@pytest.mark.parametrize("p", [1, 0.5, "1", -2])
def test_rejects_small_p(p):
    with pytest.raises(ValueError):
        exponent_table(p)


def test_json_is_exact_strings():
    js = exponent_table("3/2").to_json()
    assert js["alpha1"] == "10" and js["fefferman_stein"]["theta"] == "11/13"
