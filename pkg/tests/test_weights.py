from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadlab.corpus import CorpusSpec, generate_corpus, generate_instance
from dyadlab.grid import DyadicGrid, GridSpec, Rect, random_grid
from dyadlab.oracle import dense_direction_check, integral_characteristic, rho_oracle
from dyadlab.weights import (
    MatrixWeight,
    WeightError,
    ap_characteristic,
    averaging_constant,
    constant_weight,
    exact_scalar_characteristic,
    hoelder_check,
    iterated_ratio,
    lemma_checks,
    matrix_power,
    reducing_field,
    reducing_matrix,
    reverse_holder_check,
    rho_norm,
    sign_select,
    slice_characteristics,
    sliced_weight,
)

# comparability constants K(p, d) at d = 2, measured on CorpusSpec(seed=5, L=3, count=8)
# and frozen with 20% headroom
K = {
    "iterated": 1.21,
    "involution": 1.25,
    "averaging": 1.47,
    "scalar_lemma": 1.07,
    "reducing_vs_average": 1.13,
}

seeds = st.integers(0, 10**6)


def _spd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T + 0.5 * np.eye(d)


def _two_cells(vals):
    g = DyadicGrid(GridSpec.standard(1, 1))
    return MatrixWeight(np.array(vals, dtype=float), g)


def test_matrix_power_examples(rng):
    assert np.allclose(matrix_power(np.eye(3), 0.37), np.eye(3))
    assert np.allclose(matrix_power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]))
    M = _spd(rng, 3)
    R = matrix_power(M, 1 / 3)
    assert np.allclose(R @ R @ R, M, atol=1e-10)
    with pytest.raises(WeightError):
        matrix_power(np.diag([1.0, 0.0]), 0.5)


@given(seeds, st.floats(0.2, 3.0))
def test_matrix_power_inverse(seed, s):
    M = _spd(np.random.default_rng(seed), 2)
    assert np.allclose(matrix_power(matrix_power(M, s), 1 / s), M, atol=1e-9 * np.linalg.norm(M))


def test_rho_norm_examples(grid1, rng):
    W = constant_weight(grid1, np.eye(2))
    e = rng.standard_normal(2)
    assert rho_norm((0, 0), W, 3.0, e) == pytest.approx(np.linalg.norm(e))
    w = _two_cells([1.0, 16.0])
    assert rho_norm((0, 0), w, 2.0, np.array([1.0])) == pytest.approx(np.sqrt(8.5))
    assert rho_norm((0, 0), w, 3.0, np.array([2.0])) == pytest.approx(2 * rho_norm((0, 0), w, 3.0, np.array([1.0])))


def test_reducing_closed_forms(grid2, rng):
    C = _spd(rng, 2)
    A = reducing_matrix(Rect(1, 0, 0, 0), constant_weight(grid2, C), 2.0)
    assert A.method == "closed_form_p2"
    assert np.allclose(A.matrix, matrix_power(C, 0.5), atol=1e-12)
    for p in (1.5, 3.0):
        assert np.allclose(reducing_matrix(Rect(0, 0, 0, 0), constant_weight(grid2, np.eye(2)), p).matrix, np.eye(2))
    w = _two_cells([1.0, 8.0])
    assert reducing_matrix((0, 0), w, 3.0).matrix[0, 0] == pytest.approx(4.5 ** (1 / 3))


def test_reducing_john_two_cells():
    W = _two_cells([np.diag([1.0, 1.0]), np.diag([16.0, 1.0])])
    R = reducing_matrix((0, 0), W, 3.0)
    assert R.method == "john_ellipsoid"
    assert np.allclose(R.matrix, R.matrix.T)
    chk = dense_direction_check(R.matrix, rho_oracle(W.values, 3.0), 2, slack=1.05, n=2048)
    assert chk.ok, (chk.lower, chk.upper)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_reducing_field_contract(p):
    inst = generate_instance(CorpusSpec(seed=2, L=3, d=2, p=p), 0)
    rf = reducing_field(inst.W, p)
    assert np.all(rf.lower >= 1 - 1e-9) and np.all(rf.slack <= 1.05)


def test_conjugate_weight():
    w = _two_cells([8.0, 2.0])
    assert w.conjugate(3.0).values[0, 0, 0] == pytest.approx(8 ** -0.5)
    W = _two_cells([np.diag([2.0, 5.0]), np.eye(2)])
    assert np.allclose(W.conjugate(2.0).values[0], np.diag([0.5, 0.2]))


@given(seeds, st.sampled_from([1.5, 2.0, 3.0]))
def test_involution(seed, p):
    W = generate_instance(CorpusSpec(seed=seed, L=2, d=2, p=p, count=1), 0).W
    back = W.conjugate(p).conjugate(p / (p - 1))
    assert np.allclose(back.values, W.values, atol=1e-10 * np.abs(W.values).max())


def test_averaging_constant_examples(grid2, rng):
    assert averaging_constant(Rect(0, 0, 0, 0), constant_weight(grid2, _spd(rng, 2)), 3.0) == pytest.approx(1.0)
    assert averaging_constant((0, 0), _two_cells([1.0, 4.0]), 2.0) == pytest.approx(25 / 16)


def test_characteristic_examples(grid2, rng):
    W = constant_weight(grid2, _spd(rng, 2))
    for p in (1.5, 2.0, 3.0):
        assert ap_characteristic(W, p).value == pytest.approx(1.0, abs=1e-9)
    w = _two_cells([1.0, 4.0])
    assert ap_characteristic(w, 2.0, "one_param").value == pytest.approx(25 / 16)
    assert exact_scalar_characteristic([Fraction(1), Fraction(4)]) == Fraction(25, 16)


@given(seeds, st.sampled_from([1.5, 2.0, 3.0]))
def test_reducing_form_floor_and_oracle(seed, p):
    inst = generate_instance(CorpusSpec(seed=seed, L=2, d=2, p=p, count=1), 0)
    assert ap_characteristic(inst.W, p, "reducing_op_form").value >= 1 - 1e-9
    fast = ap_characteristic(inst.W, p, "dyadic").value
    assert fast == pytest.approx(integral_characteristic(inst.W.values, p, inst.grid), rel=1e-9)


def test_two_weight_variant_reduces_to_one_weight(shifted2, rng):
    inst = generate_instance(CorpusSpec(seed=4, L=3, d=2, p=3.0), 0)
    one = ap_characteristic(inst.W, 3.0).value
    two = ap_characteristic(inst.W, 3.0, "two_weight", inst.W.conjugate(3.0)).value
    assert two == pytest.approx(one, rel=1e-12)


def test_sliced_weight_examples():
    g = DyadicGrid(random_grid(3, 3))
    rng = np.random.default_rng(1)
    U = np.array([_spd(rng, 2) for _ in range(g.shape[0])])
    W = MatrixWeight(np.repeat(U[:, None], g.shape[1], axis=1), g)
    for p in (2.0, 3.0):
        # freezing axis 2 at an interval of a weight constant in x2 returns U
        WQ = sliced_weight(W, 2, (1, 0), p)
        assert np.allclose(WQ.values, U, atol=1e-9 * np.abs(U).max())
    V = generate_instance(CorpusSpec(seed=1, L=3, d=2, p=2.0), 0).W
    WQ = sliced_weight(V, 2, (1, 1), 2.0)
    leaves = V.grid.axes[1].leaves(1, 1)
    assert np.allclose(WQ.values, V.values[:, leaves].mean(axis=1), atol=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_recorded_comparability_constants(p):
    pp = p / (p - 1)
    for inst in generate_corpus(CorpusSpec(seed=5, L=3, d=2, p=p, count=8)):
        W = inst.W
        for I, J in [((0, 0), (0, 0)), ((1, 0), (1, 1)), ((2, 3), (1, 0))]:
            lo, hi = iterated_ratio(W, p, I, J)
            assert 1 / K["iterated"] <= lo <= hi <= K["iterated"]
        cW = ap_characteristic(W, p).value
        assert np.all(slice_characteristics(W, p, 1) <= cW * (1 + 1e-12))
        assert np.all(slice_characteristics(W, p, 2) <= cW * (1 + 1e-12))
        r = ap_characteristic(W.conjugate(p), pp).value ** (1 / pp) / cW ** (1 / p)
        assert 1 / K["involution"] <= r <= K["involution"]
        for R in (Rect(0, 0, 0, 0), Rect(1, 1, 2, 0)):
            CE = averaging_constant(R, W, p)
            A = reducing_matrix(R, W, p).matrix
            B = reducing_matrix(R, W.conjugate(p), pp).matrix
            r = np.linalg.norm(B @ A, 2) / CE ** (1 / p)
            assert 1 / K["averaging"] <= r <= K["averaging"]
            rep = lemma_checks(W, p, R)
            assert rep.inverse_ok, rep.witness
            assert max(rep.scalar_e_ratio, rep.scalar_matrix_ratio) <= K["scalar_lemma"]
            assert rep.reducing_vs_average <= K["reducing_vs_average"]


def test_lemma_constant_weight_and_scalar(grid2, rng):
    W = constant_weight(grid2, _spd(rng, 2))
    rep = lemma_checks(W, 3.0, Rect(0, 0, 0, 0))
    assert rep.inverse_vs_prime == pytest.approx(1.0, abs=1e-9)
    w = MatrixWeight(np.exp(rng.standard_normal(grid2.shape)), grid2)
    rep = lemma_checks(w, 3.0, Rect(0, 0, 0, 0))
    # d = 1: the scalar lemma holds with constant 1
    assert rep.scalar_e_ratio <= 1 + 1e-12 and rep.reducing_vs_average <= 1 + 1e-12


def test_lemma_inverse_corpus():
    for s in range(200):
        inst = generate_instance(CorpusSpec(seed=s, L=2, d=2, p=3.0, count=1), 0)
        assert lemma_checks(inst.W, 3.0, Rect(0, 0, 0, 0), n=32, seed=s).inverse_ok


def test_reverse_holder_examples():
    g = DyadicGrid(GridSpec.standard(1, 2))
    rep = reverse_holder_check(np.ones(g.shape), g, 2.0, 0.01)
    assert rep.ok and rep.worst_margin == pytest.approx(4.0)
    w = np.array([[1.0, 1.0], [4.0, 4.0]])
    rep = reverse_holder_check(w, g, 2.0, 0.03)
    assert rep.characteristic == pytest.approx(25 / 16) and rep.admissible and rep.ok
    rep = reverse_holder_check(w, g, 2.0, 0.05)
    assert not rep.admissible and not rep.ok


def test_reverse_holder_corpus():
    for s in range(200):
        inst = generate_instance(CorpusSpec(seed=s, L=3, d=1, p=2.0, amplitude=2.0, count=1), 0)
        char = ap_characteristic(inst.W, 2.0).value
        rep = reverse_holder_check(inst.W, None, 2.0, 0.9 / (16 * char))
        assert rep.admissible and rep.ok, s


def test_sign_select_examples():
    assert list(sign_select([[3, 4]])) == [1]
    assert list(sign_select([[1, 0], [-1, 0]])) == [1, -1]


def test_sign_select_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(10**4):
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 21))
        v = rng.standard_normal((k, d))
        s = sign_select(v)
        assert np.linalg.norm(v, axis=1).sum() <= d * np.linalg.norm(s @ v) * (1 + 1e-12)


@given(seeds, st.sampled_from([1.5, 2.0, 3.0]))
def test_hoelder_duality(seed, p):
    inst = generate_instance(CorpusSpec(seed=seed, L=2, d=2, p=p, count=1), 0)
    lhs, rhs = hoelder_check(inst.f.values, inst.g.values, inst.W, p)
    assert lhs <= rhs * (1 + 1e-9)


def test_weight_validation(grid1):
    with pytest.raises(WeightError):
        MatrixWeight(np.zeros(grid1.shape), grid1)
    W = constant_weight(grid1, np.diag([1.0, 2.0]))
    assert np.array_equal(MatrixWeight.from_json(W.to_json()).values, W.values)
