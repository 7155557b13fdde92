import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadlab import oracle
from dyadlab.corpus import CorpusSpec, generate_instance
from dyadlab.grid import DyadicGrid, Rect, random_grid
from dyadlab.haar import VectorField, bicancellative_part, coefficient_array, from_coefficients, haar_function, l2_norm
from dyadlab.operators import lp_norm
from dyadlab.square import (
    SquareFunctionSpec,
    evaluate,
    joint_vs_slice_ratio,
    mixed_operator,
    shifted_square_function,
    square_function,
)
from dyadlab.weights import MatrixWeight, constant_weight, reducing_field

seeds = st.integers(0, 10**6)
ps = st.sampled_from([1.5, 2.0, 3.0])
cx = st.tuples(st.integers(0, 2), st.integers(0, 2))


def _inst(seed, p, axes=2, L=3):
    return generate_instance(CorpusSpec(seed=seed, L=L, d=2, p=p, count=1, axes=axes), 0)


def test_identity_weight_reduces_to_plain(shifted2, rng):
    f = bicancellative_part(VectorField(rng.standard_normal(shifted2.shape + (2,)), shifted2))
    I = constant_weight(shifted2, np.eye(2))
    S = square_function(f)
    for fam in ("S_W", "St_W"):
        assert np.allclose(square_function(f, fam, I, 3.0), S, atol=1e-12)
    assert lp_norm(S, 2.0) == pytest.approx(l2_norm(f), rel=1e-12)


def test_single_haar_function(shifted2):
    R = Rect(1, 0, 2, 1)
    f = VectorField(haar_function(shifted2, R)[..., None], shifted2)
    expect = shifted2.cell_mask(R) / np.sqrt(float(R.measure))
    assert np.allclose(square_function(f), expect, atol=1e-12)


@given(seeds)
def test_p2_identity_and_oracle(seed):
    inst = _inst(seed, 2.0)
    SW = square_function(inst.f, "S_W", inst.W, 2.0)
    St = square_function(inst.f, "St_W", inst.W, 2.0)
    assert lp_norm(SW, 2) == pytest.approx(lp_norm(St, 2), rel=1e-10)
    assert np.allclose(SW, oracle.square_p2(inst.f.values, inst.W.values, inst.grid, False), atol=1e-12)
    assert np.allclose(St, oracle.square_p2(inst.f.values, inst.W.values, inst.grid, True), atol=1e-12)


@given(seeds, ps, st.sampled_from([1, 2]))
def test_shift_zero_collapses(seed, p, axes):
    inst = _inst(seed, p, axes)
    for fam in ("S", "S_W", "St_W"):
        plain = square_function(inst.f, fam, inst.W, p)
        assert np.allclose(shifted_square_function(inst.f, 0, 0, fam, inst.W, p), plain, atol=1e-12)


@given(seeds, ps, cx, cx)
def test_shifted_forms_agree_and_star(seed, p, i, j):
    inst = _inst(seed, p)
    for fam in ("S", "S_W", "St_W"):
        a = shifted_square_function(inst.f, i, j, fam, inst.W, p, form="prefactor")
        b = shifted_square_function(inst.f, i, j, fam, inst.W, p, form="sum")
        assert np.allclose(a, b, atol=1e-12)
        star = shifted_square_function(inst.f, i, j, fam, inst.W, p, starred=True)
        assert np.all(star <= a + 1e-12)


@given(seeds, st.integers(0, 2), st.integers(0, 2))
def test_one_parameter_shifted_forms(seed, i, j):
    inst = _inst(seed, 3.0, axes=1, L=4)
    a = shifted_square_function(inst.f, i, j, "S_W", inst.W, 3.0)
    b = shifted_square_function(inst.f, i, j, "S_W", inst.W, 3.0, form="sum")
    assert np.allclose(a, b, atol=1e-12)


@given(seeds, ps)
def test_homogeneity_and_coefficient_monotonicity(seed, p):
    inst = _inst(seed, p)
    rng = np.random.default_rng(seed)
    C = coefficient_array(inst.f)
    C2 = C * (rng.random(C.shape[:2]) < 0.6)[..., None]
    f, h = from_coefficients(C, inst.grid), from_coefficients(C2, inst.grid)
    for spec in (SquareFunctionSpec("S_W", p), SquareFunctionSpec("St_W", p), SquareFunctionSpec("S_W", p, (1, 0), (0, 1))):
        base = evaluate(spec, f, inst.W)
        assert np.allclose(evaluate(spec, f * -3.0, inst.W), 3.0 * base, atol=1e-11)
        assert np.all(evaluate(spec, h, inst.W) <= base + 1e-12)


def test_mixed_identity_weight(shifted2, rng):
    g = shifted2
    f = VectorField(rng.standard_normal(g.shape + (2,)), g)
    a1, a2 = g.axes
    X = np.einsum("ax,by,xyd->abd", a1.haar, a2.averaging, f.values) / 64
    val = np.linalg.norm(X, axis=-1)
    m = val[:, a2.leaf_chain].max(axis=-1)
    expect = np.sqrt(a1.averaging[:7].T @ m**2)
    assert np.allclose(mixed_operator("SMt", f, None), expect, atol=1e-12)
    I = constant_weight(g, np.eye(2))
    for kind in ("SMt", "SiM", "StMt", "SjSt"):
        assert np.allclose(mixed_operator(kind, f, I, 3.0), mixed_operator(kind, f, None), atol=1e-12)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_mixed_constant_in_second_variable(p):
    g = DyadicGrid(random_grid(9, 3))
    rng = np.random.default_rng(2)
    A = rng.standard_normal((8, 2, 2))
    U = np.einsum("xab,xcb->xac", A, A) + 0.3 * np.eye(2)
    W = MatrixWeight(np.repeat(U[:, None], 8, axis=1), g)
    u = rng.standard_normal((8, 2))
    f = VectorField(np.repeat(u[:, None], 8, axis=1), g)
    W1 = W.slice(1, 0)
    one = square_function(VectorField(u, W1.grid), "S_W", W1, p)
    out = mixed_operator("SMt", f, W, p)
    assert np.allclose(out, one[:, None] * np.ones((1, 8)), rtol=1e-9, atol=1e-12)


@given(seeds, ps)
def test_mixed_collapse_and_mirror(seed, p):
    inst = _inst(seed, p)
    f, W = inst.f, inst.W
    assert np.array_equal(mixed_operator("SM", f, W, p), mixed_operator("SiM", f, W, p, 0))
    assert np.array_equal(mixed_operator("MS", f, W, p), mixed_operator("MSi", f, W, p, 0))
    for k in ("MtS", "StSj", "MtSt"):
        assert np.all(np.isfinite(mixed_operator(k, f, W, p, 1)))


def test_joint_vs_slice_comparability():
    for p in (2.0, 3.0):
        inst = _inst(4, p)
        lo, hi = joint_vs_slice_ratio(inst.W, p)
        assert 0 < lo <= hi < np.inf
        assert hi / lo <= 4.0


def test_spec_validation():
    with pytest.raises(ValueError):
        SquareFunctionSpec("Q")
    with pytest.raises(ValueError):
        SquareFunctionSpec("S", mixed="XX")
    assert SquareFunctionSpec("S̃_W", mixed="SM̃").mixed == "SMt"
