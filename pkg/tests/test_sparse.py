from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadlab.corpus import CorpusSpec, generate_instance
from dyadlab.grid import DyadicGrid, GridSpec, Rect, SparseFamily, check_dyadically_sparse, check_weakly_sparse
from dyadlab.harness import load_baselines
from dyadlab.haar import VectorField, haar_function
from dyadlab.operators import random_multiplier, random_shift
from dyadlab.oracle import brute_force_carleson_check
from dyadlab.sparse import (
    biparameter_sparse_select,
    multiplier_domination,
    one_param_shifted_sparse,
    shift_domination,
    sparse_form_eval,
    sparse_positive_operator,
)
from dyadlab.square import square_function
from dyadlab.weights import MatrixWeight, constant_weight

seeds = st.integers(0, 10**6)
ps = st.sampled_from([1.5, 2.0, 3.0])


def _inst(seed, p, L=3, axes=2):
    return generate_instance(CorpusSpec(seed=seed, L=L, d=2, p=p, count=1, axes=axes), 0)


def _check_family(fam, grid):
    rep = check_weakly_sparse(fam, grid)
    assert rep.ok, rep
    if len(fam) <= 12:
        ok, _ = brute_force_carleson_check([grid.cell_mask(R) for R in fam.cells], fam.delta)
        assert ok


def test_tiny_single_coefficients_give_root(grid2):
    top = Rect(0, 0, 0, 0)
    f = VectorField(1e-9 * haar_function(grid2, top)[..., None], grid2)
    Phi = square_function(f)
    fam, ladder = biparameter_sparse_select(Phi, Phi, grid2)
    assert fam.cells == [top] and ladder.c == 2.0
    assert sparse_form_eval(fam, Phi, Phi) == pytest.approx(1e-18)


def test_sparse_form_examples(grid2):
    R = Rect(1, 0, 1, 1)
    ones = np.ones(grid2.shape)
    assert sparse_form_eval(SparseFamily([], [], Fraction(1, 4), grid2), ones, ones) == 0.0
    fam = SparseFamily([R], [grid2.cell_mask(R)], 1, grid2)
    assert sparse_form_eval(fam, ones, ones) == pytest.approx(float(R.measure))
    rng = np.random.default_rng(0)
    A, B = rng.random(grid2.shape), rng.random(grid2.shape)
    assert sparse_form_eval(fam, 2 * A, 3 * B) == pytest.approx(6 * sparse_form_eval(fam, A, B))


def test_delta_range(grid2):
    ones = np.ones(grid2.shape)
    with pytest.raises(ValueError):
        biparameter_sparse_select(ones, ones, grid2, Fraction(1, 2))


@given(seeds, ps, st.floats(0.01, 100.0))
def test_multiplier_selection_sound_and_scale_free(seed, p, lam):
    inst = _inst(seed, p)
    sigma = random_multiplier(inst.grid, np.random.default_rng(seed))
    rep = multiplier_domination(sigma, inst.f, inst.g, inst.W, p)
    _check_family(rep.family, inst.grid)
    assert np.isfinite(rep.ratio)
    scaled = multiplier_domination(sigma, inst.f * lam, inst.g, inst.W, p)
    assert scaled.family.cells == rep.family.cells
    two = multiplier_domination(sigma, inst.f, inst.g, inst.W, p, U=inst.U)
    _check_family(two.family, inst.grid)


@given(seeds, ps, st.tuples(st.integers(0, 2), st.integers(0, 2)), st.tuples(st.integers(0, 2), st.integers(0, 2)))
def test_shift_selection_sound(seed, p, i, j):
    inst = _inst(seed, p)
    K = random_shift(inst.grid, i, j, np.random.default_rng(seed))
    for U in (None, inst.U):
        rep = shift_domination(K, inst.f, inst.g, inst.W, p, U=U)
        _check_family(rep.family, inst.grid)
        assert np.isfinite(rep.ratio)


def test_selection_deterministic():
    inst = _inst(3, 2.0)
    sigma = random_multiplier(inst.grid, np.random.default_rng(0))
    a = multiplier_domination(sigma, inst.f, inst.g, inst.W, 2.0)
    b = multiplier_domination(sigma, inst.f, inst.g, inst.W, 2.0)
    assert a.family.cells == b.family.cells
    assert all(np.array_equal(x, y) for x, y in zip(a.family.witnesses, b.family.witnesses))


def test_one_param_support_outside():
    inst = _inst(1, 2.0, L=4, axes=1)
    vals = inst.f.values.copy()
    vals[inst.grid.axes[0].leaves(1, 0)] = 0.0
    fam, rep = one_param_shifted_sparse((1, 0), VectorField(vals, inst.grid), inst.W, 2.0, 1, 1)
    assert fam == [] and rep.lhs == 0.0 and rep.form == 0.0


def test_one_param_by_hand():
    g = DyadicGrid(GridSpec.standard(2, 1))
    W = MatrixWeight(np.ones(4), g)
    f = VectorField(haar_function(g, (0, 0)), g)
    fam, rep = one_param_shifted_sparse((0, 0), f, W, 2.0, 0, 0)
    assert fam == [(0, 0)]
    assert np.allclose(sparse_positive_operator(fam, W, 2.0, f), 1.0)
    assert rep.ratio == pytest.approx(1.0)


def test_sparse_positive_operator_examples(grid1, rng):
    f = VectorField(rng.standard_normal(grid1.shape + (2,)), grid1)
    I = constant_weight(grid1, np.eye(2))
    cells = [(0, 0), (2, 1)]
    out = sparse_positive_operator(cells, I, 3.0, f)
    ax = grid1.axes[0]
    expect = np.zeros(16)
    for k, m in cells:
        lv = ax.leaves(k, m)
        expect[lv] += np.mean(np.linalg.norm(f.values[lv], axis=-1)) ** 2
    assert np.allclose(out, np.sqrt(expect))
    assert np.all(sparse_positive_operator([], I, 3.0, f) == 0)
    assert np.allclose(sparse_positive_operator(cells, I, 3.0, f * 2.0), 2 * out)


def test_one_param_corpus_L6():
    base = load_baselines()["sparse_one_param|2|2"]
    for s in range(12):
        inst = generate_instance(CorpusSpec(seed=s, L=6, d=2, p=2.0, count=1, axes=1), 0)
        for i in range(3):
            for j in range(3):
                fam, rep = one_param_shifted_sparse((0, 0), inst.f, inst.W, 2.0, i, j)
                assert check_dyadically_sparse(fam, inst.grid.axes[0], Fraction(1, 2))
                assert check_weakly_sparse(rep.family, inst.grid)
                assert rep.ratio <= base * (1 + 1e-6)
