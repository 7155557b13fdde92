"""Acceptance criteria 1 to 10; each test prints one PASS/FAIL line."""

import csv
import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from dyadlab import oracle, suites
from dyadlab.corpus import CorpusSpec, generate_corpus, generate_instance
from dyadlab.grid import DyadicGrid, GridSpec, Rect, check_weakly_sparse, random_grid, unflat_index
from dyadlab.haar import VectorField, analyze, l2_norm, pairing, synthesize
from dyadlab.harness import run, verify_inequality
from dyadlab.operators import (
    ParaproductSymbol,
    adjoint_kind,
    apply_operator,
    assemble,
    haar_multiplier,
    haar_shift,
    paraproduct,
    random_bmo_symbol,
    random_multiplier,
    random_shift,
    weighted_matrix,
)
from dyadlab.sparse import multiplier_domination, one_param_shifted_sparse, shift_domination
from dyadlab.weights import (
    MatrixWeight,
    ap_characteristic,
    constant_weight,
    iterated_ratio,
    lemma_checks,
    reducing_field,
    reverse_holder_check,
    sign_select,
    slice_characteristics,
)
from test_weights import K

SEEDS = 50
CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.json"
DEFAULT = CorpusSpec(seed=0, L=4, d=2, count=SEEDS)
SPARSE_IDS = ("sparse_multiplier_one_weight", "sparse_multiplier_two_weight", "sparse_shift_one_weight", "sparse_shift_two_weight")
COMPLEXITIES = [(i, j) for i in [(0, 0), (1, 0), (1, 2), (2, 2)] for j in [(0, 0), (0, 1), (2, 1), (2, 2)]]


def _spec(p, **kw):
    return CorpusSpec(**{**DEFAULT.to_json(), "p": float(p), **kw})


def _cells(grid):
    n1, n2 = (ax.N - 1 for ax in grid.axes)
    return [(a, b) for a in range(n1) for b in range(n2)]


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    out, code = run(CONFIG, tmp_path_factory.mktemp("default"))
    with open(out / "reports.csv") as fh:
        return list(csv.DictReader(fh)), code


def test_c01_haar_exactness(verdict):
    worst_rt = worst_parseval = worst_orth = 0.0
    for s in range(SEEDS):
        g = DyadicGrid(random_grid(s, 4, 2))
        f = VectorField(np.random.default_rng(s).standard_normal(g.shape + (2,)), g)
        spec = analyze(f)
        worst_rt = max(worst_rt, np.abs(synthesize(spec).values - f.values).max(), np.abs(analyze(synthesize(spec)).full - spec.full).max())
        worst_parseval = max(worst_parseval, abs(spec.energy() - l2_norm(f) ** 2) / l2_norm(f) ** 2)
        for ax in g.axes:
            worst_orth = max(worst_orth, np.abs(ax.basis @ ax.basis.T / ax.N - np.eye(ax.N)).max())
    ok = worst_rt <= 1e-12 and worst_parseval <= 1e-12 and worst_orth <= 1e-12
    verdict(1, ok, f"round trip {worst_rt:.1e}, Parseval {worst_parseval:.1e}, orthonormality {worst_orth:.1e}")


def test_c02_reducing_contract(verdict):
    bad = []
    worst = 0.0
    for p in (1.5, 3.0):
        for k, inst in enumerate(generate_corpus(_spec(p))):
            rf = reducing_field(inst.W, p)
            if not (np.all(rf.lower >= 1 - 1e-9) and np.all(rf.slack <= 1.05)):
                bad.append(("certificate", p, k))
            # independent oracle: every cell of the first instances, a sample of the rest
            cells = _cells(inst.grid)
            if k >= 5:
                pick = np.random.default_rng(k).choice(len(cells) - 1, 95, replace=False) + 1
                cells = [cells[0]] + [cells[t] for t in pick]
            table = oracle.rho_oracle_table(inst.W.values, p)
            for a, b in cells:
                mask = inst.grid.cell_mask(Rect(*unflat_index(a), *unflat_index(b)))
                chk = oracle.dense_direction_check(rf.matrices[a, b], table(mask), 2, slack=1.05, n=2048)
                worst = max(worst, chk.upper)
                if not chk.ok:
                    bad.append(("oracle", p, k, a, b))
    # closed forms: d = 1 scalar power and p = 2 square root
    for spec, p in ((_spec(3.0, d=1, count=10), 3.0), (_spec(2.0, count=10), 2.0)):
        for k, inst in enumerate(generate_corpus(spec)):
            rf = reducing_field(inst.W, p)
            table = oracle.rho_oracle_table(inst.W.values, p)
            for a, b in _cells(inst.grid)[::7]:
                mask = inst.grid.cell_mask(Rect(*unflat_index(a), *unflat_index(b)))
                A = rf.matrices[a, b]
                rho = table(mask)
                # the closed form is exact: |Ae| = rho(e)
                U = np.random.default_rng(k).standard_normal((256, spec.d))
                r = np.linalg.norm(U @ A.T, axis=1) / rho(U)
                if np.abs(r - 1).max() > 1e-9:
                    bad.append(("closed", p, k, a, b))
    verdict(2, not bad, f"worst upper slack {worst:.4f}; failures {bad[:3]}")


def test_c03_characteristic_floor(verdict):
    low = np.inf
    for p in (1.5, 2.0, 3.0):
        for inst in generate_corpus(_spec(p)):
            low = min(low, ap_characteristic(inst.W, p, "reducing_op_form").value)
    rng = np.random.default_rng(0)
    dev = 0.0
    for L in (2, 4):
        g = DyadicGrid(GridSpec.standard(L, 2))
        A = rng.standard_normal((2, 2))
        W = constant_weight(g, A @ A.T + np.eye(2))
        for p in (1.5, 2.0, 3.0):
            dev = max(dev, abs(oracle.integral_characteristic(W.values, p, g) - 1.0))
    verdict(3, low >= 1 - 1e-9 and dev <= 1e-9, f"min reducing-form characteristic {low:.6f}, constant weight deviation {dev:.1e}")


def test_c04_p2_identity(verdict):
    spec = _spec(2.0)
    reps = verify_inequality("p2_square_identity", generate_corpus(spec), spec)
    worst = max(abs(r.ratio - 1.0) for r in reps)
    verdict(4, len(reps) == SEEDS and worst <= 1e-10, f"{len(reps)} instances, worst relative gap {worst:.1e}")


def _family_ok(fam, grid):
    if not check_weakly_sparse(fam, grid).ok:
        return False
    if len(fam) <= 12:
        ok, _ = oracle.brute_force_carleson_check([grid.cell_mask(R) for R in fam.cells], fam.delta)
        return ok
    return True


def test_c05_sparse_soundness(verdict):
    bad, n, small = [], 0, 0
    for p in (1.5, 2.0, 3.0):
        spec = _spec(p, L=3)
        for k, inst in enumerate(generate_corpus(spec)):
            rng = np.random.default_rng(inst.seed)
            sigma = random_multiplier(inst.grid, rng)
            i, j = COMPLEXITIES[k % len(COMPLEXITIES)]
            K = random_shift(inst.grid, i, j, rng)
            fams = [multiplier_domination(sigma, inst.f, inst.g, inst.W, p).family,
                    multiplier_domination(sigma, inst.f, inst.g, inst.W, p, U=inst.U).family,
                    shift_domination(K, inst.f, inst.g, inst.W, p).family,
                    shift_domination(K, inst.f, inst.g, inst.W, p, U=inst.U).family]
            for fam in fams:
                n += 1
                small += len(fam) <= 12
                if not _family_ok(fam, inst.grid):
                    bad.append((p, k))
    one = _spec(2.0, L=5, axes=1)
    for k, inst in enumerate(generate_corpus(one)):
        i, j = suites.SPARSE_ONE_PARAM_COMPLEXITIES[k % 9]
        _, rep = one_param_shifted_sparse((0, 0), inst.f, inst.W, 2.0, i, j)
        n += 1
        small += len(rep.family) <= 12
        if not _family_ok(rep.family, inst.grid):
            bad.append(("one_param", k))
    verdict(5, not bad, f"{n} families, {small} also brute-force Carleson checked; failures {bad[:3]}")


def test_c06_sparse_domination(default_run, verdict):
    rows, _ = default_run
    mine = [r for r in rows if r["inequality_id"] in SPARSE_IDS]
    per = {(r["inequality_id"], r["p"]) for r in mine}
    fails = [r for r in mine if r["pass"] != "PASS"]
    moved = 0
    for s in range(SEEDS):
        inst = generate_instance(_spec(2.0, L=3), s)
        rng = np.random.default_rng(s)
        sigma = random_multiplier(inst.grid, rng)
        K = random_shift(inst.grid, *COMPLEXITIES[s % len(COMPLEXITIES)], rng)
        lam = float(10.0 ** rng.uniform(-3, 3))
        for U in (None, inst.U):
            a = multiplier_domination(sigma, inst.f, inst.g, inst.W, 2.0, U=U).family.cells
            b = multiplier_domination(sigma, inst.f * lam, inst.g, inst.W, 2.0, U=U).family.cells
            c = shift_domination(K, inst.f, inst.g, inst.W, 2.0, U=U).family.cells
            d = shift_domination(K, inst.f * lam, inst.g, inst.W, 2.0, U=U).family.cells
            moved += (a != b) + (c != d)
    ok = len(mine) == len(SPARSE_IDS) * 3 * SEEDS and len(per) == 12 and not fails and moved == 0
    verdict(6, ok, f"{len(mine)} rows, {len(fails)} above baseline, {moved} families changed under scaling")


def test_c07_bound_ratio_regression(default_run, verdict):
    rows, code = default_run
    fails = [(r["inequality_id"], r["p"], r["seed"], r["ratio"], r["baseline"]) for r in rows if r["pass"] != "PASS"]
    ids = {r["inequality_id"] for r in rows}
    expected = {i for i in suites.DEFAULT_SUITE if any(suites.TABLE[i].applies(Fraction(p)) for p in ("3/2", "2", "3"))}
    ok = code == 0 and not fails and ids == expected
    verdict(7, ok, f"{len(rows)} rows over {len(ids)} ids, {len(fails)} failures {fails[:3]}")


def test_c08_lemma_suite(verdict):
    bad = []
    for s in range(200):
        inst = generate_instance(_spec(3.0, L=2, count=1), s)
        if not lemma_checks(inst.W, 3.0, Rect(0, 0, 0, 0), n=32, seed=s).inverse_ok:
            bad.append(("inverse", s))
    for p in (1.5, 2.0, 3.0):
        for inst in generate_corpus(CorpusSpec(seed=5, L=3, d=2, p=p, count=8)):
            W = inst.W
            for I, J in [((0, 0), (0, 0)), ((1, 0), (1, 1)), ((2, 3), (1, 0))]:
                lo, hi = iterated_ratio(W, p, I, J)
                if not 1 / K["iterated"] <= lo <= hi <= K["iterated"]:
                    bad.append(("iterated", p, inst.seed))
            cW = ap_characteristic(W, p).value
            for axis in (1, 2):
                if np.any(slice_characteristics(W, p, axis) > cW * (1 + 1e-12)):
                    bad.append(("sliced", p, inst.seed))
    for s in range(200):
        inst = generate_instance(CorpusSpec(seed=s, L=3, d=1, p=2.0, amplitude=2.0, count=1), 0)
        char = ap_characteristic(inst.W, 2.0).value
        rep = reverse_holder_check(inst.W, None, 2.0, 0.9 / (16 * char))
        if rep.admissible and not rep.ok:
            bad.append(("reverse_holder", s))
    rng = np.random.default_rng(0)
    for _ in range(10**4):
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 21))
        v = rng.standard_normal((k, d))
        if np.linalg.norm(v, axis=1).sum() > d * np.linalg.norm(sign_select(v) @ v) * (1 + 1e-12):
            bad.append(("sign_select", d, k))
    verdict(8, not bad, f"failures {bad[:3]}")


def test_c09_oracle_agreement(verdict):
    fast = svd = adj = 0.0
    for s in range(20):
        g = DyadicGrid(random_grid(s, 3, 2))
        rng = np.random.default_rng(s)
        f = VectorField(rng.standard_normal(g.shape + (2,)), g)
        h = VectorField(rng.standard_normal(g.shape + (2,)), g)
        sig = random_multiplier(g, rng)
        fast = max(fast, np.abs(haar_multiplier(sig, f).values - oracle.multiplier(sig.values, f.values, g)).max())
        i, j = COMPLEXITIES[s % len(COMPLEXITIES)]
        Ksh = random_shift(g, i, j, rng)
        fast = max(fast, np.abs(haar_shift(Ksh, f).values - oracle.shift(i, j, Ksh.coeffs, f.values, g)).max())
        a = random_bmo_symbol(g, rng)
        for kind in ("11", "00", "01", "10"):
            P = ParaproductSymbol(a, kind, g)
            Pf = paraproduct(P, f)
            fast = max(fast, np.abs(Pf.values - oracle.paraproduct(kind, a, f.values, g)).max())
            adj = max(adj, abs(pairing(Pf, h) - pairing(f, paraproduct(ParaproductSymbol(a, adjoint_kind(kind), g), h))))
        inst = generate_instance(_spec(2.0, L=2, count=1), s)
        op = random_shift(inst.grid, i if max(i) <= 1 else (1, 1), (0, 1), rng)
        T = assemble(lambda x: apply_operator(op, x), inst.grid, 2)
        mine = np.linalg.norm(weighted_matrix(T, inst.U, inst.W, 2.0), 2)
        ref, _ = oracle.brute_force_operator_norm(T, inst.U.values, inst.W.values, 2.0)
        svd = max(svd, abs(mine - ref) / ref)
    ok = fast <= 1e-12 and svd <= 1e-9 and adj <= 1e-12
    verdict(9, ok, f"fast path {fast:.1e}, SVD {svd:.1e}, adjoint {adj:.1e}")


def test_c10_determinism(tmp_path, verdict):
    cfg = json.loads(CONFIG.read_text())
    cfg["corpus"] = {**cfg["corpus"], "count": 3}
    a, _ = run(cfg, tmp_path / "a")
    b, _ = run(cfg, tmp_path / "b")
    body_a, body_b = (a / "reports.csv").read_text(), (b / "reports.csv").read_text()
    n = len(body_a.splitlines()) - 1
    verdict(10, body_a == body_b and n > 0, f"{n} rows, bodies identical: {body_a == body_b}")
