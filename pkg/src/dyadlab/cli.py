"""Command line interface."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import suites
from .corpus import WEIGHT_MODELS, CorpusSpec, generate_corpus, generate_instance
from .exponents import exponent_table
from .grid import check_weakly_sparse
from .haar import VectorField
from .harness import CSV_COLUMNS, ConfigError, load_baselines, probe_open_question, run, verify_inequality
from .operators import apply_operator, op_from_json, random_multiplier
from .sparse import multiplier_domination
from .weights import VARIANTS, MatrixWeight, ap_characteristic


def _corpus_options(f):
    f = click.option("--count", default=5, show_default=True, help="Number of instances.")(f)
    f = click.option("--amplitude", default=1.0, show_default=True, help="Weight amplitude.")(f)
    f = click.option("--model", type=click.Choice(WEIGHT_MODELS), default="random_log_field", show_default=True)(f)
    f = click.option("--p", "p", default="2", show_default=True, help="Exponent, e.g. 3/2.")(f)
    f = click.option("--d", "d", default=2, show_default=True)(f)
    f = click.option("--L", "L", default=4, show_default=True)(f)
    f = click.option("--seed", default=0, show_default=True)(f)
    return f


def _spec(seed, L, d, p, model, amplitude, count, axes=2):
    return CorpusSpec(seed=seed, L=L, d=d, p=float(exponent_table(p).p), weight_model=model, amplitude=amplitude, count=count, axes=axes)


def _emit(obj, out):
    text = json.dumps(obj, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


@click.group()
def main():
    """Dyadic matrix-weighted operator lab."""


@main.command()
@_corpus_options
@click.option("--axes", default=2, type=click.IntRange(1, 2), show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write JSON here instead of stdout.")
def gen(seed, L, d, p, model, amplitude, count, axes, out):
    """Generate a seeded corpus."""
    spec = _spec(seed, L, d, p, model, amplitude, count, axes)
    items = [
        {
            "seed": inst.seed,
            "amplitude": inst.amplitude,
            "characteristic": inst.characteristic,
            "regenerations": inst.regenerations,
            "W": inst.W.to_json(),
            "f": inst.f.to_json(),
        }
        for inst in generate_corpus(spec)
    ]
    _emit({"spec": spec.to_json(), "instances": items}, out)


@main.command()
@click.option("--weight", "weight_path", type=click.Path(exists=True, dir_okay=False), help="MatrixWeight JSON.")
@_corpus_options
@click.option("--variant", type=click.Choice(VARIANTS), default="dyadic", show_default=True)
def char(weight_path, seed, L, d, p, model, amplitude, count, variant):
    """Ap characteristic of a weight file or of generated instances."""
    pf = float(exponent_table(p).p)
    if weight_path:
        W = MatrixWeight.from_json(Path(weight_path).read_text())
        ws = [W]
    else:
        ws = [inst.W for inst in generate_corpus(_spec(seed, L, d, p, model, amplitude, count))]
    for W in ws:
        V = W.conjugate(pf) if variant == "two_weight" else None
        click.echo(f"{ap_characteristic(W, pf, variant, V).value:.12g}")


@main.command()
@click.option("--op", "op_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Operator JSON.")
@click.option("--field", "field_path", required=True, type=click.Path(exists=True, dir_okay=False), help="VectorField JSON.")
@click.option("--out", type=click.Path(dir_okay=False))
def apply(op_path, field_path, out):
    """Apply a serialized operator to a serialized field."""
    op = op_from_json(Path(op_path).read_text())
    f = VectorField.from_json(Path(field_path).read_text())
    _emit(apply_operator(op, f).to_json(), out)


@main.command()
@_corpus_options
@click.option("--two-weight", is_flag=True, help="Use the two-weight theorem.")
def sparse(seed, L, d, p, model, amplitude, count, two_weight):
    """Sparse domination of random multipliers on generated instances."""
    spec = _spec(seed, L, d, p, model, amplitude, count)
    for k in range(spec.count):
        inst = generate_instance(spec, k)
        sigma = random_multiplier(inst.grid, np.random.default_rng(inst.seed))
        rep = multiplier_domination(sigma, inst.f, inst.g, inst.W, spec.p, U=inst.U if two_weight else None)
        ok = check_weakly_sparse(rep.family, inst.grid).ok
        click.echo(f"seed={inst.seed} family={len(rep.family)} c={rep.c:g} ratio={rep.ratio:.6g} sparse={'yes' if ok else 'NO'}")


@main.command()
@click.argument("ident", type=click.Choice(sorted(suites.TABLE)))
@_corpus_options
@click.option("--baselines", "baseline_path", type=click.Path(dir_okay=False), help="Baseline JSON (default: packaged).")
def verify(ident, seed, L, d, p, model, amplitude, count, baseline_path):
    """Verify one inequality id; exit 1 on any FAIL."""
    entry = suites.TABLE[ident]
    spec = _spec(seed, L, d, p, model, amplitude, count, entry.axes)
    try:
        base = load_baselines(baseline_path)
    except ConfigError as e:
        raise click.ClickException(str(e))
    try:
        reports = verify_inequality(ident, generate_corpus(spec), spec, base)
    except ConfigError as e:
        raise click.ClickException(str(e))
    click.echo(",".join(CSV_COLUMNS))
    for r in reports:
        click.echo(",".join(str(v) for v in r.row().values()))
    if any(not r.passed for r in reports):
        sys.exit(1)


@main.command()
@click.argument("which", type=click.Choice(["Q1", "Q2"]))
@click.option("--p", "p", default="3", show_default=True)
@click.option("--d", "d", default=2, show_default=True)
@click.option("--L", "L", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--count", default=5, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV output path.")
def probe(which, p, d, L, seed, count, out):
    """Vector-valued maximal ratio across an amplitude sweep."""
    spec = CorpusSpec(seed=seed, L=L, d=d, count=count, axes=1)
    try:
        rep = probe_open_question(which, p, spec)
    except ValueError as e:
        raise click.ClickException(str(e))
    if out:
        Path(out).write_text(rep.to_csv())
    for a, c, r in rep.curve:
        click.echo(f"amplitude={a:g} characteristic={c:.6g} ratio={r:.6g}")
    click.echo(f"effective exponent (log-log slope) = {rep.slope:.4g}")


@main.command()
@click.argument("p")
def exponents(p):
    """Exact exponent table at p."""
    try:
        t = exponent_table(p)
    except (ValueError, ZeroDivisionError) as e:
        raise click.ClickException(str(e))
    click.echo(json.dumps(t.to_json(), indent=1))


@main.command("run")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--jobs", default=1, show_default=True, help="Worker processes.")
@click.option("--out", type=click.Path(file_okay=False), help="Run directory (default: under $DYADLAB_RUN_ROOT).")
@click.option("--freeze", is_flag=True, help="Write baselines from this run instead of checking.")
def run_cmd(config, jobs, out, freeze):
    """Execute the suites of a JSON config."""
    try:
        out_dir, code = run(Path(config), out, jobs, freeze)
    except ConfigError as e:
        raise click.ClickException(str(e))
    click.echo(str(out_dir))
    sys.exit(code)


if __name__ == "__main__":
    main()
