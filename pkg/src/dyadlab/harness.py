"""Verification runs: bound reports, frozen baselines, probes and the run driver."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import suites
from .corpus import CorpusSpec, Instance, generate_instance, instance_rng
from .exponents import as_fraction
from .haar import VectorField
from .operators import vector_maximal_ratio

log = logging.getLogger(__name__)

CSV_COLUMNS = ("inequality_id", "seed", "L", "d", "p", "lhs", "rhs_core", "characteristic", "ratio", "baseline", "pass")
PASS_TOL = 1e-6
HEADROOM = 1.2
RUN_ROOT_ENV = "DYADLAB_RUN_ROOT"
DEFAULT_BASELINES = "baselines.json"


class ConfigError(ValueError):
    pass


@dataclass
class BoundReport:
    inequality_id: str
    seed: int
    L: int
    d: int
    p: Fraction
    lhs: float
    rhs_core: float
    characteristic: dict
    ratio: float
    baseline: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.ratio <= self.baseline * (1 + PASS_TOL))

    def row(self) -> dict:
        ch = ";".join(f"{k}={v:.12g}" for k, v in sorted(self.characteristic.items()))
        return {
            "inequality_id": self.inequality_id,
            "seed": self.seed,
            "L": self.L,
            "d": self.d,
            "p": str(self.p),
            "lhs": f"{self.lhs:.12g}",
            "rhs_core": f"{self.rhs_core:.12g}",
            "characteristic": ch,
            "ratio": f"{self.ratio:.12g}",
            "baseline": f"{self.baseline:.12g}",
            "pass": "PASS" if self.passed else "FAIL",
        }


# ---------------------------------------------------------------------------
# baselines


def baseline_key(ident: str, p, d: int) -> str:
    return f"{ident}|{as_fraction(p)}|{d}"


def default_baseline_path():
    return resources.files("dyadlab").joinpath("data", DEFAULT_BASELINES)


def load_baselines(path=None) -> dict:
    src = default_baseline_path() if path is None else Path(path)
    try:
        text = src.read_text()
    except FileNotFoundError as e:
        raise ConfigError(f"baseline file missing: {src}") from e
    obj = json.loads(text)
    return obj.get("baselines", obj)


def freeze_baselines(reports: list[BoundReport], headroom: float = HEADROOM, version: str = "1") -> dict:
    """Per-(id, p, d) maximum ratio times headroom."""
    out: dict[str, float] = {}
    for r in reports:
        k = baseline_key(r.inequality_id, r.p, r.d)
        out[k] = max(out.get(k, 0.0), r.ratio)
    return {"version": version, "headroom": headroom, "baselines": {k: float(f"{v * headroom:.6g}") for k, v in sorted(out.items())}}


# ---------------------------------------------------------------------------
# verification


def _corpus_spec(spec: CorpusSpec, axes: int) -> CorpusSpec:
    return CorpusSpec(**{**spec.to_json(), "axes": axes})


def measure(ident: str, inst: Instance, p, k: int, L: int, d: int, baseline: float = np.inf) -> BoundReport:
    entry = suites.TABLE[ident]
    pf = as_fraction(p)
    exps = entry.exponents(suites.exponent_table(pf))
    m = entry.evaluate(inst, float(pf), k, exps)
    ratio = m.lhs / m.rhs_core if m.rhs_core > 0 else (0.0 if m.lhs == 0 else np.inf)
    return BoundReport(ident, inst.seed, L, d, pf, float(m.lhs), float(m.rhs_core), m.characteristics, float(ratio), baseline, m.note)


def verify_inequality(ident: str, corpus: list[Instance], spec: CorpusSpec, baselines: dict | None = None) -> list[BoundReport]:
    """One BoundReport per instance; baselines None means no frozen value (inf)."""
    if ident not in suites.TABLE:
        raise KeyError(f"unknown inequality id {ident!r}")
    entry = suites.TABLE[ident]
    if not entry.applies(as_fraction(spec.p)):
        return []
    base = np.inf
    if baselines is not None:
        key = baseline_key(ident, spec.p, spec.d)
        if key not in baselines:
            raise ConfigError(f"no baseline for {key}")
        base = baselines[key]
    return [measure(ident, inst, spec.p, k, spec.L, spec.d, base) for k, inst in enumerate(corpus)]


def _instance_job(args):
    spec, k, idents, baselines = args
    out = []
    insts = {}
    for ident in idents:
        entry = suites.TABLE[ident]
        if not entry.applies(as_fraction(spec.p)):
            continue
        if entry.axes not in insts:
            insts[entry.axes] = generate_instance(_corpus_spec(spec, entry.axes), k)
        base = np.inf
        if baselines is not None:
            key = baseline_key(ident, spec.p, spec.d)
            if key not in baselines:
                raise ConfigError(f"no baseline for {key}")
            base = baselines[key]
        out.append(measure(ident, insts[entry.axes], spec.p, k, spec.L, spec.d, base))
    return out


def run_suites(spec: CorpusSpec, idents, baselines: dict | None, jobs: int = 1) -> list[BoundReport]:
    """All ids over all instances; parallel over instances, results in (id, instance) order."""
    for ident in idents:
        if ident not in suites.TABLE:
            raise KeyError(f"unknown inequality id {ident!r}")
    tasks = [(spec, k, tuple(idents), baselines) for k in range(spec.count)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            per = list(ex.map(_instance_job, tasks))
    else:
        per = [_instance_job(t) for t in tasks]
    order = {ident: n for n, ident in enumerate(idents)}
    flat = [r for rows in per for r in rows]
    return sorted(flat, key=lambda r: order[r.inequality_id])


# ---------------------------------------------------------------------------
# open-question probes


@dataclass
class GrowthReport:
    which: str
    p: Fraction
    rows: list = field(default_factory=list)  # (amplitude, seed, characteristic, ratio)
    curve: list = field(default_factory=list)  # (amplitude, mean characteristic, mean ratio)
    slope: float = float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("which", "p", "amplitude", "seed", "characteristic", "ratio"))
        for a, s, c, r in self.rows:
            w.writerow((self.which, str(self.p), f"{a:.6g}", s, f"{c:.12g}", f"{r:.12g}"))
        return buf.getvalue()


PROBE_AMPLITUDES = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)


def probe_open_question(which: str, p, spec: CorpusSpec | None = None, amplitudes=PROBE_AMPLITUDES, n_functions: int = 4) -> GrowthReport:
    """Vector-valued maximal ratio across an amplitude sweep; exploratory, asserts nothing."""
    if which not in ("Q1", "Q2"):
        raise ValueError("which must be Q1 or Q2")
    pf = as_fraction(p)
    if which == "Q1" and pf <= 2:
        raise ValueError("Q1 concerns p > 2")
    variant = "modified" if which == "Q1" else "christ_goldberg"
    base = spec or CorpusSpec(count=5)
    rep = GrowthReport(which, pf)
    for a in amplitudes:
        s = CorpusSpec(**{**base.to_json(), "axes": 1, "p": float(pf), "amplitude": float(a)})
        cs, rs = [], []
        for k in range(s.count):
            inst = generate_instance(s, k)
            rng = instance_rng(inst.seed, k, 7)
            fs = [VectorField(rng.standard_normal(inst.grid.shape + (s.d,)), inst.grid) for _ in range(n_functions)]
            r = vector_maximal_ratio(variant, inst.W, float(pf), fs)
            rep.rows.append((float(a), inst.seed, inst.characteristic, r))
            cs.append(inst.characteristic)
            rs.append(r)
        rep.curve.append((float(a), float(np.mean(cs)), float(np.mean(rs))))
    x = np.log([c for _, c, _ in rep.curve])
    y = np.log([r for _, _, r in rep.curve])
    if np.ptp(x) > 0:
        rep.slope = float(np.polyfit(x, y, 1)[0])
    return rep


# ---------------------------------------------------------------------------
# run driver


def _check_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    out = {
        "seed": cfg.get("seed", 0),
        "L": cfg.get("L", 4),
        "d": cfg.get("d", 2),
        "p": cfg.get("p", ["3/2", 2, 3]),
        "suites": cfg.get("suites", list(suites.DEFAULT_SUITE)),
        "corpus": cfg.get("corpus", {}),
        "baseline_path": cfg.get("baseline_path"),
    }
    if not isinstance(out["seed"], int) or not isinstance(out["L"], int) or not isinstance(out["d"], int):
        raise ConfigError("seed, L and d must be integers")
    if not isinstance(out["p"], list):
        out["p"] = [out["p"]]
    if not isinstance(out["suites"], list) or not all(isinstance(s, str) for s in out["suites"]):
        raise ConfigError("suites must be a list of ids")
    bad = [s for s in out["suites"] if s not in suites.TABLE]
    if bad:
        raise ConfigError(f"unknown suites: {bad}")
    corpora = out["corpus"] if isinstance(out["corpus"], list) else [out["corpus"]]
    if not corpora or not all(isinstance(c, dict) for c in corpora):
        raise ConfigError("corpus must be an object or a non-empty list of objects")
    for c in corpora:
        sub = c.get("suites", [])
        if not isinstance(sub, list) or any(s not in suites.TABLE for s in sub):
            raise ConfigError(f"bad corpus suite list {sub}")
    out["corpus"] = corpora
    try:
        out["p"] = [as_fraction(p) for p in out["p"]]
    except (ValueError, TypeError, ZeroDivisionError) as e:
        raise ConfigError(f"bad exponent list: {e}") from e
    if any(p <= 1 for p in out["p"]):
        raise ConfigError("exponents must exceed 1")
    return out


def write_csv(reports: list[BoundReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def run(config: dict | str | Path, out_dir=None, jobs: int = 1, freeze: bool = False) -> tuple[Path, int]:
    """Execute the configured suites; returns (run directory, exit code)."""
    if isinstance(config, (str, Path)) and Path(config).exists():
        config = json.loads(Path(config).read_text())
    elif isinstance(config, str):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed config: {e}") from e
    cfg = _check_config(config)
    baselines = None if freeze else load_baselines(cfg["baseline_path"])
    if out_dir is None:
        root = Path(os.environ.get(RUN_ROOT_ENV, "runs"))
        tag = f"run-{cfg['seed']}-L{cfg['L']}-d{cfg['d']}"
        out_dir = root / tag
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    reports: list[BoundReport] = []
    for corpus in cfg["corpus"]:
        corpus = dict(corpus)
        # a corpus entry may narrow the suite list and override seed and depth
        narrow = corpus.pop("suites", cfg["suites"])
        idents = [s for s in cfg["suites"] if s in narrow]
        for p in cfg["p"]:
            try:
                spec = CorpusSpec(**{"count": 50, "seed": cfg["seed"], "L": cfg["L"], **corpus, "d": cfg["d"], "p": float(p)})
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad corpus {corpus}: {e}") from e
            reports.extend(run_suites(spec, idents, baselines, jobs))
    write_csv(reports, out_dir / "reports.csv")
    fails = sum(not r.passed for r in reports)
    manifest = {
        "config": {**cfg, "p": [str(p) for p in cfg["p"]]},
        "rows": len(reports),
        "failures": fails,
        "elapsed_seconds": round(time.time() - t0, 3),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "jobs": jobs,
    }
    if freeze:
        frozen = freeze_baselines(reports)
        (out_dir / "baselines.json").write_text(json.dumps(frozen, indent=1) + "\n")
        manifest["frozen_baselines"] = str(out_dir / "baselines.json")
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return out_dir, (1 if fails and not freeze else 0)
