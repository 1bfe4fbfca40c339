"""Synthetic decision makers and the learn-then-test experiment.

One experiment cell: draw ``mstar`` alternatives uniformly on ``[0, 1]^n``,
rank them with a ground-truth model, turn the ranking into consecutive
pairwise statements, fit a model, then compare the rankings both models give
to ``m`` fresh alternatives.

Random numbers come from numpy's PCG64.  Each cell seeds a
``SeedSequence([seed, model_id])`` and spawns two children, one for the
learning alternatives and one for the test alternatives, so neither draw
depends on the fitted form, on ``mstar`` (for the test set) or on the
order in which cells run.  Uniform reals are ``Generator.random`` doubles
(53 random bits scaled into [0, 1)).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Alternative, CriterionScale, LearningSet
from .errors import SpecError
from .learn import FitSpec, fit, problem_size
from .metrics import Ranking, consecutive_pairs, kendall_tau, spearman
from .polysos import poly_eval

ZOO_FILE = "zoo_v1.json"


# -- marginal families (all map [0, 1] onto [0, 1], non-decreasing) --------


def _sigmoid(alpha: float, beta: float) -> Callable:
    lo = 1.0 / (1.0 + math.exp(alpha * beta))
    hi = 1.0 / (1.0 + math.exp(-alpha * (1.0 - beta)))

    def f(x):
        return (1.0 / (1.0 + np.exp(-alpha * (np.asarray(x) - beta))) - lo) / (hi - lo)

    return f


def _exponential(gamma: float) -> Callable:
    if gamma == 0:
        return lambda x: np.asarray(x, dtype=float)
    return lambda x: np.expm1(gamma * np.asarray(x)) / math.expm1(gamma)


def _piecewise_linear(bps, vals) -> Callable:
    bps, vals = np.asarray(bps, float), np.asarray(vals, float)
    return lambda x: np.interp(x, bps, vals)


def bernstein_to_monomial(controls: Sequence[float]) -> np.ndarray:
    """Monomial coefficients of ``sum_i c_i * C(D, i) x^i (1 - x)^(D - i)``."""
    deg = len(controls) - 1
    out = np.zeros(deg + 1)
    for i, c in enumerate(controls):
        for k in range(deg - i + 1):
            out[i + k] += c * math.comb(deg, i) * math.comb(deg - i, k) * (-1) ** k
    return out


def _bernstein(controls) -> Callable:
    controls = np.asarray(controls, dtype=float)
    deg = len(controls) - 1

    def f(x):
        # de Casteljau; stable where the monomial form of degree 15 is not
        x = np.asarray(x, dtype=float)
        b = np.broadcast_to(controls, x.shape + (deg + 1,)).copy()
        t = x[..., None]
        for r in range(deg):
            b = b[..., :-1] * (1 - t) + b[..., 1:] * t
        return b[..., 0]

    return f


@dataclass(frozen=True)
class FamilyMarginal:
    family: str
    weight: float
    params: dict

    def shape(self) -> Callable:
        p = self.params
        if self.family == "sigmoid":
            return _sigmoid(p["alpha"], p["beta"])
        if self.family == "exponential":
            return _exponential(p["gamma"])
        if self.family == "piecewise_linear":
            return _piecewise_linear(p["breakpoints"], p["values"])
        if self.family == "polynomial":
            c = list(p["coeffs"])
            return lambda x: np.asarray(poly_eval(c, np.asarray(x, dtype=float)))
        if self.family == "bernstein":
            return _bernstein(p["controls"])
        raise SpecError(f"unknown marginal family {self.family!r}")

    def monomial(self) -> np.ndarray | None:
        """Coefficients for polynomial families, None otherwise."""
        if self.family == "polynomial":
            return np.asarray(self.params["coeffs"], dtype=float)
        if self.family == "bernstein":
            return bernstein_to_monomial(self.params["controls"])
        return None

    def __call__(self, x):
        return self.weight * self.shape()(x)


@dataclass(frozen=True)
class GroundTruthModel:
    """Additive model on ``[0, 1]^n`` whose marginals come from closed-form families."""

    id: int
    marginals: tuple[FamilyMarginal, ...]

    @property
    def n(self) -> int:
        return len(self.marginals)

    @property
    def families(self) -> list[str]:
        return [m.family for m in self.marginals]

    def criteria(self) -> list[CriterionScale]:
        return [CriterionScale(f"g{j + 1}", 0.0, 1.0) for j in range(self.n)]

    def scores(self, perf) -> np.ndarray:
        perf = np.atleast_2d(np.asarray(perf, dtype=float))
        if perf.shape[1] != self.n:
            raise ValueError(f"expected {self.n} columns, got {perf.shape[1]}")
        return sum(m(perf[:, j]) for j, m in enumerate(self.marginals))


@lru_cache(maxsize=None)
def _zoo_data() -> dict:
    text = resources.files("polyuta").joinpath("data", ZOO_FILE).read_text()
    return json.loads(text)


def model_zoo(model_id: int) -> GroundTruthModel:
    models = {m["id"]: m for m in _zoo_data()["models"]}
    if model_id not in models:
        raise SpecError(f"model id must be one of {sorted(models)}, got {model_id}")
    margs = []
    for m in models[model_id]["marginals"]:
        params = {k: v for k, v in m.items() if k not in ("family", "weight")}
        margs.append(FamilyMarginal(m["family"], float(m["weight"]), params))
    return GroundTruthModel(model_id, tuple(margs))


def zoo_ids() -> list[int]:
    return [m["id"] for m in _zoo_data()["models"]]


# -- experiment -------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    model_id: int
    seed: int
    mstar: int
    spec: FitSpec
    m: int = 1000
    tie_tol: float = 1e-9

    def validate(self) -> "ExperimentConfig":
        if not 2 <= self.mstar <= self.m:
            raise SpecError(f"mstar must lie in [2, m={self.m}], got {self.mstar}")
        if self.seed < 0:
            raise SpecError("seed must be non-negative")
        self.spec.validate()
        return self

    def streams(self) -> tuple[np.random.Generator, np.random.Generator]:
        learn_ss, test_ss = np.random.SeedSequence([self.seed, self.model_id]).spawn(2)
        return np.random.Generator(np.random.PCG64(learn_ss)), np.random.Generator(np.random.PCG64(test_ss))


@dataclass
class ExperimentResult:
    model_id: int
    seed: int
    form: str
    D: int
    k: int
    Dc: int
    mstar: int
    spearman: float
    kendall: float
    slack: float
    constraints: int
    variables: int
    seconds: float
    status: str = "optimal"

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


CSV_FIELDS = [
    "model_id", "seed", "form", "D", "k", "Dc", "mstar",
    "spearman", "kendall", "slack", "constraints", "variables", "seconds", "status",
]


def _ids(prefix: str, count: int) -> list[str]:
    width = len(str(count))
    return [f"{prefix}{i:0{width}d}" for i in range(1, count + 1)]


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    truth = model_zoo(cfg.model_id)
    learn_rng, test_rng = cfg.streams()
    spec = cfg.spec
    sizes = problem_size(cfg.mstar, truth.n, spec.pieces, spec.degree, spec.continuity)

    x_learn = learn_rng.random((cfg.mstar, truth.n))
    ids = _ids("a", cfg.mstar)
    reference = Ranking.from_scores(ids, truth.scores(x_learn), cfg.tie_tol)
    prefer, indiff = consecutive_pairs(reference)
    alts = [Alternative(i, row) for i, row in zip(ids, x_learn.tolist())]
    ls = LearningSet(truth.criteria(), alts, prefer, indiff)

    t0 = time.perf_counter()
    result = fit(ls, spec)
    seconds = time.perf_counter() - t0

    base = dict(
        model_id=cfg.model_id, seed=cfg.seed, form=spec.form, D=spec.degree, k=spec.pieces,
        Dc=spec.continuity, mstar=cfg.mstar, slack=result.total_slack,
        constraints=sizes[0], variables=sizes[1], seconds=seconds,
    )
    if not result.ok:
        return ExperimentResult(spearman=math.nan, kendall=math.nan, status=result.report.status.value, **base)

    x_test = test_rng.random((cfg.m, truth.n))
    test_ids = _ids("t", cfg.m)
    r_true = Ranking.from_scores(test_ids, truth.scores(x_test), cfg.tie_tol)
    r_fit = Ranking.from_scores(test_ids, result.model.scores(x_test), cfg.tie_tol)
    return ExperimentResult(spearman=spearman(r_true, r_fit), kendall=kendall_tau(r_true, r_fit), **base)


def _safe_run(cfg: ExperimentConfig) -> ExperimentResult:
    try:
        return run_experiment(cfg)
    except Exception as exc:  # a failing cell must not stop the sweep
        spec = cfg.spec
        return ExperimentResult(
            cfg.model_id, cfg.seed, spec.form, spec.degree, spec.pieces, spec.continuity, cfg.mstar,
            math.nan, math.nan, math.nan, 0, 0, 0.0, f"error: {type(exc).__name__}: {exc}",
        )


def grid_configs(models: Iterable[int], seeds: Iterable[int], mstars: Iterable[int],
                 specs: Iterable[FitSpec], m: int = 1000) -> list[ExperimentConfig]:
    """Cross product in a fixed order: model, spec, mstar, seed (fastest)."""
    return [
        ExperimentConfig(model_id, seed, mstar, spec, m)
        for model_id, spec, mstar, seed in product(list(models), list(specs), list(mstars), list(seeds))
    ]


def sweep(configs: Sequence[ExperimentConfig], workers: int = 1) -> list[ExperimentResult]:
    """Run every cell; results come back in input order whatever ``workers`` is."""
    if workers <= 1 or len(configs) <= 1:
        return [_safe_run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_safe_run, configs))


def spec_key(r: ExperimentResult) -> tuple:
    return (r.form, r.D, r.k, r.Dc)


def summarize(results: Sequence[ExperimentResult], by: Sequence[str] = ("model_id", "form", "D", "k", "Dc", "mstar")) -> list[dict]:
    """Mean and sample standard deviation of both metrics per group.

    Failed cells are counted in ``failed`` and left out of the statistics.
    Leave ``model_id`` out of ``by`` to pool over models.
    """
    groups: dict[tuple, list[ExperimentResult]] = {}
    for r in results:
        groups.setdefault(tuple(getattr(r, f) for f in by), []).append(r)
    rows = []
    for key, rs in groups.items():
        good = [r for r in rs if r.ok]
        row = dict(zip(by, key))
        row["cells"] = len(rs)
        row["failed"] = len(rs) - len(good)
        for metric in ("kendall", "spearman"):
            vals = np.array([getattr(r, metric) for r in good], dtype=float)
            row[f"{metric}_mean"] = float(vals.mean()) if len(vals) else math.nan
            row[f"{metric}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else math.nan
        rows.append(row)
    return rows


def results_csv(results: Iterable[ExperimentResult], timing: bool = True, header: bool = True) -> str:
    """CSV text, one row per cell.  ``timing=False`` blanks the seconds column
    so that repeated runs compare byte for byte."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_FIELDS)
    for r in results:
        row = asdict(r)
        if not timing:
            row["seconds"] = ""
        w.writerow([_fmt(row[f]) for f in CSV_FIELDS])
    return buf.getvalue()


def results_json(results: Iterable[ExperimentResult], timing: bool = True) -> str:
    rows = []
    for r in results:
        d = asdict(r)
        if not timing:
            d.pop("seconds")
        rows.append({k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()})
    return json.dumps(rows, indent=1)


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v
