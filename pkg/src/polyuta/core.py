"""Additive value models: criteria, alternatives, marginals and learning sets.

Every criterion is increasing (larger is better).  Criteria to be minimised
are negated by the caller before ingestion, domain bounds included.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, DomainError, ModeError
from .metrics import Ranking
from .polysos import poly_eval

NORMALIZATION_TOL = 1e-6
# relative slack accepted at domain edges before raising DomainError
EDGE_TOL = 1e-9


class Form(str, Enum):
    PIECEWISE_LINEAR = "PiecewiseLinear"
    POLYNOMIAL = "Polynomial"
    SPLINE = "Spline"


@dataclass(frozen=True)
class CriterionScale:
    id: str
    lower: float
    upper: float

    def __post_init__(self):
        if not float(self.lower) < float(self.upper):
            raise DataError(f"criterion {self.id!r}: lower {self.lower} must be < upper {self.upper}")

    def contains(self, x: float) -> bool:
        slack = EDGE_TOL * (self.upper - self.lower)
        return self.lower - slack <= x <= self.upper + slack


@dataclass(frozen=True)
class Alternative:
    id: Hashable
    performances: tuple[float, ...]

    def __init__(self, id: Hashable, performances: Sequence[float]):
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "performances", tuple(float(v) for v in performances))


@dataclass(frozen=True)
class Marginal:
    """One criterion's value function, stored piecewise in the monomial basis.

    ``pieces[l]`` holds the coefficients of the polynomial valid on
    ``[breakpoints[l], breakpoints[l+1]]``.  At an interior breakpoint the
    left piece is used.
    """

    form: Form
    breakpoints: tuple[float, ...]
    pieces: tuple[tuple[float, ...], ...]

    def __init__(self, form, breakpoints: Sequence[float], pieces: Sequence[Sequence[float]]):
        form = Form(form)
        bps = tuple(float(v) for v in breakpoints)
        pcs = tuple(tuple(float(v) for v in p) for p in pieces)
        if len(bps) < 2 or any(nxt <= prev for prev, nxt in zip(bps, bps[1:])):
            raise DataError(f"breakpoints must be strictly increasing, got {bps}")
        if len(pcs) != len(bps) - 1:
            raise DataError(f"{len(bps)} breakpoints need {len(bps) - 1} pieces, got {len(pcs)}")
        if form is Form.POLYNOMIAL and len(pcs) != 1:
            raise DataError("a Polynomial marginal has exactly one piece")
        if form is Form.PIECEWISE_LINEAR and any(len(p) > 2 for p in pcs):
            raise DataError("PiecewiseLinear pieces have degree 1")
        object.__setattr__(self, "form", form)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pcs)
        v0 = self.value(bps[0])
        if abs(v0) > NORMALIZATION_TOL:
            raise DataError(f"marginal must vanish at its lower bound, got {v0:.3e}")

    @property
    def lower(self) -> float:
        return self.breakpoints[0]

    @property
    def upper(self) -> float:
        return self.breakpoints[-1]

    @classmethod
    def linear(cls, lower: float, upper: float, weight: float) -> "Marginal":
        slope = weight / (upper - lower)
        return cls(Form.PIECEWISE_LINEAR, (lower, upper), [(-slope * lower, slope)])

    def piece_index(self, x):
        return np.searchsorted(self.breakpoints[1:-1], x, side="left")

    def value(self, x):
        """Evaluate at a scalar or an array; raises DomainError outside the domain."""
        xa = np.asarray(x, dtype=float)
        slack = EDGE_TOL * (self.upper - self.lower)
        if np.any(xa < self.lower - slack) or np.any(xa > self.upper + slack):
            raise DomainError(f"value outside [{self.lower}, {self.upper}]")
        xa = np.clip(xa, self.lower, self.upper)
        if len(self.pieces) == 1:
            out = poly_eval(self.pieces[0], xa)
        else:
            idx = self.piece_index(xa)
            out = np.zeros_like(xa)
            for l, coeffs in enumerate(self.pieces):
                mask = idx == l
                if np.any(mask):
                    out[mask] = poly_eval(coeffs, xa[mask])
        if np.ndim(out) == 0:
            return float(out)
        return out

    def to_dict(self) -> dict:
        return {"form": self.form.value, "breakpoints": list(self.breakpoints), "pieces": [list(p) for p in self.pieces]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Marginal":
        return cls(d["form"], d["breakpoints"], d["pieces"])


@dataclass(frozen=True)
class AdditiveModel:
    criteria: tuple[CriterionScale, ...]
    marginals: tuple[Marginal, ...]
    thresholds: tuple[float, ...] | None = None

    def __init__(self, criteria, marginals, thresholds=None, check: bool = True):
        crit = tuple(criteria)
        marg = tuple(marginals)
        if len(crit) != len(marg):
            raise DataError(f"{len(crit)} criteria but {len(marg)} marginals")
        thr = None if thresholds is None else tuple(float(t) for t in thresholds)
        object.__setattr__(self, "criteria", crit)
        object.__setattr__(self, "marginals", marg)
        object.__setattr__(self, "thresholds", thr)
        if check:
            for c, m in zip(crit, marg):
                if abs(m.lower - c.lower) > EDGE_TOL * (c.upper - c.lower) or abs(m.upper - c.upper) > EDGE_TOL * (
                    c.upper - c.lower
                ):
                    raise DataError(f"marginal domain of {c.id!r} does not match its scale")
            top = sum(m.value(m.upper) for m in marg)
            if abs(top - 1.0) > NORMALIZATION_TOL:
                raise DataError(f"marginals at upper bounds sum to {top:.9f}, expected 1")
            if thr is not None and any(b <= a for a, b in zip(thr, thr[1:])):
                raise DataError(f"thresholds must be strictly increasing, got {thr}")

    @property
    def n(self) -> int:
        return len(self.criteria)

    def scores(self, perf) -> np.ndarray:
        """Scores of a ``(m, n)`` performance matrix."""
        p = np.atleast_2d(np.asarray(perf, dtype=float))
        if p.shape[1] != self.n:
            raise DataError(f"expected {self.n} columns, got {p.shape[1]}")
        return sum(m.value(p[:, j]) for j, m in enumerate(self.marginals))

    def to_dict(self) -> dict:
        d = {
            "criteria": [{"id": c.id, "lower": c.lower, "upper": c.upper} for c in self.criteria],
            "marginals": [m.to_dict() for m in self.marginals],
        }
        d["thresholds"] = list(self.thresholds) if self.thresholds is not None else []
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "AdditiveModel":
        try:
            crit = [CriterionScale(str(c["id"]), float(c["lower"]), float(c["upper"])) for c in d["criteria"]]
            marg = [Marginal.from_dict(m) for m in d["marginals"]]
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed model: {exc}") from exc
        thr = d.get("thresholds") or None
        return cls(crit, marg, thr)


def evaluate_marginal(m: Marginal, x: float) -> float:
    return float(m.value(float(x)))


def evaluate_model(model: AdditiveModel, a: Alternative) -> float:
    if len(a.performances) != model.n:
        raise DataError(f"alternative {a.id!r} has {len(a.performances)} performances, expected {model.n}")
    return float(sum(m.value(x) for m, x in zip(model.marginals, a.performances)))


def rank(model: AdditiveModel, alts: Sequence[Alternative], tie_tol: float = 1e-9) -> Ranking:
    if not alts:
        raise ValueError("nothing to rank")
    scores = model.scores([a.performances for a in alts])
    return Ranking.from_scores([a.id for a in alts], scores, tie_tol)


def assign_score(thresholds: Sequence[float], score: float) -> int:
    """Category ``h`` with ``U^{h-1} <= score < U^h`` (``U^0 = 0``, ``U^p = inf``)."""
    h = 1
    for t in thresholds:
        if score >= t:
            h += 1
        else:
            break
    return h


def assign(model: AdditiveModel, a: Alternative) -> int:
    if model.thresholds is None:
        raise ModeError("model has no category thresholds")
    return assign_score(model.thresholds, evaluate_model(model, a))


@dataclass(frozen=True)
class LearningSet:
    """Alternatives plus either pairwise statements (ranking) or assignments (sorting)."""

    criteria: tuple[CriterionScale, ...]
    alternatives: tuple[Alternative, ...]
    prefer: tuple[tuple[Hashable, Hashable], ...] = ()
    indiff: tuple[tuple[Hashable, Hashable], ...] = ()
    assignments: Mapping[Hashable, int] = field(default_factory=dict)

    def __init__(self, criteria, alternatives, prefer=(), indiff=(), assignments=None):
        crit = tuple(criteria)
        alts = tuple(alternatives)
        prefer = tuple(tuple(p) for p in prefer)
        indiff = tuple(tuple(p) for p in indiff)
        assignments = dict(assignments or {})
        object.__setattr__(self, "criteria", crit)
        object.__setattr__(self, "alternatives", alts)
        object.__setattr__(self, "prefer", prefer)
        object.__setattr__(self, "indiff", indiff)
        object.__setattr__(self, "assignments", assignments)
        self._validate()

    def _validate(self):
        ids = [a.id for a in self.alternatives]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate alternative ids")
        known = set(ids)
        for a in self.alternatives:
            if len(a.performances) != len(self.criteria):
                raise DataError(f"alternative {a.id!r} has {len(a.performances)} performances")
            for c, x in zip(self.criteria, a.performances):
                if not c.contains(x):
                    raise DomainError(f"alternative {a.id!r}: {x} outside [{c.lower}, {c.upper}] on {c.id!r}")
        seen: set = set()
        for p in self.prefer + self.indiff:
            if len(p) != 2:
                raise DataError(f"pair {p!r} must have two ids")
            for a in p:
                if a not in known:
                    raise DataError(f"unknown alternative {a!r}")
            key = frozenset(p)
            if key in seen:
                raise DataError(f"pair {p!r} stated twice")
            seen.add(key)
        for a, h in self.assignments.items():
            if a not in known:
                raise DataError(f"unknown alternative {a!r}")
            if int(h) < 1:
                raise DataError(f"category of {a!r} must be >= 1")
        if (self.prefer or self.indiff) and self.assignments:
            raise DataError("a learning set holds pairwise statements or assignments, not both")

    @property
    def sorting(self) -> bool:
        return bool(self.assignments)

    def by_id(self) -> dict:
        return {a.id: a for a in self.alternatives}

    def used_ids(self) -> list:
        """Ids referenced by a statement, in first-appearance order."""
        out: dict = {}
        for p in self.prefer + self.indiff:
            for a in p:
                out.setdefault(a, None)
        for a in self.assignments:
            out.setdefault(a, None)
        return list(out)

    def to_dict(self) -> dict:
        return {
            "criteria": [{"id": c.id, "lower": c.lower, "upper": c.upper} for c in self.criteria],
            "alternatives": [{"id": a.id, "performances": list(a.performances)} for a in self.alternatives],
            "prefer": [list(p) for p in self.prefer],
            "indiff": [list(p) for p in self.indiff],
            "assign": {str(k): v for k, v in self.assignments.items()},
        }


# -- files ------------------------------------------------------------------


def read_alternatives_csv(path) -> tuple[list[str], list[Alternative]]:
    """Header: an id column label followed by criterion ids."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DataError(f"{path}: need an id column and at least one criterion")
    alts = []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{k}: expected {len(header)} fields, got {len(row)}")
        try:
            alts.append(Alternative(row[0].strip(), [float(v) for v in row[1:]]))
        except ValueError as exc:
            raise DataError(f"{path}:{k}: {exc}") from exc
    return header[1:], alts


def write_alternatives_csv(path, criteria: Sequence[str], alts: Iterable[Alternative]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *criteria])
        for a in alts:
            w.writerow([a.id, *(repr(v) for v in a.performances)])


def scales_from_data(names: Sequence[str], alts: Sequence[Alternative]) -> list[CriterionScale]:
    """Criterion domains spanned by the data (used when no scales are given)."""
    perf = np.array([a.performances for a in alts], dtype=float)
    out = []
    for j, name in enumerate(names):
        lo, hi = float(perf[:, j].min()), float(perf[:, j].max())
        if hi <= lo:
            hi = lo + 1.0
        out.append(CriterionScale(name, lo, hi))
    return out


def learning_set_from_dict(d: Mapping, alternatives: Sequence[Alternative] | None = None,
                           names: Sequence[str] | None = None) -> LearningSet:
    """Build a LearningSet from its JSON form.

    ``alternatives`` (e.g. from a CSV file) override ``d["alternatives"]``;
    without ``d["criteria"]`` the domains are taken from the data.
    """
    try:
        if alternatives is None:
            alternatives = [Alternative(a["id"], a["performances"]) for a in d.get("alternatives", [])]
        if d.get("criteria"):
            crit = [CriterionScale(str(c["id"]), float(c["lower"]), float(c["upper"])) for c in d["criteria"]]
        else:
            if not alternatives:
                raise DataError("no alternatives given")
            n = len(alternatives[0].performances)
            crit = scales_from_data(names or [f"c{j + 1}" for j in range(n)], alternatives)
        assign_map = {k: int(v) for k, v in (d.get("assign") or {}).items()}
        return LearningSet(crit, alternatives, d.get("prefer") or (), d.get("indiff") or (), assign_map)
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed learning set: {exc}") from exc


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from exc


def save_model(model: AdditiveModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


def load_model(path) -> AdditiveModel:
    return AdditiveModel.from_dict(load_json(path))
