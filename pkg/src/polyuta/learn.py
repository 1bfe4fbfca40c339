"""Learning additive value models from preference statements.

Three marginal families share one formulation pipeline:

* ``linear``: piecewise-linear marginals with ``k`` pieces (classic UTA),
  parameterised by nonnegative value increments per piece; a pure LP.
* ``poly``: one polynomial of degree ``D`` per criterion whose derivative is
  certified non-negative by SOS blocks, either on the whole real line
  (``global``, odd ``D``) or on the criterion domain (``interval``).
* ``spline``: ``k`` polynomial pieces of degree ``D`` per criterion, each
  monotone on its sub-interval, glued with continuity up to order ``Dc``.

Strict preferences ``U(a) > U(b)`` become ``U(a) - U(b) >= eps_strict``
after the usual over/under-estimation slacks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Hashable, Sequence

import numpy as np

from .conic import ConicProblem, LinExpr, PsdVar, SolveReport, SolverSettings, Var
from .core import AdditiveModel, CriterionScale, Form, LearningSet, Marginal
from .errors import DataError, ExtractionError, SpecError
from .polysos import (
    IntervalCertificate,
    PsdBlock,
    compose_affine,
    global_sos_terms,
    interval_sos_terms,
)

FORMS = ("linear", "poly", "spline")
SCOPES = ("global", "interval")


@dataclass(frozen=True)
class FitSpec:
    form: str
    degree: int = 1
    pieces: int = 1
    continuity: int = 0
    scope: str = "interval"
    eps_strict: float = 1e-4
    # None: rescale criterion domains to [0, 1] only when degree >= 5
    prescale: bool | None = None
    categories: int | None = None
    settings: SolverSettings = field(default_factory=SolverSettings)
    breakpoints: tuple[tuple[float, ...], ...] | None = None

    @classmethod
    def linear(cls, pieces: int = 1, **kw) -> "FitSpec":
        return cls("linear", degree=1, pieces=pieces, continuity=0, **kw)

    @classmethod
    def poly(cls, degree: int, scope: str = "interval", **kw) -> "FitSpec":
        return cls("poly", degree=degree, pieces=1, continuity=0, scope=scope, **kw)

    @classmethod
    def spline(cls, degree: int, pieces: int, continuity: int | None = None, **kw) -> "FitSpec":
        if continuity is None:
            continuity = degree - 1
        return cls("spline", degree=degree, pieces=pieces, continuity=continuity, scope="interval", **kw)

    def validate(self) -> "FitSpec":
        if self.form not in FORMS:
            raise SpecError(f"unknown form {self.form!r}; expected one of {FORMS}")
        if self.scope not in SCOPES:
            raise SpecError(f"unknown scope {self.scope!r}; expected one of {SCOPES}")
        if self.degree < 1:
            raise SpecError(f"degree must be >= 1, got {self.degree}")
        if self.pieces < 1:
            raise SpecError(f"pieces must be >= 1, got {self.pieces}")
        if self.form == "linear" and self.degree != 1:
            raise SpecError("linear marginals have degree 1")
        if self.form == "poly" and self.pieces != 1:
            raise SpecError("poly marginals have one piece; use form='spline' for more")
        if self.form == "poly" and self.scope == "global" and self.degree % 2 == 0:
            raise SpecError(
                f"global monotonicity needs an odd degree (derivative of even degree), got {self.degree}"
            )
        if self.form == "spline" and self.scope != "interval":
            raise SpecError("spline pieces are certified on their sub-intervals only")
        if self.continuity < 0 or (self.form == "spline" and self.continuity > self.degree - 1):
            raise SpecError(
                f"continuity order {self.continuity} needs degree >= {self.continuity + 1}, got {self.degree}"
            )
        if self.eps_strict < 0:
            raise SpecError("eps_strict must be non-negative")
        return self

    @property
    def use_prescale(self) -> bool:
        if self.prescale is None:
            return self.form != "linear" and self.degree >= 5
        return self.prescale

    @property
    def block_dim(self) -> int:
        """Size of each SOS matrix."""
        if self.form == "linear":
            return 0
        if self.scope == "global":
            return (self.degree - 1) // 2 + 1
        return (self.degree - 1) // 2 + 1

    def label(self) -> str:
        if self.form == "linear":
            return f"linear(k={self.pieces})"
        if self.form == "poly":
            return f"poly(D={self.degree},{self.scope})"
        return f"spline(D={self.degree},k={self.pieces},Dc={self.continuity})"


@dataclass
class CriterionVars:
    """Variables of one criterion.

    Piece ``l`` is a polynomial in the working coordinate
    ``t = (x - offsets[l]) / widths[l]``: the raw value when prescaling is
    off, the position inside the piece (``[0, 1]``) when it is on.
    """

    scale: CriterionScale
    breakpoints: np.ndarray  # raw units
    offsets: np.ndarray
    widths: np.ndarray
    coeffs: list[list[Var]] = field(default_factory=list)  # poly/spline
    increments: list[Var] = field(default_factory=list)  # linear
    blocks: list[tuple[PsdVar, ...]] = field(default_factory=list)

    def piece_of(self, x: float) -> int:
        return _piece_of(self.breakpoints, x)

    def local(self, l: int, x: float) -> float:
        if self.offsets[l] == 0.0 and self.widths[l] == 1.0:
            return float(x)
        return (float(x) - self.offsets[l]) / self.widths[l]

    def local_interval(self, l: int) -> tuple[float, float]:
        if self.offsets[l] == 0.0 and self.widths[l] == 1.0:
            return float(self.breakpoints[l]), float(self.breakpoints[l + 1])
        # exact ends of the unit interval when the piece is rescaled
        return 0.0, 1.0


@dataclass
class VarMap:
    spec: FitSpec
    criteria: list[CriterionVars]
    sigma_plus: dict
    sigma_minus: dict
    thresholds: list[Var]
    statement_rows: dict = field(default_factory=dict)
    link_rows: dict = field(default_factory=dict)


@dataclass
class FitResult:
    model: AdditiveModel | None
    total_slack: float
    statement_slack: dict
    certificates: list[list]
    report: SolveReport
    sizes: tuple[int, int]
    spec: FitSpec
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.model is not None

    def diagnostics(self) -> dict:
        r = self.report
        return {
            "status": r.status.value,
            "spec": self.spec.label(),
            "total_slack": self.total_slack,
            "objective": r.objective,
            "iterations": r.iterations,
            "primal_residual": r.primal_residual,
            "dual_residual": r.dual_residual,
            "gap": r.gap,
            "constraints": self.sizes[0],
            "variables": self.sizes[1],
            "seconds": self.seconds,
            "statement_slack": [
                {"statement": list(map(str, k)) if isinstance(k, tuple) else str(k), "slack": v}
                for k, v in self.statement_slack.items()
            ],
        }

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict() if self.model else None, "diagnostics": self.diagnostics()}


def problem_size(m: int, n: int, k: int, D: int, Dc: int) -> tuple[int, int]:
    """Published constraint and variable counts of a spline-type program."""
    if min(m, n, k, D) < 1 or Dc < 0:
        raise ValueError("m, n, k, D must be >= 1 and Dc >= 0")
    constraints = m + n + 2 * n * k + n * k * D + (1 + Dc) * n * (k - 1)
    variables = n * k * (D + 1) + 2 * n * k * math.ceil(D / 2) ** 2 + 2 * m
    return constraints, variables


def _breakpoints(spec: FitSpec, j: int, scale: CriterionScale) -> np.ndarray:
    if spec.breakpoints is not None:
        bps = np.asarray(spec.breakpoints[j], dtype=float)
        if len(bps) != spec.pieces + 1 or bps[0] != scale.lower or bps[-1] != scale.upper:
            raise SpecError(f"custom breakpoints for criterion {scale.id!r} must span its domain")
        if np.any(np.diff(bps) <= 0):
            raise SpecError("custom breakpoints must be strictly increasing")
        return bps
    return np.linspace(scale.lower, scale.upper, spec.pieces + 1)


def _piece_of(bps: np.ndarray, t: float) -> int:
    return int(np.searchsorted(bps[1:-1], t, side="left"))


def _monomials(t: float, degree: int, order: int = 0) -> np.ndarray:
    """Coefficients of ``s_i`` in the ``order``-th derivative of ``sum s_i t^i``."""
    out = np.zeros(degree + 1)
    for i in range(order, degree + 1):
        out[i] = math.perm(i, order) * t ** (i - order)
    return out


def marginal_expr(cv: CriterionVars, spec: FitSpec, x_raw: float) -> LinExpr:
    """Value of a criterion's marginal at a raw performance, as an expression."""
    bps = cv.breakpoints
    l = cv.piece_of(x_raw)
    e = LinExpr()
    if spec.form == "linear":
        for w in cv.increments[:l]:
            e.iadd(w)
        e.iadd(cv.increments[l], (x_raw - bps[l]) / (bps[l + 1] - bps[l]))
        return e
    return _poly_at(cv.coeffs[l], cv.local(l, x_raw), spec.degree)


def _poly_at(coeffs: list[Var], t: float, degree: int, order: int = 0) -> LinExpr:
    e = LinExpr()
    for s, c in zip(coeffs, _monomials(t, degree, order)):
        if c != 0.0:
            e.iadd(s, c)
    return e


def formulate(ls: LearningSet, spec: FitSpec) -> tuple[ConicProblem, VarMap]:
    spec.validate()
    prob = ConicProblem()
    D, k = spec.degree, spec.pieces
    crits: list[CriterionVars] = []

    for j, scale in enumerate(ls.criteria):
        bps = _breakpoints(spec, j, scale)
        if spec.use_prescale and spec.form != "linear":
            offsets, widths = bps[:-1].copy(), np.diff(bps)
        else:
            offsets, widths = np.zeros(k), np.ones(k)
        cv = CriterionVars(scale, bps, offsets, widths)
        if spec.form == "linear":
            cv.increments = [prob.add_nonneg_var(f"w[{j},{l}]") for l in range(k)]
        else:
            dim = spec.block_dim
            for l in range(k):
                cv.coeffs.append([prob.add_free_var(f"s[{j},{l},{i}]") for i in range(D + 1)])
                if spec.scope == "global":
                    cv.blocks.append((prob.add_psd_block(dim, f"Q[{j},{l}]"),))
                else:
                    cv.blocks.append(
                        (prob.add_psd_block(dim, f"Q[{j},{l}]"), prob.add_psd_block(dim, f"R[{j},{l}]"))
                    )
        crits.append(cv)

    vm = VarMap(spec, crits, {}, {}, [])
    used = ls.used_ids()
    for a in used:
        vm.sigma_plus[a] = prob.add_nonneg_var(f"sigma+[{a}]")
        vm.sigma_minus[a] = prob.add_nonneg_var(f"sigma-[{a}]")

    alts = ls.by_id()

    def utility(a_id) -> LinExpr:
        e = LinExpr()
        for cv, x in zip(crits, alts[a_id].performances):
            e.iadd(marginal_expr(cv, spec, x))
        return e

    def correction(a_id) -> LinExpr:
        return vm.sigma_plus[a_id] - vm.sigma_minus[a_id]

    # statements
    if ls.sorting:
        p = spec.categories or max(ls.assignments.values())
        if p < max(ls.assignments.values()):
            raise SpecError(f"{p} categories but an assignment names category {max(ls.assignments.values())}")
        vm.thresholds = [prob.add_free_var(f"U[{h}]") for h in range(1, p)]
        for a, h in ls.assignments.items():
            u = utility(a)
            if h >= 2:
                vm.statement_rows[(a, "lower")] = prob.add_ge(
                    u + vm.sigma_plus[a] - vm.thresholds[h - 2], 0.0, f"lower[{a}]"
                )
            if h <= p - 1:
                vm.statement_rows[(a, "upper")] = prob.add_ge(
                    vm.thresholds[h - 1] - u + vm.sigma_minus[a], spec.eps_strict, f"upper[{a}]"
                )
        for h in range(1, p - 1):
            prob.add_ge(vm.thresholds[h] - vm.thresholds[h - 1], spec.eps_strict, f"thr[{h}]")
    else:
        for a, b in ls.prefer:
            vm.statement_rows[(a, b)] = prob.add_ge(
                utility(a) - utility(b) + correction(a) - correction(b), spec.eps_strict, f"pref[{a},{b}]"
            )
        for a, b in ls.indiff:
            vm.statement_rows[(a, b)] = prob.add_eq(
                utility(a) - utility(b) + correction(a) - correction(b), 0.0, f"indiff[{a},{b}]"
            )

    # normalisation: worst is 0 on each criterion, best profile sums to 1
    top = LinExpr()
    for j, cv in enumerate(crits):
        if spec.form == "linear":
            for w in cv.increments:
                top.iadd(w)
            continue
        prob.add_eq(_poly_at(cv.coeffs[0], cv.local_interval(0)[0], D), 0.0, f"zero[{j}]")
        top.iadd(_poly_at(cv.coeffs[-1], cv.local_interval(k - 1)[1], D))
    prob.add_eq(top, 1.0, "norm")

    # monotonicity certificates and continuity
    if spec.form != "linear":
        for j, cv in enumerate(crits):
            for l in range(k):
                s = cv.coeffs[l]
                if spec.scope == "global":
                    (q,) = cv.blocks[l]
                    for i, terms in enumerate(global_sos_terms(spec.block_dim - 1)):
                        row = LinExpr({s[i + 1].slot: float(i + 1)})
                        for g, h in terms:
                            row.iadd(q[g, h], -1.0)
                        vm.link_rows[(j, l, i)] = prob.add_eq(row, 0.0, f"link[{j},{l},{i}]")
                else:
                    q, r = cv.blocks[l]
                    mats = {"q": q, "r": r}
                    for i, terms in enumerate(interval_sos_terms(spec.block_dim - 1, *cv.local_interval(l))):
                        row = LinExpr({s[i + 1].slot: float(i + 1)}) if i + 1 <= D else LinExpr()
                        for which, g, h, w in terms:
                            row.iadd(mats[which][g, h], -w)
                        vm.link_rows[(j, l, i)] = prob.add_eq(row, 0.0, f"link[{j},{l},{i}]")
            for l in range(1, k):
                # derivatives in raw units: d/dx = (1 / width) d/dt
                left_t, right_t = cv.local_interval(l - 1)[1], cv.local_interval(l)[0]
                for order in range(spec.continuity + 1):
                    row = _poly_at(cv.coeffs[l - 1], left_t, D, order) * (1.0 / cv.widths[l - 1] ** order)
                    row = row - _poly_at(cv.coeffs[l], right_t, D, order) * (1.0 / cv.widths[l] ** order)
                    prob.add_eq(row, 0.0, f"cont[{j},{l},{order}]")

    objective = LinExpr()
    for a in used:
        objective.iadd(vm.sigma_plus[a])
        objective.iadd(vm.sigma_minus[a])
    prob.minimize(objective)
    return prob, vm


def _to_raw(coeffs: np.ndarray, offset: float, width: float) -> np.ndarray:
    if offset == 0.0 and width == 1.0:
        return coeffs
    return compose_affine(coeffs, 1.0 / width, -offset / width)


def extract_model(report: SolveReport, vm: VarMap) -> tuple[AdditiveModel, list[list]]:
    """Assemble the fitted model and per-piece certificates from a solution.

    Certificates refer to each piece's working coordinate (see
    :class:`CriterionVars`); the marginals are always in raw units.
    """
    if not report.optimal:
        raise ExtractionError(f"solver status is {report.status.value}, not optimal")
    spec = vm.spec
    marginals: list[Marginal] = []
    certs: list[list] = []
    for cv in vm.criteria:
        bps = cv.breakpoints
        pieces = []
        crit_certs = []
        if spec.form == "linear":
            w = np.array([report.value(v) for v in cv.increments])
            cum = np.concatenate([[0.0], np.cumsum(w)])
            for l in range(spec.pieces):
                slope = w[l] / (bps[l + 1] - bps[l])
                pieces.append(np.array([cum[l] - slope * bps[l], slope]))
            form = Form.PIECEWISE_LINEAR
        else:
            for l in range(spec.pieces):
                c = np.array([report.value(v) for v in cv.coeffs[l]])
                pieces.append(_to_raw(c, cv.offsets[l], cv.widths[l]))
                mats = [PsdBlock(report.matrix(b)) for b in cv.blocks[l]]
                if spec.scope == "global":
                    crit_certs.append(mats[0])
                else:
                    crit_certs.append(IntervalCertificate(mats[0], mats[1], cv.local_interval(l)))
            form = Form.POLYNOMIAL if spec.form == "poly" else Form.SPLINE
        try:
            marginals.append(Marginal(form, bps, pieces))
        except DataError as exc:
            raise ExtractionError(f"criterion {cv.scale.id!r}: {exc}") from exc
        certs.append(crit_certs)
    thresholds = [report.value(t) for t in vm.thresholds] if vm.thresholds else None
    try:
        model = AdditiveModel([cv.scale for cv in vm.criteria], marginals, thresholds)
    except DataError as exc:
        raise ExtractionError(str(exc)) from exc
    return model, certs


def _statement_slack(ls: LearningSet, model: AdditiveModel, report: SolveReport, vm: VarMap) -> dict:
    alts = ls.by_id()
    score = {a: float(model.scores([alts[a].performances])[0]) for a in ls.used_ids()}
    out: dict = {}
    eps = vm.spec.eps_strict
    for a, b in ls.prefer:
        out[(a, b)] = max(0.0, eps - (score[a] - score[b]))
    for a, b in ls.indiff:
        out[(a, b)] = abs(score[a] - score[b])
    for a in ls.assignments:
        out[a] = report.value(vm.sigma_plus[a]) + report.value(vm.sigma_minus[a])
    return out


def fit(ls: LearningSet, spec: FitSpec) -> FitResult:
    """Formulate, solve and extract.  ``result.model`` is None unless the
    solver reached optimality."""
    t0 = time.perf_counter()
    prob, vm = formulate(ls, spec)
    sizes = prob.counts()
    report = prob.solve(spec.settings)
    total = float(sum(report.value(v) for v in vm.sigma_plus.values()) + sum(
        report.value(v) for v in vm.sigma_minus.values()
    ))
    if not report.optimal:
        return FitResult(None, total, {}, [], report, sizes, spec, time.perf_counter() - t0)
    model, certs = extract_model(report, vm)
    slack = _statement_slack(ls, model, report, vm)
    return FitResult(model, total, slack, certs, report, sizes, spec, time.perf_counter() - t0)
