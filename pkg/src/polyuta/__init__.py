"""Additive value models with monotone polynomial and spline marginals."""

from .conic import ConicProblem, SolverSettings, SolveReport, Status
from .core import (
    AdditiveModel,
    Alternative,
    CriterionScale,
    Form,
    LearningSet,
    Marginal,
    assign,
    evaluate_marginal,
    evaluate_model,
    rank,
)
from .learn import FitResult, FitSpec, fit, problem_size
from .metrics import Ranking, kendall_tau, spearman

__version__ = "0.1.0"
