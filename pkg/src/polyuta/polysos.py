"""Univariate polynomials and sum-of-squares certificates.

Polynomials are kept in the monomial basis ``p_0 + p_1 x + ... + p_D x^D``.
A polynomial is globally non-negative iff it equals ``xbar^T Q xbar`` for a
PSD ``Q`` (``xbar = (1, x, ..., x^d)``), and non-negative on ``[v1, v2]`` iff
it equals ``(x - v1) xbar^T Q xbar + (v2 - x) xbar^T R xbar`` with ``Q, R``
PSD.  The ``*_terms`` helpers expose those coefficient maps as sparse linear
forms so the learning formulations and the numeric maps share one source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotPsd

DEGREE_TOL = 1e-12


@dataclass(frozen=True)
class Polynomial:
    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Sequence[float] = (0.0,)):
        c = tuple(float(v) for v in coeffs) or (0.0,)
        object.__setattr__(self, "coeffs", c)

    def degree(self) -> int:
        for i in range(len(self.coeffs) - 1, -1, -1):
            if abs(self.coeffs[i]) > DEGREE_TOL:
                return i
        return 0

    def __call__(self, x):
        return poly_eval(self, x)

    def derivative(self) -> "Polynomial":
        return poly_derivative(self)


@dataclass(frozen=True)
class PsdBlock:
    """Symmetric matrix whose quadratic form in ``xbar`` is a SOS polynomial."""

    entries: np.ndarray

    def __post_init__(self):
        q = np.array(self.entries, dtype=float, copy=True)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"PSD block must be square, got shape {q.shape}")
        q.setflags(write=False)
        object.__setattr__(self, "entries", q)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.T), initial=0.0) <= tol)


@dataclass(frozen=True)
class IntervalCertificate:
    q: PsdBlock
    r: PsdBlock
    interval: tuple[float, float]

    def __post_init__(self):
        if self.q.dim != self.r.dim:
            raise ValueError("Q and R must have the same dimension")
        v1, v2 = self.interval
        if not v1 < v2:
            raise ValueError(f"empty interval [{v1}, {v2}]")


def _coeffs(p) -> np.ndarray:
    if isinstance(p, Polynomial):
        return np.asarray(p.coeffs, dtype=float)
    return np.atleast_1d(np.asarray(p, dtype=float))


def poly_eval(p, x):
    """Horner evaluation; ``x`` may be a scalar or an array."""
    c = _coeffs(p)
    acc = np.zeros_like(np.asarray(x, dtype=float)) + c[-1]
    for coef in c[-2::-1]:
        acc = acc * x + coef
    if np.ndim(acc) == 0:
        return float(acc)
    return acc


def poly_derivative(p) -> Polynomial:
    c = _coeffs(p)
    if len(c) == 1:
        return Polynomial((0.0,))
    return Polynomial(tuple(i * c[i] for i in range(1, len(c))))


def poly_derivative_coeffs(c: Sequence[float], order: int) -> np.ndarray:
    """Coefficients of the ``order``-th derivative."""
    out = np.asarray(c, dtype=float)
    for _ in range(order):
        if len(out) == 1:
            return np.zeros(1)
        out = out[1:] * np.arange(1, len(out))
    return out


def compose_affine(c: Sequence[float], scale: float, offset: float) -> np.ndarray:
    """Coefficients of ``x -> p(scale * x + offset)``."""
    out = np.zeros(len(c))
    lin = np.array([offset, scale], dtype=float)
    power = np.array([1.0])
    for ci in c:
        out[: len(power)] += ci * power
        power = np.convolve(power, lin)
    return out


# -- coefficient maps -----------------------------------------------------


def global_sos_terms(d: int) -> list[list[tuple[int, int]]]:
    """Entry pairs ``(g, h)`` summed into each coefficient of ``xbar^T Q xbar``.

    Coefficient ``i`` (``0 <= i <= 2d``) collects every ``q[g, i-g]`` with both
    indices inside ``0..d``.
    """
    return [
        [(g, i - g) for g in range(max(0, i - d), min(i, d) + 1)]
        for i in range(2 * d + 1)
    ]


def interval_sos_terms(d: int, v1: float, v2: float) -> list[list[tuple[str, int, int, float]]]:
    """Weighted entries forming each coefficient of ``(x-v1) q(x) + (v2-x) r(x)``.

    Returns, for ``i = 0..2d+1``, a list of ``(which, g, h, weight)`` with
    ``which`` in ``{"q", "r"}``.
    """
    glob = global_sos_terms(d)
    out: list[list[tuple[str, int, int, float]]] = []
    for i in range(2 * d + 2):
        terms: list[tuple[str, int, int, float]] = []
        if i <= 2 * d:
            terms += [("q", g, h, -v1) for g, h in glob[i]]
            terms += [("r", g, h, v2) for g, h in glob[i]]
        if i >= 1:
            terms += [("q", g, h, 1.0) for g, h in glob[i - 1]]
            terms += [("r", g, h, -1.0) for g, h in glob[i - 1]]
        out.append(terms)
    return out


def coeffs_from_global_sos(q) -> Polynomial:
    m = q.entries if isinstance(q, PsdBlock) else np.asarray(q, dtype=float)
    d = m.shape[0] - 1
    return Polynomial([sum(m[g, h] for g, h in terms) for terms in global_sos_terms(d)])


def coeffs_from_interval_sos(cert: IntervalCertificate) -> Polynomial:
    v1, v2 = cert.interval
    mats = {"q": cert.q.entries, "r": cert.r.entries}
    terms = interval_sos_terms(cert.q.dim - 1, v1, v2)
    return Polynomial([sum(w * mats[k][g, h] for k, g, h, w in t) for t in terms])


# -- Cholesky -------------------------------------------------------------


def cholesky(m, zero_tol: float = 1e-12, neg_tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Works on semidefinite input: a pivot in ``[-neg_tol, zero_tol]`` is treated
    as zero and its column below the diagonal must then vanish too.  Raises
    :class:`NotPsd` on a pivot below ``-neg_tol`` or on a zero pivot whose
    column cannot be completed.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    low = np.zeros_like(a)
    col_tol = math.sqrt(max(zero_tol, neg_tol))
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot < -neg_tol:
            raise NotPsd(f"negative pivot {pivot:.3e} at index {j}")
        if pivot <= zero_tol:
            rest = a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]
            if rest.size and np.max(np.abs(rest)) > col_tol:
                raise NotPsd(f"zero pivot at index {j} with nonzero column {np.max(np.abs(rest)):.3e}")
            continue
        ljj = math.sqrt(pivot)
        low[j, j] = ljj
        low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / ljj
    return low


def project_psd(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    a = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(a)
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T


# -- non-negativity oracle ------------------------------------------------


@dataclass(frozen=True)
class NonnegCheck:
    certified: bool
    x: float
    value: float

    def __bool__(self) -> bool:
        return self.certified


def real_roots(c: Sequence[float], lead_tol: float = 1e-12) -> np.ndarray:
    """Real roots from the eigenvalues of the companion matrix of the monic form."""
    c = np.asarray(c, dtype=float)
    scale = np.max(np.abs(c), initial=0.0)
    if scale == 0.0:
        return np.empty(0)
    c = c / scale
    top = len(c) - 1
    while top > 0 and abs(c[top]) <= lead_tol:
        top -= 1
    if top == 0:
        return np.empty(0)
    monic = c[:top] / c[top]
    comp = np.zeros((top, top))
    comp[1:, :-1] = np.eye(top - 1)
    comp[:, -1] = -monic
    eig = np.linalg.eigvals(comp)
    return np.sort(eig[np.abs(eig.imag) <= 1e-9 * (1 + np.abs(eig.real))].real)


def check_nonneg_on_interval(p, v1: float, v2: float, grid: int = 2001, tol: float = 1e-9) -> NonnegCheck:
    """Numerically check ``p >= 0`` on ``[v1, v2]``.

    Candidates are a uniform grid plus the real stationary points inside the
    interval; the most negative candidate is reported.
    """
    if not v1 < v2:
        raise ValueError(f"empty interval [{v1}, {v2}]")
    c = _coeffs(p)
    xs = np.linspace(v1, v2, grid)
    crit = real_roots(poly_derivative(c).coeffs)
    crit = crit[(crit >= v1) & (crit <= v2)]
    xs = np.concatenate([xs, crit])
    vals = np.asarray(poly_eval(c, xs))
    i = int(np.argmin(vals))
    return NonnegCheck(bool(vals[i] >= -tol), float(xs[i]), float(vals[i]))
