"""Small dense conic programs: builder plus a primal-dual interior-point solver.

Problems have the form::

    minimize    c^T x
    subject to  A x = b
                x = (x_free, x_nonneg, X_1, ..., X_k),  x_nonneg >= 0,  X_i PSD

PSD blocks are stored internally in symmetric vectorised form (upper
triangle, off-diagonal entries scaled by sqrt(2)) so that the Euclidean
inner product of two vectors equals the trace inner product of the matrices.

The solver runs on the homogeneous self-dual embedding with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step.  It uses dense
factorisations only and targets problems with a few hundred variables.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
import scipy.linalg as sla

from .errors import BuildError

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


# -- expressions ----------------------------------------------------------


class LinExpr:
    """Sparse affine expression ``sum(coef * slot) + const``."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: dict[int, float] | None = None, const: float = 0.0):
        self.terms = dict(terms) if terms else {}
        self.const = float(const)

    @staticmethod
    def of(value) -> "LinExpr":
        if isinstance(value, LinExpr):
            return value
        if isinstance(value, Var):
            return LinExpr({value.slot: 1.0})
        if isinstance(value, (int, float, np.floating, np.integer)):
            return LinExpr(const=float(value))
        raise TypeError(f"cannot build an expression from {type(value).__name__}")

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.const)

    def iadd(self, other, scale: float = 1.0) -> "LinExpr":
        other = LinExpr.of(other)
        for k, v in other.terms.items():
            self.terms[k] = self.terms.get(k, 0.0) + scale * v
        self.const += scale * other.const
        return self

    def __add__(self, other):
        return self.copy().iadd(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().iadd(other, -1.0)

    def __rsub__(self, other):
        return LinExpr.of(other).copy().iadd(self, -1.0)

    def __mul__(self, k):
        k = float(k)
        return LinExpr({s: k * v for s, v in self.terms.items()}, k * self.const)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def coeff(self, item) -> float:
        """Coefficient on a scalar variable, or on a PSD entry ``(block, g, h)``.

        Entry coefficients are split symmetrically: an expression reading
        ``X[0, 1] + X[1, 0]`` has coefficient 1 on both ``(0, 1)`` and ``(1, 0)``.
        """
        if isinstance(item, Var):
            return self.terms.get(item.slot, 0.0)
        block, g, h = item
        slot, w = block.entry(g, h)
        return self.terms.get(slot, 0.0) * w

    def __repr__(self):
        body = " + ".join(f"{v:g}*v{k}" for k, v in sorted(self.terms.items()))
        return f"LinExpr({body or '0'} + {self.const:g})"


@dataclass(frozen=True)
class Var:
    slot: int
    name: str | None = None

    def _e(self):
        return LinExpr({self.slot: 1.0})

    def __add__(self, o):
        return self._e() + o

    __radd__ = __add__

    def __sub__(self, o):
        return self._e() - o

    def __rsub__(self, o):
        return LinExpr.of(o) - self._e()

    def __mul__(self, k):
        return self._e() * k

    __rmul__ = __mul__

    def __neg__(self):
        return self._e() * -1.0


@dataclass(frozen=True)
class PsdVar:
    """Handle on a PSD matrix block; indexing yields entry expressions."""

    block: int
    dim: int
    first_slot: int
    name: str | None = None

    def entry(self, g: int, h: int) -> tuple[int, float]:
        """Slot and weight such that ``X[g, h] == weight * x[slot]``."""
        if not (0 <= g < self.dim and 0 <= h < self.dim):
            raise BuildError(f"entry ({g}, {h}) outside a {self.dim}x{self.dim} block")
        i, j = (g, h) if g <= h else (h, g)
        # row-major upper triangle
        pos = i * self.dim - i * (i - 1) // 2 + (j - i)
        return self.first_slot + pos, (1.0 if i == j else 1.0 / SQRT2)

    def __getitem__(self, gh) -> LinExpr:
        slot, w = self.entry(*gh)
        return LinExpr({slot: w})

    @property
    def size(self) -> int:
        return self.dim * (self.dim + 1) // 2


# -- problem --------------------------------------------------------------


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "maxIter"
    NUMERICAL_FAILURE = "numericalFailure"


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-7
    max_iter: int = 200
    step: float = 0.99
    presolve_tol: float = 1e-10
    refine: int = 3


@dataclass
class SolveReport:
    status: Status
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    x: np.ndarray
    y: np.ndarray
    dual_objective: float = math.nan
    trace: list[dict] = field(default_factory=list, repr=False)
    _problem: "ConicProblem | None" = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, expr) -> float:
        e = LinExpr.of(expr)
        return float(sum(v * self.x[s] for s, v in e.terms.items()) + e.const)

    def matrix(self, block: PsdVar) -> np.ndarray:
        return smat(self.x[block.first_slot : block.first_slot + block.size], block.dim)


def svec(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, SQRT2)
    return m[iu] * w


def smat(v: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, SQRT2)
    m = np.zeros((n, n))
    m[iu] = v / w
    return m + np.triu(m, 1).T


class ConicProblem:
    """Incrementally built conic problem (minimisation)."""

    def __init__(self):
        self._kinds: list[str] = []  # "f", "l" or "s" per slot
        self._aux: list[bool] = []
        self.names: list[str | None] = []
        self.blocks: list[PsdVar] = []
        self.rows: list[LinExpr] = []
        self.rhs: list[float] = []
        self.row_names: list[str | None] = []
        self.objective = LinExpr()
        self._solved = False

    # variables
    def _new(self, kind: str, name, aux=False) -> int:
        self._check_open()
        self._kinds.append(kind)
        self._aux.append(aux)
        self.names.append(name)
        return len(self._kinds) - 1

    def add_free_var(self, name: str | None = None) -> Var:
        return Var(self._new("f", name), name)

    def add_nonneg_var(self, name: str | None = None, aux: bool = False) -> Var:
        return Var(self._new("l", name, aux), name)

    def add_psd_block(self, dim: int, name: str | None = None) -> PsdVar:
        if dim < 1:
            raise BuildError(f"PSD block dimension must be >= 1, got {dim}")
        first = len(self._kinds)
        for _ in range(dim * (dim + 1) // 2):
            self._new("s", name)
        blk = PsdVar(len(self.blocks), dim, first, name)
        self.blocks.append(blk)
        return blk

    # constraints
    def _check_expr(self, e: LinExpr):
        n = len(self._kinds)
        for s in e.terms:
            if not 0 <= s < n:
                raise BuildError(f"unknown variable slot {s}")

    def _check_open(self):
        if self._solved:
            raise BuildError("problem already solved; build a new one")

    def add_eq(self, expr, rhs: float = 0.0, name: str | None = None) -> int:
        """Record ``expr == rhs``; returns the row index."""
        self._check_open()
        e = LinExpr.of(expr)
        self._check_expr(e)
        self.rows.append(LinExpr(e.terms))
        self.rhs.append(float(rhs) - e.const)
        self.row_names.append(name)
        return len(self.rows) - 1

    def add_ge(self, expr, rhs: float = 0.0, name: str | None = None) -> int:
        """Record ``expr >= rhs`` through an auxiliary surplus variable."""
        surplus = self.add_nonneg_var(f"surplus[{name}]" if name else None, aux=True)
        return self.add_eq(LinExpr.of(expr) - surplus, rhs, name)

    def minimize(self, expr) -> None:
        self._check_open()
        e = LinExpr.of(expr)
        self._check_expr(e)
        self.objective = e

    # introspection
    @property
    def num_slots(self) -> int:
        return len(self._kinds)

    def counts(self) -> tuple[int, int]:
        """``(#constraints, #variables)`` counting a PSD block of size d as d*d
        variables and leaving out surplus variables of inequality rows."""
        nf = sum(1 for k in self._kinds if k == "f")
        nl = sum(1 for k, a in zip(self._kinds, self._aux) if k == "l" and not a)
        return len(self.rows), nf + nl + sum(b.dim * b.dim for b in self.blocks)

    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.num_slots
        a = np.zeros((len(self.rows), n))
        for i, row in enumerate(self.rows):
            for s, v in row.terms.items():
                a[i, s] += v
        c = np.zeros(n)
        for s, v in self.objective.terms.items():
            c[s] += v
        return a, np.array(self.rhs, dtype=float), c

    def dump(self, fh: TextIO) -> None:
        """Write the problem as sparse triplets for external cross-checks.

        Header lines start with ``#``; then ``obj <slot> <value>`` lines, then
        ``<row> <slot> <value>`` lines, then ``rhs <row> <value>`` lines.
        """
        nf = self._kinds.count("f")
        nl = self._kinds.count("l")
        fh.write(f"# slots {self.num_slots} rows {len(self.rows)}\n")
        fh.write(f"# free {nf} nonneg {nl} psd {' '.join(str(b.dim) for b in self.blocks)}\n")
        fh.write("# kinds " + "".join(self._kinds) + "\n")
        for s, v in sorted(self.objective.terms.items()):
            fh.write(f"obj {s} {v!r}\n")
        for i, row in enumerate(self.rows):
            for s, v in sorted(row.terms.items()):
                fh.write(f"{i} {s} {v!r}\n")
        for i, r in enumerate(self.rhs):
            fh.write(f"rhs {i} {r!r}\n")

    # solving
    def solve(self, settings: SolverSettings | None = None) -> SolveReport:
        settings = settings or SolverSettings()
        if self.num_slots == 0:
            raise BuildError("problem has no variables")
        a, b, c = self.dense()
        free = [i for i, k in enumerate(self._kinds) if k == "f"]
        lin = [i for i, k in enumerate(self._kinds) if k == "l"]
        psd = [i for i, k in enumerate(self._kinds) if k == "s"]
        perm = np.array(free + lin + psd, dtype=int)
        report = solve_dense(
            a[:, perm], b, c[perm], len(free), len(lin), [blk.dim for blk in self.blocks], settings
        )
        x = np.empty(self.num_slots)
        x[perm] = report.x
        report.x = x
        report._problem = self
        self._solved = True
        return report


# -- cone algebra ---------------------------------------------------------


class _Cone:
    """Product of a nonnegative orthant and PSD cones (svec form)."""

    def __init__(self, nl: int, dims: Iterable[int]):
        self.nl = nl
        self.dims = list(dims)
        self.offsets = []
        off = nl
        for n in self.dims:
            self.offsets.append(off)
            off += n * (n + 1) // 2
        self.size = off
        self.degree = nl + sum(self.dims)

    def blocks(self, v):
        for off, n in zip(self.offsets, self.dims):
            yield n, v[off : off + n * (n + 1) // 2]

    def identity(self) -> np.ndarray:
        e = np.ones(self.size)
        for off, n in zip(self.offsets, self.dims):
            e[off : off + n * (n + 1) // 2] = svec(np.eye(n))
        return e


class _Scaling:
    """Nesterov-Todd scaling point of a strictly feasible pair ``(x, s)``."""

    def __init__(self, cone: _Cone, x: np.ndarray, s: np.ndarray):
        self.cone = cone
        xl, sl = x[: cone.nl], s[: cone.nl]
        self.w = np.sqrt(xl / sl)
        self.lam_l = np.sqrt(xl * sl)
        self.R, self.Rinv, self.W, self.lam = [], [], [], []
        for (n, xv), (_, sv) in zip(cone.blocks(x), cone.blocks(s)):
            lx = np.linalg.cholesky(smat(xv, n))
            ls = np.linalg.cholesky(smat(sv, n))
            u, lam, vt = np.linalg.svd(ls.T @ lx)
            r = lx @ vt.T / np.sqrt(lam)
            rinv = (u.T / np.sqrt(lam)[:, None]) @ ls.T
            self.R.append(r)
            self.Rinv.append(rinv)
            self.W.append(r @ r.T)
            self.lam.append(lam)

    # G = W (.) W, maps a dual direction to the primal space
    def apply_g(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        nl = self.cone.nl
        out[:nl] = self.w**2 * v[:nl]
        for k, (off, n) in enumerate(zip(self.cone.offsets, self.cone.dims)):
            t = n * (n + 1) // 2
            out[off : off + t] = svec(self.W[k] @ smat(v[off : off + t], n) @ self.W[k])
        return out

    def g_matrix_product(self, a_c: np.ndarray) -> np.ndarray:
        """``A_c G A_c^T``."""
        nl = self.cone.nl
        al = a_c[:, :nl]
        m = (al * self.w**2) @ al.T
        for k, (off, n) in enumerate(zip(self.cone.offsets, self.cone.dims)):
            t = n * (n + 1) // 2
            ak = a_c[:, off : off + t]
            g = np.empty((t, t))
            for i in range(t):
                e = np.zeros(t)
                e[i] = 1.0
                g[:, i] = svec(self.W[k] @ smat(e, n) @ self.W[k])
            m += ak @ g @ ak.T
        return m

    # scaled-space representations: list [lp vector, block matrices...]
    def scaled_x(self, dx):
        out = [dx[: self.cone.nl] / self.w]
        for k, (n, v) in enumerate(self.cone.blocks(dx)):
            out.append(self.Rinv[k] @ smat(v, n) @ self.Rinv[k].T)
        return out

    def scaled_s(self, ds):
        out = [self.w * ds[: self.cone.nl]]
        for k, (n, v) in enumerate(self.cone.blocks(ds)):
            out.append(self.R[k].T @ smat(v, n) @ self.R[k])
        return out

    def unscale_x(self, z) -> np.ndarray:
        out = np.empty(self.cone.size)
        nl = self.cone.nl
        out[:nl] = self.w * z[0]
        for k, (off, n) in enumerate(zip(self.cone.offsets, self.cone.dims)):
            t = n * (n + 1) // 2
            out[off : off + t] = svec(self.R[k] @ z[k + 1] @ self.R[k].T)
        return out

    def lam_sq(self):
        return [self.lam_l**2] + [np.diag(l**2) for l in self.lam]

    def solve_lam(self, t):
        """Solve ``lambda o Z = t`` (Jordan product) for ``Z``."""
        out = [t[0] / self.lam_l]
        for k, l in enumerate(self.lam):
            out.append(2.0 * t[k + 1] / (l[:, None] + l[None, :]))
        return out

    def max_step(self, z) -> float:
        """Largest ``a`` with ``lambda + a z`` in the cone (inf if unbounded)."""
        a = math.inf
        neg = z[0] < 0
        if np.any(neg):
            a = min(a, float(np.min(-self.lam_l[neg] / z[0][neg])))
        for k, l in enumerate(self.lam):
            isq = 1.0 / np.sqrt(l)
            ev = np.linalg.eigvalsh(isq[:, None] * z[k + 1] * isq[None, :])
            if ev[0] < 0:
                a = min(a, -1.0 / ev[0])
        return a


def _lam_jordan(sc: "_Scaling", z):
    """``lambda o z`` for the scaling's (diagonal) lambda."""
    out = [sc.lam_l * z[0]]
    for l, b in zip(sc.lam, z[1:]):
        out.append(0.5 * (l[:, None] * b + b * l[None, :]))
    return out


def _newton_norm(parts) -> float:
    tot = 0.0
    for p in parts:
        if isinstance(p, list):
            tot += sum(float(np.sum(np.square(q))) for q in p)
        else:
            tot += float(np.sum(np.square(p)))
    return math.sqrt(tot)


def _jordan(u, v):
    out = [u[0] * v[0]]
    for a, b in zip(u[1:], v[1:]):
        out.append(0.5 * (a @ b + b @ a))
    return out


# -- presolve -------------------------------------------------------------


def _presolve(a: np.ndarray, b: np.ndarray, tol: float):
    """Drop linearly dependent rows; returns (kept rows, consistent?)."""
    m = a.shape[0]
    if m == 0:
        return np.arange(0), True
    _, r, piv = sla.qr(a.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * max(diag[0], 1e-300))) if diag.size else 0
    keep = np.sort(piv[:rank])
    drop = np.sort(piv[rank:])
    if drop.size == 0:
        return keep, True
    log.warning("presolve dropped %d linearly dependent equality rows", drop.size)
    coef, *_ = np.linalg.lstsq(a[keep].T, a[drop].T, rcond=None)
    mismatch = np.max(np.abs(b[drop] - coef.T @ b[keep]), initial=0.0)
    return keep, bool(mismatch <= 1e-8 * (1.0 + np.max(np.abs(b), initial=0.0)))


# -- the interior-point method -------------------------------------------


class _Normal:
    """Factorisation of the normal matrix ``A G A^T`` (Cholesky, LU fallback)
    with iterative refinement against the unfactored matrix."""

    def __init__(self, m_mat: np.ndarray):
        self.k = m_mat
        self.chol = None
        self.lu = None
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            try:
                self.chol = sla.cho_factor(m_mat, lower=True, check_finite=True)
            except (np.linalg.LinAlgError, sla.LinAlgWarning):
                reg = 1e-14 * max(1.0, float(np.max(np.abs(np.diag(m_mat)), initial=1.0)))
                self.lu = sla.lu_factor(m_mat + reg * np.eye(m_mat.shape[0]), check_finite=True)

    def _raw(self, rhs):
        if self.chol is not None:
            return sla.cho_solve(self.chol, rhs)
        return sla.lu_solve(self.lu, rhs)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._raw(rhs)
        for _ in range(2):
            x = x + self._raw(rhs - self.k @ x)
        return x


@dataclass
class _FreeElimination:
    """Free variables solved out of the equalities by a pivoted QR of their columns.

    With ``A_f P = Q R`` the first ``r`` rotated rows fix ``x_f`` given
    ``x_c``; the remaining rows constrain the cone variables alone.
    """

    q: np.ndarray
    r: np.ndarray
    piv: np.ndarray
    rank: int
    nf: int

    @classmethod
    def build(cls, a_f: np.ndarray, tol: float) -> "_FreeElimination":
        m, nf = a_f.shape
        if nf == 0:
            return cls(np.eye(m), np.zeros((0, 0)), np.arange(0), 0, 0)
        q, r, piv = sla.qr(a_f, mode="full", pivoting=True)
        diag = np.abs(np.diag(r))
        rank = int(np.sum(diag > tol * max(diag[0] if diag.size else 0.0, 1e-300)))
        return cls(q, r[:rank, :rank], piv, rank, nf)

    def rotate(self, v):
        return self.q.T @ v

    def free_values(self, top_rhs: np.ndarray) -> np.ndarray:
        """``x_f`` from the rotated top rows' right-hand side (non-basic free vars at 0)."""
        xf = np.zeros(self.nf)
        if self.rank:
            xf[self.piv[: self.rank]] = sla.solve_triangular(self.r, top_rhs, lower=False)
        return xf

    def dual_part(self, c_f: np.ndarray) -> np.ndarray:
        """``z`` with ``R^T z = (P^T c_f)`` restricted to the basic columns."""
        if not self.rank:
            return np.zeros(0)
        return sla.solve_triangular(self.r, c_f[self.piv[: self.rank]], lower=False, trans="T")

    def null_cost(self, a_f: np.ndarray, c_f: np.ndarray) -> float:
        """Size of the part of ``c_f`` not reachable by ``A_f^T y`` (non-zero means unbounded)."""
        if self.nf == 0:
            return 0.0
        z = np.zeros(self.q.shape[0])
        z[: self.rank] = self.dual_part(c_f)
        return float(np.linalg.norm(a_f.T @ (self.q @ z) - c_f))


def solve_dense(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    nf: int,
    nl: int,
    dims: list[int],
    settings: SolverSettings,
) -> SolveReport:
    """Solve the conic program whose columns are ordered free, nonneg, svec blocks."""
    n = a.shape[1]
    cone = _Cone(nl, dims)
    assert nf + cone.size == n
    m0 = a.shape[0]

    def failed(status, **kw):
        return SolveReport(status, math.nan, 0, kw.get("pres", math.inf), math.nan, math.nan, np.zeros(n), np.zeros(m0))

    # row equilibration, then dependent-row removal
    norms = np.linalg.norm(a, axis=1)
    norms[norms == 0] = 1.0
    a_s = a / norms[:, None]
    b_s = b / norms
    keep, consistent = _presolve(a_s, b_s, settings.presolve_tol)
    if not consistent:
        return failed(Status.INFEASIBLE)
    a_s, b_s = a_s[keep], b_s[keep]
    a_f, a_c = a_s[:, :nf], a_s[:, nf:]
    c_f, c_c = c[:nf], c[nf:]

    # eliminate the free variables
    fe = _FreeElimination.build(a_f, settings.presolve_tol)
    qa_c = fe.rotate(a_c)
    qb = fe.rotate(b_s)
    r = fe.rank
    a_r, b_r = qa_c[r:], qb[r:]  # cone-only rows
    z_f = fe.dual_part(c_f)
    c_r = c_c - qa_c[:r].T @ z_f
    offset = float(qb[:r] @ z_f)
    if fe.null_cost(a_f, c_f) > 1e-9 * (1.0 + float(np.linalg.norm(c_f))):
        # a free direction lowers the objective at no cost
        status_if_feasible = Status.UNBOUNDED
    else:
        status_if_feasible = None

    def recover(xc, tau_, y_r):
        xf = fe.free_values(qb[:r] * tau_ - qa_c[:r] @ xc)
        y_rot = np.concatenate([z_f * tau_, y_r])
        return np.concatenate([xf, xc]), fe.q @ y_rot

    m = a_r.shape[0]
    b_norm_orig = float(np.linalg.norm(b))
    bnorm = max(1.0, float(np.linalg.norm(b_r)))
    cnorm = max(1.0, float(np.linalg.norm(c)))

    e = cone.identity()
    x = e.copy()
    s = e.copy()
    y = np.zeros(m)
    tau = kappa = 1.0
    nu = cone.degree + 1
    trace: list[dict] = []
    status = Status.MAX_ITER
    it = 0
    pres = dres = gap = math.inf
    pobj = dobj = math.nan

    for it in range(settings.max_iter + 1):
        rp = b_r * tau - a_r @ x
        rd = c_r * tau - a_r.T @ y - s
        rg = kappa + c_r @ x - b_r @ y
        pobj = float(c_r @ x) / tau + offset
        dobj = float(b_r @ y) / tau + offset
        # residuals of the original problem in the caller's units
        x_full, y_full_s = recover(x, tau, y)
        pres = float(np.linalg.norm(b * tau - a @ x_full)) / tau / (1.0 + b_norm_orig)
        rd_full = c * tau - a_s.T @ y_full_s
        rd_full[nf:] -= s
        dres = float(np.linalg.norm(rd_full)) / tau / (1.0 + cnorm)
        comp = float(x @ s) / tau**2
        gap = max(abs(pobj - dobj), abs(comp)) / (1.0 + abs(pobj) + abs(dobj))
        mu = (float(x @ s) + tau * kappa) / nu
        trace.append(
            dict(iter=it, pobj=pobj, dobj=dobj, pres=pres, dres=dres, gap=gap, mu=mu, tau=tau, kappa=kappa)
        )
        log.debug("it %3d pobj %+.6e dobj %+.6e pres %.1e dres %.1e gap %.1e", it, pobj, dobj, pres, dres, gap)
        if pres <= settings.tol and dres <= settings.tol and gap <= settings.tol:
            status = status_if_feasible or Status.OPTIMAL
            break
        bty = float(b_r @ y)
        if bty > 0:
            pinf = float(np.linalg.norm(a_r.T @ y + s)) / cnorm / bty
            if pinf <= settings.tol:
                status = Status.INFEASIBLE
                break
        ctx = float(c_r @ x)
        if ctx < 0:
            dinf = float(np.linalg.norm(a_r @ x)) / bnorm / -ctx
            if dinf <= settings.tol:
                status = Status.UNBOUNDED
                break
        if it == settings.max_iter:
            break

        try:
            sc = _Scaling(cone, x, s)
            nrm = _Normal(sc.g_matrix_product(a_r))
        except (np.linalg.LinAlgError, sla.LinAlgWarning, ValueError) as exc:
            log.debug("factorisation failed: %s", exc)
            status = Status.NUMERICAL_FAILURE
            break

        g_c = sc.apply_g(c_r)
        dy2 = nrm.solve(b_r + a_r @ g_c)
        dx2 = sc.apply_g(a_r.T @ dy2) - g_c
        e2 = -(c_r @ dx2) + b_r @ dy2

        def newton(r1, r2, r4, t_comp, t_tau):
            # reduced to the normal equations; tau eliminated with a second rhs
            hz = sc.unscale_x(sc.solve_lam(t_comp))
            dy1 = nrm.solve(r1 - a_r @ hz + a_r @ sc.apply_g(r2))
            dx1 = hz + sc.apply_g(a_r.T @ dy1 - r2)
            e1 = -r4 - c_r @ dx1 + b_r @ dy1
            dtau = (t_tau / tau - e1) / (e2 + kappa / tau)
            dy = dy1 + dtau * dy2
            dx = dx1 + dtau * dx2
            dkappa = (t_tau - kappa * dtau) / tau
            ds = c_r * dtau - a_r.T @ dy + r2
            return [dy, dx, ds, dtau, dkappa]

        def newton_residual(d, rhs):
            dy, dx, ds, dtau, dkappa = d
            r1, r2, r4, t_comp, t_tau = rhs
            lam_prod = _lam_jordan(sc, [u + v for u, v in zip(sc.scaled_x(dx), sc.scaled_s(ds))])
            return (
                r1 - (a_r @ dx - b_r * dtau),
                r2 - (a_r.T @ dy + ds - c_r * dtau),
                r4 - (-(c_r @ dx) + b_r @ dy - dkappa),
                [t - p for t, p in zip(t_comp, lam_prod)],
                t_tau - (kappa * dtau + tau * dkappa),
            )

        def direction(eta, t_comp, t_tau):
            rhs = (eta * rp, eta * rd, eta * rg, t_comp, t_tau)
            d = newton(*rhs)
            err = _newton_norm(newton_residual(d, rhs))
            for _ in range(settings.refine):
                if err <= 1e-14 * (1.0 + _newton_norm(rhs)):
                    break
                corr = newton(*newton_residual(d, rhs))
                cand = [u + v for u, v in zip(d, corr)]
                cand_err = _newton_norm(newton_residual(cand, rhs))
                if not cand_err < err:
                    break
                d, err = cand, cand_err
            trace[-1]["newton_err"] = err / (1e-300 + _newton_norm(rhs))
            return d

        def step_length(dx, ds, dtau, dkappa):
            amax = min(sc.max_step(sc.scaled_x(dx)), sc.max_step(sc.scaled_s(ds)))
            if dtau < 0:
                amax = min(amax, -tau / dtau)
            if dkappa < 0:
                amax = min(amax, -kappa / dkappa)
            return amax

        lam2 = sc.lam_sq()
        # predictor
        _, dx_a, ds_a, dtau_a, dkap_a = direction(1.0, [-v for v in lam2], -tau * kappa)
        alpha_a = min(1.0, step_length(dx_a, ds_a, dtau_a, dkap_a))
        mu_a = (
            float((x + alpha_a * dx_a) @ (s + alpha_a * ds_a))
            + (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkap_a)
        ) / nu
        sigma = min(1.0, max(0.0, mu_a / mu)) ** 3

        # corrector
        cross = _jordan(sc.scaled_x(dx_a), sc.scaled_s(ds_a))
        t_comp = [-lam2[0] - cross[0] + sigma * mu]
        for l2, cr in zip(lam2[1:], cross[1:]):
            t_comp.append(-l2 - cr + sigma * mu * np.eye(l2.shape[0]))
        t_tau = -tau * kappa - dtau_a * dkap_a + sigma * mu
        dy, dx, ds, dtau, dkappa = direction(1.0 - sigma, t_comp, t_tau)
        alpha = min(1.0, settings.step * step_length(dx, ds, dtau, dkappa))
        if not np.isfinite(alpha) or alpha <= 1e-12 or not all(np.all(np.isfinite(v)) for v in (dy, dx, ds)):
            status = Status.NUMERICAL_FAILURE
            break

        x = x + alpha * dx
        s = s + alpha * ds
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkappa
        trace[-1]["step"] = alpha

    certificate = status is Status.INFEASIBLE or status is Status.UNBOUNDED
    t_out = 1.0 if certificate else tau
    x_full, y_s = recover(x, 0.0 if certificate else tau, y)
    x_out = x_full / t_out
    y_full = np.zeros(m0)
    y_full[keep] = y_s / t_out / norms[keep]
    return SolveReport(
        status=status,
        objective=float(c @ x_out) if status is not Status.INFEASIBLE else math.nan,
        iterations=it,
        primal_residual=pres,
        dual_residual=dres,
        gap=gap,
        x=x_out,
        y=y_full,
        dual_objective=dobj,
        trace=trace,
    )
