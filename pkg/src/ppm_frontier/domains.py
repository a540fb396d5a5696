"""Feasible regions, exact projections and the constrained subproblems built on them."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import _solvers
from .errors import InfeasibleDomain, ValidationError
from .linalg import SpdMatrix, as_vector, solve_spd

FEAS_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Simplex:
    """``{x >= 0, sum(x) = 1}``."""

    dim: int
    kind = "simplex"

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValidationError("simplex dimension must be >= 1")

    def box_slab(self):
        n = self.dim
        return np.zeros(n), np.full(n, np.inf), 1.0, 1.0

    def project(self, y):
        return project_simplex(y)

    def contains(self, x, tol=FEAS_TOLERANCE):
        return bool(np.all(x >= -tol) and abs(np.sum(x) - 1.0) <= tol)

    @property
    def contains_origin(self):
        return False

    def interior_point(self):
        return np.full(self.dim, 1.0 / self.dim)


@dataclass(frozen=True)
class ScaledSimplex:
    """``{x >= 0, sum(x) <= cap}``."""

    dim: int
    cap: float
    kind = "scaled-simplex"

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValidationError("dimension must be >= 1")
        if not (self.cap > 0 and math.isfinite(self.cap)):
            raise ValidationError("cap must be a positive finite number")

    def box_slab(self):
        n = self.dim
        return np.zeros(n), np.full(n, np.inf), -np.inf, float(self.cap)

    def project(self, y):
        x = np.maximum(np.asarray(y, dtype=float), 0.0)
        if np.sum(x) <= self.cap:
            return x
        return project_simplex(y, total=self.cap)

    def contains(self, x, tol=FEAS_TOLERANCE):
        return bool(np.all(x >= -tol) and np.sum(x) <= self.cap + tol)

    @property
    def contains_origin(self):
        return True

    def interior_point(self):
        return np.full(self.dim, 0.5 * self.cap / self.dim)


@dataclass(frozen=True, eq=False)
class BoxSimplex:
    """Weights with per-asset bounds and an implicit cash position.

    ``{lower <= x <= upper, sum(x) + c = 1, cash_lower <= c <= cash_upper}``
    with ``c`` eliminated, i.e. ``1 - cash_upper <= sum(x) <= 1 - cash_lower``.
    """

    lower: np.ndarray
    upper: np.ndarray
    cash_lower: float = 0.0
    cash_upper: float = 0.0
    kind = "box-simplex"

    def __post_init__(self):
        lo = as_vector(self.lower, name="lower")
        hi = as_vector(self.upper, lo.size, "upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if np.any(lo > hi):
            raise InfeasibleDomain("lower bound exceeds upper bound")
        if self.cash_lower > self.cash_upper:
            raise InfeasibleDomain("cash_lower exceeds cash_upper")
        s_lo, s_hi = 1.0 - self.cash_upper, 1.0 - self.cash_lower
        if np.sum(lo) > s_hi + 1e-12 or np.sum(hi) < s_lo - 1e-12:
            raise InfeasibleDomain("weight bounds cannot meet the budget constraint")

    @property
    def dim(self):
        return self.lower.size

    def box_slab(self):
        return self.lower, self.upper, 1.0 - self.cash_upper, 1.0 - self.cash_lower

    def project(self, y):
        lo, hi, s_lo, s_hi = self.box_slab()
        return _solvers.project_box_slab(np.asarray(y, dtype=float), lo, hi, s_lo, s_hi)

    def contains(self, x, tol=FEAS_TOLERANCE):
        lo, hi, s_lo, s_hi = self.box_slab()
        s = np.sum(x)
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol)
                    and s_lo - tol <= s <= s_hi + tol)

    @property
    def contains_origin(self):
        return bool(np.all(self.lower <= 0) and np.all(self.upper >= 0)
                    and self.cash_lower <= 1.0 <= self.cash_upper)

    def interior_point(self):
        lo, hi, s_lo, s_hi = self.box_slab()
        target = 0.5 * (max(s_lo, np.sum(lo)) + min(s_hi, np.sum(hi)))
        return _solvers.project_box_slab(0.5 * (lo + hi), lo, hi, target, target)


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """``{x >= 0, A x <= d}`` with ``A >= 0`` and ``d > 0`` (so it contains 0)."""

    A: np.ndarray
    d: np.ndarray
    kind = "polyhedron"
    _interior: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.size == 0:
            raise ValidationError("A must be a non-empty 2-D matrix")
        d = as_vector(self.d, A.shape[0], "d")
        if not np.all(np.isfinite(A)) or np.any(A < 0):
            raise ValidationError("A must have finite nonnegative entries")
        if np.any(d <= 0):
            raise ValidationError("d must be strictly positive")
        A.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "d", d)
        rows = A.sum(axis=1)
        pos = rows > 0
        c = 0.5 * float(np.min(d[pos] / rows[pos])) if np.any(pos) else 1.0
        object.__setattr__(self, "_interior", np.full(A.shape[1], c))

    @property
    def dim(self):
        return self.A.shape[1]

    def box_slab(self):
        return None

    def project(self, y):
        x, _, _ = _solvers.dykstra_halfspaces(as_vector(y, self.dim, "y"), self.A, self.d)
        return x

    def contains(self, x, tol=FEAS_TOLERANCE):
        return bool(np.all(x >= -tol) and np.all(self.A @ x <= self.d + tol))

    @property
    def contains_origin(self):
        return True

    def interior_point(self):
        return self._interior.copy()


DOMAIN_KINDS = (Simplex, ScaledSimplex, BoxSimplex, Polyhedron)


@dataclass
class SubproblemSolution:
    x: np.ndarray
    objective_value: float
    iterations: int
    residual: float
    closed_form: bool = False
    method: str = "projected-gradient"


def _check_domain(D, n=None):
    if not isinstance(D, DOMAIN_KINDS):
        raise ValidationError(f"unsupported domain {D!r}")
    if n is not None and D.dim != n:
        from .errors import DimensionMismatch

        raise DimensionMismatch(f"domain dimension {D.dim} != problem dimension {n}")


def project_simplex(y, total=1.0):
    """Euclidean projection onto the probability simplex (scaled to ``total``)."""
    y = as_vector(y, name="y")
    return _solvers.project_simplex(y, total)


def project_domain(y, D):
    """Euclidean projection of ``y`` onto ``D``."""
    _check_domain(D)
    y = as_vector(y, D.dim, "y")
    return D.project(y)


def minimize_smooth(obj, D, tol=1e-10, x_init=None, max_iter=10000):
    """Minimize a smooth convex objective over ``D``.

    Simplex-like domains use projected gradient with a face-restricted
    Newton polish; polyhedra use the log-barrier path.
    """
    if isinstance(D, Polyhedron):
        x0 = D.interior_point()
        if x_init is not None and np.all(x_init > 0) and np.all(D.A @ x_init < D.d):
            x0 = np.asarray(x_init, dtype=float)
        res = _solvers.barrier_minimize(obj, x0, G=np.asarray(D.A), h=np.asarray(D.d),
                                        nonneg=True, tol=tol)
        return SubproblemSolution(res.x, res.value, res.newton_steps, res.residual,
                                  method="log-barrier")
    lo, hi, s_lo, s_hi = D.box_slab()
    polish = _solvers.box_slab_polish(obj, lo, hi, s_lo, s_hi)
    start = D.interior_point() if x_init is None else np.asarray(x_init, dtype=float)
    x, val, it, res = _solvers.projected_gradient(obj, start, D.project, tol=tol,
                                                  max_iter=max_iter, polish=polish)
    return SubproblemSolution(x, val, it, res)


def solve_linear_plus_quadratic(a, w, S, x_ref, D, tol=1e-10, x_init=None, max_iter=10000):
    """Minimize ``<a, x> + w (x - x_ref)^T S (x - x_ref)`` over ``D``.

    This is the proximal / central-path subproblem.  ``x_init`` is a warm
    start; by default the projection of ``x_ref`` is used.
    """
    if not isinstance(S, SpdMatrix):
        raise ValidationError("S must be an SpdMatrix")
    _check_domain(D, S.dim)
    a = as_vector(a, S.dim, "a")
    x_ref = as_vector(x_ref, S.dim, "x_ref")
    if not (w > 0 and math.isfinite(w)):
        raise ValidationError(f"weight must be positive and finite, got {w}")
    obj = _solvers.LinearPlusQuadratic(a, w, S.entries, x_ref)
    if x_init is None and not isinstance(D, Polyhedron):
        x_init = D.project(x_ref)
    return minimize_smooth(obj, D, tol=tol, x_init=x_init, max_iter=max_iter)


def min_quadratic_over_domain(S, D, tol=1e-10, force_numeric=False):
    """Minimum of ``x^T S x`` over ``D`` (the minimum-variance point).

    On the simplex the closed form ``S^{-1}e / <e, S^{-1}e>`` is used when
    ``S^{-1}e`` has no negative entry; ``closed_form`` marks that case.
    """
    _check_domain(D, S.dim)
    n = S.dim
    if isinstance(D, Simplex) and not force_numeric:
        y = solve_spd(S, np.ones(n))
        if np.all(y >= 0):
            x = y / np.sum(y)
            obj = _solvers.LinearPlusQuadratic(np.zeros(n), 1.0, S.entries, np.zeros(n))
            res = _solvers.pg_residual(x, obj.grad(x), D.project)
            return SubproblemSolution(x, obj.value(x), 0, res, closed_form=True,
                                      method="closed-form")
    return solve_linear_plus_quadratic(np.zeros(n), 1.0, S, np.zeros(n), D, tol=tol,
                                       x_init=D.interior_point())


def minimize_linear(a, D):
    """Exact LP over a simplex-like domain; ties go to the lowest index.

    Polyhedra are not handled here (callers use the barrier path).
    """
    a = as_vector(a, D.dim, "a")
    n = D.dim
    if isinstance(D, Simplex):
        x = np.zeros(n)
        x[int(np.argmin(a))] = 1.0
        return x
    if isinstance(D, ScaledSimplex):
        x = np.zeros(n)
        i = int(np.argmin(a))
        if a[i] < 0:
            x[i] = D.cap
        return x
    if isinstance(D, BoxSimplex):
        lo, hi, s_lo, s_hi = D.box_slab()
        x = lo.copy()
        room = hi - lo
        need = s_lo - np.sum(lo)
        allowance = s_hi - np.sum(lo)
        added = 0.0
        for i in np.argsort(a, kind="stable"):
            if added >= allowance:
                break
            if added >= need and a[i] >= 0:
                break
            take = min(room[i], allowance - added)
            if a[i] >= 0:
                take = min(take, need - added)
            x[i] += take
            added += take
        return x
    raise ValidationError("minimize_linear supports simplex-like domains only")
