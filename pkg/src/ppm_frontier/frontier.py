"""Worst-case evaluation under ellipsoidal uncertainty and exact frontier solves."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import _solvers
from .domains import (Polyhedron, ScaledSimplex, Simplex, _check_domain, min_quadratic_over_domain,
                      minimize_linear, minimize_smooth, solve_linear_plus_quadratic)
from .errors import InfeasibleBudget, ValidationError
from .linalg import SpdMatrix, as_vector

SMOOTHING = 1e-12


@dataclass(frozen=True)
class EllipsoidalSet:
    """Perturbations ``xi`` with ``||shape^{-1/2} xi||_2 <= radius``."""

    shape: SpdMatrix
    radius: float

    def __post_init__(self):
        if not isinstance(self.shape, SpdMatrix):
            raise ValidationError("shape must be an SpdMatrix")
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise ValidationError(f"radius must be finite and >= 0, got {self.radius}")


@dataclass
class FrontierPoint:
    alpha: float
    x: np.ndarray
    efficiency: float
    robustness: float
    nominal_cost: float
    std_term: float
    upsilon: float
    alpha_eval: float
    omega: float = None
    step: int = None
    residual: float = 0.0

    def as_record(self):
        rec = {
            "alpha": self.alpha,
            "omega": self.omega,
            "efficiency": self.efficiency,
            "robustness": self.robustness,
            "nominal_cost": self.nominal_cost,
            "std_term": self.std_term,
            "upsilon": self.upsilon,
            "alpha_eval": self.alpha_eval,
            "x": [float(v) for v in self.x],
        }
        if self.step is not None:
            rec["k"] = self.step
        return rec


@dataclass
class FrontierSet:
    points: list
    eval_radius: float
    provenance: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in ("exact", "ppm", "extragradient", "saddle"):
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        if any(p.alpha_eval != self.eval_radius for p in self.points):
            raise ValidationError("all points must share the evaluation radius")

    @property
    def alphas(self):
        return np.array([p.alpha for p in self.points])

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def worst_case_value(x, a0, U):
    """``max_{xi in U} <a0 + xi, x> = <a0, x> + radius * sqrt(x^T S x)``."""
    x = as_vector(x, U.shape.dim, "x")
    a0 = as_vector(a0, U.shape.dim, "a0")
    q = max(float(x @ (U.shape.entries @ x)), 0.0)
    return float(a0 @ x) + U.radius * math.sqrt(q)


def worst_case_perturbation(x, U):
    """The maximizing perturbation ``radius * S x / sqrt(x^T S x)`` (zero at ``x = 0``)."""
    x = as_vector(x, U.shape.dim, "x")
    Sx = U.shape.entries @ x
    q = float(x @ Sx)
    if q <= 0:
        return np.zeros_like(x)
    return U.radius * Sx / math.sqrt(q)


def evaluate_point(x, a0, Sigma, alpha_eval):
    """Return ``(efficiency, robustness)`` of ``x`` for the radius ``alpha_eval``."""
    U = EllipsoidalSet(Sigma, alpha_eval)
    a0 = as_vector(a0, Sigma.dim, "a0")
    x = as_vector(x, Sigma.dim, "x")
    return -float(a0 @ x), -worst_case_value(x, a0, U)


def make_point(x, a0, Sigma, alpha, alpha_eval, omega=None, step=None, upsilon=None,
               residual=0.0):
    """Annotate a decision vector with its nominal cost, std term and E/R values."""
    x = np.asarray(x, dtype=float)
    nominal = float(a0 @ x)
    std = math.sqrt(max(float(x @ (Sigma.entries @ x)), 0.0))
    return FrontierPoint(
        alpha=float(alpha), x=x, efficiency=-nominal,
        robustness=-(nominal + alpha_eval * std), nominal_cost=nominal, std_term=std,
        upsilon=nominal if upsilon is None else float(upsilon), alpha_eval=float(alpha_eval),
        omega=omega, step=step, residual=float(residual))


def _mean_std_objective(a0, alpha, Sigma, D):
    delta = SMOOTHING if D.contains_origin else 0.0
    return _solvers.MeanStd(a0, alpha, Sigma.entries, smoothing=delta)


def solve_pareto_exact(a0, U, D, alpha_eval=None, tol=1e-10, x_init=None):
    """Minimize ``<a0, x> + radius * sqrt(x^T S x)`` over ``D``.

    Radius zero is the nominal LP: lowest-index optimal vertex on
    simplex-like domains, barrier path on polyhedra.  Scaled simplices are
    reduced to the unit simplex (the objective is positively homogeneous).
    Domains containing the origin use ``sqrt(x^T S x + 1e-24)``.
    """
    Sigma = U.shape
    _check_domain(D, Sigma.dim)
    a0 = as_vector(a0, Sigma.dim, "a0")
    alpha = float(U.radius)
    alpha_eval = alpha if alpha_eval is None else float(alpha_eval)
    if alpha == 0.0 and not isinstance(D, Polyhedron):
        x = minimize_linear(a0, D)
        return make_point(x, a0, Sigma, alpha, alpha_eval)
    if isinstance(D, ScaledSimplex):
        unit = solve_pareto_exact(a0, U, Simplex(D.dim), alpha_eval=alpha_eval, tol=tol)
        value = unit.nominal_cost + alpha * unit.std_term
        x = D.cap * unit.x if value < 0 else np.zeros(D.dim)
        return make_point(x, a0, Sigma, alpha, alpha_eval, residual=unit.residual)
    obj = _mean_std_objective(a0, alpha, Sigma, D)
    sol = minimize_smooth(obj, D, tol=tol, x_init=x_init)
    return make_point(sol.x, a0, Sigma, alpha, alpha_eval, residual=sol.residual)


def sweep_exact_frontier(a0, Sigma, alphas, D, alpha_eval=None, tol=1e-10):
    """One independent exact solve per radius; robustness reported at ``alpha_eval``.

    ``alpha_eval`` defaults to the largest radius in the sweep.
    """
    alphas = [float(a) for a in alphas]
    _check_alpha_grid(alphas)
    alpha_eval = max(alphas) if alpha_eval is None else float(alpha_eval)
    pts = [solve_pareto_exact(a0, EllipsoidalSet(Sigma, a), D, alpha_eval=alpha_eval, tol=tol)
           for a in alphas]
    return FrontierSet(pts, alpha_eval, "exact")


def _check_alpha_grid(alphas):
    if not alphas:
        raise ValidationError("alpha grid is empty")
    if any(not math.isfinite(a) or a < 0 for a in alphas):
        raise ValidationError("alphas must be finite and nonnegative")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValidationError("alphas must be strictly increasing")


def _lp_minimum(a0, D):
    if isinstance(D, Polyhedron):
        obj = _solvers.LinearPlusQuadratic(a0, 0.0, np.zeros((D.dim, D.dim)), np.zeros(D.dim))
        res = _solvers.barrier_minimize(obj, D.interior_point(), G=np.asarray(D.A),
                                        h=np.asarray(D.d), nonneg=True, tol=1e-12)
        return res.value
    return float(a0 @ minimize_linear(a0, D))


def solve_pe_epsilon_constraint(upsilon, a0, Sigma, D, tol=1e-10, alpha_eval=0.0):
    """Minimum-std point among those with nominal cost at most ``upsilon``.

    Solved through the Lagrangian family ``min tau <a0, x> + x^T S x``,
    whose nominal cost is nonincreasing in ``tau``; ``tau`` is bisected
    until the budget binds.  The reported ``alpha`` is the equivalent
    radius ``2 sqrt(x^T S x) / tau`` (infinite when the budget is slack).
    """
    _check_domain(D, Sigma.dim)
    a0 = as_vector(a0, Sigma.dim, "a0")
    n = Sigma.dim
    upsilon = float(upsilon)
    scale = max(1.0, float(np.max(np.abs(a0))))
    lp_min = _lp_minimum(a0, D)
    if upsilon < lp_min - 1e-12 * scale:
        raise InfeasibleBudget(f"budget {upsilon} is below the nominal minimum {lp_min}")

    mv = min_quadratic_over_domain(Sigma, D, tol=tol)
    if float(a0 @ mv.x) <= upsilon:
        return make_point(mv.x, a0, Sigma, math.inf, alpha_eval, upsilon=upsilon,
                          residual=mv.residual)

    if isinstance(D, Simplex) and upsilon <= lp_min + 1e-12 * scale:
        # only the nominal-optimal face is feasible
        face = np.flatnonzero(a0 <= lp_min + 1e-12 * scale)
        sub = SpdMatrix(Sigma.entries[np.ix_(face, face)])
        xs = min_quadratic_over_domain(sub, Simplex(face.size), tol=tol)
        x = np.zeros(n)
        x[face] = xs.x
        return make_point(x, a0, Sigma, 0.0, alpha_eval, upsilon=upsilon, residual=xs.residual)

    def solve(tau, warm):
        return solve_linear_plus_quadratic(tau * a0, 1.0, Sigma, np.zeros(n), D, tol=tol,
                                           x_init=warm).x

    lo, x_lo = 0.0, mv.x
    hi = 1.0
    x_hi = solve(hi, x_lo)
    while float(a0 @ x_hi) > upsilon:
        lo, x_lo = hi, x_hi
        hi *= 2.0
        if hi > 1e16:
            break
        x_hi = solve(hi, x_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        x_mid = solve(mid, x_hi)
        gap = float(a0 @ x_mid) - upsilon
        if gap > 0:
            lo, x_lo = mid, x_mid
        else:
            hi, x_hi = mid, x_mid
        if abs(gap) <= 1e-15 * scale:
            break
    std = math.sqrt(max(float(x_hi @ (Sigma.entries @ x_hi)), 0.0))
    return make_point(x_hi, a0, Sigma, 2.0 * std / hi, alpha_eval, upsilon=upsilon)
