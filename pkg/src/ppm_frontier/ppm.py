"""Proximal point frontier generation.

A single proximal point run on the nominal problem, started from the
minimum-variance point and using the Bregman distance induced by
``phi(x) = x^T S x``, walks the whole efficiency/robustness frontier.
The k-th iterate coincides with the central-path point at barrier weight
``omega_k = 1 / sum_{j<k} 1/lambda_j`` and, on the simplex when
``S^{-1} e >= 0``, with the exact robust solution at radius
``alpha = 2 omega_k sqrt(x_k^T S x_k)``.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from . import _solvers
from .domains import _check_domain, min_quadratic_over_domain, solve_linear_plus_quadratic
from .errors import NonFiniteGradient, NonPositiveLambda, ValidationError, ZeroIterate
from .frontier import make_point
from .linalg import as_vector


@dataclass
class PpmConfig:
    """Step-size schedule and stopping rules.

    ``lambdas`` is either an explicit list of positive steps or ``None`` for
    the constant rule ``lambda_k = lambda_value``.
    """

    lambdas: list = None
    lambda_value: float = 1.0
    max_steps: int = 1000
    subproblem_tolerance: float = 1e-10
    omega_min: float = 1e-6
    finite_schedule: bool = field(default=False, init=False)

    def __post_init__(self):
        if self.lambdas is not None:
            self.lambdas = [float(v) for v in self.lambdas]
            if not self.lambdas:
                raise ValidationError("explicit lambda schedule is empty")
            if any(not (v > 0) or not math.isfinite(v) for v in self.lambdas):
                raise NonPositiveLambda("every lambda must be positive and finite")
            # a finite list cannot certify sum 1/lambda = inf
            self.finite_schedule = True
        elif not (self.lambda_value > 0 and math.isfinite(self.lambda_value)):
            raise NonPositiveLambda("lambda_value must be positive and finite")
        if int(self.max_steps) < 1:
            raise ValidationError("max_steps must be >= 1")
        if not self.subproblem_tolerance > 0:
            raise ValidationError("subproblem_tolerance must be positive")
        if not self.omega_min > 0:
            raise ValidationError("omega_min must be positive")

    @property
    def steps(self):
        """Number of steps the schedule allows."""
        if self.lambdas is not None:
            return min(len(self.lambdas), int(self.max_steps))
        return int(self.max_steps)

    def lam(self, k):
        return self.lambdas[k] if self.lambdas is not None else float(self.lambda_value)

    def schedule(self):
        return [self.lam(k) for k in range(self.steps)]


@dataclass
class Trajectory:
    start: np.ndarray
    points: list
    config: PpmConfig
    alpha_eval: float
    provenance: str = "ppm"
    robust_solves: int = 1
    prox_steps: int = 0

    @property
    def omegas(self):
        return np.array([p.omega for p in self.points])

    @property
    def alphas(self):
        return np.array([p.alpha for p in self.points])


def omega_schedule(lambdas):
    """``omega_k = (sum_{j<k} 1/lambda_j)^{-1}`` for ``k = 1..len(lambdas)``."""
    lam = [float(v) for v in lambdas]
    if any(not (v > 0) for v in lam):
        raise NonPositiveLambda("every lambda must be positive")
    out = []
    acc = 0.0
    for v in lam:
        acc += 1.0 / v
        out.append(1.0 / acc)
    return out


def alpha_of_omega(x_omega, omega, Sigma):
    """Radius whose robust solution matches the central-path point at ``omega``.

    Matching the stationarity conditions of ``<a0,x> + alpha sqrt(x^T S x)``
    and ``<a0,x> + omega x^T S x`` at the same point gives
    ``alpha = 2 omega sqrt(x^T S x)``.
    """
    x = as_vector(x_omega, Sigma.dim, "x_omega")
    if not omega > 0:
        raise ValidationError("omega must be positive")
    q = float(x @ (Sigma.entries @ x))
    if q <= 0.0:
        raise ZeroIterate("x^T S x is zero; the radius is undefined")
    return 2.0 * omega * math.sqrt(q)


def ppm_step(x_k, lambda_k, a0, Sigma, D, tol=1e-10):
    """One Bregman proximal step ``argmin <a0,x> + lambda_k (x-x_k)^T S (x-x_k)``."""
    if not lambda_k > 0:
        raise NonPositiveLambda("lambda_k must be positive")
    sol = solve_linear_plus_quadratic(a0, lambda_k, Sigma, x_k, D, tol=tol)
    return sol.x


def most_robust_start(a0, Sigma, D, tol=1e-10):
    """The large-radius limit of the frontier: the minimum-variance point of ``D``."""
    _check_domain(D, Sigma.dim)
    return min_quadratic_over_domain(Sigma, D, tol=tol).x


def central_path_point(omega, x0, a0, Sigma, D, tol=1e-10):
    """``argmin <a0,x> + omega (x-x0)^T S (x-x0)`` over ``D``."""
    return solve_linear_plus_quadratic(a0, omega, Sigma, x0, D, tol=tol).x


def iter_ppm_trajectory(a0, Sigma, D, cfg, alpha_eval, start=None):
    """Yield annotated proximal point iterates as they are produced.

    The first item is the start point (``step=0``, no omega); each later
    item carries ``k``, ``omega_k`` and ``alpha(omega_k)``.
    """
    a0 = as_vector(a0, Sigma.dim, "a0")
    _check_domain(D, Sigma.dim)
    tol = cfg.subproblem_tolerance
    x = most_robust_start(a0, Sigma, D, tol=tol) if start is None else as_vector(start, Sigma.dim)
    yield make_point(x, a0, Sigma, math.nan, alpha_eval, step=0)
    inv_sum = 0.0
    for k in range(cfg.steps):
        lam = cfg.lam(k)
        inv_sum += 1.0 / lam
        omega = 1.0 / inv_sum
        if omega < cfg.omega_min:
            return
        x = ppm_step(x, lam, a0, Sigma, D, tol=tol)
        try:
            alpha = alpha_of_omega(x, omega, Sigma)
        except ZeroIterate:
            alpha = 0.0
        yield make_point(x, a0, Sigma, alpha, alpha_eval, omega=omega, step=k + 1)


def run_ppm_trajectory(a0, Sigma, D, cfg, alpha_eval):
    """Run the two-pass procedure: one most-robust solve, then proximal steps."""
    if cfg.finite_schedule:
        warnings.warn("explicit finite lambda schedule: divergence of sum 1/lambda is not "
                      "guaranteed", stacklevel=2)
    it = iter_ppm_trajectory(a0, Sigma, D, cfg, alpha_eval)
    start = next(it)
    points = list(it)
    return Trajectory(start=start.x, points=points, config=cfg, alpha_eval=float(alpha_eval),
                      prox_steps=len(points))


def extragradient_trajectory(objective, D, start, step, iters, divergence_factor=1e8):
    """Projected extra-gradient iterates.

    ``objective(x) -> (value, grad)``.  Each round takes a projected
    half-step to ``y`` and then steps from ``x`` with the gradient at ``y``.
    ``D=None`` means no constraint.  Raises :class:`NonFiniteGradient` on
    non-finite gradients or once the iterates leave a ball
    ``divergence_factor`` times the initial scale.
    """
    if not step > 0:
        raise ValidationError("step must be positive")
    project = (lambda v: v) if D is None else D.project
    x = project(np.asarray(start, dtype=float))
    radius = divergence_factor * max(1.0, float(np.linalg.norm(x)))
    out = [x]
    obj = _solvers.FunctionObjective(objective)
    for k in range(int(iters)):
        g = obj.grad(x)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient at iteration {k}")
        y = project(x - step * g)
        gy = obj.grad(y)
        if not np.all(np.isfinite(gy)):
            raise NonFiniteGradient(f"non-finite gradient at lookahead {k}")
        x = project(x - step * gy)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > radius:
            raise NonFiniteGradient(f"iterates diverged at iteration {k}")
        out.append(x)
    return out


def projected_gradient_trajectory(objective, D, start, step, iters):
    """Plain projected gradient iterates (the baseline extra-gradient improves on)."""
    project = (lambda v: v) if D is None else D.project
    x = project(np.asarray(start, dtype=float))
    out = [x]
    for _ in range(int(iters)):
        _, g = objective(x)
        g = np.asarray(g, dtype=float)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("non-finite gradient")
        x = project(x - step * g)
        out.append(x)
    return out
