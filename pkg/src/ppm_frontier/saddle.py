"""Robust solutions with several uncertain linear constraints sharing one ellipsoid.

``min <c0, x>  s.t.  <c_i, x> + beta * sqrt(x^T S x) <= b_i  for all i,  x in simplex``

is attacked two ways: the alternating saddle-point oracle on the
quadratic-penalty Lagrangian

``L(x, lam) = <c0, x> + <lam, C x> + alpha <lam, e> x^T S x - <lam, b>``

and a direct log-barrier solve of the norm-constrained program.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import _solvers
from .domains import Simplex, minimize_linear, solve_linear_plus_quadratic
from .errors import (DimensionMismatch, DivergenceDetected, InfeasibleAtBeta,
                     MaxIterationsExceeded, ValidationError, ZeroIterate)
from .frontier import make_point
from .linalg import SpdMatrix, as_vector


@dataclass(eq=False)
class RcwucInstance:
    c0: np.ndarray
    C: np.ndarray
    b: np.ndarray
    Sigma: SpdMatrix

    def __post_init__(self):
        self.c0 = as_vector(self.c0, name="c0")
        n = self.c0.size
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if C.shape[1] != n:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, expected {n}")
        if not np.all(np.isfinite(C)):
            raise ValidationError("C has non-finite entries")
        self.C = C
        self.b = as_vector(self.b, C.shape[0], "b")
        if not isinstance(self.Sigma, SpdMatrix) or self.Sigma.dim != n:
            raise DimensionMismatch("Sigma must be an SpdMatrix matching c0")
        if nominal_feasibility_margin(self) < -1e-12:
            raise InfeasibleAtBeta("no simplex point satisfies C x <= b")

    @property
    def n(self):
        return self.c0.size

    @property
    def m(self):
        return self.b.size


def nominal_feasibility_margin(inst):
    """``max_{x in simplex} min_i (b_i - <c_i, x>)`` via a small LP."""
    from scipy.optimize import linprog

    n, m = inst.C.shape[1], inst.C.shape[0]
    # variables (x, s): maximize s  s.t.  C x + s <= b, sum x = 1, x >= 0
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([inst.C, np.ones((m, 1))])
    A_eq = np.concatenate([np.ones(n), [0.0]])[None, :]
    res = linprog(cost, A_ub=A_ub, b_ub=inst.b, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    if res.status != 0:
        raise InfeasibleAtBeta(f"feasibility LP failed: {res.message}")
    return float(res.x[-1])


@dataclass
class SaddleState:
    x: np.ndarray
    lam: np.ndarray
    gap_estimate: float
    iterations: int
    max_violation: float


_ENUMERATE_MAX_DIM = 6


def _face_kkt(a, H, face):
    """Stationary point of ``<a,x> + x^T H x / 2`` on the face ``x_F``, ``sum x_F = 1``."""
    k = face.size
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = H[np.ix_(face, face)]
    K[:k, k] = -1.0
    K[k, :k] = 1.0
    rhs = np.concatenate([-a[face], [1.0]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return None, None
    return sol[:k], sol[k]


def _check_face(a, H, face, n, tol=1e-12):
    xf, nu = _face_kkt(a, H, face)
    if xf is None or np.any(xf < -tol):
        return None
    x = np.zeros(n)
    x[face] = np.maximum(xf, 0.0)
    g = a + H @ x
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.any(g - nu < -1e-10 * scale):
        return None
    return x


def _simplex_qp_small(a, H, warm):
    """Exact minimizer over the simplex by face enumeration (small ``n`` only).

    The face of the warm start is tried first; it is almost always the
    right one between neighbouring saddle rounds.
    """
    n = a.size
    if warm is not None:
        x = _check_face(a, H, np.flatnonzero(warm > 0), n)
        if x is not None:
            return x
    for mask in range(1, 1 << n):
        face = np.array([i for i in range(n) if mask >> i & 1])
        x = _check_face(a, H, face, n)
        if x is not None:
            return x
    return None


def _x_update(inst, alpha, lam, warm=None):
    a = inst.c0 + inst.C.T @ lam
    w = alpha * float(np.sum(lam))
    if w <= 0.0:
        return minimize_linear(a, Simplex(inst.n))
    if inst.n <= _ENUMERATE_MAX_DIM:
        x = _simplex_qp_small(a, 2.0 * w * inst.Sigma.entries, warm)
        if x is not None:
            return x
    return solve_linear_plus_quadratic(a, w, inst.Sigma, np.zeros(inst.n), Simplex(inst.n),
                                       tol=1e-9, x_init=warm).x


def _penalized_constraints(inst, x, alpha):
    q = float(x @ (inst.Sigma.entries @ x))
    return inst.C @ x + alpha * q - inst.b


def saddle_oracle(inst, alpha, iters=5000, step_lambda=0.1, decay=0.999, max_lambda=1e8):
    """Alternating multiplier ascent / exact primal minimization.

    Each round takes a projected ascent step on the multipliers using the
    current constraint values ``C x + alpha x^T S x e - b`` and then
    minimizes the Lagrangian over the simplex exactly.  The step shrinks
    geometrically by ``decay``.
    """
    if not alpha >= 0:
        raise ValidationError("alpha must be >= 0")
    if int(iters) < 1:
        raise ValidationError("iters must be >= 1")
    if not step_lambda > 0:
        raise ValidationError("step_lambda must be positive")
    lam = np.zeros(inst.m)
    x = _x_update(inst, alpha, lam)
    step = float(step_lambda)
    best_obj = math.inf
    for k in range(int(iters)):
        g = _penalized_constraints(inst, x, alpha)
        if np.all(g <= 1e-9):
            best_obj = min(best_obj, float(inst.c0 @ x))
        lam = np.maximum(0.0, lam + step * g)
        if float(np.max(lam, initial=0.0)) > max_lambda:
            raise DivergenceDetected(f"multipliers exceeded {max_lambda:g} at round {k}")
        x = _x_update(inst, alpha, lam, warm=x)
        step *= decay
    if alpha == 0.0:
        x = _recover_lp_primal(inst, lam, x)
    g = _penalized_constraints(inst, x, alpha)
    viol = float(np.max(g, initial=0.0))
    if viol <= 1e-9:
        best_obj = min(best_obj, float(inst.c0 @ x))
    beta = map_alpha_to_beta(inst, alpha, x) if alpha > 0 else 0.0
    q = float(x @ (inst.Sigma.entries @ x))
    norm_viol = float(np.max(inst.C @ x + beta * math.sqrt(q) - inst.b, initial=0.0))
    gap = max(norm_viol, 0.0)
    if math.isfinite(best_obj):
        gap += max(0.0, float(inst.c0 @ x) - best_obj)
    return SaddleState(x=x, lam=lam, gap_estimate=gap, iterations=int(iters),
                       max_violation=max(viol, 0.0))


def _recover_lp_primal(inst, lam, x_last):
    """Primal point for the pure LP case from the final multipliers.

    Without the quadratic term the x-update only returns vertices, so the
    last iterate oscillates.  The primal solution lives on the face of
    near-minimal reduced cost ``c0 + C^T lam``; the smallest such face
    whose LP value closes the duality gap against ``lam`` is used, with
    the tolerance widened (up to the whole simplex) otherwise.
    """
    from scipy.optimize import linprog

    reduced = inst.c0 + inst.C.T @ lam
    gap = reduced - float(np.min(reduced))
    scale = max(1.0, float(np.max(np.abs(reduced))))
    dual = float(np.min(reduced)) - float(lam @ inst.b)
    for tol in (1e-8, 1e-6, 1e-4, 1e-2, math.inf):
        face = gap <= tol * scale
        bounds = [(0, None) if f else (0, 0) for f in face]
        res = linprog(inst.c0, A_ub=inst.C, b_ub=inst.b, A_eq=np.ones((1, inst.n)),
                      b_eq=[1.0], bounds=bounds, method="highs")
        if res.status == 0 and (res.fun - dual <= 1e-9 * scale or tol == math.inf):
            return np.maximum(res.x, 0.0) / np.sum(np.maximum(res.x, 0.0))
    return x_last


def map_alpha_to_beta(inst, alpha, x_sp):
    """``beta = alpha * sqrt(x^T S x)`` at the saddle output.

    At this value the quadratic-penalty constraint and the norm constraint
    take identical values at ``x_sp``.
    """
    if alpha == 0:
        return 0.0
    x = as_vector(x_sp, inst.n, "x_sp")
    q = float(x @ (inst.Sigma.entries @ x))
    if q <= 0:
        raise ZeroIterate("x^T S x is zero")
    return alpha * math.sqrt(q)


class _NormRow:
    """``<c, x> + beta sqrt(x^T S x) - b`` as a smooth convex constraint."""

    def __init__(self, c, b, beta, S):
        self.c, self.b, self.beta, self.S = c, float(b), float(beta), S

    def value(self, x):
        return float(self.c @ x) + self.beta * math.sqrt(max(float(x @ (self.S @ x)), 0.0)) - self.b

    def grad(self, x):
        if self.beta == 0.0:
            return self.c
        Sx = self.S @ x
        return self.c + (self.beta / math.sqrt(float(x @ Sx))) * Sx

    def hess(self, x):
        if self.beta == 0.0:
            return np.zeros_like(self.S)
        Sx = self.S @ x
        r = math.sqrt(float(x @ Sx))
        return (self.beta / r) * (self.S - np.outer(Sx, Sx) / (r * r))


class _QuadRow:
    """``<c, x> + alpha x^T S x - b``."""

    def __init__(self, c, b, alpha, S):
        self.c, self.b, self.alpha, self.S = c, float(b), float(alpha), S

    def value(self, x):
        return float(self.c @ x) + self.alpha * float(x @ (self.S @ x)) - self.b

    def grad(self, x):
        return self.c + 2.0 * self.alpha * (self.S @ x)

    def hess(self, x):
        return 2.0 * self.alpha * self.S


class _Lifted:
    """Constraint ``g(x) - s <= 0`` on the stacked variable ``(x, s)``."""

    def __init__(self, row):
        self.row = row

    def value(self, z):
        return self.row.value(z[:-1]) - z[-1]

    def grad(self, z):
        return np.concatenate([self.row.grad(z[:-1]), [-1.0]])

    def hess(self, z):
        H = self.row.hess(z[:-1])
        n = H.shape[0]
        out = np.zeros((n + 1, n + 1))
        out[:n, :n] = H
        return out


class _LastCoordinate:
    quadratic = False

    def __init__(self, n):
        self.c = np.zeros(n + 1)
        self.c[-1] = 1.0

    def value(self, z):
        return float(z[-1])

    def grad(self, z):
        return self.c

    def hess(self, z):
        return np.zeros((self.c.size, self.c.size))


def _strict_start(rows, n, margin=1e-7):
    """Phase I: a relative-interior simplex point strictly satisfying ``rows``."""
    x0 = np.full(n, 1.0 / n)
    s0 = max(max(r.value(x0) for r in rows), 0.0) + 1.0
    z0 = np.concatenate([x0, [s0]])
    lifted = [_Lifted(r) for r in rows]
    G = np.hstack([-np.eye(n), -np.ones((n, 1))])
    E = np.concatenate([np.ones(n), [0.0]])[None, :]

    def done(z):
        return z[-1] < -margin

    try:
        z = _solvers.barrier_minimize(_LastCoordinate(n), z0, G=G, h=np.zeros(n),
                                      nonlinear=lifted, E=E, f=np.array([1.0]), tol=1e-9,
                                      stop=done).x
    except MaxIterationsExceeded as exc:
        # a stalled phase I still tells us whether a strictly feasible point was found
        z = exc.x
    x = z[:-1]
    if not (z[-1] < 0 and np.all(x > 0) and all(r.value(x) < 0 for r in rows)):
        raise InfeasibleAtBeta(f"no strictly feasible point (phase-I value {z[-1]:.3e})")
    return x


def _solve_constrained(inst, rows, tol):
    n = inst.n
    x0 = _strict_start(rows, n)
    obj = _solvers.LinearPlusQuadratic(inst.c0, 0.0, np.zeros((n, n)), np.zeros(n))
    res = _solvers.barrier_minimize(obj, x0, nonneg=True, nonlinear=rows,
                                    E=np.ones((1, n)), f=np.array([1.0]), tol=tol)
    return res


def solve_rcwuc_direct(inst, beta, tol=1e-10):
    """Barrier solve of the norm-constrained robust program at radius ``beta``."""
    if not beta >= 0:
        raise ValidationError("beta must be >= 0")
    S = inst.Sigma.entries
    rows = [_NormRow(inst.C[i], inst.b[i], beta, S) for i in range(inst.m)]
    res = _solve_constrained(inst, rows, tol)
    return make_point(res.x, inst.c0, inst.Sigma, beta, beta, residual=res.residual)


def solve_rcwuc_quadratic_direct(inst, alpha, tol=1e-10):
    """Barrier solve of the quadratic-penalty program the saddle oracle targets.

    ``min <c0, x>  s.t.  <c_i, x> + alpha x^T S x <= b_i,  x in simplex``.
    """
    if not alpha >= 0:
        raise ValidationError("alpha must be >= 0")
    S = inst.Sigma.entries
    rows = [_QuadRow(inst.C[i], inst.b[i], alpha, S) for i in range(inst.m)]
    res = _solve_constrained(inst, rows, tol)
    return make_point(res.x, inst.c0, inst.Sigma, alpha, 0.0, residual=res.residual)


def random_rcwuc_instance(rng, n, m, slack=(0.05, 0.3)):
    """Random instance whose constraints are strictly feasible at the simplex centre.

    Entries of ``c0`` and ``C`` are uniform on [-1, 1]; ``b`` puts the centre
    at a uniform slack; ``Sigma = M^T M / n + 0.5 I``.
    """
    c0 = rng.uniform(-1.0, 1.0, n)
    C = rng.uniform(-1.0, 1.0, (m, n))
    centre = np.full(n, 1.0 / n)
    b = C @ centre + rng.uniform(slack[0], slack[1], m)
    M = rng.normal(size=(n, n))
    Sigma = SpdMatrix(M.T @ M / n + 0.5 * np.eye(n))
    return RcwucInstance(c0, C, b, Sigma)


def feasible_alpha_cap(inst):
    """A radius up to which the simplex centre stays feasible for the penalty form."""
    centre = np.full(inst.n, 1.0 / inst.n)
    q = float(centre @ (inst.Sigma.entries @ centre))
    slack = inst.b - inst.C @ centre
    return float(np.min(slack)) / q
