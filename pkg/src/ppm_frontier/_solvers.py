"""Generic convex solvers used behind the public domain/frontier API.

Objectives are small objects exposing ``value``, ``grad``, ``hess`` and
``delta(x, d) = f(x + d) - f(x)`` (computed without cancellation so line
searches stay meaningful near the optimum).
"""
import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InfeasibleDomain, MaxIterationsExceeded


class LinearPlusQuadratic:
    """``<a, x> + w (x - r)^T S (x - r)``."""

    def __init__(self, a, w, S, ref):
        self.a = a
        self.w = float(w)
        self.S = S
        self.ref = ref

    def value(self, x):
        z = x - self.ref
        return float(self.a @ x + self.w * (z @ (self.S @ z)))

    def grad(self, x):
        return self.a + 2.0 * self.w * (self.S @ (x - self.ref))

    def hess(self, x):
        return 2.0 * self.w * self.S

    def delta(self, x, d):
        Sd = self.S @ d
        return float(self.a @ d + self.w * (2.0 * ((x - self.ref) @ Sd) + d @ Sd))

    @property
    def scale(self):
        return 2.0 * self.w * float(np.max(np.abs(self.S)))

    quadratic = True


class MeanStd:
    """``<a, x> + alpha * sqrt(x^T S x + delta^2)``."""

    def __init__(self, a, alpha, S, smoothing=0.0):
        self.a = a
        self.alpha = float(alpha)
        self.S = S
        self.d2 = float(smoothing) ** 2

    def _r(self, x):
        return math.sqrt(max(float(x @ (self.S @ x)), 0.0) + self.d2)

    def value(self, x):
        return float(self.a @ x) + self.alpha * self._r(x)

    def grad(self, x):
        Sx = self.S @ x
        r = math.sqrt(max(float(x @ Sx), 0.0) + self.d2)
        if r == 0.0:
            return self.a.copy()
        return self.a + (self.alpha / r) * Sx

    def hess(self, x):
        Sx = self.S @ x
        r = math.sqrt(max(float(x @ Sx), 0.0) + self.d2)
        if r == 0.0:
            return np.zeros_like(self.S)
        return (self.alpha / r) * (self.S - np.outer(Sx, Sx) / (r * r))

    def delta(self, x, d):
        Sx = self.S @ x
        Sd = self.S @ d
        q0 = max(float(x @ Sx), 0.0) + self.d2
        dq = 2.0 * float(x @ Sd) + float(d @ Sd)
        r0 = math.sqrt(q0)
        r1 = math.sqrt(max(q0 + dq, 0.0))
        dr = dq / (r0 + r1) if r0 + r1 > 0 else 0.0
        return float(self.a @ d) + self.alpha * dr

    @property
    def scale(self):
        # bound on the size of the risk part of the gradient
        return self.alpha * math.sqrt(float(np.max(np.abs(self.S))))

    quadratic = False


class FunctionObjective:
    """Wrap a ``fun(x) -> (value, grad)`` oracle; ``delta`` falls back to differences."""

    quadratic = False

    def __init__(self, fun):
        self.fun = fun

    def value(self, x):
        return float(self.fun(x)[0])

    def grad(self, x):
        return np.asarray(self.fun(x)[1], dtype=float)

    def delta(self, x, d):
        return self.value(x + d) - self.value(x)


# ---------------------------------------------------------------------------
# projected gradient


def pg_residual(x, g, project):
    """Unit-step projected-gradient residual ``||x - P(x - g)||_inf``."""
    return float(np.max(np.abs(x - project(x - g))))


def projected_gradient(obj, x0, project, tol=1e-10, max_iter=10000, polish=None):
    """Projected gradient with Armijo backtracking and Barzilai-Borwein trial steps.

    ``polish(x) -> x or None`` is an optional face-restricted Newton step
    tried whenever the iterate's support looks settled; it is accepted
    only if it lowers the residual.  Returns ``(x, value, iterations,
    residual)``; raises :class:`MaxIterationsExceeded` with the best
    iterate otherwise.

    The residual uses the step ``1 / max(1, scale)`` when the objective
    reports a gradient/curvature ``scale``, so heavily weighted quadratic or
    risk terms are not judged on gradient round-off.
    """
    inv = 1.0 / max(1.0, getattr(obj, "scale", 1.0))

    def pg_res(z, gz):
        return pg_residual(z, inv * gz, project)

    x = project(np.asarray(x0, dtype=float))
    g = obj.grad(x)
    res = pg_res(x, g)
    best = (res, x)
    step = 1.0
    polish_every = 25
    for it in range(1, max_iter + 1):
        if res <= tol:
            return x, obj.value(x), it - 1, res
        if polish is not None and (it == 1 or it % polish_every == 0):
            xp = polish(x)
            if xp is not None:
                gp = obj.grad(xp)
                rp = pg_res(xp, gp)
                if rp < res and obj.delta(x, xp - x) <= 1e-12 * (1.0 + abs(obj.value(x))):
                    x, g, res = xp, gp, rp
                    if res < best[0]:
                        best = (res, x)
                    if res <= tol:
                        return x, obj.value(x), it, res
        # backtracking along the projection arc
        t = step
        for _ in range(80):
            xn = project(x - t * g)
            d = xn - x
            gd = float(g @ d)
            dec = obj.delta(x, d)
            if dec <= 1e-4 * gd or not np.any(d):
                break
            t *= 0.5
        gn = obj.grad(xn)
        s = xn - x
        y = gn - g
        sy = float(s @ y)
        if sy > 0:
            step = float(s @ s) / sy
        else:
            step = t * 4.0
        step = min(max(step, 1e-14), 1e14)
        x, g = xn, gn
        res = pg_res(x, g)
        if res < best[0]:
            best = (res, x)
        if not np.any(s):
            # no representable progress left; stop on a stalled iterate
            if polish is not None:
                xp = polish(x)
                if xp is not None:
                    gp = obj.grad(xp)
                    rp = pg_res(xp, gp)
                    if rp < res:
                        x, g, res = xp, gp, rp
            if res <= tol:
                return x, obj.value(x), it, res
            break
    res, x = best
    if res <= tol:
        return x, obj.value(x), max_iter, res
    raise MaxIterationsExceeded("projected gradient did not converge", x=x, residual=res)


def box_slab_polish(obj, lo, hi, s_lo, s_hi, newton_steps=30):
    """Build a polish callback for ``{lo <= x <= hi, s_lo <= sum(x) <= s_hi}``.

    The callback fixes coordinates sitting on their bounds, decides whether
    the sum constraint binds, and runs (equality-constrained) Newton on the
    remaining free coordinates.  Returns ``None`` if the face guess is
    inconsistent (a free coordinate leaves the box).
    """
    scale_lo = np.where(np.isfinite(lo), np.maximum(1.0, np.abs(lo)), 1.0)
    scale_hi = np.where(np.isfinite(hi), np.maximum(1.0, np.abs(hi)), 1.0)

    def polish(x):
        at_lo = x <= lo + 1e-13 * scale_lo
        at_hi = x >= hi - 1e-13 * scale_hi
        free = ~(at_lo | at_hi)
        if not np.any(free):
            return None
        total = float(np.sum(x))
        sum_tol = 1e-12 * max(1.0, abs(total))
        if s_lo == s_hi:
            target = s_lo
        elif total >= s_hi - sum_tol:
            target = s_hi
        elif total <= s_lo + sum_tol:
            target = s_lo
        else:
            target = None
        z = x.copy()
        z[at_lo] = lo[at_lo]
        z[at_hi] = hi[at_hi]
        idx = np.flatnonzero(free)
        if target is not None:
            # put the fixed-sum residue on the free block before iterating
            z[idx] += (target - np.sum(z)) / idx.size
        for _ in range(newton_steps):
            g = obj.grad(z)[idx]
            H = obj.hess(z)[np.ix_(idx, idx)]
            k = idx.size
            if target is not None:
                K = np.zeros((k + 1, k + 1))
                K[:k, :k] = H
                K[:k, k] = 1.0
                K[k, :k] = 1.0
                rhs = np.concatenate([-g, [0.0]])
            else:
                K, rhs = H, -g
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                return None
            dx = sol[:k]
            if not np.all(np.isfinite(dx)):
                return None
            zf = z[idx]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hi = np.where(dx > 0, (hi[idx] - zf) / dx, np.inf)
                t_lo = np.where(dx < 0, (lo[idx] - zf) / dx, np.inf)
            if min(np.min(t_hi), np.min(t_lo)) < 1.0:
                # the Newton step leaves the face: the support guess is not settled
                return None
            d = np.zeros_like(z)
            d[idx] = dx
            tstep = 1.0
            for _ in range(40):
                if obj.delta(z, tstep * d) <= 1e-14 * (1.0 + abs(obj.value(z))):
                    break
                tstep *= 0.5
            z = z + tstep * d
            if obj.quadratic and tstep == 1.0:
                break
            if np.max(np.abs(tstep * dx)) <= 1e-15 * max(1.0, np.max(np.abs(z))):
                break
        zf = z[idx]
        if np.any(zf < lo[idx]) or np.any(zf > hi[idx]):
            return None
        return z

    return polish


# ---------------------------------------------------------------------------
# exact projections


def project_simplex(y, total=1.0):
    """Euclidean projection onto ``{x >= 0, sum(x) = total}`` by sort-and-threshold."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, y.size + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    tau = css[cond][-1] / rho
    return np.maximum(y - tau, 0.0)


def project_box_slab(y, lo, hi, s_lo, s_hi):
    """Euclidean projection onto ``{lo <= x <= hi, s_lo <= sum(x) <= s_hi}``.

    The projection is ``clip(y - tau, lo, hi)`` for the scalar multiplier
    ``tau``; it is bracketed and bisected, then fixed exactly on the
    identified free set.
    """
    x = np.clip(y, lo, hi)
    total = float(np.sum(x))
    if s_lo <= total <= s_hi:
        return x
    target = s_hi if total > s_hi else s_lo

    def f(tau):
        return float(np.sum(np.clip(y - tau, lo, hi))) - target

    # f is nonincreasing in tau
    if total > s_hi:
        a, b = 0.0, 1.0
        while f(b) > 0:
            a, b = b, 2.0 * b
    else:
        a, b = -1.0, 0.0
        while f(a) < 0:
            a, b = 2.0 * a, a
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if f(mid) > 0:
            a = mid
        else:
            b = mid
    tau = 0.5 * (a + b)
    x = np.clip(y - tau, lo, hi)
    free = (x > lo) & (x < hi)
    if np.any(free):
        fixed_sum = float(np.sum(x[~free]))
        tau_exact = (float(np.sum(y[free])) + fixed_sum - target) / np.count_nonzero(free)
        x2 = np.clip(y - tau_exact, lo, hi)
        if np.array_equal((x2 > lo) & (x2 < hi), free):
            x = x2
    return x


def dykstra_halfspaces(y, G, h, nonneg=True, tol=1e-12, max_iter=10000,
                       stall_window=1000):
    """Dykstra's alternating projection onto ``{x >= 0} ∩ {G x <= h}``.

    Returns ``(x, kkt_residual, sweeps)``.  The residual combines primal
    infeasibility with complementarity of the accumulated Dykstra
    increments, which are exactly the normal-cone multipliers at a fixed
    point.
    """
    y = np.asarray(y, dtype=float)
    m, n = G.shape
    norms2 = np.einsum("ij,ij->i", G, G)
    x = y.copy()
    P = np.zeros((m + 1, n))
    checkpoint = math.inf
    res = math.inf
    for sweep in range(1, max_iter + 1):
        if nonneg:
            z = x + P[m]
            xn = np.maximum(z, 0.0)
            P[m] = z - xn
            x = xn
        for i in range(m):
            z = x + P[i]
            viol = float(G[i] @ z) - h[i]
            if viol > 0.0:
                xn = z - (viol / norms2[i]) * G[i]
            else:
                xn = z
            P[i] = z - xn
            x = xn
        slack = h - G @ x
        infeas = max(float(np.max(-slack, initial=0.0)),
                     float(np.max(-x, initial=0.0)) if nonneg else 0.0)
        mult = np.sqrt(np.einsum("ij,ij->i", P[:m], P[:m]) / norms2)
        comp = float(np.max(np.abs(mult * slack), initial=0.0))
        if nonneg:
            comp = max(comp, float(np.max(np.abs(P[m] * x), initial=0.0)))
        res = max(infeas, comp)
        if res <= tol:
            return x, res, sweep
        if sweep % stall_window == 0:
            if infeas > 1e-6 and infeas > 0.5 * checkpoint:
                raise InfeasibleDomain(
                    f"alternating projections stalled at infeasibility {infeas:.3e}")
            checkpoint = infeas
    raise MaxIterationsExceeded("Dykstra projection did not converge", x=x, residual=res)


# ---------------------------------------------------------------------------
# log-barrier method


class BarrierResult:
    __slots__ = ("x", "value", "newton_steps", "gap", "duals", "residual")

    def __init__(self, x, value, newton_steps, gap, duals, residual):
        self.x = x
        self.value = value
        self.newton_steps = newton_steps
        self.gap = gap
        self.duals = duals
        self.residual = residual


def barrier_minimize(obj, x0, G=None, h=None, nonneg=False, nonlinear=(), E=None, f=None,
                     tol=1e-10, mu=30.0, t0=None, max_newton=500, stop=None, center_tol=1e-1):
    """Log-barrier path following with (equality-constrained) Newton centering.

    Minimizes ``obj`` subject to ``G x <= h``, optionally ``x >= 0``,
    smooth convex ``c(x) <= 0`` for each ``c`` in ``nonlinear`` (objects
    with value/grad/hess) and ``E x = f``.  ``x0`` must be strictly
    feasible.  Stops when the duality-gap bound ``n_ineq / t`` drops below
    ``tol``.  Intermediate centerings stop at Newton decrement
    ``center_tol``; the last one is run to convergence.  ``stop(x)`` may
    end the path early (phase-I use).
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    if G is None:
        G = np.zeros((0, n))
        h = np.zeros(0)
    n_ineq = G.shape[0] + (n if nonneg else 0) + len(nonlinear)
    p = 0 if E is None else E.shape[0]

    def slacks(z):
        s_lin = h - G @ z
        s_nl = np.array([-c.value(z) for c in nonlinear]) if nonlinear else np.zeros(0)
        return s_lin, s_nl

    def strictly_feasible(z):
        s_lin, s_nl = slacks(z)
        if np.any(s_lin <= 0) or np.any(s_nl <= 0):
            return False
        return not (nonneg and np.any(z <= 0))

    def phi(z):
        s_lin, s_nl = slacks(z)
        out = -np.sum(np.log(s_lin)) - np.sum(np.log(s_nl))
        if nonneg:
            out -= np.sum(np.log(z))
        return out

    if not strictly_feasible(x):
        raise ValueError("barrier start point is not strictly feasible")
    if n_ineq == 0:
        raise ValueError("barrier method needs at least one inequality")

    if t0 is None:
        # balance objective and barrier gradients at the start point
        g0 = obj.grad(x)
        s_lin, s_nl = slacks(x)
        gb = G.T @ (1.0 / s_lin)
        for c, s in zip(nonlinear, s_nl):
            gb = gb + c.grad(x) / s
        if nonneg:
            gb = gb - 1.0 / x
        t0 = max(1.0, float(np.linalg.norm(gb)) / max(float(np.linalg.norm(g0)), 1e-12))
        t0 = min(t0, n_ineq / max(tol, 1e-16) / mu)
    t = float(t0)
    newton_total = 0
    final = False
    while True:
        final = final or n_ineq / t <= tol
        for _ in range(100):
            s_lin, s_nl = slacks(x)
            g = t * obj.grad(x) + G.T @ (1.0 / s_lin)
            H = t * obj.hess(x) + (G.T * (1.0 / s_lin ** 2)) @ G
            for c, s in zip(nonlinear, s_nl):
                gc = c.grad(x)
                g = g + gc / s
                H = H + np.outer(gc, gc) / s ** 2 + c.hess(x) / s
            if nonneg:
                g = g - 1.0 / x
                H = H + np.diag(1.0 / x ** 2)
            if p:
                K = np.zeros((n + p, n + p))
                K[:n, :n] = H
                K[:n, n:] = E.T
                K[n:, :n] = E
                rhs = np.concatenate([-g, f - E @ x])
                try:
                    dx = np.linalg.solve(K, rhs)[:n]
                except np.linalg.LinAlgError:
                    dx = np.linalg.lstsq(K, rhs, rcond=None)[0][:n]
            else:
                try:
                    dx = -cho_solve(cho_factor(H, check_finite=False), g, check_finite=False)
                except np.linalg.LinAlgError:
                    dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            newton_total += 1
            decrement2 = float(-g @ dx)
            if decrement2 / 2.0 <= (1e-8 if final else center_tol):
                break
            step = 1.0
            # stay strictly inside
            while not strictly_feasible(x + step * dx):
                step *= 0.5
                if step < 1e-20:
                    break
            base = t * obj.value(x) + phi(x)
            while step > 1e-20:
                trial = x + step * dx
                val = t * obj.value(trial) + phi(trial)
                if val <= base - 0.25 * step * decrement2 + 1e-13 * abs(base):
                    break
                step *= 0.5
            x = x + step * dx
            if step <= 1e-20 or newton_total >= max_newton:
                break
        if stop is not None and stop(x):
            break
        if final or newton_total >= max_newton:
            break
        t = min(mu * t, n_ineq / tol)
    s_lin, s_nl = slacks(x)
    duals = {
        "linear": 1.0 / (t * s_lin),
        "nonlinear": 1.0 / (t * s_nl) if nonlinear else np.zeros(0),
        "nonneg": 1.0 / (t * x) if nonneg else np.zeros(0),
    }
    gap = n_ineq / t
    if newton_total >= max_newton and gap > tol:
        raise MaxIterationsExceeded("barrier method hit the Newton-step cap", x=x, residual=gap)
    return BarrierResult(x, obj.value(x), newton_total, gap, duals, gap)
