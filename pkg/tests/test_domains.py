import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog, minimize

from ppm_frontier import _solvers
from ppm_frontier.domains import (BoxSimplex, Polyhedron, ScaledSimplex, Simplex,
                                  min_quadratic_over_domain, minimize_linear, project_domain,
                                  project_simplex, solve_linear_plus_quadratic)
from ppm_frontier.errors import DimensionMismatch, InfeasibleDomain, ValidationError
from ppm_frontier.linalg import SpdMatrix

from conftest import grid_simplex2, random_spd


def box_slab_oracle(y, lo, hi, s_lo, s_hi):
    """Projection by enumerating which bounds bind (lower / upper / free per coordinate)."""
    n = y.size
    best, best_d = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        pattern = np.array(pattern)
        fixed = np.where(pattern == 0, lo, np.where(pattern == 1, hi, 0.0))
        free = pattern == 2
        for sum_mode in ("free", "lo", "hi"):
            x = fixed.copy()
            if sum_mode == "free":
                x[free] = y[free]
            else:
                if not np.any(free):
                    continue
                target = s_lo if sum_mode == "lo" else s_hi
                nu = (np.sum(y[free]) + np.sum(fixed[~free]) - target) / np.count_nonzero(free)
                x[free] = y[free] - nu
            s = np.sum(x)
            ok = (np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12)
                  and s_lo - 1e-12 <= s <= s_hi + 1e-12)
            if ok:
                d = np.sum((x - y) ** 2)
                if d < best_d:
                    best, best_d = x, d
    return best


def slsqp_projection(y, A, d):
    cons = [{"type": "ineq", "fun": lambda x: d - A @ x, "jac": lambda x: -A}]
    res = minimize(lambda x: 0.5 * np.sum((x - y) ** 2), np.zeros_like(y),
                   jac=lambda x: x - y, bounds=[(0, None)] * y.size, constraints=cons,
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
    return res.x


# --- simplex projection -------------------------------------------------------

@pytest.mark.parametrize("y,expected", [
    ((0.5, 0.8), (0.35, 0.65)),
    ((1.0, 0.0, 0.0), (1.0, 0.0, 0.0)),
    ((2.0, -1.0), (1.0, 0.0)),
])
def test_simplex_projection_examples(y, expected):
    assert np.allclose(project_simplex(y), expected, atol=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12))
def test_simplex_projection_properties(y):
    y = np.array(y)
    x = project_simplex(y)
    assert np.all(x >= 0) and abs(np.sum(x) - 1.0) <= 1e-12
    assert np.max(np.abs(project_simplex(x) - x)) <= 1e-12
    # variational inequality: <y - x, z - x> <= 0 at every vertex z
    for i in range(y.size):
        z = np.zeros(y.size)
        z[i] = 1.0
        assert (y - x) @ (z - x) <= 1e-9


# --- other projections --------------------------------------------------------

def test_scaled_simplex_interior():
    assert np.array_equal(project_domain([0.5, 0.5], ScaledSimplex(2, 2.0)), [0.5, 0.5])


def test_scaled_simplex_projects_to_cap():
    x = project_domain([3.0, 1.0], ScaledSimplex(2, 2.0))
    assert np.allclose(x, [2.0, 0.0])


def test_polyhedron_example():
    D = Polyhedron([[1.0, 1.0]], [1.0])
    assert np.allclose(project_domain([1.0, 1.0], D), [0.5, 0.5], atol=1e-10)


def test_polyhedron_random_against_slsqp():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n, m = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        A = rng.uniform(0, 1, (m, n))
        d = rng.uniform(0.5, 1.5, m)
        y = rng.normal(scale=2.0, size=n)
        x = project_domain(y, Polyhedron(A, d))
        ref = slsqp_projection(y, A, d)
        assert np.linalg.norm(x - ref) <= 1e-6
        assert Polyhedron(A, d).contains(x)


def test_box_simplex_binding_upper_bounds():
    D = BoxSimplex(lower=[0.0, 0.0, 0.0], upper=[0.3, 0.3, 1.0])
    y = np.array([0.9, 0.8, -0.2])
    x = project_domain(y, D)
    assert np.allclose(x, box_slab_oracle(y, D.lower, D.upper, 1.0, 1.0), atol=1e-12)
    assert np.allclose(x[:2], 0.3)


def test_box_simplex_random_against_active_set_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        lo = rng.uniform(-0.5, 0.2, n)
        hi = lo + rng.uniform(0.1, 1.0, n)
        c_lo = float(rng.uniform(-0.3, 0.2))
        c_hi = c_lo + float(rng.uniform(0.0, 0.4))
        try:
            D = BoxSimplex(lo, hi, c_lo, c_hi)
        except InfeasibleDomain:
            continue
        y = rng.normal(scale=1.5, size=n)
        ref = box_slab_oracle(y, lo, hi, 1 - c_hi, 1 - c_lo)
        assert np.allclose(project_domain(y, D), ref, atol=1e-10)


def test_box_simplex_infeasible_bounds():
    with pytest.raises(InfeasibleDomain):
        BoxSimplex([0.6, 0.6], [1.0, 1.0])
    with pytest.raises(InfeasibleDomain):
        BoxSimplex([0.0, 0.0], [0.2, 0.2])


def test_dykstra_detects_empty_set():
    with pytest.raises(InfeasibleDomain):
        _solvers.dykstra_halfspaces(np.array([0.5, 0.5]), np.array([[1.0, 1.0]]),
                                    np.array([-1.0]))


def test_dykstra_certificate():
    G = np.array([[1.0, 2.0], [2.0, 1.0]])
    x, res, _ = _solvers.dykstra_halfspaces(np.array([2.0, 2.0]), G, np.array([1.0, 1.0]))
    assert res <= 1e-12
    assert np.allclose(x, [1 / 3, 1 / 3], atol=1e-9)


def _domains(n, rng):
    lo = np.zeros(n)
    hi = np.full(n, 0.6)
    return [Simplex(n), ScaledSimplex(n, 1.5), BoxSimplex(lo, hi, 0.0, 0.2),
            Polyhedron(rng.uniform(0, 1, (3, n)), np.ones(3))]


def _random_feasible(D, rng, k):
    pts = []
    while len(pts) < k:
        if isinstance(D, Simplex):
            z = rng.dirichlet(np.ones(D.dim))
        elif isinstance(D, ScaledSimplex):
            z = rng.dirichlet(np.ones(D.dim + 1))[:-1] * D.cap
        else:
            z = rng.uniform(0, 0.6, D.dim)
            if isinstance(D, Polyhedron):
                z *= 0.5
        if D.contains(z, tol=0.0):
            pts.append(z)
    return np.array(pts)


def test_projection_idempotent_and_optimal():
    rng = np.random.default_rng(5)
    for D in _domains(4, rng):
        Z = _random_feasible(D, rng, 1000)
        for t in range(1000):
            y = rng.normal(size=4)
            x = project_domain(y, D)
            if t < 50:
                assert np.max(np.abs(project_domain(x, D) - x)) <= 1e-12 or \
                    isinstance(D, Polyhedron) and np.max(np.abs(project_domain(x, D) - x)) <= 1e-9
            if t % 10 == 0:
                assert np.linalg.norm(x - y) <= np.min(np.linalg.norm(Z - y, axis=1)) + 1e-9


# --- subproblems --------------------------------------------------------------

def test_subproblem_zero_linear_term_returns_reference():
    rng = np.random.default_rng(2)
    S = random_spd(rng, 4)
    x_ref = np.array([0.1, 0.2, 0.3, 0.4])
    sol = solve_linear_plus_quadratic(np.zeros(4), 3.0, S, x_ref, Simplex(4))
    assert np.allclose(sol.x, x_ref, atol=1e-10)


def test_subproblem_dominant_weight():
    rng = np.random.default_rng(4)
    S = random_spd(rng, 4)
    x_ref = np.array([0.4, 0.3, 0.2, 0.1])
    sol = solve_linear_plus_quadratic(rng.normal(size=4), 1e12, S, x_ref, Simplex(4))
    assert np.max(np.abs(sol.x - x_ref)) <= 1e-6


def test_subproblem_grid_oracle():
    a = np.array([-1.0, 0.0])
    x_ref = np.array([0.5, 0.5])
    sol = solve_linear_plus_quadratic(a, 1.0, SpdMatrix.identity(2), x_ref, Simplex(2))
    ref, _ = grid_simplex2(lambda X: X @ a + np.sum((X - x_ref) ** 2, axis=1))
    assert np.max(np.abs(sol.x - ref)) <= 1e-7
    assert sol.residual <= 1e-10


def test_subproblem_beats_random_feasible_points():
    rng = np.random.default_rng(8)
    for D in _domains(4, rng):
        S = random_spd(rng, 4)
        a = rng.normal(size=4)
        x_ref = rng.normal(size=4)
        sol = solve_linear_plus_quadratic(a, 0.7, S, x_ref, D)
        assert D.contains(sol.x)

        def f(X):
            Z = X - x_ref
            return X @ a + 0.7 * np.einsum("ij,jk,ik->i", Z, S.entries, Z)

        Z = _random_feasible(D, rng, 1000)
        assert f(sol.x[None, :])[0] <= np.min(f(Z)) + 1e-12


def test_subproblem_rejects_bad_weight():
    with pytest.raises(ValidationError):
        solve_linear_plus_quadratic(np.zeros(2), 0.0, SpdMatrix.identity(2), np.zeros(2),
                                    Simplex(2))


def test_subproblem_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_linear_plus_quadratic(np.zeros(3), 1.0, SpdMatrix.identity(2), np.zeros(2),
                                    Simplex(2))


def test_min_variance_examples():
    sol = min_quadratic_over_domain(SpdMatrix.identity(3), Simplex(3))
    assert sol.closed_form and np.allclose(sol.x, 1 / 3, atol=1e-15)
    sol = min_quadratic_over_domain(SpdMatrix.diagonal([1.0, 2.0]), Simplex(2))
    assert np.allclose(sol.x, [2 / 3, 1 / 3], atol=1e-15)


def test_min_variance_sign_mixed_grid():
    S = SpdMatrix([[1.0, 1.5], [1.5, 4.0]])
    sol = min_quadratic_over_domain(S, Simplex(2))
    assert not sol.closed_form
    ref, _ = grid_simplex2(lambda X: np.einsum("ij,jk,ik->i", X, S.entries, X))
    assert np.max(np.abs(sol.x - ref)) <= 1e-7


def test_closed_form_agrees_with_numeric():
    rng = np.random.default_rng(9)
    checked = 0
    while checked < 30:
        S = random_spd(rng, 5, shift=3.0)
        cf = min_quadratic_over_domain(S, Simplex(5))
        if not cf.closed_form:
            continue
        num = min_quadratic_over_domain(S, Simplex(5), force_numeric=True)
        assert np.max(np.abs(cf.x - num.x)) <= 1e-8
        checked += 1


def test_linear_minimizer_lowest_index_tie():
    assert np.array_equal(minimize_linear([0.0, -1.0, -1.0], Simplex(3)), [0.0, 1.0, 0.0])


def test_linear_minimizer_box_simplex_matches_linprog():
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = 5
        lo = rng.uniform(-0.2, 0.1, n)
        hi = lo + rng.uniform(0.2, 0.6, n)
        D = BoxSimplex(lo, hi, 0.0, 0.3) if np.sum(lo) <= 1 <= np.sum(hi) + 0.3 else None
        if D is None:
            continue
        a = rng.normal(size=n)
        x = minimize_linear(a, D)
        ref = linprog(a, A_ub=np.vstack([np.ones(n), -np.ones(n)]), b_ub=[1.0, -0.7],
                      bounds=list(zip(lo, hi)), method="highs")
        assert D.contains(x)
        assert a @ x == pytest.approx(ref.fun, abs=1e-12)
