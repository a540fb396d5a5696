"""Monte Carlo check that robust solutions on random polyhedra sit between two simplices.

For ``X = {x >= 0, A x <= d_bar e}`` with i.i.d. entries on ``[0, b]`` the
polyhedron contains ``inner = {x >= 0, <e,x> <= d_bar/b}`` and, with high
probability, is contained in ``kappa * inner``.  Whenever both inclusions
hold, the robustness of the robust solutions is ordered the same way.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from .domains import Polyhedron, ScaledSimplex
from .errors import EpsilonTooLarge, FrontierError, ValidationError
from .frontier import EllipsoidalSet, _check_alpha_grid, solve_pareto_exact
from .linalg import SpdMatrix, as_vector

ORDER_SLACK = 1e-7


@dataclass
class SandwichConfig:
    m: int
    n: int
    bound_b: float = 1.0
    d_bar: float = 1.0
    mu: float = None
    trials: int = 200
    seed: int = 0
    alphas: list = field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0])
    tol: float = 1e-9

    def __post_init__(self):
        if int(self.m) < 1 or int(self.n) < 1:
            raise ValidationError("m and n must be >= 1")
        if not (self.bound_b > 0 and math.isfinite(self.bound_b)):
            raise ValidationError("bound_b must be positive")
        if not (self.d_bar > 0 and math.isfinite(self.d_bar)):
            raise ValidationError("d_bar must be positive")
        if self.mu is None:
            # uniform entries on [0, b]
            self.mu = 0.5 * self.bound_b
        if not (0 < self.mu <= self.bound_b):
            raise ValidationError("mu must lie in (0, bound_b]")
        if int(self.trials) < 1:
            raise ValidationError("trials must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        self.alphas = [float(a) for a in self.alphas]
        _check_alpha_grid(self.alphas)

    @property
    def epsilon(self):
        return self.bound_b / self.mu * math.sqrt(math.log(self.m) / self.n)


@dataclass
class SandwichRow:
    alpha: float
    r_inner: float
    r_poly: float
    r_outer: float
    ordering_holds: bool

    def as_record(self):
        return {"alpha": self.alpha, "r_inner": self.r_inner, "r_poly": self.r_poly,
                "r_outer": self.r_outer, "ordering_holds": self.ordering_holds}


@dataclass
class SandwichTrial:
    seed: int
    trial_index: int
    polyhedron: Polyhedron
    kappa: float
    per_alpha: list
    inner_contained: bool = True
    outer_contains: bool = True
    max_sum: float = math.nan
    error: str = None

    @property
    def contained(self):
        return self.inner_contained and self.outer_contains

    @property
    def ordering_holds(self):
        return self.error is None and all(r.ordering_holds for r in self.per_alpha)

    def as_record(self):
        return {
            "seed": self.seed, "trial": self.trial_index, "kappa": self.kappa,
            "inner_contained": self.inner_contained, "outer_contains": self.outer_contains,
            "max_sum": self.max_sum, "ordering_holds": self.ordering_holds,
            "error": self.error, "per_alpha": [r.as_record() for r in self.per_alpha],
        }


def trial_generator(seed, trial_index):
    """Counter-based stream keyed by ``(seed, trial_index)``."""
    ss = np.random.SeedSequence([int(seed), int(trial_index)])
    return np.random.Generator(np.random.Philox(ss))


def sample_random_polyhedron(cfg, trial_index):
    """``{x >= 0, A x <= d_bar e}`` with ``A`` uniform on ``[0, b]``."""
    rng = trial_generator(cfg.seed, trial_index)
    A = rng.uniform(0.0, cfg.bound_b, size=(int(cfg.m), int(cfg.n)))
    return Polyhedron(A, np.full(int(cfg.m), float(cfg.d_bar)))


def min_n_for(cfg):
    """Smallest ``n`` with ``epsilon < 1`` at the configured ``m``."""
    ratio = cfg.bound_b / cfg.mu
    return int(math.floor(ratio * ratio * math.log(cfg.m))) + 1


def sandwich_factors(cfg):
    """Return ``(inner_cap, kappa)`` with ``inner_cap = d_bar / b``."""
    eps = cfg.epsilon
    if eps >= 1.0:
        raise EpsilonTooLarge(eps, min_n_for(cfg))
    return cfg.d_bar / cfg.bound_b, cfg.bound_b / (cfg.mu * (1.0 - eps))


def containment(P, inner_cap, outer_cap):
    """Check ``inner <= P <= outer`` for the two scaled simplices.

    The inner simplex sits inside ``P`` iff every vertex ``inner_cap e_j``
    does.  ``P`` sits inside the outer one iff ``max <e, x>`` over ``P``
    is at most ``outer_cap`` (an LP).
    """
    from scipy.optimize import linprog

    A, d = np.asarray(P.A), np.asarray(P.d)
    inner_ok = bool(np.all(inner_cap * A.max(axis=1) <= d * (1 + 1e-12)))
    res = linprog(-np.ones(P.dim), A_ub=A, b_ub=d, bounds=[(0, None)] * P.dim, method="highs")
    if res.status == 3:
        return inner_ok, False, math.inf
    if res.status != 0:
        raise FrontierError(f"containment LP failed: {res.message}")
    max_sum = -float(res.fun)
    return inner_ok, bool(max_sum <= outer_cap * (1 + 1e-12)), max_sum


def default_instance(n, seed):
    """``a0`` uniform on ``[-1, 0]`` and a diagonal ``Sigma`` with entries on ``[0.5, 2]``."""
    rng = trial_generator(seed, 2 ** 32)
    a0 = rng.uniform(-1.0, 0.0, n)
    Sigma = SpdMatrix(np.diag(rng.uniform(0.5, 2.0, n)))
    return a0, Sigma


def _robustness(a0, Sigma, alpha, D, tol):
    p = solve_pareto_exact(a0, EllipsoidalSet(Sigma, alpha), D, alpha_eval=alpha, tol=tol)
    return p.robustness


def run_trial(cfg, a0, Sigma, trial_index, P=None):
    """One trial; ``P`` overrides the sampled polyhedron (for injected cases)."""
    inner_cap, kappa = sandwich_factors(cfg)
    if P is None:
        P = sample_random_polyhedron(cfg, trial_index)
    trial = SandwichTrial(seed=int(cfg.seed), trial_index=int(trial_index), polyhedron=P,
                          kappa=kappa, per_alpha=[])
    try:
        trial.inner_contained, trial.outer_contains, trial.max_sum = containment(
            P, inner_cap, kappa * inner_cap)
        inner = ScaledSimplex(cfg.n, inner_cap)
        outer = ScaledSimplex(cfg.n, kappa * inner_cap)
        for alpha in cfg.alphas:
            # robustness is evaluated at the solve radius on every domain
            r_in = _robustness(a0, Sigma, alpha, inner, cfg.tol)
            r_p = _robustness(a0, Sigma, alpha, P, cfg.tol)
            r_out = _robustness(a0, Sigma, alpha, outer, cfg.tol)
            ok = r_in <= r_p + ORDER_SLACK and r_p <= r_out + ORDER_SLACK
            trial.per_alpha.append(SandwichRow(alpha, r_in, r_p, r_out, bool(ok)))
    except FrontierError as exc:
        trial.error = f"{type(exc).__name__}: {exc}"
    return trial


def _run_one(args):
    return run_trial(*args)


def run_sandwich_experiment(cfg, a0, Sigma, workers=1):
    """All trials in index order; solver failures are recorded on the trial."""
    sandwich_factors(cfg)
    a0 = as_vector(a0, int(cfg.n), "a0")
    if not isinstance(Sigma, SpdMatrix) or Sigma.dim != int(cfg.n):
        raise ValidationError("Sigma must be an SpdMatrix of dimension n")
    jobs = [(cfg, a0, Sigma, t) for t in range(int(cfg.trials))]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def summarize(trials, m):
    """Frequencies and the count of ordering failures among contained trials."""
    total = len(trials)
    ordered = sum(t.ordering_holds for t in trials)
    contained = [t for t in trials if t.error is None and t.contained]
    violations = sum(not t.ordering_holds for t in contained)
    return {
        "trials": total,
        "ordering_frequency": ordered / total if total else math.nan,
        "containment_frequency": len(contained) / total if total else math.nan,
        "contained_violations": violations,
        "errors": sum(t.error is not None for t in trials),
        "target": 1.0 - 1.0 / m - 2.0 * math.sqrt(math.log(20.0) / (2.0 * total)) if total else math.nan,
    }
