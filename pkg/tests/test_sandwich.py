import math

import numpy as np
import pytest

from ppm_frontier.domains import Polyhedron
from ppm_frontier.errors import EpsilonTooLarge, ValidationError
from ppm_frontier.sandwich import (SandwichConfig, containment, default_instance, run_trial,
                                   run_sandwich_experiment, sample_random_polyhedron,
                                   sandwich_factors, summarize)


def test_sampling_is_deterministic_and_bounded():
    cfg = SandwichConfig(m=6, n=30, bound_b=2.5, seed=123)
    P1 = sample_random_polyhedron(cfg, 4)
    P2 = sample_random_polyhedron(cfg, 4)
    assert np.array_equal(P1.A, P2.A)
    assert not np.array_equal(P1.A, sample_random_polyhedron(cfg, 5).A)
    assert np.all(P1.A >= 0) and np.all(P1.A <= 2.5)
    assert np.array_equal(P1.d, np.full(6, 1.0))


def test_sample_mean_clt_bound():
    cfg = SandwichConfig(m=50, n=200, bound_b=1.0, seed=9)
    A = sample_random_polyhedron(cfg, 0).A
    assert abs(A.mean() - 0.5) <= 3.0 / math.sqrt(12.0 * A.size)


def test_factor_examples():
    inner, kappa = sandwich_factors(SandwichConfig(m=50, n=200))
    eps = 2.0 * math.sqrt(math.log(50) / 200)
    assert eps == pytest.approx(0.2797, abs=1e-4)
    assert inner == 1.0
    assert kappa == pytest.approx(2.0 / (1.0 - eps), rel=1e-14)
    assert kappa == pytest.approx(2.777, abs=1e-3)
    assert sandwich_factors(SandwichConfig(m=1, n=10, bound_b=3.0))[1] == pytest.approx(2.0)


def test_epsilon_too_large():
    with pytest.raises(EpsilonTooLarge) as info:
        sandwich_factors(SandwichConfig(m=100, n=10))
    assert info.value.epsilon == pytest.approx(1.357, abs=1e-3)
    n_min = info.value.min_n
    assert SandwichConfig(m=100, n=n_min).epsilon < 1.0
    assert SandwichConfig(m=100, n=n_min - 1).epsilon >= 1.0


def test_config_validation():
    with pytest.raises(ValidationError):
        SandwichConfig(m=5, n=50, trials=0)
    with pytest.raises(ValidationError):
        SandwichConfig(m=5, n=50, alphas=[1.0, 0.5])
    with pytest.raises(ValidationError):
        SandwichConfig(m=5, n=50, bound_b=-1.0)


def test_inner_containment_always_holds():
    cfg = SandwichConfig(m=8, n=40, seed=2)
    inner_cap, kappa = sandwich_factors(cfg)
    for t in range(10):
        ok_in, _, max_sum = containment(sample_random_polyhedron(cfg, t), inner_cap,
                                        kappa * inner_cap)
        assert ok_in and max_sum >= inner_cap


def test_injected_inner_simplex_gives_equal_left_side():
    cfg = SandwichConfig(m=3, n=20, seed=1, alphas=[0.5, 1.0])
    a0, Sigma = default_instance(cfg.n, cfg.seed)
    P = Polyhedron(np.full((1, cfg.n), cfg.bound_b), [cfg.d_bar])
    trial = run_trial(cfg, a0, Sigma, 0, P=P)
    assert trial.error is None and trial.contained
    for row in trial.per_alpha:
        assert row.ordering_holds
        assert row.r_poly == pytest.approx(row.r_inner, abs=1e-7)


def test_small_experiment_is_deterministic_and_ordered():
    cfg = SandwichConfig(m=5, n=40, trials=4, seed=77, alphas=[0.1, 1.0])
    a0, Sigma = default_instance(cfg.n, cfg.seed)
    r1 = [t.as_record() for t in run_sandwich_experiment(cfg, a0, Sigma)]
    r2 = [t.as_record() for t in run_sandwich_experiment(cfg, a0, Sigma)]
    assert r1 == r2
    assert [r["trial"] for r in r1] == [0, 1, 2, 3]
    for r in r1:
        if r["inner_contained"] and r["outer_contains"]:
            assert r["ordering_holds"]
    s = summarize(run_sandwich_experiment(cfg, a0, Sigma), cfg.m)
    assert s["trials"] == 4 and s["errors"] == 0


def test_parallel_matches_serial():
    cfg = SandwichConfig(m=4, n=30, trials=3, seed=5, alphas=[0.5])
    a0, Sigma = default_instance(cfg.n, cfg.seed)
    serial = [t.as_record() for t in run_sandwich_experiment(cfg, a0, Sigma, workers=1)]
    par = [t.as_record() for t in run_sandwich_experiment(cfg, a0, Sigma, workers=2)]
    assert serial == par
