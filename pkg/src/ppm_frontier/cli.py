"""Command line entry point: run an experiment and write its records as a table.

Usage::

    ppm-frontier COMMAND [--config FILE] [--key value ...] --out PATH

Configuration is a flat ``key = value`` file (``#`` starts a comment);
``--key value`` flags override it.  Records go out as JSON lines (default)
or CSV, written to a temporary file and renamed into place on success.
Exit status: 0 success, 1 invalid input, 2 solver failure.
"""
import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .domains import BoxSimplex, ScaledSimplex, Simplex
from .errors import DataError, FrontierError, SolverError, ValidationError
from .frontier import EllipsoidalSet, solve_pareto_exact, sweep_exact_frontier
from .linalg import SpdMatrix
from .portfolio import estimate_moments, evaluate_out_of_sample, load_returns_csv, synthetic_returns
from .ppm import PpmConfig, run_ppm_trajectory
from .saddle import (feasible_alpha_cap, map_alpha_to_beta, random_rcwuc_instance,
                     saddle_oracle, solve_rcwuc_direct, solve_rcwuc_quadratic_direct)
from .sandwich import (SandwichConfig, default_instance, run_sandwich_experiment,
                       summarize)

SCHEMA_VERSION = 1
COMMANDS = ("frontier-exact", "frontier-ppm", "compare", "saddle", "sandwich", "portfolio")


class UsageError(ValidationError):
    pass


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


# key -> (parser, default); a default of None means "derived" or "optional"
_COMMON = {
    "seed": (int, 0),
    "tol": (float, 1e-10),
    "out": (str, None),
    "format": (str, "jsonl"),
}
_INSTANCE = {
    "instance": (str, "random-diagonal"),
    "n": (int, 5),
    "domain": (str, "simplex"),
    "cap": (float, 1.0),
    "lower": (float, 0.0),
    "upper": (float, 1.0),
    "cash_lower": (float, 0.0),
    "cash_upper": (float, 0.0),
    "returns": (str, None),
    "rows": (int, 750),
    "train_rows": (int, None),
    "alpha_eval": (float, None),
}
_PPM = {
    "lambda": (float, 1.0),
    "steps": (int, 50),
    "omega_min": (float, 1e-12),
}
KEYS = {
    "frontier-exact": {**_COMMON, **_INSTANCE, "alphas": (_floats, "0,0.25,0.5,1,2")},
    "frontier-ppm": {**_COMMON, **_INSTANCE, **_PPM},
    "compare": {**_COMMON, **_INSTANCE, **_PPM},
    "portfolio": {**_COMMON, **_INSTANCE, **_PPM, "evaluate_oos": (_bool, True)},
    "saddle": {**_COMMON, "n": (int, 3), "m": (int, 2), "iters": (int, 5000),
               "step_lambda": (float, 0.1), "decay": (float, 0.999),
               "alpha_fractions": (_floats, "0,0.25,0.5,0.75")},
    "sandwich": {**_COMMON, "m": (int, 50), "n": (int, 200), "trials": (int, 200),
                 "bound_b": (float, 1.0), "d_bar": (float, 1.0),
                 "alphas": (_floats, "0.1,0.5,1,2")},
}
# portfolio runs default to synthetic factor-model returns
_DEFAULT_OVERRIDES = {"portfolio": {"instance": "synthetic-returns", "n": 20, "lambda": 1000.0,
                                    "steps": 10}}


def read_config_file(path):
    """Parse ``key = value`` lines; returns a dict of raw strings."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{no}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value.strip("\"'")
    return out


def build_config(command, file_values, flag_values):
    """Merge defaults, file values and flags (flags win) and parse each value."""
    table = KEYS[command]
    raw = {k: v for k, (_, v) in table.items()}
    raw.update(_DEFAULT_OVERRIDES.get(command, {}))
    for source, values in (("config file", file_values), ("flag", flag_values)):
        for key, value in values.items():
            if key not in table:
                name = f"--{key.replace('_', '-')}" if source == "flag" else key
                raise UsageError(f"unknown {source} key {name!r} for {command}")
            raw[key] = value
    cfg = {}
    for key, (parse, _) in table.items():
        value = raw.get(key)
        if value is None or (isinstance(value, (int, float, list)) and not isinstance(value, str)):
            cfg[key] = value
            continue
        try:
            cfg[key] = parse(value)
        except (TypeError, ValueError):
            raise UsageError(f"bad value {value!r} for --{key.replace('_', '-')}") from None
    if cfg["format"] not in ("jsonl", "csv"):
        raise UsageError("--format must be jsonl or csv")
    if not cfg["tol"] > 0:
        raise UsageError("--tol must be positive")
    if not 0 <= cfg["seed"] < 2 ** 64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    return cfg


# ---------------------------------------------------------------------------
# instances


def _rng(seed, stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


def _domain(cfg, n):
    kind = cfg["domain"]
    if kind == "simplex":
        return Simplex(n)
    if kind == "scaled-simplex":
        return ScaledSimplex(n, cfg["cap"])
    if kind == "box-simplex":
        return BoxSimplex(np.full(n, cfg["lower"]), np.full(n, cfg["upper"]),
                          cfg["cash_lower"], cfg["cash_upper"])
    raise UsageError(f"unknown --domain {kind!r}")


def build_instance(cfg):
    """Return ``(a0, Sigma, D, holdout_moments or None, meta)``."""
    kind = cfg["instance"]
    n = cfg["n"]
    if n < 1:
        raise UsageError("--n must be >= 1")
    meta = {"instance": kind}
    holdout = None
    if kind in ("random-diagonal", "random-dense"):
        rng = _rng(cfg["seed"], 0)
        a0 = rng.uniform(-1.0, 1.0, n)
        if kind == "random-diagonal":
            Sigma = SpdMatrix(np.diag(rng.uniform(0.5, 2.0, n)))
        else:
            M = rng.normal(size=(n, n))
            Sigma = SpdMatrix(M.T @ M / n + 0.5 * np.eye(n))
    elif kind in ("returns", "synthetic-returns"):
        if kind == "returns":
            if not cfg["returns"]:
                raise UsageError("--returns PATH is required for instance=returns")
            R = load_returns_csv(cfg["returns"])
            meta["returns"] = os.path.basename(cfg["returns"])
        else:
            R = synthetic_returns(n=n, T=cfg["rows"], seed=cfg["seed"])
        T = R.shape[0]
        t = cfg["train_rows"] if cfg["train_rows"] is not None else (2 * T) // 3
        if not 2 <= t <= T:
            raise UsageError(f"--train-rows must lie in [2, {T}]")
        ins, out = R.split(t)
        mom = estimate_moments(ins)
        a0, Sigma = -mom.mean, mom.cov
        meta.update(tickers=list(R.tickers), train_rows=t, ridge=mom.regularization,
                    oos_shape="out-of-sample covariance")
        if T - t >= 2:
            holdout = estimate_moments(out)
            meta["oos_ridge"] = holdout.regularization
        n = R.shape[1]
    else:
        raise UsageError(f"unknown --instance {kind!r}")
    return a0, Sigma, _domain(cfg, n), holdout, meta


# ---------------------------------------------------------------------------
# commands


def _point_record(p, **extra):
    rec = p.as_record()
    rec.update(extra)
    return rec


def _ppm_config(cfg):
    return PpmConfig(lambda_value=cfg["lambda"], max_steps=cfg["steps"],
                     subproblem_tolerance=cfg["tol"], omega_min=cfg["omega_min"])


def cmd_frontier_exact(cfg):
    a0, Sigma, D, _, meta = build_instance(cfg)
    fs = sweep_exact_frontier(a0, Sigma, cfg["alphas"], D, alpha_eval=cfg["alpha_eval"],
                              tol=cfg["tol"])
    recs = [_point_record(p, record="point", provenance="exact") for p in fs]
    recs.append({"record": "summary", "points": len(fs), "alpha_eval": fs.eval_radius, **meta})
    return recs


def _run_ppm(cfg, a0, Sigma, D):
    cfg_ppm = _ppm_config(cfg)
    # the evaluation radius defaults to alpha at the first step, the largest on the path
    probe = run_ppm_trajectory(a0, Sigma, D, cfg_ppm, 0.0)
    alpha_eval = cfg["alpha_eval"]
    if alpha_eval is None:
        alpha_eval = max([p.alpha for p in probe.points], default=0.0)
    pts = [_rescore(p, a0, Sigma, alpha_eval) for p in probe.points]
    return probe, pts, alpha_eval


def _rescore(p, a0, Sigma, alpha_eval):
    from .frontier import make_point

    return make_point(p.x, a0, Sigma, p.alpha, alpha_eval, omega=p.omega, step=p.step)


def cmd_frontier_ppm(cfg):
    a0, Sigma, D, _, meta = build_instance(cfg)
    traj, pts, alpha_eval = _run_ppm(cfg, a0, Sigma, D)
    recs = [_point_record(p, record="point", provenance="ppm") for p in pts]
    recs.append({"record": "summary", "points": len(pts), "alpha_eval": alpha_eval,
                 "robust_solves": traj.robust_solves, "prox_steps": traj.prox_steps, **meta})
    return recs


def _compare(cfg, with_oos):
    a0, Sigma, D, holdout, meta = build_instance(cfg)
    traj, pts, alpha_eval = _run_ppm(cfg, a0, Sigma, D)
    recs = []
    worst = {"matching_error": 0.0, "efficiency_gap": 0.0, "robustness_gap": 0.0}
    for p in pts:
        ex = solve_pareto_exact(a0, EllipsoidalSet(Sigma, p.alpha), D, alpha_eval=alpha_eval,
                                tol=cfg["tol"])
        rec = {
            "record": "point", "k": p.step, "alpha": p.alpha, "omega": p.omega,
            "efficiency_ppm": p.efficiency, "robustness_ppm": p.robustness,
            "efficiency_exact": ex.efficiency, "robustness_exact": ex.robustness,
            "matching_error": float(np.max(np.abs(p.x - ex.x))),
            "efficiency_gap": abs(p.efficiency - ex.efficiency),
            "robustness_gap": abs(p.robustness - ex.robustness),
            "alpha_eval": alpha_eval, "x_ppm": [float(v) for v in p.x],
            "x_exact": [float(v) for v in ex.x],
        }
        if with_oos and holdout is not None:
            rec["oos_efficiency_ppm"], rec["oos_robustness_ppm"] = evaluate_out_of_sample(
                p.x, holdout, alpha_eval)
            rec["oos_efficiency_exact"], rec["oos_robustness_exact"] = evaluate_out_of_sample(
                ex.x, holdout, alpha_eval)
        for key in worst:
            worst[key] = max(worst[key], rec[key])
        recs.append(rec)
    recs.append({"record": "summary", "points": len(pts), "alpha_eval": alpha_eval,
                 **{f"max_{k}": v for k, v in worst.items()}, **meta})
    return recs


def cmd_compare(cfg):
    return _compare(cfg, with_oos=True)


def cmd_portfolio(cfg):
    if cfg["instance"] not in ("returns", "synthetic-returns"):
        raise UsageError("portfolio needs --instance returns or synthetic-returns")
    return _compare(cfg, with_oos=cfg["evaluate_oos"])


def cmd_saddle(cfg):
    rng = _rng(cfg["seed"], 1)
    inst = random_rcwuc_instance(rng, cfg["n"], cfg["m"])
    cap = feasible_alpha_cap(inst)
    recs = []
    for frac in cfg["alpha_fractions"]:
        if not 0 <= frac < 1:
            raise UsageError("--alpha-fractions must lie in [0, 1)")
        alpha = frac * cap
        st = saddle_oracle(inst, alpha, iters=cfg["iters"], step_lambda=cfg["step_lambda"],
                           decay=cfg["decay"])
        beta = map_alpha_to_beta(inst, alpha, st.x)
        direct = solve_rcwuc_direct(inst, beta, tol=cfg["tol"])
        quad = solve_rcwuc_quadratic_direct(inst, alpha, tol=cfg["tol"])
        recs.append({
            "record": "point", "alpha": alpha, "beta": beta, "x": [float(v) for v in st.x],
            "lambda": [float(v) for v in st.lam], "gap_estimate": st.gap_estimate,
            "objective": float(inst.c0 @ st.x),
            "error_vs_norm_form": float(np.max(np.abs(st.x - direct.x))),
            "error_vs_penalty_form": float(np.max(np.abs(st.x - quad.x))),
        })
    recs.append({"record": "summary", "points": len(recs), "alpha_cap": cap,
                 "max_error_vs_norm_form": max(r["error_vs_norm_form"] for r in recs),
                 "max_error_vs_penalty_form": max(r["error_vs_penalty_form"] for r in recs)})
    return recs


def _threads():
    raw = os.environ.get("FRONTIER_PPM_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"FRONTIER_PPM_THREADS must be an integer, got {raw!r}") from None


def cmd_sandwich(cfg):
    sc = SandwichConfig(m=cfg["m"], n=cfg["n"], bound_b=cfg["bound_b"], d_bar=cfg["d_bar"],
                        trials=cfg["trials"], seed=cfg["seed"], alphas=cfg["alphas"],
                        tol=min(cfg["tol"], 1e-9))
    a0, Sigma = default_instance(sc.n, sc.seed)
    trials = run_sandwich_experiment(sc, a0, Sigma, workers=_threads())
    recs = [dict(t.as_record(), record="trial") for t in trials]
    recs.append(dict(summarize(trials, sc.m), record="summary", epsilon=sc.epsilon,
                     kappa=trials[0].kappa, mu=sc.mu))
    return recs


HANDLERS = {
    "frontier-exact": cmd_frontier_exact,
    "frontier-ppm": cmd_frontier_ppm,
    "compare": cmd_compare,
    "saddle": cmd_saddle,
    "sandwich": cmd_sandwich,
    "portfolio": cmd_portfolio,
}


# ---------------------------------------------------------------------------
# output


def _clean(v):
    if isinstance(v, float):
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return _clean(v.item())
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    return v


def stamp(records, command, cfg):
    """Attach the provenance fields every record carries."""
    tolerances = {"subproblem": cfg["tol"]}
    return [_clean(dict(r, command=command, schema_version=SCHEMA_VERSION, seed=cfg["seed"],
                        tolerances=tolerances)) for r in records]


def render(records, fmt):
    if fmt == "jsonl":
        return "".join(json.dumps(r, sort_keys=True, allow_nan=False) + "\n" for r in records)
    keys = sorted({k for r in records for k in r})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in records:
        row = []
        for k in keys:
            v = r.get(k)
            if v is None:
                row.append("")
            elif isinstance(v, (dict, list)):
                row.append(json.dumps(v, sort_keys=True))
            else:
                row.append(repr(v) if isinstance(v, float) else str(v))
        w.writerow(row)
    return buf.getvalue()


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ppm-frontier-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# argv


def _split_flags(tokens):
    """``--key value`` / ``--key=value`` pairs into a dict with underscore keys."""
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or tok == "--":
            raise UsageError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, value = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise UsageError(f"flag {tok} needs a value")
            key, value = tok[2:], tokens[i + 1]
            i += 2
        out[key.replace("-", "_")] = value
    return out


def run_command(argv):
    """Run one command; returns the process exit code."""
    parser = argparse.ArgumentParser(prog="ppm-frontier", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value file")
    try:
        args, rest = parser.parse_known_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        flags = _split_flags(rest)
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, flags)
        if not cfg["out"]:
            raise UsageError("--out PATH is required")
        records = HANDLERS[args.command](cfg)
        write_atomic(cfg["out"], render(stamp(records, args.command, cfg), cfg["format"]))
    except (ValidationError, DataError, OSError) as exc:
        print(f"ppm-frontier: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (SolverError, FrontierError) as exc:
        print(f"ppm-frontier: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
