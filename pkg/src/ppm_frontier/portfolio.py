"""Returns data: CSV ingestion, moment estimation and out-of-sample evaluation.

Portfolio losses follow the cost convention of the frontier code, so a
return vector ``mu`` enters as ``a0 = -mu``.
"""
import csv
from dataclasses import dataclass, field
import datetime as _dt
import math
import os
import tempfile

import numpy as np

from .errors import (DataError, DegenerateCovariance, DimensionMismatch, FileTooLarge,
                     NonMonotoneDates, NotPositiveDefinite, ParseError, TooFewRows)
from .frontier import evaluate_point
from .linalg import SpdMatrix, as_vector

MAX_CELLS = 10_000_000
RIDGE_FACTOR = 1e-8


@dataclass
class ReturnsMatrix:
    tickers: list
    dates: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        T, n = self.values.shape
        if len(self.tickers) != n or len(self.dates) != T:
            raise DimensionMismatch("tickers/dates do not match the value matrix")
        if T < 2:
            raise TooFewRows(f"need at least 2 rows, got {T}")

    @property
    def shape(self):
        return self.values.shape

    def split(self, t):
        """In-sample rows ``[:t]`` and out-of-sample rows ``[t:]``."""
        return (ReturnsMatrix(self.tickers, self.dates[:t], self.values[:t]),
                ReturnsMatrix(self.tickers, self.dates[t:], self.values[t:]))


@dataclass
class MomentEstimate:
    mean: np.ndarray
    cov: SpdMatrix
    sample_count: int
    regularization: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.mean.size


def _parse_date(text, row):
    try:
        return _dt.date.fromisoformat(text)
    except ValueError:
        raise ParseError(f"row {row}: bad ISO date {text!r}", row=row, column="date") from None


def load_returns_csv(path):
    """Read ``date,T1,...,Tn`` rows of simple returns."""
    path = os.fspath(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TooFewRows("empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "date":
            raise ParseError("header must be 'date,<ticker>,...'", row=1, column=None)
        tickers = header[1:]
        if len(set(tickers)) != len(tickers):
            raise ParseError("duplicate ticker in header", row=1, column=None)
        n = len(tickers)
        dates, rows, prev = [], [], None
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != n + 1:
                raise ParseError(f"row {row_no}: expected {n + 1} fields, got {len(row)}",
                                 row=row_no, column=None)
            if (len(rows) + 1) * n > MAX_CELLS:
                raise FileTooLarge(f"more than {MAX_CELLS} cells")
            day = _parse_date(row[0].strip(), row_no)
            if prev is not None and day <= prev:
                raise NonMonotoneDates(f"row {row_no}: date {day} does not follow {prev}")
            prev = day
            vals = []
            for j, cell in enumerate(row[1:]):
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise ParseError(f"row {row_no}, column {tickers[j]!r}: bad value {cell!r}",
                                     row=row_no, column=tickers[j])
                vals.append(v)
            dates.append(day.isoformat())
            rows.append(vals)
    if len(rows) < 2:
        raise TooFewRows(f"need at least 2 rows, got {len(rows)}")
    return ReturnsMatrix(tickers, dates, np.array(rows))


def write_returns_csv(path, R):
    """Write atomically with full float precision."""
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date"] + list(R.tickers))
            for d, row in zip(R.dates, R.values):
                w.writerow([d] + [repr(float(v)) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def estimate_moments(R, ridge=None):
    """Column means and unbiased covariance.

    ``ridge=None`` applies ``1e-8 * trace / n`` only when the raw estimate
    fails the PD check; an explicit ``ridge`` is always added.
    """
    X = np.asarray(R.values, dtype=float)
    T, n = X.shape
    if T < 2:
        raise TooFewRows(f"need at least 2 rows, got {T}")
    mean = X.mean(axis=0)
    Z = X - mean
    cov = (Z.T @ Z) / (T - 1)
    cov = 0.5 * (cov + cov.T)
    meta = {"ridge_policy": "default" if ridge is None else "explicit"}
    if ridge is None:
        try:
            return MomentEstimate(mean, SpdMatrix(cov), T, 0.0, meta)
        except NotPositiveDefinite:
            ridge = RIDGE_FACTOR * float(np.trace(cov)) / n
    ridge = float(ridge)
    if ridge < 0 or not math.isfinite(ridge):
        raise DataError("ridge must be finite and >= 0")
    try:
        S = SpdMatrix(cov + ridge * np.eye(n))
    except NotPositiveDefinite:
        raise DegenerateCovariance(
            f"covariance is not positive definite with ridge {ridge:g}") from None
    return MomentEstimate(mean, S, T, ridge, meta)


def evaluate_out_of_sample(x, out, alpha_eval):
    """``(nominal return, worst-case return)`` of ``x`` under the moments ``out``.

    The uncertainty shape is the out-of-sample covariance.
    """
    x = as_vector(x, name="x")
    if x.size != out.dim:
        raise DimensionMismatch(f"x has {x.size} entries, moments have {out.dim}")
    return evaluate_point(x, -out.mean, out.cov, alpha_eval)


def synthetic_returns(n=20, T=750, seed=0, factors=3, start="2020-01-01"):
    """Factor-model daily returns ``r = mu + B f + e`` on consecutive days."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 1])))
    mu = rng.uniform(0.0002, 0.0012, n)
    B = rng.normal(0.0, 0.008, (n, factors))
    idio = rng.uniform(0.005, 0.015, n)
    F = rng.normal(size=(T, factors))
    E = rng.normal(size=(T, n)) * idio
    values = mu + F @ B.T + E
    day0 = _dt.date.fromisoformat(start)
    dates = [(day0 + _dt.timedelta(days=i)).isoformat() for i in range(T)]
    tickers = [f"A{j:02d}" for j in range(n)]
    return ReturnsMatrix(tickers, dates, values)
