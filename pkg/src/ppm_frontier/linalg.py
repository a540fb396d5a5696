"""Dense symmetric positive definite primitives.

Every solver in the package touches the shape matrix only through
:class:`SpdMatrix`, which is factorized once on construction and never
mutated afterwards.
"""
import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, ValidationError

PD_TOLERANCE = 1e-12
ASYMMETRY_TOLERANCE = 1e-8


def as_vector(v, dim=None, name="vector"):
    """Return ``v`` as a finite 1-D float array, optionally checking its length."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if dim is not None and arr.size != dim:
        raise DimensionMismatch(f"{name} has length {arr.size}, expected {dim}")
    return arr


def _cholesky(entries, pd_tolerance):
    n = entries.shape[0]
    try:
        L = np.linalg.cholesky(entries)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix is not positive definite") from None
    pivots = np.diag(L) ** 2
    if np.any(pivots <= pd_tolerance):
        k = int(np.argmin(pivots))
        raise NotPositiveDefinite(
            f"pivot {k} is {pivots[k]:.3e} <= {pd_tolerance:g} (n={n})")
    return L


class SpdMatrix:
    """Immutable symmetric positive definite matrix with a cached Cholesky factor."""

    __slots__ = ("_entries", "_factor", "pd_tolerance")

    def __init__(self, entries, pd_tolerance=PD_TOLERANCE):
        S = np.array(entries, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] == 0:
            raise ValidationError(f"expected a non-empty square matrix, got shape {S.shape}")
        if not np.all(np.isfinite(S)):
            raise ValidationError("matrix has non-finite entries")
        asym = np.max(np.abs(S - S.T))
        if asym > ASYMMETRY_TOLERANCE:
            raise ValidationError(f"matrix asymmetry {asym:.3e} exceeds {ASYMMETRY_TOLERANCE:g}")
        S = 0.5 * (S + S.T)
        self.pd_tolerance = pd_tolerance
        self._factor = _cholesky(S, pd_tolerance)
        S.setflags(write=False)
        self._factor.setflags(write=False)
        self._entries = S

    @classmethod
    def diagonal(cls, d):
        return cls(np.diag(as_vector(d, name="diagonal")))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @property
    def dim(self):
        return self._entries.shape[0]

    @property
    def entries(self):
        return self._entries

    @property
    def factor(self):
        return self._factor

    def __matmul__(self, x):
        return self._entries @ x

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._entries, dtype=dtype)

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


def cholesky_factor(S):
    """Lower-triangular ``L`` with ``L @ L.T == S``.

    Accepts an :class:`SpdMatrix` (returns its cached factor) or a raw
    array, which is symmetrized and checked first.
    """
    if not isinstance(S, SpdMatrix):
        S = SpdMatrix(S)
    return S.factor


def quad_form(x, S):
    """``x^T S x``."""
    x = as_vector(x, S.dim, "x")
    return float(x @ (S.entries @ x))


def solve_spd(S, v):
    """Solve ``S y = v`` with the cached factor (two triangular solves)."""
    from scipy.linalg import cho_solve

    v = as_vector(v, S.dim, "v")
    return cho_solve((S.factor, True), v)
