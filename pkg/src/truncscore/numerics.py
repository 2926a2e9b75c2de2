"""Small numerical substrate: linear algebra helpers, normal/chi-square tails,
step functions, root bracketing and seedable random streams."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import (
    BracketError,
    Degenerate,
    DomainError,
    NotPositiveDefinite,
)

__all__ = [
    "RandomSource",
    "StepFunction",
    "bisect_decreasing",
    "chisq_sf",
    "norm_cdf",
    "norm_quantile",
    "orthant_prob_neg",
    "solve_spd",
    "sym_sqrt_2x2",
]

_PIVOT_TOL = 1e-12


def solve_spd(m, b):
    """Solve ``m @ x = b`` for a symmetric positive definite ``m``.

    Raises
    ------
    NotPositiveDefinite
        If ``m`` is not symmetric or a Cholesky pivot falls below 1e-12.
    """
    m = np.asarray(m, dtype=float)
    b = np.asarray(b, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotPositiveDefinite(f"matrix must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * scale):
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if np.min(np.diag(chol)) ** 2 <= _PIVOT_TOL:
        raise NotPositiveDefinite("Cholesky pivot below tolerance")
    z = solve_triangular(chol, b, lower=True)
    return solve_triangular(chol.T, z, lower=False)


def sym_sqrt_2x2(m):
    """Symmetric square root of a 2x2 symmetric PSD matrix (closed form)."""
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise Degenerate(f"expected a 2x2 matrix, got {m.shape}")
    if abs(m[0, 1] - m[1, 0]) > 1e-12 * max(1.0, np.max(np.abs(m))):
        raise Degenerate("matrix is not symmetric")
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if det <= 1e-14:
        raise Degenerate(f"determinant {det:.3g} too small")
    s = math.sqrt(det)
    t = math.sqrt(m[0, 0] + m[1, 1] + 2.0 * s)
    return (m + s * np.eye(2)) / t


def norm_cdf(z):
    """Standard normal CDF."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _norm_pdf(z):
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


# Acklam's rational approximation to the normal quantile (rel. error ~1e-9),
# polished with Halley steps below.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


def _acklam(p):
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p > 1.0 - plow:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def norm_quantile(p):
    """Inverse of :func:`norm_cdf` on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p!r}")
    x = _acklam(p)
    for _ in range(2):
        # Halley step; tail form keeps precision for small p
        if x > 0:
            e = -(0.5 * math.erfc(x / math.sqrt(2.0)) - (1.0 - p))
        else:
            e = norm_cdf(x) - p
        u = e / _norm_pdf(x)
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def chisq_sf(x, df):
    """Upper tail of the chi-square distribution with 1 or 2 degrees of freedom."""
    if x < 0 or math.isnan(x):
        raise DomainError(f"chi-square argument must be >= 0, got {x!r}")
    if df == 2:
        return math.exp(-0.5 * x)
    if df == 1:
        return math.erfc(math.sqrt(0.5 * x))
    raise DomainError(f"unsupported degrees of freedom {df!r}")


def orthant_prob_neg(rho):
    """P(Z1 <= 0, Z2 <= 0) for a standard bivariate normal with correlation rho."""
    if not -1.0 < rho < 1.0:
        raise DomainError(f"correlation must lie in (-1, 1), got {rho!r}")
    return 0.25 + math.asin(rho) / (2.0 * math.pi)


def bisect_decreasing(f, target, lo, hi, tol=1e-9, max_expand=60):
    """Find ``x`` in ``[lo, hi]`` with ``f(x) == target`` for decreasing ``f``.

    The bracket is widened (``hi`` doubled away from ``lo``) when ``f(hi)`` is
    still above the target.
    """
    flo = f(lo)
    if flo < target:
        raise BracketError(f"f(lo)={flo!r} is already below target {target!r}")
    expansions = 0
    while f(hi) > target:
        if expansions >= max_expand:
            raise BracketError("could not bracket the target")
        hi = lo + 2.0 * (hi - lo)
        expansions += 1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class StepFunction:
    """Right-continuous step function with left-limit access.

    Parameters
    ----------
    jump_times : array-like
        Strictly increasing jump locations.
    values : array-like
        Value attained at (and after) each jump.
    initial_value : float
        Value before the first jump.
    """

    def __init__(self, jump_times, values, initial_value=0.0):
        self.jump_times = np.asarray(jump_times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.initial_value = float(initial_value)
        if self.jump_times.shape != self.values.shape or self.jump_times.ndim != 1:
            raise ValueError("jump_times and values must be 1-d and of equal length")
        if np.any(np.diff(self.jump_times) <= 0):
            raise ValueError("jump_times must be strictly increasing")
        self._padded = np.concatenate(([self.initial_value], self.values))
        self.jump_times.setflags(write=False)
        self.values.setflags(write=False)

    def __call__(self, t):
        idx = np.searchsorted(self.jump_times, t, side="right")
        return self._padded[idx]

    def left_limit(self, t):
        idx = np.searchsorted(self.jump_times, t, side="left")
        return self._padded[idx]

    def __len__(self):
        return len(self.jump_times)

    def __repr__(self):
        return f"StepFunction(n_jumps={len(self)}, initial_value={self.initial_value})"


class RandomSource:
    """Seeded random stream; children are a pure function of (seed, index)."""

    def __init__(self, seed, _spawn_key=()):
        if not isinstance(seed, (int, np.integer)) or seed < 0 or seed >= 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        self.seed = int(seed)
        self.spawn_key = tuple(_spawn_key)
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.spawn_key))
        )

    def child(self, index):
        return RandomSource(self.seed, self.spawn_key + (int(index),))

    def __getattr__(self, name):
        # delegate draws (normal, uniform, binomial, ...) to the generator
        if name.startswith("__") or name == "generator":
            raise AttributeError(name)
        return getattr(self.generator, name)

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, spawn_key={self.spawn_key})"
