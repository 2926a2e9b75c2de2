"""Signed Wald tests for one-sided hypotheses on the two contrasts, their
intersection, the closed testing procedure and the Bonferroni-Holm comparator.

Hypotheses (margins ``delta_y, delta_t >= 0``)::

    H_Y: psi_y <= delta_y          (superiority of the score)
    H_T: psi_t <= -delta_t         (non-inferiority on the terminal event)

The intersection statistic is the squared Mahalanobis distance from the
estimate to the null quadrant; under the least favourable null it follows
the mixture ``(1/2 - q) chi2_0 + 1/2 chi2_1 + q chi2_2``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .exceptions import DegenerateCovariance, DomainError, NonConvergence
from .numerics import (
    RandomSource,
    bisect_decreasing,
    chisq_sf,
    norm_quantile,
    sym_sqrt_2x2,
)

__all__ = [
    "ClosedTestReport",
    "IntersectionResult",
    "SignedWaldResult",
    "TestConfig",
    "closed_test",
    "critical_value",
    "dykstra_project",
    "holm",
    "mixture_pvalue",
    "power_comparison",
    "q_hat",
    "signed_wald_intersection",
    "signed_wald_single",
    "sw_by_projection",
    "sw_statistic",
]


@dataclass(frozen=True)
class TestConfig:
    """Significance level and margins of the two one-sided hypotheses."""

    __test__ = False  # not a pytest class

    alpha: float = 0.025
    delta_y: float = 0.0
    delta_t: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise DomainError(f"alpha must lie in (0, 0.5), got {self.alpha!r}")
        if self.delta_y < 0 or self.delta_t < 0:
            raise DomainError("margins must be non-negative")

    @property
    def margins(self):
        return (self.delta_y, self.delta_t)


@dataclass(frozen=True)
class SignedWaldResult:
    z: float
    statistic: float
    p_value: float


@dataclass(frozen=True)
class IntersectionResult:
    statistic: float
    q_hat: float
    rho_hat: float
    p_value: float
    z_y: float
    z_t: float

    @property
    def weights(self):
        """Mixture weights on chi2 with 0, 1 and 2 degrees of freedom."""
        return (0.5 - self.q_hat, 0.5, self.q_hat)


@dataclass(frozen=True)
class ClosedTestReport:
    intersection: IntersectionResult
    single_y: SignedWaldResult
    single_t: SignedWaldResult
    reject_y: bool
    reject_t: bool
    holm_y: bool
    holm_t: bool
    alpha: float
    delta_y: float = 0.0
    delta_t: float = 0.0

    def __post_init__(self):
        # closure: an elementary rejection requires the intersection rejection
        if (self.reject_y or self.reject_t) and not self.intersection.p_value <= self.alpha:
            raise AssertionError("closure violated")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        doc["intersection"] = IntersectionResult(**doc["intersection"])
        doc["single_y"] = SignedWaldResult(**doc["single_y"])
        doc["single_t"] = SignedWaldResult(**doc["single_t"])
        return cls(**doc)


# ---------------------------------------------------------------------------
# single hypotheses
# ---------------------------------------------------------------------------

def _z(psi_hat, se, margin, side):
    if not se > 0:
        raise DomainError(f"standard error must be positive, got {se!r}")
    if side == "y":
        return (psi_hat - margin) / se
    if side == "t":
        return (psi_hat + margin) / se
    raise DomainError(f"side must be 'y' or 't', got {side!r}")


def _single_from_z(z):
    stat = z * z if z >= 0 else 0.0
    p = 0.5 * chisq_sf(stat, 1) if stat > 0 else 1.0
    return SignedWaldResult(z=float(z), statistic=float(stat), p_value=float(p))


def signed_wald_single(psi_hat, se, margin=0.0, side="y"):
    """One-sided signed Wald test; the null distribution is 1/2 chi2_0 + 1/2 chi2_1."""
    return _single_from_z(_z(psi_hat, se, margin, side))


# ---------------------------------------------------------------------------
# intersection
# ---------------------------------------------------------------------------

def q_hat(rho):
    """Weight of chi2_2 in the null mixture: 1/4 - arcsin(rho) / (2 pi)."""
    return 0.25 - math.asin(rho) / (2.0 * math.pi)


def mixture_pvalue(stat, q):
    """Tail probability of the chi-bar-square mixture at ``stat``."""
    if stat <= 0:
        return 1.0
    return 0.5 * chisq_sf(stat, 1) + q * chisq_sf(stat, 2)


def sw_statistic(z_y, z_t, rho):
    """Intersection statistic from the standardized estimates (vectorized)."""
    z_y = np.asarray(z_y, dtype=float)
    z_t = np.asarray(z_t, dtype=float)
    zmax = np.maximum(z_y, z_t)
    zmin = np.minimum(z_y, z_t)
    inner = ((zmax - zmin) ** 2 + 2.0 * (1.0 - rho) * zmin * zmax) / (1.0 - rho * rho)
    out = np.where(zmin <= rho * zmax, zmax * zmax, inner)
    out = np.where(zmax < 0, 0.0, out)
    return out if out.ndim else float(out)


def _rho(cov):
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or cov[0, 0] <= 0 or cov[1, 1] <= 0:
        raise DegenerateCovariance("covariance must be 2x2 with positive variances")
    rho = cov[0, 1] / math.sqrt(cov[0, 0] * cov[1, 1])
    if abs(rho) >= 1.0 - 1e-10:
        raise DegenerateCovariance(f"correlation {rho:.12g} is too close to +-1")
    return rho


def signed_wald_intersection(psi_hat, cov, margins=(0.0, 0.0)):
    """Intersection signed Wald test.

    Parameters
    ----------
    psi_hat : (psi_y, psi_t)
    cov : 2x2 covariance matrix of ``psi_hat`` (that is, Sigma / n).
    margins : (delta_y, delta_t)
    """
    rho = _rho(cov)
    se = np.sqrt(np.diag(np.asarray(cov, dtype=float)))
    z_y = _z(psi_hat[0], se[0], margins[0], "y")
    z_t = _z(psi_hat[1], se[1], margins[1], "t")
    stat = sw_statistic(z_y, z_t, rho)
    q = q_hat(rho)
    return IntersectionResult(statistic=float(stat), q_hat=q, rho_hat=float(rho),
                              p_value=float(mixture_pvalue(stat, q)), z_y=float(z_y), z_t=float(z_t))


def dykstra_project(point, halfspaces: Sequence, tol=1e-12, max_sweeps=100_000):
    """Euclidean projection onto the intersection of half-spaces ``{u: a'u <= 0}``.

    Cyclic Dykstra iterations; stops when a full sweep moves the iterate by at
    most ``tol`` in max-norm.
    """
    x = np.asarray(point, dtype=float).copy()
    normals = [np.asarray(a, dtype=float) for a in halfspaces]
    if not normals:
        raise DomainError("at least one half-space is required")
    for a in normals:
        if a.shape != x.shape or not np.any(a):
            raise DomainError("half-space normals must be non-zero and match the point dimension")
    norms2 = [float(a @ a) for a in normals]
    incr = [np.zeros_like(x) for _ in normals]
    for _ in range(max_sweeps):
        start = x.copy()
        prev = [c.copy() for c in incr]
        for j, a in enumerate(normals):
            y = x + incr[j]
            viol = float(a @ y)
            proj = y - (viol / norms2[j]) * a if viol > 0 else y
            incr[j] = y - proj
            x = proj
        # a still iterate can hide moving corrections, so both must settle
        moved = max(np.max(np.abs(x - start)), max(np.max(np.abs(c - p)) for c, p in zip(incr, prev)))
        if moved <= tol:
            return x
    raise NonConvergence("Dykstra projection did not converge", last=x,
                         residual=float(np.max(np.abs(x - start))))


def sw_by_projection(psi_hat, cov, margins=(0.0, 0.0)):
    """Intersection statistic computed by projecting in whitened coordinates."""
    cov = np.asarray(cov, dtype=float)
    root = sym_sqrt_2x2(cov)
    b = np.array([psi_hat[0] - margins[0], psi_hat[1] + margins[1]])
    u_hat = np.linalg.solve(root, b)
    proj = dykstra_project(u_hat, [root[0], root[1]])
    diff = u_hat - proj
    return float(diff @ diff)


# ---------------------------------------------------------------------------
# procedures
# ---------------------------------------------------------------------------

def holm(p_y, p_t, alpha):
    """Bonferroni-Holm for two hypotheses: smaller p at alpha/2, then larger at alpha."""
    if p_y <= p_t:
        first = p_y <= alpha / 2
        return bool(first), bool(first and p_t <= alpha)
    first = p_t <= alpha / 2
    return bool(first and p_y <= alpha), bool(first)


def closed_test(est, cfg: TestConfig = TestConfig()):
    """Closed testing of H_Y and H_T with the intersection signed Wald test.

    ``est`` is an estimation result exposing ``psi`` and ``cov``.
    """
    psi = np.asarray(est.psi, dtype=float)
    cov = np.asarray(est.cov, dtype=float)
    inter = signed_wald_intersection(psi, cov, cfg.margins)
    se = np.sqrt(np.diag(cov))
    sy = signed_wald_single(psi[0], se[0], cfg.delta_y, "y")
    st = signed_wald_single(psi[1], se[1], cfg.delta_t, "t")
    gate = inter.p_value <= cfg.alpha
    hy, ht = holm(sy.p_value, st.p_value, cfg.alpha)
    return ClosedTestReport(
        intersection=inter, single_y=sy, single_t=st,
        reject_y=bool(gate and sy.p_value <= cfg.alpha),
        reject_t=bool(gate and st.p_value <= cfg.alpha),
        holm_y=hy, holm_t=ht, alpha=cfg.alpha, delta_y=cfg.delta_y, delta_t=cfg.delta_t,
    )


def critical_value(rho, alpha=0.025):
    """Critical value ``c`` of the intersection statistic: P(SW >= c) = alpha under the null."""
    if not -1.0 < rho < 1.0:
        raise DomainError(f"correlation must lie in (-1, 1), got {rho!r}")
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 0.5), got {alpha!r}")
    q = q_hat(rho)
    return bisect_decreasing(lambda c: 0.5 * chisq_sf(c, 1) + q * chisq_sf(c, 2), alpha, 0.0, 16.0)


_POWER_CHUNK = 1 << 17


def _decisions(z_y, z_t, rho, alpha, c_int):
    z1 = norm_quantile(1.0 - alpha)
    z2 = norm_quantile(1.0 - alpha / 2.0)
    gate = sw_statistic(z_y, z_t, rho) >= c_int
    prop_y = gate & (z_y >= z1)
    prop_t = gate & (z_t >= z1)
    zmax = np.maximum(z_y, z_t)
    first = zmax >= z2
    holm_y = np.where(z_y >= z_t, first, first & (z_y >= z1))
    holm_t = np.where(z_t > z_y, first, first & (z_t >= z1))
    return prop_y, prop_t, holm_y, holm_t


def _mode_power(ry, rt, mode):
    return np.mean(ry & rt) if mode == "conjunctive" else np.mean(ry | rt)


def power_comparison(rho, alpha=0.025, mode="conjunctive", target=0.8, reps=10**6,
                     rs: RandomSource = None, tol=1e-3):
    """Equal noncentrality ``r`` giving Holm power ``target`` and the proposed power at ``r``.

    Draws are generated in fixed-size chunks from child streams so results do
    not depend on how the work is split.

    Returns
    -------
    (r_star, power_proposed, power_holm)
    """
    if mode not in ("conjunctive", "disjunctive"):
        raise DomainError(f"mode must be 'conjunctive' or 'disjunctive', got {mode!r}")
    if reps < 10**5:
        raise DomainError("power comparison needs at least 1e5 replications")
    rs = RandomSource(0) if rs is None else rs
    c_int = critical_value(rho, alpha)
    chunks = []
    left = reps
    k = 0
    s = math.sqrt(1.0 - rho * rho)
    while left > 0:
        m = min(left, _POWER_CHUNK)
        g = rs.child(k)
        e1 = g.standard_normal(m)
        e2 = rho * e1 + s * g.standard_normal(m)
        chunks.append((e1, e2))
        left -= m
        k += 1
    e_y = np.concatenate([c[0] for c in chunks])
    e_t = np.concatenate([c[1] for c in chunks])

    def holm_power(r):
        _, _, hy, ht = _decisions(e_y + r, e_t + r, rho, alpha, c_int)
        return _mode_power(hy, ht, mode)

    lo, hi = 0.0, 1.0
    while holm_power(hi) < target:
        hi *= 2.0
        if hi > 64:
            raise NonConvergence("could not bracket the noncentrality")
    # holm power is non-decreasing in r under common draws
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if holm_power(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    r_star = hi
    py, pt, hy, ht = _decisions(e_y + r_star, e_t + r_star, rho, alpha, c_int)
    p_holm = float(_mode_power(hy, ht, mode))
    if abs(p_holm - target) > tol:
        raise NonConvergence(f"Holm power {p_holm:.5f} misses target {target}")
    return float(r_star), float(_mode_power(py, pt, mode)), p_holm

