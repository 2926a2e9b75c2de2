"""Two-arm trial generator with a score truncated by a terminal event,
ground-truth computation and the replication harness.

Generator, per subject::

    A ~ Bernoulli(pi),  X2 ~ Bernoulli(p_x2),  X1 | X2 ~ N(mu_x1[X2], sigma_x1[X2])
    design = (1, X1 - mu1, X2)          mu1 = marginal mean of X1
    Y  = design @ beta_y[A] + sigma_y[A] * eps
    t_k ~ Weibull with survival exp(-t**gamma_k[A] * exp(design @ beta_eps_k[A])),  k = 0, 1, 2
    time = min(t0, t1, t2), status = argmin (0 = censored)
    r_tau ~ Bernoulli(expit(design @ beta_r[A]))
    y absent if min(t1, t2) < tau, or if r_tau = 0 and time < tau

Cause 1 is the primary terminal event, cause 2 a competing death; both are
terminal for the score.
"""

from __future__ import annotations

import json
import logging
import math
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data import Dataset
from .estimators import estimate_truncatedscore
from .exceptions import DomainError, TruncScoreError
from .numerics import RandomSource, norm_quantile
from .testing import TestConfig, closed_test

log = logging.getLogger(__name__)

__all__ = [
    "ArmParams",
    "ReplicationSummary",
    "ScenarioParams",
    "TABLE1",
    "exact_truth",
    "get_scenario",
    "null_scenario",
    "replicate_study",
    "scenario_table5",
    "simulate_dataset",
    "truth_oracle",
]

_CAUSES = (0, 1, 2)


@dataclass(frozen=True)
class ArmParams:
    """Per-arm coefficients on ``(1, X1 - mu1, X2)``."""

    beta_y: Tuple[float, float, float]
    sigma_y: float
    beta_r: Tuple[float, float, float]
    beta_eps0: Tuple[float, float, float]
    gamma_eps0: float
    beta_eps1: Tuple[float, float, float]
    gamma_eps1: float
    beta_eps2: Tuple[float, float, float]
    gamma_eps2: float

    def __post_init__(self):
        for name in ("beta_y", "beta_r", "beta_eps0", "beta_eps1", "beta_eps2"):
            vec = tuple(float(v) for v in getattr(self, name))
            if len(vec) != 3:
                raise DomainError(f"{name} needs 3 coefficients")
            object.__setattr__(self, name, vec)
        if not self.sigma_y > 0:
            raise DomainError("sigma_y must be positive")
        for k in _CAUSES:
            if not getattr(self, f"gamma_eps{k}") > 0:
                raise DomainError(f"gamma_eps{k} must be positive")

    def beta_eps(self, k):
        return getattr(self, f"beta_eps{k}")

    def gamma_eps(self, k):
        return getattr(self, f"gamma_eps{k}")


@dataclass(frozen=True)
class ScenarioParams:
    """Complete parameter set of the generator."""

    pi: float
    p_x2: float
    mu_x1: Tuple[float, float]
    sigma_x1: Tuple[float, float]
    arm0: ArmParams
    arm1: ArmParams
    tau: float = 2.0
    null: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mu_x1", tuple(float(v) for v in self.mu_x1))
        object.__setattr__(self, "sigma_x1", tuple(float(v) for v in self.sigma_x1))
        if not (0 < self.pi < 1 and 0 < self.p_x2 < 1):
            raise DomainError("pi and p_x2 must lie in (0, 1)")
        if min(self.sigma_x1) <= 0:
            raise DomainError("sigma_x1 must be positive")
        if not self.tau > 0:
            raise DomainError("tau must be positive")

    @property
    def mu1(self):
        """Marginal mean of X1, used to centre the design."""
        return self.mu_x1[0] * (1.0 - self.p_x2) + self.mu_x1[1] * self.p_x2

    def arm(self, a):
        if a == 1 and not self.null:
            return self.arm1
        return self.arm0

    # scenario files ------------------------------------------------------

    _ARM_FIELDS = ("beta_y", "sigma_y", "beta_r", "beta_eps0", "gamma_eps0",
                   "beta_eps1", "gamma_eps1", "beta_eps2", "gamma_eps2")

    def to_dict(self):
        doc = {"pi": self.pi, "p_x2": self.p_x2, "mu_x1": list(self.mu_x1),
               "sigma_x1": list(self.sigma_x1), "tau": self.tau, "null": self.null}
        for name in self._ARM_FIELDS:
            v0, v1 = getattr(self.arm0, name), getattr(self.arm1, name)
            doc[name] = {"0": list(v0) if isinstance(v0, tuple) else v0,
                         "1": list(v1) if isinstance(v1, tuple) else v1}
        return doc

    @classmethod
    def from_dict(cls, doc):
        try:
            arms = [ArmParams(**{name: doc[name][str(a)] for name in cls._ARM_FIELDS}) for a in (0, 1)]
            return cls(pi=doc["pi"], p_x2=doc["p_x2"], mu_x1=doc["mu_x1"], sigma_x1=doc["sigma_x1"],
                       arm0=arms[0], arm1=arms[1], tau=doc.get("tau", 2.0), null=bool(doc.get("null", False)))
        except (KeyError, TypeError) as exc:
            raise DomainError(f"incomplete scenario: missing {exc}") from None

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DomainError(f"scenario file is not valid JSON: {exc}") from None
        return cls.from_dict(doc)


TABLE1 = ScenarioParams(
    pi=0.5,
    p_x2=0.156,
    mu_x1=(46.24, 51.15),
    sigma_x1=(14.99, 15.33),
    arm0=ArmParams(
        beta_y=(40.141, 0.895, 1.993), sigma_y=11.85,
        beta_r=(2.243, 0.0, 0.0),
        beta_eps0=(math.log(0.00014), 0.0, 0.0), gamma_eps0=6.691,
        beta_eps1=(math.log(0.0285), -0.0243, -0.5832), gamma_eps1=1.822,
        beta_eps2=(math.log(0.0154), -0.0205, -0.4549), gamma_eps2=1.143,
    ),
    arm1=ArmParams(
        beta_y=(43.121, 0.863, 2.620), sigma_y=12.16,
        beta_r=(2.309, 0.0, 0.0),
        beta_eps0=(math.log(9.35e-5), 0.0, 0.0), gamma_eps0=6.946,
        beta_eps1=(math.log(0.01817), -0.0289, -0.1261), gamma_eps1=1.901,
        beta_eps2=(math.log(0.0160), 0.00687, -0.598), gamma_eps2=1.071,
    ),
)


def scenario_table5(sp: ScenarioParams) -> ScenarioParams:
    """Copy of ``sp`` with the X1 effect on the primary-cause hazard set to -0.15 in both arms."""
    def bump(arm):
        b = arm.beta_eps1
        return replace(arm, beta_eps1=(b[0], -0.15, b[2]))
    return replace(sp, arm0=bump(sp.arm0), arm1=bump(sp.arm1))


def null_scenario(sp: ScenarioParams) -> ScenarioParams:
    """Copy of ``sp`` where both arms follow the arm-0 parameters."""
    return replace(sp, null=True)


SCENARIOS = {
    "table1": TABLE1,
    "table5": scenario_table5(TABLE1),
    "table1-null": null_scenario(TABLE1),
}


def get_scenario(name_or_path) -> ScenarioParams:
    """Built-in scenario by name, or a scenario file path."""
    if name_or_path in SCENARIOS:
        return SCENARIOS[name_or_path]
    try:
        return ScenarioParams.load(name_or_path)
    except FileNotFoundError:
        raise DomainError(f"unknown scenario {name_or_path!r}; built-ins are {sorted(SCENARIOS)}") from None


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------

def _coef(sp, a, getter):
    """Per-subject coefficient rows selected by arm."""
    c0 = np.asarray(getter(sp.arm(0)), dtype=float)
    c1 = np.asarray(getter(sp.arm(1)), dtype=float)
    sel = (np.asarray(a) == 1)
    if c0.ndim == 0:
        return np.where(sel, c1, c0)
    return np.where(sel[:, None], c1[None, :], c0[None, :])


def _weibull(u, lp, gamma):
    # survival exp(-t**gamma * exp(lp)) inverted at uniform u
    return (-np.log(u) * np.exp(-lp)) ** (1.0 / gamma)


def _covariates(sp, g, n):
    a = (g.random(n) < sp.pi).astype(np.int64)
    x2 = (g.random(n) < sp.p_x2).astype(np.int64)
    mu = np.asarray(sp.mu_x1)[x2]
    sd = np.asarray(sp.sigma_x1)[x2]
    x1 = mu + sd * g.standard_normal(n)
    design = np.column_stack([np.ones(n), x1 - sp.mu1, x2])
    return a, x1, x2, design


def simulate_dataset(sp: ScenarioParams, n, rs) -> Dataset:
    """Draw ``n`` subjects. ``rs`` is a :class:`RandomSource` or numpy Generator."""
    if n < 2:
        raise DomainError("n must be at least 2")
    g = rs.generator if isinstance(rs, RandomSource) else rs
    a, x1, x2, D = _covariates(sp, g, n)
    eps = g.standard_normal(n)
    u = g.random((3, n))
    u_r = g.random(n)

    y = np.einsum("ij,ij->i", D, _coef(sp, a, lambda p: p.beta_y)) + _coef(sp, a, lambda p: p.sigma_y) * eps
    t = np.empty((3, n))
    for k in _CAUSES:
        lp = np.einsum("ij,ij->i", D, _coef(sp, a, lambda p, k=k: p.beta_eps(k)))
        t[k] = _weibull(u[k], lp, _coef(sp, a, lambda p, k=k: p.gamma_eps(k)))
    status = np.argmin(t, axis=0)
    time = t[status, np.arange(n)]
    failure = np.minimum(t[1], t[2])
    lp_r = np.einsum("ij,ij->i", D, _coef(sp, a, lambda p: p.beta_r))
    r_tau = u_r < 1.0 / (1.0 + np.exp(-lp_r))

    absent = (failure < sp.tau) | (~r_tau & (time < sp.tau))
    y = np.where(absent, np.nan, y)
    return Dataset(a=a, x1=x1, x2=x2, time=time, status=status, r=(~absent).astype(np.int64), y=y)


# ---------------------------------------------------------------------------
# truth
# ---------------------------------------------------------------------------

def _arm_landmark(sp, a, D, eps, u1, u2):
    p = sp.arm(a)
    y = D @ np.asarray(p.beta_y) + p.sigma_y * eps
    t1 = _weibull(u1, D @ np.asarray(p.beta_eps1), p.gamma_eps1)
    t2 = _weibull(u2, D @ np.asarray(p.beta_eps2), p.gamma_eps2)
    alive = np.minimum(t1, t2) > sp.tau
    return y * alive, alive.astype(float)


def truth_oracle(sp: ScenarioParams, reps=10**7, rs=None, chunk=10**6):
    """Monte Carlo truth from latent data without censoring or missingness.

    Both potential outcomes are drawn for every simulated subject from the same
    covariates and noise, which shrinks the Monte Carlo error of the contrasts.

    Returns
    -------
    dict with ``psi_y``, ``psi_t``, ``theta_y``, ``theta_t`` and Monte Carlo
    standard errors ``se_psi_y``, ``se_psi_t``.
    """
    if reps < 1:
        raise DomainError("reps must be positive")
    rs = RandomSource(0) if rs is None else rs
    # per-subject sums of (Y*alive, alive) for arms 0 and 1 and their cross-products
    s = np.zeros(4)
    ss = np.zeros((4, 4))
    done = 0
    k = 0
    while done < reps:
        m = min(chunk, reps - done)
        g = rs.child(k).generator
        _, _, _, D = _covariates(sp, g, m)
        eps = g.standard_normal(m)
        u1 = g.random(m)
        u2 = g.random(m)
        cols = np.column_stack(_arm_landmark(sp, 0, D, eps, u1, u2) + _arm_landmark(sp, 1, D, eps, u1, u2))
        s += cols.sum(axis=0)
        ss += cols.T @ cols
        done += m
        k += 1
    mean = s / reps
    cov = (ss / reps - np.outer(mean, mean)) / reps
    ty = np.array([mean[0] / mean[1], mean[2] / mean[3]])
    tt = np.array([1.0 - mean[1], 1.0 - mean[3]])
    # delta method for psi_y = m2/m3 - m0/m1 and psi_t = m3 - m1
    grad_y = np.array([-1.0 / mean[1], mean[0] / mean[1] ** 2, 1.0 / mean[3], -mean[2] / mean[3] ** 2])
    grad_t = np.array([0.0, -1.0, 0.0, 1.0])
    return {
        "psi_y": float(ty[1] - ty[0]), "psi_t": float(tt[0] - tt[1]),
        "theta_y": ty.tolist(), "theta_t": tt.tolist(),
        "se_psi_y": float(math.sqrt(max(grad_y @ cov @ grad_y, 0.0))),
        "se_psi_t": float(math.sqrt(max(grad_t @ cov @ grad_t, 0.0))),
        "reps": int(reps),
    }


def exact_truth(sp: ScenarioParams, nodes=300):
    """Landmark estimands by Gauss-Hermite quadrature over X1 within each X2 level."""
    xs, ws = np.polynomial.hermite_e.hermegauss(nodes)
    ws = ws / ws.sum()
    theta_y, theta_t = np.empty(2), np.empty(2)
    for a in (0, 1):
        p = sp.arm(a)
        num = surv = 0.0
        for x2, px in ((0, 1.0 - sp.p_x2), (1, sp.p_x2)):
            x1 = sp.mu_x1[x2] + sp.sigma_x1[x2] * xs
            D = np.column_stack([np.ones_like(x1), x1 - sp.mu1, np.full_like(x1, x2)])
            cumhaz = sum(sp.tau ** p.gamma_eps(k) * np.exp(D @ np.asarray(p.beta_eps(k))) for k in (1, 2))
            S = np.exp(-cumhaz)
            num += px * np.sum(ws * (D @ np.asarray(p.beta_y)) * S)
            surv += px * np.sum(ws * S)
        theta_y[a] = num / surv
        theta_t[a] = 1.0 - surv
    return {"psi_y": float(theta_y[1] - theta_y[0]), "psi_t": float(theta_t[0] - theta_t[1]),
            "theta_y": theta_y.tolist(), "theta_t": theta_t.tolist()}


# ---------------------------------------------------------------------------
# replication harness
# ---------------------------------------------------------------------------

_METHODS = ("naive", "adjusted")
_PARAMS = ("psi_y", "psi_t")


@dataclass
class ReplicationSummary:
    """Aggregated operating characteristics of a replication campaign.

    ``rows`` has one entry per (method, parameter) with keys ``Mean, Bias,
    SE, SD, SE/SD, Coverage, Rel.eff`` plus ``SE.ratio`` and ``Var.ratio``.
    ``Rel.eff`` is the ratio of empirical standard deviations (adjusted over
    naive); ``SE.ratio`` uses mean standard errors and ``Var.ratio`` is the
    squared ``SE.ratio``. ``estimates[method]`` holds per-replicate
    ``(psi_y, psi_t, se_y, se_t)``; ``decisions[method]`` holds per-replicate
    0/1 flags ``(intersection, single_y, single_t, closed_y, closed_t)`` and a
    Holm code ``holm_y + 2 * holm_t``.
    """

    scenario: dict
    n: int
    reps: int
    truth: dict
    rows: List[dict]
    power: List[dict]
    failures: int
    failure_log: List[str] = field(default_factory=list)
    completed: int = 0
    interrupted: bool = False
    estimates: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    decisions: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def row(self, method, param):
        for r in self.rows:
            if r["method"] == method and r["parameter"] == param:
                return r
        raise KeyError((method, param))

    def power_row(self, method, procedure):
        for r in self.power:
            if r["method"] == method and r["procedure"] == procedure:
                return r
        raise KeyError((method, procedure))

    def to_dict(self):
        doc = asdict(self)
        doc.pop("estimates")
        doc.pop("decisions")
        return doc


def _one_rep(sp, n, cfg, rs, i):
    d = simulate_dataset(sp, n, rs.child(i))
    res = estimate_truncatedscore(d, sp.tau, "both")
    out = np.empty((2, 10))
    for m, method in enumerate(_METHODS):
        r = res[method]
        ct = closed_test(r, cfg)
        out[m] = (r.psi_y, r.psi_t, *r.se_psi,
                  ct.intersection.p_value <= cfg.alpha, ct.single_y.p_value <= cfg.alpha,
                  ct.single_t.p_value <= cfg.alpha, ct.reject_y, ct.reject_t, ct.holm_y + 2 * ct.holm_t)
    return out


def replicate_study(sp: ScenarioParams, n, reps, cfg: TestConfig = TestConfig(), rs=None,
                    truth=None, threads=1, failure_budget=0.01, truth_reps=10**6, progress=None):
    """Simulate ``reps`` datasets of size ``n``, estimate with both methods and test.

    Each replicate draws from ``rs.child(i)``, so results do not depend on
    ``threads``. Failed replicates are logged and skipped; more than
    ``failure_budget * reps`` failures abort the campaign.
    """
    if reps < 1:
        raise DomainError("reps must be positive")
    if n < 2:
        raise DomainError("n must be at least 2")
    rs = RandomSource(0) if rs is None else rs
    if truth is None:
        truth = truth_oracle(sp, truth_reps, RandomSource(rs.seed, rs.spawn_key + (2**31,)))

    results: List[Optional[np.ndarray]] = [None] * reps
    failure_log = []

    def run(i):
        try:
            return i, _one_rep(sp, n, cfg, rs, i), None
        except TruncScoreError as exc:
            return i, None, f"replicate {i}: {type(exc).__name__}: {exc}"

    start = _time.time()
    completed = 0
    interrupted = False
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        outcomes = pool.map(run, range(reps)) if pool else map(run, range(reps))
        for i, out, err in outcomes:
            results[i] = out
            completed += 1
            if err:
                failure_log.append(err)
            if progress:
                progress(completed, reps, _time.time() - start)
    except KeyboardInterrupt:
        # keep what finished; the summary is flagged as partial
        interrupted = True
        log.warning("interrupted after %d of %d replicates", completed, reps)
    finally:
        if pool:
            pool.shutdown(wait=not interrupted, cancel_futures=True)
    for msg in failure_log:
        log.warning(msg)
    if len(failure_log) > failure_budget * max(completed, 1):
        raise TruncScoreError(f"{len(failure_log)} of {completed} replicates failed, above the failure budget")

    ok = np.array([r for r in results if r is not None])
    if ok.shape[0] < 2:
        raise TruncScoreError("fewer than two successful replicates")
    summary = _summarize(sp, n, reps, truth, ok, failure_log)
    summary.completed = completed
    summary.interrupted = interrupted
    return summary


def _summarize(sp, n, reps, truth, ok, failure_log):
    z = norm_quantile(0.975)
    rows = []
    sd = {}
    se_mean = {}
    for m, method in enumerate(_METHODS):
        for k, param in enumerate(_PARAMS):
            est, se = ok[:, m, k], ok[:, m, 2 + k]
            sd[method, param] = float(np.std(est, ddof=1))
            se_mean[method, param] = float(np.mean(se))
    for m, method in enumerate(_METHODS):
        for k, param in enumerate(_PARAMS):
            est, se = ok[:, m, k], ok[:, m, 2 + k]
            t = truth[param]
            cover = np.mean((est - z * se <= t) & (t <= est + z * se))
            se_ratio = se_mean[method, param] / se_mean["naive", param]
            rows.append({
                "method": method, "parameter": param,
                "Mean": float(np.mean(est)), "Bias": float(np.mean(est) - t),
                "SE": se_mean[method, param], "SD": sd[method, param],
                "SE/SD": se_mean[method, param] / sd[method, param],
                "Coverage": float(cover),
                "Rel.eff": sd[method, param] / sd["naive", param],
                "SE.ratio": se_ratio, "Var.ratio": se_ratio ** 2,
            })
    power = []
    for m, method in enumerate(_METHODS):
        inter, sy, st, py, pt, holm = (ok[:, m, j] for j in range(4, 10))
        hy = (holm.astype(int) & 1) > 0
        ht = (holm.astype(int) & 2) > 0
        power.append({"method": method, "procedure": "proposed",
                      "H_Y": float(np.mean(py)), "H_T": float(np.mean(pt)),
                      "both": float(np.mean((py > 0) & (pt > 0))),
                      "either": float(np.mean((py > 0) | (pt > 0)))})
        power.append({"method": method, "procedure": "holm",
                      "H_Y": float(np.mean(hy)), "H_T": float(np.mean(ht)),
                      "both": float(np.mean(hy & ht)), "either": float(np.mean(hy | ht))})
        power.append({"method": method, "procedure": "signed-wald",
                      "intersection": float(np.mean(inter)),
                      "H_Y": float(np.mean(sy)), "H_T": float(np.mean(st))})
    return ReplicationSummary(
        scenario=sp.to_dict(), n=n, reps=reps, truth=truth, rows=rows, power=power,
        failures=len(failure_log), failure_log=failure_log,
        estimates={"naive": ok[:, 0, :4], "adjusted": ok[:, 1, :4]},
        decisions={"naive": ok[:, 0, 4:].astype(int), "adjusted": ok[:, 1, 4:].astype(int)},
    )
