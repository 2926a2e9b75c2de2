"""One-step estimators for the expected score among subjects free of the
terminal event and for the landmark risk of that event.

For each arm ``a`` two quantities are targeted at the landmark time ``tau``:

* ``theta_y[a]`` -- mean score among subjects without a terminal event by ``tau``;
* ``theta_t[a]`` -- probability of a terminal event by ``tau``.

The contrasts are ``psi_y = theta_y[1] - theta_y[0]`` and
``psi_t = theta_t[0] - theta_t[1]`` (positive values favour arm 1 for both).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .data import Dataset, LandmarkSpec, validate_for_estimation
from .exceptions import CensoringPositivityViolation, EmptyArm, PositivityViolation, ValidationError
from .nuisance import CoxPHStratified, KaplanMeier, LinearRegressionOLS, LogisticRegressionIRLS
from .numerics import norm_cdf, norm_quantile

__all__ = [
    "EstimationResult",
    "NuisanceBundle",
    "SurvBundle",
    "TruncatedScoreEstimator",
    "eif_theta_t",
    "eif_theta_y",
    "estimate_truncatedscore",
    "fit_score_nuisance",
    "fit_survival_nuisance",
    "fulldata_eif_theta_t",
    "naive_theta_t",
    "naive_theta_y",
    "onestep_theta_t",
    "onestep_theta_y",
]

Z975 = norm_quantile(0.975)


def covariate_design(d: Dataset, x1_center: Optional[float] = None):
    """Regression design ``(x1 - center, x2)``; ``center`` defaults to the sample mean."""
    center = float(np.mean(d.x1)) if x1_center is None else x1_center
    return np.column_stack([d.x1 - center, d.x2.astype(float)])


def _arm_props(d: Dataset):
    pi = np.array([np.mean(d.a == 0), np.mean(d.a == 1)])
    if np.any(pi == 0):
        raise PositivityViolation("both treatment arms must be represented")
    return pi


# ---------------------------------------------------------------------------
# score among subjects without a terminal event
# ---------------------------------------------------------------------------

@dataclass
class NuisanceBundle:
    """Fitted score-side nuisances; ``Q`` and ``Pi`` hold one column per arm."""

    Q: np.ndarray
    Pi: np.ndarray
    rho: np.ndarray
    pi: np.ndarray
    theta_naive: np.ndarray
    outcome_models: dict = field(default_factory=dict)
    observation_models: dict = field(default_factory=dict)


def _observed(d: Dataset, a):
    return (d.a == a) & (d.r == 1)


def naive_theta_y(d: Dataset, a):
    """Mean observed score in arm ``a`` and its influence function."""
    obs = _observed(d, a)
    if not obs.any():
        raise PositivityViolation(f"no observed scores in arm {a}")
    est = float(np.mean(d.y[obs]))
    # pi_a * rho_a = P(A=a, R=1)
    p_obs = obs.mean()
    infl = np.where(obs, (np.where(obs, d.y, 0.0) - est) / p_obs, 0.0)
    return est, infl


def fit_score_nuisance(d: Dataset, X=None) -> NuisanceBundle:
    """Per-arm linear outcome models on observed scores and logistic models
    for the observation indicator, fitted on all subjects of the arm."""
    X = covariate_design(d) if X is None else X
    pi = _arm_props(d)
    n = d.n
    Q = np.empty((n, 2))
    Pi = np.empty((n, 2))
    rho = np.empty(2)
    theta = np.empty(2)
    outcome_models, observation_models = {}, {}
    for a in (0, 1):
        arm = d.a == a
        obs = _observed(d, a)
        if not obs.any():
            raise PositivityViolation(f"no observed scores in arm {a}")
        rho[a] = obs.sum() / arm.sum()
        theta[a] = naive_theta_y(d, a)[0]
        ols = LinearRegressionOLS().fit(X[obs], d.y[obs])
        logit = LogisticRegressionIRLS().fit(X[arm], d.r[arm])
        Q[:, a] = ols.predict(X)
        Pi[:, a] = logit.predict_proba(X)[:, 1]
        outcome_models[a], observation_models[a] = ols, logit
    return NuisanceBundle(Q=Q, Pi=Pi, rho=rho, pi=pi, theta_naive=theta,
                          outcome_models=outcome_models, observation_models=observation_models)


def _augmentation_y(d: Dataset, a, nb: NuisanceBundle, theta):
    pi1 = nb.pi[1]
    scale = (d.a - pi1) * (a - pi1) / (nb.rho[a] * pi1 * (1.0 - pi1))
    return scale * (nb.Q[:, a] - theta) * nb.Pi[:, a]


def eif_theta_y(d: Dataset, a, nb: NuisanceBundle, theta=None):
    """Plug-in efficient influence function of ``theta_y[a]``.

    ``theta`` defaults to the naive estimate stored in ``nb``.
    """
    theta = nb.theta_naive[a] if theta is None else theta
    obs = _observed(d, a)
    resid = np.where(obs, np.where(obs, d.y, 0.0) - theta, 0.0)
    first = resid / (nb.pi[a] * nb.rho[a])
    return first - _augmentation_y(d, a, nb, theta)


def onestep_theta_y(d: Dataset, a, nb: NuisanceBundle):
    """One-step estimate of ``theta_y[a]`` and its influence function.

    The returned influence function evaluates the residual term at the
    one-step estimate and adds the correction for the estimated treatment
    probability, so it averages to zero exactly.
    """
    theta0 = nb.theta_naive[a]
    phi = eif_theta_y(d, a, nb, theta0)
    est = theta0 + float(np.mean(phi))
    pi1 = nb.pi[1]
    obs = _observed(d, a)
    resid = np.where(obs, np.where(obs, d.y, 0.0) - est, 0.0)
    xi = resid / (nb.pi[a] * nb.rho[a]) - _augmentation_y(d, a, nb, theta0)
    slope = (pi1 - a) / (nb.rho[a] * (1.0 - pi1) * pi1)
    xi = xi + slope * np.mean((nb.Q[:, a] - theta0) * nb.Pi[:, a]) * (pi1 - d.a)
    return est, xi


# ---------------------------------------------------------------------------
# terminal-event risk
# ---------------------------------------------------------------------------

@dataclass
class SurvBundle:
    """Survival-side nuisances.

    ``event_cumhaz(times, a, rows=None)`` returns the cumulative hazard of the
    terminal event, Lambda(t | a, X_i), for the selected subjects (rows) and
    times (columns), so that F = 1 - exp(-Lambda); ``censoring[a]`` is the
    censoring Kaplan-Meier fit of arm a.
    """

    tau: float
    pi: np.ndarray
    event_cumhaz: Callable[..., np.ndarray]
    censoring: Dict[int, KaplanMeier]
    event_km: Dict[int, KaplanMeier] = field(default_factory=dict)
    cox: Optional[CoxPHStratified] = None

    def event_cdf(self, times, a, rows=None):
        return -np.expm1(-self.event_cumhaz(np.atleast_1d(times), a, rows))

    def censoring_survival(self, t, a, left=False):
        km = self.censoring[a]
        return km.survival_.left_limit(t) if left else km.survival_(t)


def fit_km_censoring(d: Dataset, a) -> KaplanMeier:
    """Kaplan-Meier of the censoring time in arm ``a``.

    Terminal events censor the censoring process and precede censorings at
    tied times.
    """
    arm = d.a == a
    if not arm.any():
        raise EmptyArm(f"arm {a} is empty")
    return KaplanMeier().fit(d.time[arm], d.status[arm] == 0, leaves_first=d.status[arm] > 0)


def fit_km_event(d: Dataset, a) -> KaplanMeier:
    """Kaplan-Meier of the terminal-event time in arm ``a`` (status 0 censors)."""
    arm = d.a == a
    if not arm.any():
        raise EmptyArm(f"arm {a} is empty")
    return KaplanMeier().fit(d.time[arm], d.status[arm] > 0)


def fit_survival_nuisance(d: Dataset, tau, X=None) -> SurvBundle:
    """Arm-stratified Cox model for the terminal event plus arm-wise censoring KM."""
    X = covariate_design(d) if X is None else X
    pi = _arm_props(d)
    cox = CoxPHStratified().fit(X, d.time, d.event, strata=d.a)

    def event_cumhaz(times, a, rows=None):
        return cox.cumulative_hazard(X if rows is None else X[rows], times, a)

    return SurvBundle(
        tau=tau, pi=pi, event_cumhaz=event_cumhaz,
        censoring={a: fit_km_censoring(d, a) for a in (0, 1)},
        event_km={a: fit_km_event(d, a) for a in (0, 1)},
        cox=cox,
    )


def naive_theta_t(d: Dataset, a, tau, km: Optional[KaplanMeier] = None):
    """Kaplan-Meier risk ``1 - S(tau)`` in arm ``a``, its influence function and
    Greenwood variance."""
    km = fit_km_event(d, a) if km is None else km
    s_tau = float(km.survival(tau))
    arm = d.a == a
    n = d.n
    # martingale residual integrated against n / Y(u), per subject, up to tau
    jumps = km.event_times_
    keep = jumps <= tau
    dlam_over = np.cumsum(km.hazard_increments_[keep] / km.at_risk_[keep]) * n
    t = np.minimum(d.time, tau)
    k = np.searchsorted(jumps[keep], t, side="right")
    comp = np.where(k > 0, dlam_over[np.maximum(k - 1, 0)], 0.0)
    ev = arm & (d.status > 0) & (d.time <= tau)
    j = np.searchsorted(jumps, d.time)
    jump_term = np.where(ev, n / km.at_risk_[np.minimum(j, len(jumps) - 1)], 0.0)
    infl = np.where(arm, s_tau * (jump_term - comp), 0.0)
    return 1.0 - s_tau, infl, float(km.greenwood_variance(tau))


def fulldata_eif_theta_t(event_by_tau, a_obs, a, F_tau, pi_a, theta):
    """Full-data influence function of ``theta_t[a]`` (no censoring)."""
    return (a_obs == a) / pi_a * (event_by_tau - F_tau) + F_tau - theta


def _censoring_weights(d: Dataset, sb: SurvBundle):
    """1 / G_c evaluated at T- for events before tau and at tau for survivors."""
    tau = sb.tau
    w = np.zeros(d.n)
    for a in (0, 1):
        arm = d.a == a
        g_tau = sb.censoring_survival(tau, a)
        if g_tau < _CENSORING_FLOOR:
            raise CensoringPositivityViolation(
                f"censoring survival in arm {a} drops to {g_tau:.3g} before tau={tau}"
            )
        ev = arm & (d.status > 0) & (d.time <= tau)
        w[ev] = 1.0 / sb.censoring_survival(d.time[ev], a, left=True)
        w[arm & (d.time > tau)] = 1.0 / g_tau
    return w


_CENSORING_FLOOR = 1e-6
_CHUNK_CELLS = 1 << 18


def _risk_residual(d: Dataset, a, sb: SurvBundle):
    """IPCW-augmented residual ``I(T* <= tau) - F(tau | a, X)`` for arm-``a`` subjects.

    Returns a vector over all subjects (zero outside arm ``a``) together with
    F(tau | a, X) for every subject.
    """
    tau = sb.tau
    L_tau = sb.event_cumhaz(np.array([tau]), a)[:, 0]
    F_tau = -np.expm1(-L_tau)
    arm = d.a == a
    if not np.any(arm & (d.time > tau)):
        raise CensoringPositivityViolation(f"no subject in arm {a} is followed beyond tau={tau}")
    w = _censoring_weights(d, sb)
    event_by_tau = (d.status > 0) & (d.time <= tau)
    complete = event_by_tau | (d.time > tau)
    resid = np.where(arm & complete, (event_by_tau - F_tau) * w, 0.0)

    km = sb.censoring[a]
    keep = km.event_times_ <= tau
    s = km.event_times_[keep]
    if s.size == 0:
        return resid, F_tau
    dlam = km.hazard_increments_[keep]
    G = km.survival_(s)
    if np.min(G) < _CENSORING_FLOOR:
        raise CensoringPositivityViolation(f"censoring survival in arm {a} drops below floor")

    # h(u) = (S(tau) - S(tau) / S(u)) / G(u) per subject; the compensator sums
    # h(s_j) dLambda_c(s_j) over the k_i leading jumps at which subject i is at risk
    J = s.size
    wv = dlam / G
    W = np.cumsum(wv)
    rows = np.flatnonzero(arm)
    S_tau = np.exp(-L_tau)
    T = d.time[rows]
    cens = d.status[rows] == 0
    j_left = np.searchsorted(s, T, side="left")
    jj = np.minimum(j_left, J - 1)
    hit = (j_left < J) & (s[jj] == T)
    k = j_left + (hit & cens)
    jumped = cens & (T <= tau)
    aug = np.empty(rows.size)
    step = max(1, _CHUNK_CELLS // J)
    for start in range(0, rows.size, step):
        sl = slice(start, start + step)
        r = rows[sl]
        # S(tau) / S(s_j), stable when S underflows
        E = np.exp(sb.event_cumhaz(s, a, r) - L_tau[r][:, None])
        kk = k[sl]
        full = kk == J
        weighted = np.empty(r.size)
        weighted[full] = E[full] @ wv
        if not full.all():
            part = np.cumsum(E[~full] * wv, axis=1)
            kp = kk[~full]
            weighted[~full] = np.where(kp > 0, part[np.arange(kp.size), np.maximum(kp - 1, 0)], 0.0)
        comp = S_tau[r] * np.where(kk > 0, W[np.maximum(kk - 1, 0)], 0.0) - weighted
        idx = jj[sl]
        jump = np.where(jumped[sl], (S_tau[r] - E[np.arange(r.size), idx]) / G[idx], 0.0)
        aug[sl] = jump - comp
    resid[rows] += aug
    return resid, F_tau


def eif_theta_t(d: Dataset, a, sb: SurvBundle, theta):
    """Observed-data efficient influence function of ``theta_t[a]`` at ``theta``."""
    resid, F_tau = _risk_residual(d, a, sb)
    return resid / sb.pi[a] + F_tau - theta


def onestep_theta_t(d: Dataset, a, sb: SurvBundle, pi_correction=True):
    """One-step estimate of ``theta_t[a]`` started from Kaplan-Meier.

    Because the influence function is affine in ``theta`` with slope -1 under
    the censoring conventions used here, the one-step value coincides with the
    solution of the estimating equation.
    """
    km = sb.event_km.get(a) or fit_km_event(d, a)
    theta0 = 1.0 - float(km.survival(sb.tau))
    resid, F_tau = _risk_residual(d, a, sb)
    phi0 = resid / sb.pi[a] + F_tau - theta0
    est = theta0 + float(np.mean(phi0))
    infl = phi0 - (est - theta0)
    if pi_correction:
        m = float(np.mean(resid)) / sb.pi[a]
        infl = infl - m / sb.pi[a] * ((d.a == a) - sb.pi[a])
    return est, infl


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class EstimationResult:
    """Arm-wise estimates, contrasts and their joint influence functions.

    ``influence`` has columns (psi_y, psi_t); ``sigma`` is the covariance of
    ``sqrt(n) * (psi_hat - psi)``.
    """

    method: str
    tau: float
    n: int
    theta_y: np.ndarray
    theta_t: np.ndarray
    se_theta_y: np.ndarray
    se_theta_t: np.ndarray
    psi_y: float
    psi_t: float
    influence: np.ndarray
    sigma: np.ndarray
    influence_theta_y: Optional[np.ndarray] = None
    influence_theta_t: Optional[np.ndarray] = None

    @property
    def psi(self):
        return np.array([self.psi_y, self.psi_t])

    @property
    def cov(self):
        """Covariance matrix of the contrast estimates."""
        return self.sigma / self.n

    @property
    def se_psi(self):
        return np.sqrt(np.diag(self.sigma) / self.n)

    @property
    def rho(self):
        s = self.sigma
        return float(s[0, 1] / np.sqrt(s[0, 0] * s[1, 1]))

    def table(self):
        """Rows mirroring the printed estimate table: (label, estimate, se)."""
        tau = f"{self.tau:.1f}"
        surv = 1.0 - self.theta_t
        return [
            (f"E(Y|T>{tau},A=0)", self.theta_y[0], self.se_theta_y[0]),
            (f"E(Y|T>{tau},A=1)", self.theta_y[1], self.se_theta_y[1]),
            ("diff", self.psi_y, self.se_psi[0]),
            (f"P(T>{tau}|A=0)", surv[0], self.se_theta_t[0]),
            (f"P(T>{tau}|A=1)", surv[1], self.se_theta_t[1]),
            ("riskdiff", self.psi_t, self.se_psi[1]),
        ]

    def rows(self):
        """Table rows extended with 95% Wald limits and two-sided p-values."""
        out = []
        for label, est, se in self.table():
            est, se = float(est), float(se)
            p = 2.0 * (1.0 - norm_cdf(abs(est / se))) if se > 0 else float("nan")
            out.append({"label": label, "estimate": est, "se": se,
                        "lower": est - Z975 * se, "upper": est + Z975 * se, "p_value": p})
        return out

    def to_dict(self):
        return {
            "method": self.method,
            "tau": self.tau,
            "n": self.n,
            "theta_y": self.theta_y.tolist(),
            "theta_t": self.theta_t.tolist(),
            "se_theta_y": self.se_theta_y.tolist(),
            "se_theta_t": self.se_theta_t.tolist(),
            "psi_y": self.psi_y,
            "psi_t": self.psi_t,
            "se_psi": self.se_psi.tolist(),
            "sigma": self.sigma.tolist(),
            "rho": self.rho,
            "rows": self.rows(),
        }


def _stack(method, tau, d, theta_y, theta_t, if_y, if_t, se_t=None):
    n = d.n
    infl = np.column_stack([if_y[:, 1] - if_y[:, 0], if_t[:, 0] - if_t[:, 1]])
    sigma = infl.T @ infl / n
    se_y = np.sqrt(np.sum(if_y ** 2, axis=0)) / n
    if se_t is None:
        se_t = np.sqrt(np.sum(if_t ** 2, axis=0)) / n
    else:
        # arm-wise Greenwood variances replace the influence-based diagonal,
        # keeping the influence-based correlation
        r = sigma[0, 1] / np.sqrt(sigma[0, 0] * sigma[1, 1])
        sigma[1, 1] = n * float(np.sum(se_t ** 2))
        sigma[0, 1] = sigma[1, 0] = r * np.sqrt(sigma[0, 0] * sigma[1, 1])
    return EstimationResult(
        method=method, tau=float(tau), n=n,
        theta_y=np.asarray(theta_y, dtype=float), theta_t=np.asarray(theta_t, dtype=float),
        se_theta_y=se_y, se_theta_t=np.asarray(se_t, dtype=float),
        psi_y=float(theta_y[1] - theta_y[0]), psi_t=float(theta_t[0] - theta_t[1]),
        influence=infl, sigma=sigma, influence_theta_y=if_y, influence_theta_t=if_t,
    )


def _check_dataset(d: Dataset, tau):
    diag = validate_for_estimation(d, LandmarkSpec(tau))
    for flag in diag.flags:
        if flag["severity"] == "error":
            if flag["code"] == "empty-arm":
                raise EmptyArm(flag["message"])
            if flag["code"] == "positivity-censoring":
                raise CensoringPositivityViolation(flag["message"])
            raise PositivityViolation(flag["message"])
    return diag


def estimate_truncatedscore(d: Dataset, tau, method="both", pi_correction=True):
    """Run nuisance fits and the requested estimators.

    Returns a dict keyed by ``"naive"`` and/or ``"adjusted"``.
    """
    if method not in ("naive", "adjusted", "both"):
        raise ValueError(f"unknown method {method!r}")
    _check_dataset(d, tau)
    out = {}
    km_event = {a: fit_km_event(d, a) for a in (0, 1)}

    if method in ("naive", "both"):
        ty, iy, tt, it, gw = np.empty(2), np.empty((d.n, 2)), np.empty(2), np.empty((d.n, 2)), np.empty(2)
        for a in (0, 1):
            ty[a], iy[:, a] = naive_theta_y(d, a)
            tt[a], it[:, a], gw[a] = naive_theta_t(d, a, tau, km_event[a])
        out["naive"] = _stack("naive", tau, d, ty, tt, iy, it, se_t=np.sqrt(gw))

    if method in ("adjusted", "both"):
        X = covariate_design(d)
        nb = fit_score_nuisance(d, X)
        sb = fit_survival_nuisance(d, tau, X)
        sb.event_km.update(km_event)
        ty, iy, tt, it = np.empty(2), np.empty((d.n, 2)), np.empty(2), np.empty((d.n, 2))
        for a in (0, 1):
            ty[a], iy[:, a] = onestep_theta_y(d, a, nb)
            tt[a], it[:, a] = onestep_theta_t(d, a, sb, pi_correction=pi_correction)
        res = _stack("adjusted", tau, d, ty, tt, iy, it)
        res.nuisance = nb
        res.survival_nuisance = sb
        out["adjusted"] = res
    return out


class TruncatedScoreEstimator(BaseEstimator):
    """Joint estimator of the landmark score among event-free subjects and the
    landmark terminal-event risk in a two-arm randomized trial.

    Parameters
    ----------
    tau : float
        Landmark time.
    method : {"adjusted", "naive"}
        ``"adjusted"`` uses covariate-adjusted one-step estimators;
        ``"naive"`` uses the observed-score mean and Kaplan-Meier.
    pi_correction : bool
        Include the treatment-probability estimation term in the influence
        function of the terminal-event risk.

    Attributes
    ----------
    result_ : EstimationResult
    naive_result_ : EstimationResult
        Covariate-free comparison, always computed.
    diagnostics_ : Diagnostics
    """

    def __init__(self, tau=2.0, method="adjusted", pi_correction=True):
        self.tau = tau
        self.method = method
        self.pi_correction = pi_correction

    def fit(self, data, y=None):
        d = as_dataset(data)
        if self.method not in ("adjusted", "naive"):
            raise ValueError(f"method must be 'adjusted' or 'naive', got {self.method!r}")
        self.diagnostics_ = _check_dataset(d, self.tau)
        wanted = "both" if self.method == "adjusted" else "naive"
        results = estimate_truncatedscore(d, self.tau, wanted, pi_correction=self.pi_correction)
        self.naive_result_ = results["naive"]
        self.result_ = results[self.method]
        self.n_samples_ = d.n
        self.x1_center_ = float(np.mean(d.x1))
        return self

    def _design(self, data):
        if isinstance(data, Dataset):
            x1, x2 = data.x1, data.x2
        elif hasattr(data, "keys") or hasattr(data, "columns"):
            x1, x2 = np.asarray(data["x1"]), np.asarray(data["x2"])
        else:
            arr = check_array(data, dtype=float)
            if arr.shape[1] != 2:
                raise ValidationError(f"expected columns (x1, x2), got {arr.shape[1]} columns")
            x1, x2 = arr[:, 0], arr[:, 1]
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return np.column_stack([x1 - self.x1_center_, x2])

    def transform(self, data):
        """Fitted nuisance predictions for new covariates.

        Columns are Q_0, Q_1 (conditional score means), Pi_0, Pi_1 (score
        observation probabilities) and F_0, F_1 (terminal-event risk by ``tau``).
        """
        check_is_fitted(self, "result_")
        if self.method != "adjusted":
            raise ValueError("transform requires method='adjusted'")
        X = self._design(data)
        nb, sb = self.result_.nuisance, self.result_.survival_nuisance
        cols = [nb.outcome_models[a].predict(X) for a in (0, 1)]
        cols += [nb.observation_models[a].predict_proba(X)[:, 1] for a in (0, 1)]
        cols += [-np.expm1(-sb.cox.cumulative_hazard(X, np.array([self.tau]), a)[:, 0]) for a in (0, 1)]
        return np.column_stack(cols)

    def predict(self, data):
        """Covariate-conditional contrasts ``(Q_1 - Q_0, F_0 - F_1)`` per row.

        With ``method='naive'`` every row carries the marginal contrasts.
        """
        check_is_fitted(self, "result_")
        if self.method != "adjusted":
            n = self._design(data).shape[0]
            return np.tile(self.result_.psi, (n, 1))
        z = self.transform(data)
        return np.column_stack([z[:, 1] - z[:, 0], z[:, 4] - z[:, 5]])

    @property
    def psi_(self):
        check_is_fitted(self, "result_")
        return self.result_.psi

    @property
    def covariance_(self):
        check_is_fitted(self, "result_")
        return self.result_.cov


def as_dataset(data) -> Dataset:
    """Accept a :class:`Dataset`, a mapping of columns, or a pandas DataFrame."""
    if isinstance(data, Dataset):
        return data
    try:
        cols = {name: np.asarray(data[name]) for name in ("a", "x1", "x2", "time", "status", "r", "y")}
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"cannot interpret input as a trial dataset: {exc}") from None
    return Dataset(**cols)
