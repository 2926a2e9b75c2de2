"""Working models for the nuisance parameters.

All models follow the scikit-learn estimator protocol (``fit`` returns
``self``, learned attributes carry a trailing underscore, hyper-parameters are
exposed through ``get_params``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .exceptions import (
    EmptyArm,
    InsufficientData,
    NoEvents,
    NotPositiveDefinite,
    RankDeficient,
    Separation,
    SingularInformation,
)
from .numerics import StepFunction, solve_spd

__all__ = [
    "CoxPHStratified",
    "KaplanMeier",
    "LinearRegressionOLS",
    "LogisticRegressionIRLS",
]


def _with_intercept(X):
    return np.column_stack([np.ones(X.shape[0]), X])


def _expit(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


class LinearRegressionOLS(RegressorMixin, BaseEstimator):
    """Ordinary least squares with an intercept, solved via the normal equations."""

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X = check_array(X, ensure_min_samples=1)
        y = np.asarray(y, dtype=float)
        check_consistent_length(X, y)
        D = _with_intercept(X) if self.fit_intercept else X
        n, p = D.shape
        if n < p + 1:
            raise InsufficientData(f"need at least {p + 1} rows for {p} coefficients, got {n}")
        try:
            beta = solve_spd(D.T @ D, D.T @ y)
        except NotPositiveDefinite as exc:
            raise RankDeficient(f"design matrix is rank deficient: {exc}") from None
        resid = y - D @ beta
        if self.fit_intercept:
            self.intercept_, self.coef_ = float(beta[0]), beta[1:]
        else:
            self.intercept_, self.coef_ = 0.0, beta
        self.residual_variance_ = float(resid @ resid / max(n - p, 1))
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return self.intercept_ + X @ self.coef_


class LogisticRegressionIRLS(ClassifierMixin, BaseEstimator):
    """Unpenalized logistic regression fitted by iteratively reweighted least squares.

    Step-halving (at most ``max_halvings`` times) guards against deviance
    increases. Coefficients exceeding ``separation_bound`` in absolute value
    are taken as evidence of (quasi-)separation.
    """

    def __init__(self, tol=1e-8, max_iter=100, max_halvings=10, separation_bound=30.0):
        self.tol = tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.separation_bound = separation_bound

    @staticmethod
    def _deviance(D, y, beta):
        eta = D @ beta
        # -2 loglik, written to stay finite for large |eta|
        return 2.0 * np.sum(np.logaddexp(0.0, eta) - y * eta)

    def fit(self, X, y):
        X = check_array(X, ensure_min_samples=1, ensure_min_features=0)
        y = np.asarray(y, dtype=float)
        check_consistent_length(X, y)
        D = _with_intercept(X)
        n, p = D.shape
        if n < p + 1:
            raise InsufficientData(f"need at least {p + 1} rows for {p} coefficients, got {n}")
        if np.all(y == y[0]):
            raise Separation("outcome is constant")

        beta = np.zeros(p)
        ybar = y.mean()
        beta[0] = np.log(ybar / (1.0 - ybar))
        dev = self._deviance(D, y, beta)
        converged = False
        n_iter = 0
        while True:
            mu = _expit(D @ beta)
            score = D.T @ (y - mu)
            if np.max(np.abs(score)) <= self.tol:
                converged = True
                break
            if n_iter >= self.max_iter:
                break
            n_iter += 1
            W = mu * (1.0 - mu)
            try:
                step = solve_spd((D * W[:, None]).T @ D, score)
            except NotPositiveDefinite:
                raise Separation("information matrix became singular") from None
            for _ in range(self.max_halvings + 1):
                candidate = beta + step
                new_dev = self._deviance(D, y, candidate)
                if new_dev <= dev + 1e-12 * (1.0 + abs(dev)):
                    break
                step = 0.5 * step
            beta, dev = candidate, new_dev
            if np.max(np.abs(beta)) > self.separation_bound:
                raise Separation(f"coefficients diverged (max |beta| = {np.max(np.abs(beta)):.1f})")
            if np.max(np.abs(step)) < 1e-15 * (1.0 + np.max(np.abs(beta))):
                mu = _expit(D @ beta)
                converged = np.max(np.abs(D.T @ (y - mu))) <= self.tol
                break

        self.intercept_, self.coef_ = float(beta[0]), beta[1:]
        self.converged_ = bool(converged)
        self.n_iter_ = n_iter
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, ensure_min_features=0)
        return self.intercept_ + X @ self.coef_

    def predict_proba(self, X):
        p1 = _expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(int)


class CoxPHStratified(BaseEstimator):
    """Cox proportional hazards with shared coefficients and stratum-specific
    Breslow baseline hazards (Breslow handling of ties).

    Parameters
    ----------
    tol : float
        Convergence threshold on the max-norm of the partial-likelihood score.
    max_iter : int
        Maximum number of Newton iterations.
    """

    def __init__(self, tol=1e-8, max_iter=50):
        self.tol = tol
        self.max_iter = max_iter

    def _prepare(self, X, time, event, strata):
        blocks = []
        for s in np.unique(strata):
            m = strata == s
            order = np.argsort(time[m], kind="stable")
            t = time[m][order]
            blocks.append({
                "stratum": s,
                "X": X[m][order],
                "t": t,
                "ev": event[m][order].astype(bool),
                # first index of each subject's tie group: the Breslow risk set
                # {j : T_j >= T_i} starts there in ascending order
                "first": np.searchsorted(t, t, side="left"),
            })
        return blocks

    @staticmethod
    def _rev_cumsum(a):
        return np.flip(np.cumsum(np.flip(a, axis=0), axis=0), axis=0)

    def _loglik_derivs(self, blocks, beta, need_info=True):
        p = beta.shape[0]
        loglik = 0.0
        score = np.zeros(p)
        info = np.zeros((p, p))
        for b in blocks:
            X, ev, first = b["X"], b["ev"], b["first"]
            eta = X @ beta
            shift = eta.max()
            w = np.exp(eta - shift)
            s0 = self._rev_cumsum(w)[first][ev]
            s1 = self._rev_cumsum(w[:, None] * X)[first][ev]
            loglik += np.sum(eta[ev] - shift - np.log(s0))
            xbar = s1 / s0[:, None]
            score += np.sum(X[ev] - xbar, axis=0)
            if need_info:
                s2 = self._rev_cumsum(w[:, None, None] * X[:, :, None] * X[:, None, :])[first][ev]
                info += np.sum(s2 / s0[:, None, None] - xbar[:, :, None] * xbar[:, None, :], axis=0)
        return loglik, score, info

    def fit(self, X, time, event, strata=None):
        X = check_array(X, ensure_min_samples=1)
        time = np.asarray(time, dtype=float)
        event = np.asarray(event).astype(bool)
        strata = np.zeros(len(time), dtype=int) if strata is None else np.asarray(strata)
        check_consistent_length(X, time, event, strata)
        if np.any(time < 0):
            raise ValueError("negative follow-up times")
        for s in np.unique(strata):
            if not np.any(event[strata == s]):
                raise NoEvents(f"stratum {s!r} has no events")

        blocks = self._prepare(X, time, event, strata)
        beta = np.zeros(X.shape[1])
        loglik, score, info = self._loglik_derivs(blocks, beta)
        converged = False
        n_iter = 0
        while True:
            if np.max(np.abs(score)) <= self.tol:
                converged = True
                break
            if n_iter >= self.max_iter:
                break
            n_iter += 1
            try:
                step = solve_spd(info, score)
            except NotPositiveDefinite:
                raise SingularInformation("observed information is not positive definite") from None
            for _ in range(20):
                new_beta = beta + step
                new_ll, new_score, new_info = self._loglik_derivs(blocks, new_beta)
                if new_ll >= loglik - 1e-10 * (1.0 + abs(loglik)):
                    break
                step = 0.5 * step
            beta, loglik, score, info = new_beta, new_ll, new_score, new_info
            if np.max(np.abs(step)) < 1e-14 * (1.0 + np.max(np.abs(beta))):
                converged = np.max(np.abs(score)) <= self.tol
                break

        self.coef_ = beta
        self.log_likelihood_ = float(loglik)
        self.score_ = score
        self.information_ = info
        self.converged_ = bool(converged)
        self.n_iter_ = n_iter
        self.strata_ = np.unique(strata)
        self.n_features_in_ = X.shape[1]
        self.baseline_cumulative_hazard_ = {}
        for b in blocks:
            w = np.exp(b["X"] @ beta)
            s0_all = self._rev_cumsum(w)
            ev_times, counts = np.unique(b["t"][b["ev"]], return_counts=True)
            s0 = s0_all[np.searchsorted(b["t"], ev_times, side="left")]
            self.baseline_cumulative_hazard_[_key(b["stratum"])] = StepFunction(
                ev_times, np.cumsum(counts / s0), 0.0
            )
        return self

    def _baseline(self, stratum):
        check_is_fitted(self, "coef_")
        try:
            return self.baseline_cumulative_hazard_[_key(stratum)]
        except KeyError:
            raise ValueError(f"unknown stratum {stratum!r}") from None

    def cumulative_hazard(self, X, times, stratum):
        """Matrix of Lambda(t | x) with one row per subject and one column per time."""
        X = check_array(X)
        base = self._baseline(stratum)(np.atleast_1d(np.asarray(times, dtype=float)))
        return np.exp(X @ self.coef_)[:, None] * base[None, :]

    def predict_survival(self, X, times, stratum):
        return np.exp(-self.cumulative_hazard(X, times, stratum))


def _key(s):
    return s.item() if isinstance(s, np.generic) else s


class KaplanMeier(BaseEstimator):
    """Kaplan-Meier survival with Nelson-Aalen increments and Greenwood variance.

    ``leaves_first`` marks subjects that exit the risk set just before any
    counted event at the same time; use it for the censoring distribution so
    that terminal events precede censorings at tied times.
    """

    def fit(self, time, event, leaves_first=None):
        time = np.asarray(time, dtype=float)
        event = np.asarray(event).astype(bool)
        if time.size == 0:
            raise EmptyArm("no subjects to fit")
        check_consistent_length(time, event)
        if leaves_first is None:
            leaves_first = np.zeros_like(event)
        leaves_first = np.asarray(leaves_first).astype(bool) & ~event

        sorted_t = np.sort(time)
        jumps, d = np.unique(time[event], return_counts=True)
        at_risk = len(time) - np.searchsorted(sorted_t, jumps, side="left")
        if leaves_first.any():
            tied_exits = np.sort(time[leaves_first])
            at_risk = at_risk - (
                np.searchsorted(tied_exits, jumps, side="right")
                - np.searchsorted(tied_exits, jumps, side="left")
            )
        dlam = d / at_risk
        surv = np.cumprod(1.0 - dlam)
        with np.errstate(divide="ignore", invalid="ignore"):
            gw_terms = np.where(at_risk > d, d / (at_risk * (at_risk - d)), np.inf)

        self.event_times_ = jumps
        self.n_events_ = d
        self.at_risk_ = at_risk
        self.hazard_increments_ = dlam
        self.survival_ = StepFunction(jumps, surv, 1.0)
        self.cumulative_hazard_ = StepFunction(jumps, np.cumsum(dlam), 0.0)
        self._greenwood_cum = np.cumsum(gw_terms)
        self.n_subjects_ = len(time)
        return self

    def survival(self, t):
        check_is_fitted(self, "survival_")
        return self.survival_(t)

    def greenwood_variance(self, t):
        """Greenwood variance of the survival estimate at ``t``."""
        check_is_fitted(self, "survival_")
        k = np.searchsorted(self.event_times_, t, side="right")
        s = self.survival_(t)
        cum = np.where(k > 0, self._greenwood_cum[np.maximum(k - 1, 0)], 0.0)
        return s * s * cum
