import math
from dataclasses import replace

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from truncscore import RandomSource, simulate_dataset
from truncscore.data import Dataset
from truncscore.estimators import (
    Z975,
    SurvBundle,
    TruncatedScoreEstimator,
    eif_theta_t,
    eif_theta_y,
    estimate_truncatedscore,
    fit_km_censoring,
    fit_km_event,
    fit_score_nuisance,
    fit_survival_nuisance,
    fulldata_eif_theta_t,
    naive_theta_t,
    naive_theta_y,
    onestep_theta_t,
    onestep_theta_y,
)
from truncscore.exceptions import CensoringPositivityViolation, EmptyArm, PositivityViolation
from truncscore.simulation import TABLE1, exact_truth

TAU = 2.0


def small_dataset():
    # arm 1: three observed scores 1, 2, 3; arm 0: one observed score 5
    return Dataset(
        a=[1, 1, 1, 1, 0, 0, 0],
        x1=[40.0, 45.0, 50.0, 55.0, 42.0, 48.0, 52.0],
        x2=[0, 1, 0, 1, 0, 1, 0],
        time=[3.0, 3.5, 4.0, 1.0, 3.0, 0.5, 1.5],
        status=[0, 0, 0, 1, 0, 2, 1],
        r=[1, 1, 1, 0, 1, 0, 0],
        y=[1.0, 2.0, 3.0, np.nan, 5.0, np.nan, np.nan],
    )


def constant_bundle(d, values, cens_source=None):
    """SurvBundle whose terminal-event cumulative hazard is constant in time and
    covariates; ``values[a]`` is F(t | a, X) for every t."""
    cens_source = d if cens_source is None else cens_source
    lam = {a: -math.log1p(-values[a]) for a in (0, 1)}

    def cumhaz(times, a, rows=None):
        m = d.n if rows is None else len(rows)
        return np.full((m, len(np.atleast_1d(times))), lam[a])

    pi = np.array([np.mean(d.a == 0), np.mean(d.a == 1)])
    return SurvBundle(tau=TAU, pi=pi, event_cumhaz=cumhaz,
                      censoring={a: fit_km_censoring(cens_source, a) for a in (0, 1)},
                      event_km={a: fit_km_event(d, a) for a in (0, 1)})


def heavy_censoring_scenario():
    def cens(arm):
        return replace(arm, beta_eps0=(math.log(0.06), 0.0, 0.0), gamma_eps0=1.0)
    return replace(TABLE1, arm0=cens(TABLE1.arm0), arm1=cens(TABLE1.arm1))


class TestNaiveScore:
    def test_plain_mean(self):
        est, infl = naive_theta_y(small_dataset(), 1)
        assert est == 2.0

    def test_single_observation_has_zero_influence(self):
        d = small_dataset()
        est, infl = naive_theta_y(d, 0)
        assert est == 5.0
        assert infl[4] == 0.0
        assert np.all(infl == 0.0)

    def test_influence_formula(self):
        d = small_dataset()
        est, infl = naive_theta_y(d, 1)
        pi1 = 4 / 7
        rho1 = 3 / 4
        expected = np.array([(1 - 2), 0.0, (3 - 2), 0, 0, 0, 0]) / (pi1 * rho1)
        np.testing.assert_allclose(infl, expected, atol=1e-15)

    def test_no_observed_scores(self):
        d = small_dataset()
        d0 = Dataset(a=d.a, x1=d.x1, x2=d.x2, time=d.time, status=d.status,
                     r=np.where(d.a == 0, 0, d.r), y=np.where(d.a == 0, np.nan, d.y))
        with pytest.raises(PositivityViolation):
            naive_theta_y(d0, 0)

    def test_large_sample_contrast(self):
        d = simulate_dataset(TABLE1, 10**6, RandomSource(11))
        est = [naive_theta_y(d, a) for a in (0, 1)]
        infl = est[1][1] - est[0][1]
        se = infl.std() / math.sqrt(d.n)
        assert abs((est[1][0] - est[0][0]) - 2.790) < 3 * se


class TestScoreEIF:
    def test_centered_augmentation_reduces_to_naive(self, table1_data):
        d = table1_data
        nb = fit_score_nuisance(d)
        for a in (0, 1):
            theta = nb.theta_naive[a]
            nb_c = replace(nb, Q=np.full_like(nb.Q, theta), Pi=np.ones_like(nb.Pi))
            np.testing.assert_allclose(eif_theta_y(d, a, nb_c), naive_theta_y(d, a)[1], atol=1e-12)

    def test_first_term_substitution(self, table1_data):
        d = table1_data
        nb = fit_score_nuisance(d)
        theta = nb.theta_naive[1]
        nb_c = replace(nb, Q=np.full_like(nb.Q, theta))
        phi = eif_theta_y(d, 1, nb_c)
        i = int(np.flatnonzero((d.a == 1) & (d.r == 1))[0])
        assert phi[i] == pytest.approx((d.y[i] - theta) / (nb.pi[1] * nb.rho[1]), rel=1e-14)

    def test_augmentation_formula(self, table1_data):
        d = table1_data
        nb = fit_score_nuisance(d)
        a = 0
        theta = nb.theta_naive[a]
        pi1 = np.mean(d.a == 1)
        rho = np.sum((d.a == a) & (d.r == 1)) / np.sum(d.a == a)
        first = np.where((d.a == a) & (d.r == 1), np.nan_to_num(d.y) - theta, 0.0) / (np.mean(d.a == a) * rho)
        second = (d.a - pi1) * (a - pi1) / (rho * pi1 * (1 - pi1)) * (nb.Q[:, a] - theta) * nb.Pi[:, a]
        np.testing.assert_allclose(eif_theta_y(d, a, nb), first - second, rtol=1e-12, atol=1e-12)

    def test_mean_zero_at_truth(self):
        d = simulate_dataset(TABLE1, 200_000, RandomSource(31))
        truth = exact_truth(TABLE1)
        nb = fit_score_nuisance(d)
        for a in (0, 1):
            phi = eif_theta_y(d, a, nb, truth["theta_y"][a])
            assert abs(phi.mean()) < 3 * phi.std() / math.sqrt(d.n)


class TestScoreOneStep:
    def test_identity(self, table1_data):
        d = table1_data
        nb = fit_score_nuisance(d)
        pi1 = np.mean(d.a == 1)
        for a in (0, 1):
            theta = nb.theta_naive[a]
            rho = nb.rho[a]
            second = (d.a - pi1) * (a - pi1) / (rho * pi1 * (1 - pi1)) * (nb.Q[:, a] - theta) * nb.Pi[:, a]
            est, _ = onestep_theta_y(d, a, nb)
            assert abs(est - (theta - second.mean())) < 1e-10

    def test_constant_outcome_model_returns_naive(self, table1_data):
        d = table1_data
        nb = fit_score_nuisance(d)
        nb_c = replace(nb, Q=np.tile(nb.theta_naive, (d.n, 1)))
        for a in (0, 1):
            est, _ = onestep_theta_y(d, a, nb_c)
            assert est == pytest.approx(nb.theta_naive[a], abs=1e-12)

    def test_influence_mean_zero(self, table1_data):
        d = table1_data
        nb = fit_score_nuisance(d)
        for a in (0, 1):
            _, xi = onestep_theta_y(d, a, nb)
            assert abs(xi.mean()) <= 1e-8

    def test_influence_correction_term(self, table1_data):
        d = table1_data
        nb = fit_score_nuisance(d)
        a = 1
        est, xi = onestep_theta_y(d, a, nb)
        theta0 = nb.theta_naive[a]
        pi1 = nb.pi[1]
        phi_est = (np.where((d.a == a) & (d.r == 1), np.nan_to_num(d.y) - est, 0.0) / (nb.pi[a] * nb.rho[a])
                   - (d.a - pi1) * (a - pi1) / (nb.rho[a] * pi1 * (1 - pi1)) * (nb.Q[:, a] - theta0) * nb.Pi[:, a])
        corr = ((pi1 - a) / (nb.rho[a] * (1 - pi1) * pi1)
                * np.mean((nb.Q[:, a] - theta0) * nb.Pi[:, a]) * (pi1 - d.a))
        np.testing.assert_allclose(xi, phi_est + corr, rtol=1e-12, atol=1e-12)


class TestRiskInfluence:
    def test_fulldata_examples(self):
        assert fulldata_eif_theta_t(1, 1, 1, 0.3, 0.5, 0.3) == pytest.approx(1.4, abs=1e-15)
        assert fulldata_eif_theta_t(0, 0, 1, 0.2, 0.5, 0.2) == 0.0
        assert fulldata_eif_theta_t(1, 0, 1, 0.2, 0.5, 0.2) == 0.0

    def test_fulldata_mean_zero_uncensored(self):
        # uncensored exponential times with a known conditional risk
        rng = np.random.default_rng(5)
        n = 400_000
        a_obs = rng.integers(0, 2, n)
        x = rng.standard_normal(n)
        lam = np.exp(-1.5 + 0.4 * x)
        t = rng.exponential(1.0 / lam)
        F = -np.expm1(-lam * TAU)
        nodes, weights = np.polynomial.hermite_e.hermegauss(80)
        theta = np.sum(weights * -np.expm1(-np.exp(-1.5 + 0.4 * nodes) * TAU)) / weights.sum()
        phi = fulldata_eif_theta_t(t <= TAU, a_obs, 1, F, 0.5, theta)
        assert abs(phi.mean()) < 3 * phi.std() / math.sqrt(n)

    def test_no_censoring_before_tau_collapses(self, table1_data):
        d = table1_data
        d = d.subset(~((d.status == 0) & (d.time <= TAU)))
        sb = fit_survival_nuisance(d, TAU)
        for a in (0, 1):
            F = sb.event_cdf(TAU, a)[:, 0]
            ebt = (d.status > 0) & (d.time <= TAU)
            theta = 0.1
            expected = fulldata_eif_theta_t(ebt, d.a, a, F, np.mean(d.a == a), theta)
            np.testing.assert_allclose(eif_theta_t(d, a, sb, theta), expected, rtol=1e-12, atol=1e-13)

    def test_no_censoring_saturated_model_gives_proportion(self, table1_data):
        d = table1_data
        d = d.subset(d.status > 0)
        ebt = (d.status > 0) & (d.time <= TAU)
        props = {a: ebt[d.a == a].mean() for a in (0, 1)}
        sb = constant_bundle(d, props)
        for a in (0, 1):
            for corr in (True, False):
                est, _ = onestep_theta_t(d, a, sb, pi_correction=corr)
                assert est == pytest.approx(props[a], abs=1e-12)

    def test_constant_risk_shift_identity(self, table1_data):
        # the weighted complete-case indicator plus the censoring martingale
        # integral equals one for every subject
        d = table1_data
        c = 0.37
        sb0 = constant_bundle(d, {0: 0.0, 1: 0.0})
        sbc = constant_bundle(d, {0: c, 1: c})
        for a in (0, 1):
            lhs = eif_theta_t(d, a, sbc, c)
            rhs = eif_theta_t(d, a, sb0, 0.0) - c * (d.a == a) / np.mean(d.a == a)
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_integrand_vanishes_at_tau(self, table1_data):
        sb = fit_survival_nuisance(table1_data, TAU)
        L = sb.event_cumhaz(np.array([TAU - 1e-9, TAU]), 1)
        cond = -np.expm1(-(L[:, 1] - L[:, 0]))
        assert np.max(cond) < 1e-6

    def test_mean_zero_at_truth_heavy_censoring(self):
        sp = heavy_censoring_scenario()
        d = simulate_dataset(sp, 100_000, RandomSource(41))
        assert np.mean((d.status == 0) & (d.time <= TAU)) > 0.05
        truth = exact_truth(sp)
        sb = fit_survival_nuisance(d, TAU)
        for a in (0, 1):
            phi = eif_theta_t(d, a, sb, truth["theta_t"][a])
            assert abs(phi.mean()) < 3 * phi.std() / math.sqrt(d.n)

    def test_onestep_solves_estimating_equation(self, table1_data):
        d = table1_data
        sb = fit_survival_nuisance(d, TAU)
        for a in (0, 1):
            est, infl = onestep_theta_t(d, a, sb, pi_correction=False)
            assert abs(eif_theta_t(d, a, sb, est).mean()) < 1e-12
            assert abs(infl.mean()) < 1e-12

    def test_pi_correction_keeps_mean_zero(self, table1_data):
        d = table1_data
        sb = fit_survival_nuisance(d, TAU)
        for a in (0, 1):
            est_c, infl_c = onestep_theta_t(d, a, sb, pi_correction=True)
            est_u, _ = onestep_theta_t(d, a, sb, pi_correction=False)
            assert est_c == est_u
            assert abs(infl_c.mean()) <= 1e-8

    def test_censoring_floor(self, table1_data):
        d = table1_data
        with pytest.raises(CensoringPositivityViolation):
            sb = fit_survival_nuisance(d, 50.0)
            eif_theta_t(d, 0, sb, 0.1)


class TestNaiveRisk:
    def test_km_matches_proportion_without_censoring(self, table1_data):
        d = table1_data.subset(table1_data.status > 0)
        for a in (0, 1):
            est, infl, gw = naive_theta_t(d, a, TAU)
            arm = d.a == a
            p = np.mean(d.time[arm] <= TAU)
            assert est == pytest.approx(p, abs=1e-12)
            # without censoring the influence is the centred indicator scaled by
            # 1/pi, up to the O(1/n) gap between discrete hazard sums and log S
            expected = np.where(arm, ((d.time <= TAU) - p) / arm.mean(), 0.0)
            np.testing.assert_allclose(infl, expected, atol=0.02)
            assert gw == pytest.approx(p * (1 - p) / arm.sum(), rel=1e-10)

    def test_influence_variance_matches_greenwood(self, table1_data):
        d = table1_data
        for a in (0, 1):
            _, infl, gw = naive_theta_t(d, a, TAU)
            assert np.sum(infl ** 2) / d.n ** 2 == pytest.approx(gw, rel=0.05)

    def test_monotone_in_tau(self, table1_data):
        for a in (0, 1):
            vals = [naive_theta_t(table1_data, a, t)[0] for t in np.linspace(0.2, 3.0, 15)]
            assert np.all(np.diff(vals) >= 0)
            assert 0 <= vals[0] and vals[-1] <= 1


@pytest.fixture(scope="module")
def results(table1_data):
    return estimate_truncatedscore(table1_data, TAU, "both")


class TestEstimationResult:
    def test_influence_means(self, results):
        res = results["adjusted"]
        assert np.max(np.abs(res.influence.mean(axis=0))) <= 1e-8
        assert np.max(np.abs(res.influence_theta_y.mean(axis=0))) <= 1e-8
        assert np.max(np.abs(res.influence_theta_t.mean(axis=0))) <= 1e-8

    @pytest.mark.parametrize("method", ["naive", "adjusted"])
    def test_sigma_symmetric_psd(self, results, method):
        s = results[method].sigma
        assert np.array_equal(s, s.T)
        assert np.all(np.linalg.eigvalsh(s) >= 0)

    @pytest.mark.parametrize("method", ["naive", "adjusted"])
    def test_wald_intervals(self, results, method):
        for row in results[method].rows():
            assert row["lower"] == pytest.approx(row["estimate"] - 1.959964 * row["se"], abs=1e-6 * row["se"])
            assert row["upper"] == pytest.approx(row["estimate"] + Z975 * row["se"], rel=1e-15)

    def test_contrasts(self, results):
        for res in results.values():
            assert res.psi_y == res.theta_y[1] - res.theta_y[0]
            assert res.psi_t == res.theta_t[0] - res.theta_t[1]
            assert np.all((0 <= res.theta_t) & (res.theta_t <= 1))

    def test_labels(self, results):
        labels = [r["label"] for r in results["adjusted"].rows()]
        assert labels == ["E(Y|T>2.0,A=0)", "E(Y|T>2.0,A=1)", "diff",
                          "P(T>2.0|A=0)", "P(T>2.0|A=1)", "riskdiff"]

    def test_naive_risk_se_is_greenwood(self, results, table1_data):
        res = results["naive"]
        gw = [naive_theta_t(table1_data, a, TAU)[2] for a in (0, 1)]
        assert res.se_psi[1] == pytest.approx(math.sqrt(sum(gw)), rel=1e-12)

    def test_adjusted_more_precise_for_score(self, results):
        assert results["adjusted"].se_psi[0] < results["naive"].se_psi[0]

    def test_arm_relabel_antisymmetry(self, table1_data, results):
        swapped = estimate_truncatedscore(table1_data.relabel_arms(), TAU, "both")
        for method in ("naive", "adjusted"):
            a, b = results[method], swapped[method]
            assert b.psi_y == pytest.approx(-a.psi_y, rel=1e-9)
            assert b.psi_t == pytest.approx(-a.psi_t, rel=1e-9)
            np.testing.assert_allclose(b.theta_y, a.theta_y[::-1], rtol=1e-10)
            np.testing.assert_allclose(b.theta_t, a.theta_t[::-1], rtol=1e-10)
            np.testing.assert_allclose(b.se_psi, a.se_psi, rtol=1e-8)

    def test_to_dict_fields(self, results):
        doc = results["adjusted"].to_dict()
        for key in ("psi_y", "psi_t", "se_psi", "sigma", "n", "tau", "method", "rows"):
            assert key in doc

    def test_unknown_method(self, table1_data):
        with pytest.raises(ValueError):
            estimate_truncatedscore(table1_data, TAU, "fancy")

    def test_empty_arm(self, table1_data):
        with pytest.raises(EmptyArm):
            estimate_truncatedscore(table1_data.subset(table1_data.a == 1), TAU)

    def test_tau_beyond_follow_up(self, table1_data):
        with pytest.raises(CensoringPositivityViolation):
            estimate_truncatedscore(table1_data, float(table1_data.time.max()) + 1.0)

    @pytest.mark.slow
    def test_large_sample_risk_contrast(self):
        d = simulate_dataset(TABLE1, 10**6, RandomSource(12))
        res = estimate_truncatedscore(d, TAU, "adjusted")["adjusted"]
        assert abs(res.psi_t - 0.0259) < 3 * res.se_psi[1]
        assert abs(res.psi_y - 2.790) < 3 * res.se_psi[0]


class TestEstimatorAPI:
    def test_params_and_clone(self):
        est = TruncatedScoreEstimator(tau=1.5, method="naive")
        assert est.get_params() == {"tau": 1.5, "method": "naive", "pi_correction": True}
        twin = clone(est)
        assert twin.get_params() == est.get_params()
        twin.set_params(tau=2.0)
        assert est.tau == 1.5

    def test_unfitted(self):
        est = TruncatedScoreEstimator()
        with pytest.raises(NotFittedError):
            est.psi_
        with pytest.raises(NotFittedError):
            est.predict(np.zeros((2, 2)))

    def test_fit_matches_function(self, table1_data):
        est = TruncatedScoreEstimator(tau=TAU).fit(table1_data)
        ref = estimate_truncatedscore(table1_data, TAU, "adjusted")["adjusted"]
        np.testing.assert_array_equal(est.psi_, ref.psi)
        np.testing.assert_allclose(est.covariance_, ref.sigma / table1_data.n)
        assert est.n_samples_ == table1_data.n
        assert est.naive_result_.method == "naive"

    def test_fit_from_columns(self, table1_data):
        cols = {name: getattr(table1_data, name) for name in ("a", "x1", "x2", "time", "status", "r", "y")}
        est = TruncatedScoreEstimator(method="naive").fit(cols)
        assert est.result_.method == "naive"

    def test_transform_and_predict(self, table1_data):
        est = TruncatedScoreEstimator().fit(table1_data)
        z = est.transform(table1_data)
        assert z.shape == (table1_data.n, 6)
        nb = est.result_.nuisance
        np.testing.assert_allclose(z[:, :2], nb.Q, rtol=1e-12)
        np.testing.assert_allclose(z[:, 2:4], nb.Pi, rtol=1e-12)
        assert np.all((z[:, 4:] > 0) & (z[:, 4:] < 1))
        pred = est.predict(np.column_stack([table1_data.x1, table1_data.x2]))
        np.testing.assert_allclose(pred[:, 0], z[:, 1] - z[:, 0])
        np.testing.assert_allclose(pred[:, 1], z[:, 4] - z[:, 5])

    def test_naive_predict_is_marginal(self, table1_data):
        est = TruncatedScoreEstimator(method="naive").fit(table1_data)
        pred = est.predict(np.zeros((3, 2)))
        np.testing.assert_array_equal(pred, np.tile(est.psi_, (3, 1)))

    def test_invalid_method(self, table1_data):
        with pytest.raises(ValueError):
            TruncatedScoreEstimator(method="both").fit(table1_data)

    def test_invalid_input(self):
        from truncscore.exceptions import ValidationError
        with pytest.raises(ValidationError):
            TruncatedScoreEstimator().fit({"a": [0, 1]})
