import math

import numpy as np
import pytest
from scipy.integrate import quad

from poshawkes import kernels
from poshawkes.background import BackgroundModel, fit_beta
from poshawkes.covariates import hourly_partition
from poshawkes.errors import DataError
from poshawkes.events import EmpiricalDistributions, TweetEvent, build_cascades
from poshawkes.influence_fit import InfluenceFit
from poshawkes.intensity import (
    HawkesModel,
    OriginArrays,
    SampledOriginal,
    compensator,
    excitation_values,
    expected_future_intensity,
    expected_future_values,
    future_values,
    lambda_at,
    lambda_values,
    log_likelihood,
)
from poshawkes.kernels import InfluenceParams, KernelMode, influence

P, C = KernelMode.PAPER, KernelMode.CONTINUOUS
BETA = np.array([-9.0, 0.03, -0.4, 0.2, 0.5, 0.2, -0.2])


def make_model(ds, p0s, r0=0.1, phi0=0.0, tau=7200.0, mode=P, beta=BETA, mean_d=100, t_b=None):
    inf = InfluenceFit(dict(p0s), r0, phi0, tau, 0.0, mode)
    dists = EmpiricalDistributions((3,), (mean_d,), tuple(p0s.values()) or (0.01,))
    return HawkesModel(BackgroundModel(beta), inf, dists, mode, ds.t_b if t_b is None else t_b, ds.t_a)


def small_dataset(scale=1):
    evs = [
        TweetEvent("a", None, 1000.0, 50 * scale, 2),
        TweetEvent("a1", "a", 1100.0, 20 * scale, None),
        TweetEvent("a2", "a", 1250.0, 35 * scale, None),
        TweetEvent("a3", "a", 9000.0, 10 * scale, None),
        TweetEvent("b", None, 20000.0, 80 * scale, 5),
        TweetEvent("b1", "b", 20010.0, 5 * scale, None),
        TweetEvent("b2", "b", 20400.0, 12 * scale, None),
        TweetEvent("c", None, 40000.0, 7 * scale, 1),
        TweetEvent("c1", "c", 41000.0, 60 * scale, None),
        TweetEvent("d", None, 70000.0, 30 * scale, 4),
    ]
    return build_cascades(evs, t_a=0.0, t_b=86400.0)


class TestLambda:
    def test_no_history_is_mu(self, cal):
        ds = small_dataset()
        m = make_model(ds, {"a": 0.01})
        from poshawkes.background import mu

        assert lambda_at(m, ds, cal, 500.0) == mu(m.background, cal, 500.0)

    def test_single_origin_term(self, cal):
        ds = build_cascades([TweetEvent("o", None, 3000.0, 1, 3)], t_a=0.0, t_b=86400.0)
        m = make_model(ds, {"o": 0.2}, r0=0.1, phi0=1234.0)
        from poshawkes.background import mu

        expected = mu(m.background, cal, 3100.0) + influence(InfluenceParams(0.2, 0.1, 1234.0, 7200.0), 3, 3000.0, 3100.0) * 6.49e-4
        assert lambda_at(m, ds, cal, 3100.0) == pytest.approx(expected, rel=1e-14)

    def test_linear_in_followers(self, cal, rng, backend):
        t = np.sort(rng.uniform(0, 86400.0, 200))
        one, two = small_dataset(1), small_dataset(2)
        p0 = {"a": 0.01, "b": 0.02, "c": 0.005}
        e1 = excitation_values(make_model(one, p0), one, t)
        e2 = excitation_values(make_model(two, p0), two, t)
        np.testing.assert_allclose(e2, 2 * e1, rtol=1e-13)
        mu1 = lambda_values(make_model(one, p0), one, cal, t) - e1
        mu2 = lambda_values(make_model(two, p0), two, cal, t) - e2
        np.testing.assert_allclose(mu1, mu2, rtol=1e-13)

    def test_lambda_at_least_mu(self, synth30, cal, rng):
        fit = {k: 0.01 for k in synth30.origin_ids[::3]}
        m = make_model(synth30, fit, r0=0.2)
        t = rng.uniform(synth30.t_a, synth30.t_b, 300)
        lam = lambda_values(m, synth30, cal, t)
        mu = lam - excitation_values(m, synth30, t)
        assert np.all(mu > 0) and np.all(lam >= mu)

    def test_unfitted_origins_use_mean_p0(self):
        ds = small_dataset()
        m = make_model(ds, {"a": 0.02, "b": 0.04})
        np.testing.assert_allclose(m.p0_for(["a", "c"]), [0.02, 0.03])


class TestCompensator:
    @pytest.mark.parametrize("mode", [P, C])
    def test_matches_quadrature_with_constant_influence(self, cal, mode, backend):
        ds = small_dataset()
        m = make_model(ds, {"a": 0.01, "b": 0.02, "c": 0.004, "d": 0.03}, r0=0.0, tau=1e13, mode=mode)
        bg, exc = compensator(m, ds, cal)
        mt = ds.member_arrays[1]
        cuts = np.unique(np.concatenate([hourly_partition(cal, ds.t_a, ds.t_b).edges, mt, mt + 300.0]))
        cuts = cuts[(cuts >= ds.t_a) & (cuts <= ds.t_b)]
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            total += quad(lambda t: lambda_at(m, ds, cal, t), a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
        assert bg + exc == pytest.approx(total, rel=1e-6)

    def test_matches_frozen_midpoint_sum(self, cal):
        ds = small_dataset()
        p0 = {"a": 0.01, "b": 0.02, "c": 0.004, "d": 0.03}
        m = make_model(ds, p0, r0=0.15, phi0=5000.0, tau=3000.0)
        _, exc = compensator(m, ds, cal)
        expected = 0.0
        for c in ds.cascades:
            t0 = c.origin.time_s
            params = InfluenceParams(p0[c.origin.event_id], 0.15, 5000.0, 3000.0)
            lo = t0
            while lo < ds.t_b:
                hi = min(lo + 14400.0, ds.t_b)
                p = influence(params, c.origin.pos, t0, 0.5 * (lo + hi))
                for mem in c.members:
                    expected += p * mem.followers * kernels.psi_integral(max(lo - mem.time_s, 0.0), max(hi - mem.time_s, 0.0))
                lo = hi
        assert exc == pytest.approx(expected, rel=1e-12)


class TestLogLikelihood:
    def test_originals_only(self, cal):
        ds = build_cascades([TweetEvent(f"o{k}", None, 5000.0 * k + 17, 10, 2) for k in range(12)], t_a=0.0, t_b=86400.0)
        m = make_model(ds, {}, mode=P)
        part = hourly_partition(cal, 0.0, 86400.0)
        rows = part.covariates[part.cell_of(ds.origin_times)]
        mu_int = float(np.sum(np.exp(part.covariates @ BETA) * part.widths))
        _, exc = compensator(m, ds, cal)
        assert log_likelihood(m, ds, cal) == pytest.approx(float(np.sum(rows @ BETA)) - mu_int - exc, rel=1e-13)
        m0 = make_model(ds, {o: 1e-300 for o in ds.origin_ids})
        assert log_likelihood(m0, ds, cal) == pytest.approx(float(np.sum(rows @ BETA)) - mu_int, rel=1e-12)

    def test_added_event_changes_value(self, cal):
        ds = small_dataset()
        p0 = {"a": 0.01, "b": 0.02, "c": 0.004, "d": 0.03}
        base = log_likelihood(make_model(ds, p0), ds, cal)
        evs = [m for c in ds.cascades for m in c.members] + [TweetEvent("b3", "b", 20100.0, 3, None)]
        ds2 = build_cascades(evs, t_a=0.0, t_b=86400.0)
        assert log_likelihood(make_model(ds2, p0), ds2, cal) != base

    def test_non_positive_argument_names_event(self, cal):
        ds = small_dataset()
        evs = [m for c in ds.cascades for m in c.members] + [TweetEvent("bad", "d", 70050.0, 0, None)]
        ds2 = build_cascades(evs, t_a=0.0, t_b=86400.0)
        with pytest.raises(DataError, match="bad"):
            log_likelihood(make_model(ds2, {"a": 0.01, "d": 0.02}), ds2, cal)

    def test_beta_optimum_is_local_maximum(self, synth30, cal, rng):
        bg = fit_beta(synth30, cal)
        p0 = {k: 0.01 for k in synth30.origin_ids}
        m = make_model(synth30, p0, beta=bg.beta)

        def penalised(beta):
            mm = make_model(synth30, p0, beta=beta)
            return log_likelihood(mm, synth30, cal) - bg.ridge * float(beta @ beta)

        top = penalised(bg.beta)
        for _ in range(20):
            d = rng.normal(size=7)
            assert penalised(bg.beta + 1e-3 * d / np.linalg.norm(d)) < top


class TestExpectedFuture:
    def test_empty_otp(self, cal, rng):
        ds = small_dataset()
        m = make_model(ds, {"a": 0.01}, t_b=50000.0)
        t = rng.uniform(50001.0, 86400.0, 50)
        np.testing.assert_array_equal(expected_future_values(m, ds, cal, [], t), lambda_values(m, ds, cal, t))

    @pytest.mark.parametrize("fi, expected", [("causal", 0.1947), ("paper", 0.1947), ("rate", 6.49e-4)])
    def test_single_sampled_origin(self, cal, fi, expected):
        ds = small_dataset()
        t_b = 80000.0
        m = make_model(ds, {"a": 0.01}, r0=0.0, tau=1e15, mean_d=1, t_b=t_b)
        otp = [SampledOriginal(t_b, 3, 0.05, 1)]
        added = expected_future_intensity(m, ds, cal, otp, t_b + 300.0, fi) - lambda_at(m, ds, cal, t_b + 300.0)
        assert added == pytest.approx(0.05 * expected, rel=1e-9)

    def test_scales_with_mean_followers(self, cal, rng):
        ds = small_dataset()
        otp = OriginArrays.of([SampledOriginal(80100.0, 2, 0.02, 10), SampledOriginal(80500.0, 5, 0.01, 3)])
        t = np.sort(rng.uniform(80000.5, 86400.0, 40))
        base = {}
        for k in (1, 3):
            m = make_model(ds, {"a": 0.01}, mean_d=100 * k, t_b=80000.0)
            base[k] = future_values(m, otp, t)
        np.testing.assert_allclose(base[3], 3 * base[1], rtol=1e-13)

    def test_rejects_past(self, cal):
        ds = small_dataset()
        m = make_model(ds, {"a": 0.01}, t_b=80000.0)
        with pytest.raises(ValueError):
            expected_future_intensity(m, ds, cal, [], 80000.0)

    def test_continuous_between_breakpoints(self, cal, rng):
        ds = small_dataset()
        t_b = 60000.0
        m = make_model(ds, {"a": 0.01, "b": 0.02}, mode=C, t_b=t_b)
        otp = [SampledOriginal(61000.0, 2, 0.02, 10), SampledOriginal(75000.0, 5, 0.01, 3)]
        breaks = np.concatenate([hourly_partition(cal, t_b, 86400.0).edges, [61000.0, 61300.0, 75000.0, 75300.0, 70000.0, 70300.0]])
        checked = 0
        while checked < 10:
            t = rng.uniform(t_b + 1, 86399.0)
            if np.min(np.abs(breaks - t)) < 1.0:
                continue
            lo, hi = (expected_future_intensity(m, ds, cal, otp, t + s, "causal") for s in (-1e-6, 1e-6))
            assert hi == pytest.approx(lo, rel=1e-6)
            checked += 1
