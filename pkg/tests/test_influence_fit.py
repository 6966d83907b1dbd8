import math

import numpy as np
import pytest

from poshawkes.errors import DataError
from poshawkes.events import TweetEvent, build_cascades
from poshawkes.influence_fit import (
    InfluenceOptions,
    PhatSeries,
    _Problem,
    estimate_phat,
    fit_influence,
    fit_influence_series,
)
from poshawkes.kernels import InfluenceParams, KernelMode, influence

DAY = 86400.0
# 2 / integral of psi over [0, 600] (paper tail), evaluated with mpmath
PHAT_ORACLE = 10.272209055838489


def cascade(times, followers, t_b=1e6):
    evs = [TweetEvent("o", None, float(times[0]), int(followers[0]), 2)]
    evs += [TweetEvent(f"r{k}", "o", float(t), int(d), None) for k, (t, d) in enumerate(zip(times[1:], followers[1:]))]
    return build_cascades(evs, t_a=0.0, t_b=t_b).cascades[0]


def noise_free_series(rng, n, r0, phi0, tau, n_windows=12, window=14400.0):
    series, p0 = [], {}
    for k in range(n):
        t0 = rng.uniform(0, 20 * DAY)
        S = int(rng.integers(1, 6))
        p = float(rng.lognormal(math.log(0.01), 0.4))
        starts = t0 + window * np.arange(n_windows)
        ends = starts + window
        mids = 0.5 * (starts + ends)
        phat = influence(InfluenceParams(p, r0, phi0, tau), S, t0, mids)
        sid = f"c{k}"
        series.append(PhatSeries(sid, t0, S, starts, ends, np.ones(n_windows, int), phat))
        p0[sid] = p
    return series, p0


class TestEstimatePhat:
    def test_single_contributor_oracle(self):
        c = cascade([0.0, 100.0, 500.0], [1, 0, 0])
        s = estimate_phat(c, t_b=1e6, window_s=600.0, mode=KernelMode.PAPER)
        assert s.starts.tolist() == [0.0] and s.ends.tolist() == [600.0]
        assert s.phat[0] == pytest.approx(PHAT_ORACLE, rel=1e-12)

    def test_empty_window_absent(self):
        c = cascade([0.0, 100.0, 1300.0], [5, 3, 2])
        s = estimate_phat(c, t_b=1e6, window_s=600.0)
        assert s.counts.tolist() == [1, 0, 1]
        assert np.isnan(s.phat[1]) and np.isfinite(s.phat[[0, 2]]).all()

    def test_doubling_followers_halves_phat(self):
        t = [0.0, 50.0, 400.0, 5000.0, 20000.0]
        a = estimate_phat(cascade(t, [10, 4, 7, 3, 9]), 1e6)
        b = estimate_phat(cascade(t, [20, 8, 14, 6, 18]), 1e6)
        np.testing.assert_allclose(b.phat[a.valid], 0.5 * a.phat[a.valid], rtol=1e-13)

    def test_truncated_at_t_b(self):
        c = cascade([0.0, 100.0, 20000.0], [5, 3, 2], t_b=25000.0)
        s = estimate_phat(c, t_b=18000.0)
        assert s.ends[-1] == 18000.0 and s.counts.sum() == 1

    def test_windows_contiguous(self):
        s = estimate_phat(cascade([0.0, 100.0, 50000.0], [5, 3, 2]), 1e6)
        np.testing.assert_array_equal(s.starts[1:], s.ends[:-1])
        assert s.starts[0] == 0.0

    def test_window_contributor_variant(self):
        c = cascade([0.0, 100.0, 15000.0], [5, 3, 0])
        hist = estimate_phat(c, 1e6, contributors="history")
        win = estimate_phat(c, 1e6, contributors="window")
        # the second window has no member inside it, hence no denominator
        assert np.isfinite(hist.phat[1]) and np.isnan(win.phat[1])
        assert win.phat[0] == pytest.approx(hist.phat[0], rel=1e-12)

    def test_bad_window(self):
        with pytest.raises(ValueError):
            estimate_phat(cascade([0.0, 1.0], [1, 1]), 1e6, window_s=0.0)


class TestFitInfluence:
    def test_recovers_noise_free_parameters(self, rng):
        r0, phi0, tau = 0.12, 20000.0, 30000.0
        series, p0 = noise_free_series(rng, 30, r0, phi0, tau)
        fit = fit_influence_series(series)
        assert fit.r0 == pytest.approx(r0, rel=0.05)
        assert fit.phi0 == pytest.approx(phi0, rel=0.05)
        assert fit.tau_m == pytest.approx(tau, rel=0.05)
        for k, v in p0.items():
            assert fit.p0_by_origin[k] == pytest.approx(v, rel=0.10)

    def test_zero_amplitude(self, rng):
        series, _ = noise_free_series(rng, 20, 0.0, 0.0, 20000.0)
        fit = fit_influence_series(series)
        assert abs(fit.r0) <= 0.02
        assert fit.tau_m == pytest.approx(20000.0, rel=0.05)

    def test_single_window_fits_exactly(self):
        s = PhatSeries("a", 0.0, 3, np.array([0.0]), np.array([14400.0]), np.array([2]), np.array([0.02]))
        fit = fit_influence_series([s])
        assert fit.loss == pytest.approx(0.0, abs=1e-15)

    def test_inner_step_is_optimal(self, rng):
        series, _ = noise_free_series(rng, 15, 0.1, 5000.0, 20000.0)
        noisy = [PhatSeries(s.origin_id, s.t0, s.S, s.starts, s.ends, s.counts, s.phat * rng.lognormal(0, 0.3, s.phat.size))
                 for s in series]
        prob = _Problem(noisy, DAY)
        base, p0 = prob.loss(0.05, 1000.0, 15000.0)
        for g in range(prob.n_groups):
            for factor in (0.99, 1.01):
                q = p0.copy()
                q[g] *= factor
                assert prob.loss(0.05, 1000.0, 15000.0, q)[0] >= base - 1e-15

    def test_loss_recomputed_independently(self, rng):
        series, _ = noise_free_series(rng, 10, 0.1, 5000.0, 20000.0)
        noisy = [PhatSeries(s.origin_id, s.t0, s.S, s.starts, s.ends, s.counts, s.phat * rng.lognormal(0, 0.3, s.phat.size))
                 for s in series]
        fit = fit_influence_series(noisy)
        total = 0.0
        for s in noisy:
            p = influence(fit.params(fit.p0_by_origin[s.origin_id]), s.S, s.t0, s.midpoints)
            total += float(np.sum(np.abs(s.phat - p)))
        assert fit.loss == pytest.approx(total, rel=1e-12, abs=1e-12)

    def test_outer_loop_monotone(self, rng):
        series, _ = noise_free_series(rng, 10, 0.1, 5000.0, 20000.0)
        h = fit_influence_series(series).meta["history"]
        assert all(b <= a for a, b in zip(h, h[1:]))

    def test_r0_canonical_sign(self, rng):
        series, _ = noise_free_series(rng, 25, -0.1, 3000.0, 30000.0)
        fit = fit_influence_series(series)
        # (-r0, phi0) and (r0, phi0 + T/2) are the same influence
        assert fit.r0 == pytest.approx(0.1, rel=0.05)
        assert fit.phi0 == pytest.approx(3000.0 + DAY / 2, rel=0.05)

    def test_all_retweet_free(self):
        ds = build_cascades([TweetEvent("a", None, 0.0, 1, 1), TweetEvent("b", None, 5.0, 1, 1)])
        with pytest.raises(DataError):
            fit_influence(ds)

    def test_bound_warning(self, rng):
        series, _ = noise_free_series(rng, 10, 0.0, 0.0, 1e9)
        fit = fit_influence_series(series)
        assert "tau_m at bound" in fit.meta["warnings"]

    def test_deterministic(self, synth30):
        a = fit_influence(synth30, opts=InfluenceOptions(seed=3))
        b = fit_influence(synth30, opts=InfluenceOptions(seed=3))
        assert (a.r0, a.phi0, a.tau_m, a.loss) == (b.r0, b.phi0, b.tau_m, b.loss)
        assert a.p0_by_origin == b.p0_by_origin

    def test_fitted_invariants(self, synth30):
        fit = fit_influence(synth30)
        assert all(v > 0 for v in fit.p0_by_origin.values())
        assert abs(fit.r0) <= 0.2 and fit.tau_m > 0 and 0 <= fit.phi0 < DAY
