"""Conditional intensity, log-likelihood and expected future intensity."""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .background import BackgroundModel, _checked_exp, mu_values
from .covariates import hourly_partition
from .errors import DataError
from .events import EmpiricalDistributions
from .influence_fit import InfluenceFit
from .kernels import KernelMode

FUTURE_MODES = {"paper": 0, "causal": 1, "rate": 2}


@dataclass(frozen=True, eq=False)
class HawkesModel:
    background: BackgroundModel
    influence: InfluenceFit
    dists: EmpiricalDistributions
    mode: KernelMode
    t_b: float
    t_a: float = 0.0

    def __post_init__(self):
        if KernelMode.parse(self.mode) is not KernelMode.parse(self.influence.mode):
            raise ValueError("background/influence kernel modes disagree")
        object.__setattr__(self, "mode", KernelMode.parse(self.mode))

    @property
    def tail(self):
        return self.mode.tail

    def p0_for(self, ids):
        fitted = self.influence.p0_by_origin
        missing = [k for k in ids if k not in fitted]
        fallback = self.dists.mean_p0 if missing else 0.0
        return np.array([fitted.get(k, fallback) for k in ids], dtype=np.float64)


class SampledOriginal(NamedTuple):
    t0: float
    S: int
    p0: float
    followers: int


class OriginArrays(NamedTuple):
    t0: np.ndarray
    S: np.ndarray
    p0: np.ndarray
    followers: np.ndarray

    @classmethod
    def of(cls, originals):
        if isinstance(originals, OriginArrays):
            return originals
        originals = list(originals)
        return cls(
            np.array([o.t0 for o in originals], dtype=np.float64),
            np.array([o.S for o in originals], dtype=np.int64),
            np.array([o.p0 for o in originals], dtype=np.float64),
            np.array([o.followers for o in originals], dtype=np.float64),
        )

    def __len__(self):
        return self.t0.shape[0]


def _history(model, ds):
    ptr, mt, md = ds.member_arrays
    return ds.origin_times, ds.origin_pos, model.p0_for(ds.origin_ids), ptr, mt, md


def excitation_values(model, ds, times, envelope=False):
    t0, S, p0, ptr, mt, md = _history(model, ds)
    inf = model.influence
    return kernels.core.excitation(
        np.asarray(times, dtype=np.float64), t0, S, p0, ptr, mt, md,
        inf.r0, inf.phi0, inf.tau_m, inf.period, model.tail, bool(envelope),
    )


def lambda_values(model, ds, cal, times):
    times = np.asarray(times, dtype=np.float64)
    return mu_values(model.background, cal, times) + excitation_values(model, ds, times)


def lambda_at(model, ds, cal, t):
    """``mu(t) + sum_i p_i(t) sum_{j in RT(i), t_j < t} d_j psi(t - t_j)``."""
    return float(lambda_values(model, ds, cal, np.array([float(t)]))[0])


def background_integral(model, cal, t_a, t_b):
    if t_b <= t_a:
        return 0.0
    part = hourly_partition(cal, t_a, t_b)
    return float(np.sum(_checked_exp(part.covariates @ model.background.beta) * part.widths))


def compensator(model, ds, cal):
    """``(integral of mu, integral of excitation)`` over ``[t_a, t_b]``.

    The excitation integral freezes each influence at the midpoint of the
    fitting windows and integrates the kernel exactly.
    """
    t0, S, p0, ptr, mt, md = _history(model, ds)
    inf = model.influence
    exc = kernels.core.compensator(t0, S, p0, ptr, mt, md, inf.r0, inf.phi0, inf.tau_m,
                                   inf.period, model.tail, inf.window_s, ds.t_b)
    return background_integral(model, cal, ds.t_a, ds.t_b), float(exc)


def log_likelihood(model, ds, cal, self_term=False):
    """Log-likelihood of ``ds`` under ``model``.

    Originals enter through ``beta . C(t_i)``; the retweet term runs over the
    retweets of each cascade. ``self_term=True`` also adds the original's own
    zero-delay term (finite, since the kernel is finite at zero).
    """
    part = hourly_partition(cal, ds.t_a, ds.t_b)
    rows = part.covariates[part.cell_of(ds.origin_times)]
    term_bg = float(np.sum(rows @ model.background.beta))

    term_rt = 0.0
    params = model.influence
    p0 = model.p0_for(ds.origin_ids)
    for c, casc in enumerate(ds.cascades):
        members = casc.members if self_term else casc.retweets
        if not members:
            continue
        t = np.array([m.time_s for m in members])
        d = np.array([m.followers for m in members], dtype=float)
        ip = kernels.InfluenceParams(p0[c], params.r0, params.phi0, params.tau_m, params.period) if p0[c] > 0 else None
        p = kernels.influence(ip, casc.origin.pos, casc.origin.time_s, t) if ip else np.zeros_like(t)
        arg = p * d * kernels.psi(t - casc.origin.time_s, model.mode)
        bad = np.nonzero(~(arg > 0))[0]
        if bad.size:
            culprit = members[int(bad[0])]
            raise DataError(f"log-likelihood undefined: non-positive intensity factor for event {culprit.event_id}")
        term_rt += float(np.sum(np.log(arg)))

    bg, exc = compensator(model, ds, cal)
    return term_bg + term_rt - bg - exc


def future_values(model, otp, times, future_integral="rate"):
    """Added intensity of the sampled originals ``otp`` at ``times``."""
    mode = FUTURE_MODES.get(future_integral)
    if mode is None:
        raise ValueError(f"future_integral must be one of {sorted(FUTURE_MODES)}, got {future_integral!r}")
    o = OriginArrays.of(otp)
    inf = model.influence
    return kernels.core.future_term(
        np.asarray(times, dtype=np.float64), o.t0, o.S, o.p0, inf.r0, inf.phi0, inf.tau_m,
        inf.period, model.tail, model.dists.mean_followers, model.t_b, mode,
    )


def expected_future_values(model, ds, cal, otp, times, future_integral="rate"):
    times = np.asarray(times, dtype=np.float64)
    if np.any(times <= model.t_b):
        raise ValueError("expected future intensity is defined only for t > t_b")
    return lambda_values(model, ds, cal, times) + future_values(model, otp, times, future_integral)


def expected_future_intensity(model, ds, cal, otp, t, future_integral="rate"):
    """lambda(t) from the observed history plus the sampled-original term."""
    return float(expected_future_values(model, ds, cal, otp, np.array([float(t)]), future_integral)[0])


def fit_hawkes(ds, cal, mode=KernelMode.PAPER, window_s=14400.0, fit_opts=None, influence_opts=None,
               contributors="history", zero_silent=True):
    """Fit background and influence parameters on ``ds`` and assemble the model.

    With ``zero_silent`` the p0 multiset used for future originals counts
    retweet-free cascades older than one window as zero influence.
    """
    from .background import fit_beta
    from .events import empirical_distributions
    from .influence_fit import fit_influence

    mode = KernelMode.parse(mode)
    bg = fit_beta(ds, cal, fit_opts)
    inf = fit_influence(ds, window_s, mode, influence_opts, contributors)
    dists = empirical_distributions(ds, inf.p0_by_origin, window_s if zero_silent else None)
    return HawkesModel(bg, inf, dists, mode, ds.t_b, ds.t_a)
