"""Discretised influence estimates and the fit of the influence parameters.

For each cascade the time after the original is cut into windows (4 h by
default). Inside a window the influence is treated as constant, and its
maximum-likelihood value is the retweet count divided by the kernel mass the
cascade's contributors put into the window::

    phat = R / sum_j d_j * integral_{t_st - t_j}^{t_end - t_j} psi

The shared parameters ``(r0, phi0, tau_m)`` and one ``p0`` per cascade are
then fitted by minimising the summed absolute residual between ``phat`` and
the influence function at the window midpoints.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .errors import DataError, FitError
from .kernels import DAY, KernelMode

log = logging.getLogger(__name__)

R0_BOUND = 0.2
TAU_MIN = 600.0
TAU_MAX = 30 * DAY


@dataclass(frozen=True, eq=False)
class PhatSeries:
    origin_id: str
    t0: float
    S: int
    starts: np.ndarray
    ends: np.ndarray
    counts: np.ndarray
    phat: np.ndarray  # nan where the window carries no estimate

    @property
    def midpoints(self):
        return 0.5 * (self.starts + self.ends)

    @property
    def valid(self):
        return np.isfinite(self.phat)


@dataclass(frozen=True)
class InfluenceOptions:
    max_iter: int = 600
    rel_tol: float = 1e-8
    restarts: int = 5
    seed: int = 0


@dataclass(frozen=True, eq=False)
class InfluenceFit:
    p0_by_origin: dict
    r0: float
    phi0: float
    tau_m: float
    loss: float
    mode: KernelMode = KernelMode.PAPER
    window_s: float = 14400.0
    period: float = DAY
    meta: dict = field(default_factory=dict)

    def params(self, p0):
        return kernels.InfluenceParams(p0, self.r0, self.phi0, self.tau_m, self.period)


def estimate_phat(cascade, t_b, window_s=14400.0, mode=KernelMode.PAPER, contributors="history"):
    """Windowed influence estimates for one cascade.

    Windows run from the original to the last retweet rounded up to a window
    boundary, truncated at ``t_b``. With ``contributors="history"`` every
    member posted before the window end contributes to the denominator
    (kernel integral clamped at the member's own time); with ``"window"``
    only members posting inside the window do.
    """
    if not window_s > 0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    if contributors not in ("history", "window"):
        raise ValueError(f"phat_contributors must be 'history' or 'window', got {contributors!r}")
    origin = cascade.origin
    t0 = origin.time_s
    rt_t = np.array([r.time_s for r in cascade.retweets], dtype=float)
    empty = np.zeros(0)
    if rt_t.size == 0 or t_b <= t0:
        return PhatSeries(origin.event_id, t0, origin.pos, empty, empty, empty.astype(int), empty)
    n_win = int(math.floor((rt_t[-1] - t0) / window_s)) + 1
    edges = t0 + window_s * np.arange(n_win + 1)
    end = min(edges[-1], t_b)
    edges = edges[edges < end]
    edges = np.append(edges, end)
    starts, ends = edges[:-1], edges[1:]

    counts = np.searchsorted(rt_t, ends, side="left") - np.searchsorted(rt_t, starts, side="left")
    if ends[-1] == t_b:
        counts[-1] += int(np.sum(rt_t == t_b))

    m_t = np.array([m.time_s for m in cascade.members], dtype=float)
    m_d = np.array([m.followers for m in cascade.members], dtype=float)
    mass = kernels.psi_cdf(ends[:, None] - m_t[None, :], mode) - kernels.psi_cdf(starts[:, None] - m_t[None, :], mode)
    if contributors == "window":
        inside = (m_t[None, :] >= starts[:, None]) & (m_t[None, :] < ends[:, None])
        mass = np.where(inside, mass, 0.0)
    denom = mass @ m_d

    phat = np.full(starts.shape, np.nan)
    ok = (counts > 0) & (denom > 0)
    phat[ok] = counts[ok] / denom[ok]
    return PhatSeries(origin.event_id, t0, origin.pos, starts, ends, counts, phat)


class _Problem:
    """Flattened valid windows of all cascades, with the profiled objective."""

    def __init__(self, series, period):
        usable = [s for s in series if np.any(s.valid)]
        if not usable:
            raise DataError("no cascade has a usable influence window (all retweet-free)")
        self.series = usable
        self.period = period
        group, S, t0, mid, phat = [], [], [], [], []
        for g, s in enumerate(usable):
            v = s.valid
            k = int(v.sum())
            group.append(np.full(k, g))
            S.append(np.full(k, float(s.S)))
            t0.append(np.full(k, s.t0))
            mid.append(s.midpoints[v])
            phat.append(s.phat[v])
        self.group = np.concatenate(group)
        self.S = np.concatenate(S)
        self.t0 = np.concatenate(t0)
        self.mid = np.concatenate(mid)
        self.phat = np.concatenate(phat)
        self.n_groups = len(usable)

    def shape(self, r0, phi0, tau):
        br = 1.0 - self.S * r0 * np.sin(2.0 * math.pi * (self.mid + phi0) / self.period)
        return np.maximum(br, 0.0) * np.exp(-(self.mid - self.t0) / tau)

    def inner(self, f):
        """Per-cascade p0 minimising sum |phat - p0 f|: weighted median of phat/f."""
        pos = f > 0
        p0 = np.zeros(self.n_groups)
        has = np.bincount(self.group[pos], minlength=self.n_groups) > 0
        if np.any(pos):
            g = self.group[pos]
            w = f[pos]
            ratio = self.phat[pos] / w
            order = np.lexsort((ratio, g))
            g, w, ratio = g[order], w[order], ratio[order]
            cum = np.cumsum(w)
            totals = np.bincount(g, weights=w, minlength=self.n_groups)
            before = np.concatenate(([0.0], np.cumsum(totals)[:-1]))
            within = cum - before[g]
            hit = within >= 0.5 * totals[g] * (1.0 - 1e-15)
            first = np.full(self.n_groups, -1)
            idx = np.nonzero(hit)[0]
            first_idx = np.unique(g[idx], return_index=True)
            first[first_idx[0]] = idx[first_idx[1]]
            p0[has] = ratio[first[has]]
        # no information on the scale: fall back to the mean of the estimates
        if not np.all(has):
            means = np.bincount(self.group, weights=self.phat, minlength=self.n_groups) / np.bincount(self.group, minlength=self.n_groups)
            p0[~has] = means[~has]
        return p0

    def loss(self, r0, phi0, tau, p0=None):
        f = self.shape(r0, phi0, tau)
        if p0 is None:
            p0 = self.inner(f)
        return float(np.sum(np.abs(self.phat - p0[self.group] * f))), p0


def _decode(x, period):
    return float(x[0]), float(x[1]) * period, math.exp(float(x[2]))


def fit_influence_series(series, mode=KernelMode.PAPER, window_s=14400.0, period=DAY, opts=None):
    """Fit ``(p0_i, r0, phi0, tau_m)`` to precomputed windowed estimates."""
    opts = opts or InfluenceOptions()
    prob = _Problem(series, period)

    def objective(x):
        r0, phi0, tau = _decode(x, period)
        return prob.loss(r0, phi0, tau)[0]

    rng = np.random.default_rng(opts.seed)
    ages = prob.mid - prob.t0
    tau_guess = float(np.clip(2.0 * np.median(ages), TAU_MIN * 2, TAU_MAX / 2))
    bounds = [(-R0_BOUND, R0_BOUND), (None, None), (math.log(TAU_MIN), math.log(TAU_MAX))]
    history = []
    best_x, best_f = None, math.inf
    iterations = 0
    starts = []
    for k in range(opts.restarts):
        starts.append(np.array([
            rng.uniform(-0.1, 0.1),
            (k + rng.uniform(0.0, 1.0)) / opts.restarts,
            math.log(tau_guess) + rng.normal(0.0, 0.5),
        ]))
    for x0 in starts:
        x0[2] = float(np.clip(x0[2], *bounds[2]))
        f0 = objective(x0)
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "maxiter": opts.max_iter,
                "xatol": 1e-9,
                "fatol": opts.rel_tol * max(f0, 1e-300),
                "initial_simplex": np.vstack([x0, x0 + np.diag([0.05, 0.1, 0.5])]),
            },
        )
        iterations += int(res.nit)
        if res.fun < best_f:
            best_f, best_x = float(res.fun), res.x.copy()
        history.append(best_f)

    # polish from the best start until the relative improvement stalls
    for _ in range(opts.max_iter):
        res = minimize(objective, best_x, method="Nelder-Mead", bounds=bounds,
                       options={"maxiter": opts.max_iter, "xatol": 1e-10, "fatol": opts.rel_tol * max(best_f, 1e-300)})
        iterations += int(res.nit)
        improved = best_f - float(res.fun)
        if res.fun < best_f:
            best_f, best_x = float(res.fun), res.x.copy()
        history.append(best_f)
        if improved <= opts.rel_tol * max(best_f, 1e-300):
            break

    r0, phi0, tau = _decode(best_x, period)
    if r0 < 0:
        r0, phi0 = -r0, phi0 + 0.5 * period
    phi0 = phi0 % period
    loss, p0 = prob.loss(r0, phi0, tau)
    warnings = []
    if abs(abs(r0) - R0_BOUND) <= 1e-6:
        warnings.append("r0 at bound")
    if tau <= TAU_MIN * (1 + 1e-6) or tau >= TAU_MAX * (1 - 1e-6):
        warnings.append("tau_m at bound")
    for w in warnings:
        log.warning("influence fit: %s", w)
    p0_by_origin = {s.origin_id: float(v) for s, v in zip(prob.series, p0)}
    return InfluenceFit(
        p0_by_origin, r0, phi0, tau, loss, KernelMode.parse(mode), float(window_s), period,
        {"iterations": iterations, "warnings": warnings, "history": history, "n_windows": int(prob.phat.size)},
    )


def fit_influence(ds, window_s=14400.0, mode=KernelMode.PAPER, opts=None, contributors="history"):
    """Estimate windowed influences for every cascade of ``ds`` and fit them."""
    series = [
        estimate_phat(c, ds.t_b, window_s, mode, contributors)
        for c in ds.cascades
        if c.retweets
    ]
    if not series:
        raise DataError("cannot fit influence: every cascade is retweet-free")
    return fit_influence_series(series, mode, window_s, kernels.DAY, opts)
