"""Comparison models: an aggregate NHPP and a retweet-regression extrapolation."""

import math
from dataclasses import dataclass, field

import numpy as np

from .background import FitOptions, PoissonDesign, _checked_exp
from .covariates import hourly_partition
from .errors import DataError, FitError
from .simulate import hour_edges

REGRESSION_FEATURES = ("intercept", "log1p_early_retweets", "log1p_followers", "pos")
SPREAD_HOURS = 24


@dataclass(frozen=True, eq=False)
class NhppModel:
    gamma: np.ndarray
    ridge: float = 1e-6
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class RetweetRegression:
    weights: np.ndarray
    early_window_s: float = 3600.0
    features: tuple = REGRESSION_FEATURES
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.early_window_s > 0:
            raise ValueError("early_window_s must be positive")

    def predict_log(self, early, followers, pos):
        X = _design(np.asarray(early, float), np.asarray(followers, float), np.asarray(pos, float))
        return X @ self.weights


def fit_nhpp(ds, cal, opts=None):
    """Log-linear Poisson fit to every event (originals and retweets)."""
    opts = opts or FitOptions()
    times = ds.event_times
    if times.size == 0:
        raise DataError("cannot fit NHPP: dataset is empty")
    design = PoissonDesign.from_times(cal, times, ds.t_a, ds.t_b, opts.ridge)
    gamma, iters = design.minimize(opts.tol, opts.max_iter)
    return NhppModel(gamma, opts.ridge, {"iterations": iters, "n_events": int(times.size)})


def hourly_background_integrals(coef, cal, edges):
    """Exact integral of ``exp(coef . C(t))`` over each ``[edges[k], edges[k+1])``."""
    if edges.shape[0] < 2:
        return np.zeros(0)
    part = hourly_partition(cal, edges[0], edges[-1])
    mass = _checked_exp(part.covariates @ coef) * part.widths
    # partition cells nest inside the output bins unless the bins are off-hour
    cum = np.concatenate(([0.0], np.cumsum(mass)))
    return np.diff(np.interp(edges, part.edges, cum))


def predict_nhpp(model, cal, horizon):
    edges = hour_edges(*map(float, horizon))
    return hourly_background_integrals(model.gamma, cal, edges)


def _design(early, followers, pos):
    return np.column_stack([np.ones_like(early), np.log1p(early), np.log1p(followers), pos])


def fit_retweet_regression(ds, early_window_s=3600.0, ridge=1e-9):
    """OLS of ``log(1 + total retweets)`` on early activity and origin attributes."""
    if not early_window_s > 0:
        raise ValueError("early_window_s must be positive")
    if len(ds.cascades) < 2:
        raise DataError("retweet regression needs at least two cascades")
    early, total = [], []
    for c in ds.cascades:
        rt = np.array([r.time_s for r in c.retweets])
        early.append(float(np.sum(rt <= c.origin.time_s + early_window_s)))
        total.append(float(rt.size))
    X = _design(np.array(early), ds.origin_followers, ds.origin_pos.astype(float))
    y = np.log1p(np.array(total))
    A = X.T @ X + ridge * np.eye(X.shape[1])
    if np.linalg.matrix_rank(A) < X.shape[1]:
        raise FitError("retweet regression design is rank-deficient")
    w = np.linalg.solve(A, X.T @ y)
    resid = y - X @ w
    return RetweetRegression(
        w, float(early_window_s), REGRESSION_FEATURES,
        {"ridge": ridge, "rms_residual": float(np.sqrt(np.mean(resid**2))), "n_cascades": len(ds.cascades)},
    )


def expected_retweets(reg, dists, seed, n_draws=2000):
    """Mean extrapolated retweet count of a future original with no early activity.

    The regression target is ``log(1 + R)``, so ``R = exp(prediction) - 1``
    (no smearing correction), floored at zero.
    """
    rng = np.random.default_rng(seed)
    d = dists.sample("follower", rng, n_draws)
    s = dists.sample("pos", rng, n_draws)
    pred = reg.predict_log(np.zeros(n_draws), d, s)
    return float(np.mean(np.maximum(np.expm1(pred), 0.0)))


def predict_regression_baseline(bg, reg, dists, cal, horizon, seed=0):
    """Hourly expected volume: ``mu`` integrals plus extrapolated retweets.

    The retweets expected for the originals of hour ``h`` are spread evenly
    over hours ``h+1 .. h+24``; the part falling past the horizon is lost.
    """
    edges = hour_edges(*map(float, horizon))
    originals = hourly_background_integrals(bg.beta, cal, edges)
    n = originals.shape[0]
    if n == 0:
        return originals
    per_original = expected_retweets(reg, dists, seed)
    retweets = np.zeros(n)
    for lag in range(1, min(SPREAD_HOURS, n - 1) + 1):
        retweets[lag:] += originals[: n - lag] * per_original / SPREAD_HOURS
    return originals + retweets
