"""Thinning samplers, forecasting and the synthetic ground-truth generator."""

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta

import numpy as np

from . import kernels
from .background import BackgroundModel, _checked_exp
from .covariates import HOUR, CovariateCalendar, hourly_partition
from .errors import BoundError, DataError, RunawayCascadeError
from .events import DEFAULT_EPOCH, DEFAULT_TZ, TweetEvent, build_cascades
from .intensity import (
    FUTURE_MODES,
    OriginArrays,
    SampledOriginal,
    excitation_values,
    expected_future_values,
)
from .kernels import KernelMode

log = logging.getLogger(__name__)


def derive_seeds(seed, n):
    """``n`` independent 64-bit seeds derived from ``seed``."""
    return [int(x) for x in np.random.SeedSequence(int(seed)).generate_state(n, dtype=np.uint64)]


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(int(seed))


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Step function equal to ``values[k]`` on ``[edges[k], edges[k+1])``."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if edges.ndim != 1 or values.shape != (edges.shape[0] - 1,):
            raise ValueError("need len(values) == len(edges) - 1")
        if np.any(np.diff(edges) < 0) or np.any(values < 0):
            raise ValueError("edges must be sorted and values non-negative")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, self.values.shape[0] - 1)
        return self.values[idx]


def thin_sample(intensity, upper_bound, window, seed):
    """Event times of the point process with the given intensity on ``window``.

    Candidates are drawn from the homogeneous process of each bound cell and
    kept with probability ``intensity(u) / upper_bound(u)``. ``intensity``
    must accept an array of times. Raises :class:`BoundError` when a
    candidate exposes ``intensity > upper_bound``.
    """
    rng = _rng(seed)
    start, end = map(float, window)
    if end <= start:
        return np.zeros(0)
    edges = np.clip(upper_bound.edges, start, end)
    widths = np.diff(edges)
    counts = rng.poisson(upper_bound.values * widths)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0)
    cell = np.repeat(np.arange(widths.shape[0]), counts)
    cand = edges[cell] + widths[cell] * rng.random(total)
    cand.sort()
    bound = upper_bound.values[cell]
    lam = np.asarray(intensity(cand), dtype=float)
    if np.any(lam > bound * (1.0 + 1e-9)):
        k = int(np.argmax(lam - bound * (1.0 + 1e-9)))
        raise BoundError(f"intensity {lam[k]:.6g} exceeds bound {bound[k]:.6g} at t={cand[k]:.3f}")
    keep = rng.random(total) * bound < lam
    return cand[keep]


def mu_bound(background, cal, window):
    """Exact piecewise-constant background rate over ``window`` (hour cells)."""
    part = hourly_partition(cal, window[0], window[1])
    return PiecewiseConstant(part.edges, _checked_exp(part.covariates @ background.beta))


def sample_background_times(background, cal, window, seed):
    bound = mu_bound(background, cal, window)
    return thin_sample(bound, bound, window, seed)


def sample_originals(model, cal, horizon, seed):
    """Future original posts: times from ``mu``, attributes resampled from training."""
    rng = _rng(seed)
    for name in ("pos", "follower", "p0"):
        if len(getattr(model.dists, f"{name}_samples")) == 0:
            raise DataError(f"empirical {name} distribution is empty")
    times = sample_background_times(model.background, cal, horizon, rng)
    n = times.shape[0]
    S = model.dists.sample("pos", rng, n)
    p0 = model.dists.sample("p0", rng, n)
    d = model.dists.sample("follower", rng, n)
    return [SampledOriginal(float(t), int(s), float(p), int(f)) for t, s, p, f in zip(times, S, p0, d)]


def _otp_bound(model, otp, a, b, future_integral):
    """Upper bound of the sampled-original term on ``[a, b]``."""
    o = OriginArrays.of(otp)
    act = o.t0 < b
    if not np.any(act):
        return 0.0
    inf = model.influence
    t0, S, p0 = o.t0[act], o.S[act].astype(float), o.p0[act]
    lo = np.maximum(a, t0)
    env = p0 * (1.0 + np.abs(S * inf.r0)) * np.exp(-(lo - t0) / inf.tau_m)
    if future_integral == "rate":
        w = kernels.psi(lo - t0, model.mode)
    elif future_integral == "causal":
        w = kernels.psi_cdf(b - np.maximum(t0, model.t_b), model.mode)
    else:
        w = np.full(t0.shape, kernels.psi_cdf(b - model.t_b, model.mode))
    return float(np.sum(env * w) * model.dists.mean_followers)


def forecast_bound(model, ds, cal, horizon, otp, future_integral):
    part = hourly_partition(cal, horizon[0], horizon[1])
    mu_cells = _checked_exp(part.covariates @ model.background.beta)
    hist = excitation_values(model, ds, part.edges[:-1], envelope=True)
    extra = np.array([_otp_bound(model, otp, a, b, future_integral) for a, b in zip(part.edges[:-1], part.edges[1:])])
    return PiecewiseConstant(part.edges, mu_cells + hist + extra)


def hour_edges(start, end):
    """Hour boundaries from ``start``; a trailing partial hour is cut at ``end``."""
    n = int(math.ceil((end - start) / HOUR - 1e-9)) if end > start else 0
    edges = start + HOUR * np.arange(n + 1)
    if n:
        edges[-1] = min(edges[-1], end)
    return edges


@dataclass(frozen=True, eq=False)
class Forecast:
    hour_starts: np.ndarray
    predicted: np.ndarray
    realizations: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)


def forecast(model, ds, cal, horizon, n_realizations=30, seed=0, future_integral="rate"):
    """Monte-Carlo forecast of hourly volumes (originals plus retweets).

    Each realization samples future originals, forms the expected future
    intensity and thins it; accepted events are binned by hour from the
    horizon start. Background events of the thinned intensity are the
    originals, so the sampled originals are not counted twice.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be at least 1")
    if future_integral not in FUTURE_MODES:
        raise ValueError(f"unknown future_integral {future_integral!r}")
    start, end = map(float, horizon)
    if abs(start - model.t_b) > 1e-6:
        raise ValueError(f"horizon must start at t_b={model.t_b}, got {start}")
    edges = hour_edges(start, end)
    n_hours = edges.shape[0] - 1
    if n_hours <= 0:
        return Forecast(np.zeros(0), np.zeros(0), np.zeros((n_realizations, 0)), seed)
    counts = np.zeros((n_realizations, n_hours))
    for r, sub in enumerate(derive_seeds(seed, n_realizations)):
        otp = OriginArrays.of(sample_originals(model, cal, (start, end), sub))
        bound = forecast_bound(model, ds, cal, (start, end), otp, future_integral)

        def lam(t, otp=otp):
            return expected_future_values(model, ds, cal, otp, t, future_integral)

        times = thin_sample(lam, bound, (start, end), np.random.SeedSequence([sub, 1]).generate_state(1)[0])
        counts[r] = np.histogram(times, bins=edges)[0]
    return Forecast(edges[:-1].copy(), counts.mean(axis=0), counts, seed, {"future_integral": future_integral})


# ---------------------------------------------------------------------------
# synthetic ground truth


def default_calendar(days=90, epoch=DEFAULT_EPOCH, timezone=DEFAULT_TZ):
    """Fixed event pattern: protests every ~2 weeks, weekly matches per team."""
    first = date.fromisoformat(epoch[:10])
    protest = {first + timedelta(days=k) for k in range(5, days, 13)}
    team_a = {first + timedelta(days=k) for k in range(2, days, 7)}
    team_b = {first + timedelta(days=k) for k in range(5, days, 9)}
    return CovariateCalendar(frozenset(protest), frozenset(team_a), frozenset(team_b), timezone, epoch)


@dataclass(frozen=True)
class SyntheticTruth:
    beta: tuple = (-8.6, 0.04, -0.5, 0.3, 0.6, 0.3, -0.25)
    r0: float = 0.1
    phi0: float = 21600.0
    tau_m: float = 7200.0
    mode: str = "paper"
    p0_median: float = 0.004
    p0_sigma: float = 0.3
    follower_mu: float = 5.0
    follower_sigma: float = 1.0
    pos_probs: tuple = (0.35, 0.25, 0.2, 0.12, 0.08)
    branching_cap: float = 1.0
    max_cascade_size: int = 20000

    def to_dict(self):
        return asdict(self)


def _follower_pool(truth, rng, size=4096):
    return np.round(rng.lognormal(truth.follower_mu, truth.follower_sigma, size)).astype(np.float64)


def expected_branching(truth, S=5):
    """Mean offspring of one contributor at the origin time for the worst PoS."""
    mean_d = math.exp(truth.follower_mu + 0.5 * truth.follower_sigma**2)
    p0_hi = truth.p0_median * math.exp(3 * truth.p0_sigma)
    return p0_hi * (1.0 + S * abs(truth.r0)) * mean_d * kernels.psi_mass(truth.mode)


def generate_synthetic(truth, cal, window, seed):
    """Simulate originals from ``mu`` and a self-exciting cascade for each."""
    rng = _rng(seed)
    t_start, t_end = map(float, window)
    mode = KernelMode.parse(truth.mode)
    excite = truth.p0_median > 0
    if excite and expected_branching(truth) >= truth.branching_cap:
        raise RunawayCascadeError(
            f"expected branching {expected_branching(truth):.3g} >= cap {truth.branching_cap}; lower p0_median"
        )
    bg = BackgroundModel(np.array(truth.beta, dtype=float), 0.0)
    origin_t = sample_background_times(bg, cal, (t_start, t_end), rng)
    n = origin_t.shape[0]
    S = rng.choice(np.arange(1, 6), size=n, p=np.asarray(truth.pos_probs) / np.sum(truth.pos_probs))
    p0 = truth.p0_median * np.exp(truth.p0_sigma * rng.standard_normal(n)) if excite else np.zeros(n)
    pool = _follower_pool(truth, rng)
    d0 = pool[rng.integers(0, pool.shape[0], size=n)]

    events = []
    p0_truth = {}
    for k in range(n):
        oid = f"o{k:06d}"
        events.append(TweetEvent(oid, None, float(origin_t[k]), int(d0[k]), int(S[k])))
        p0_truth[oid] = float(p0[k])
        if not excite:
            continue
        try:
            rt_t, rt_d = kernels.core.simulate_cascade(
                float(origin_t[k]), float(d0[k]), float(p0[k]), int(S[k]), truth.r0, truth.phi0,
                truth.tau_m, kernels.DAY, mode.tail, t_end, pool, rng, truth.max_cascade_size,
            )
        except OverflowError as exc:
            raise RunawayCascadeError(f"{exc}; lower p0_median") from None
        for m, (t, d) in enumerate(zip(rt_t, rt_d)):
            events.append(TweetEvent(f"{oid}r{m:05d}", oid, float(t), int(d), None))
    ds = build_cascades(events, t_a=t_start, t_b=t_end)
    ds.meta.update({"p0_truth": p0_truth, "seed": seed if not isinstance(seed, np.random.Generator) else None})
    return ds


def check_subcritical(model):
    """Warn when the fitted mean offspring per contributor reaches one."""
    ratio = model.dists.mean_p0 * model.dists.mean_followers * kernels.psi_mass(model.mode)
    if ratio >= 1.0:
        warnings.warn(f"fitted model is not subcritical: p0 * E[d] * mass = {ratio:.3g}", RuntimeWarning, stacklevel=2)
    return ratio
