"""Rolling-origin cross-validation with hourly MAE and Pearson metrics."""

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .covariates import HOUR
from .errors import DataError, PosHawkesError
from .kernels import DAY
from .simulate import derive_seeds, hour_edges

log = logging.getLogger(__name__)

MODEL_KINDS = ("hawkes", "nhpp", "regression")
FOLD_HEADER = ("fold", "model", "mae", "pearson", "train_start", "test_start")


@dataclass(frozen=True)
class Fold:
    index: int
    train: tuple
    test: tuple

    def __post_init__(self):
        if not (self.train[0] < self.train[1] <= self.test[0] < self.test[1]):
            raise ValueError(f"fold {self.index}: train must precede test, got {self.train} / {self.test}")


@dataclass(frozen=True, eq=False)
class ForecastSeries:
    hour_starts: np.ndarray
    predicted: np.ndarray
    observed: np.ndarray
    fold: int = -1

    def __post_init__(self):
        n = self.hour_starts.shape[0]
        if self.predicted.shape != (n,) or self.observed.shape != (n,):
            raise ValueError("hour_starts, predicted and observed must have equal lengths")


def make_folds(ds, train_days=30, block_days=15, eval_days=8):
    """Chronological folds: train on ``train_days`` ending at each block boundary.

    Boundaries sit at ``t_a + train_days + k * block_days`` (days); a fold is
    kept only if its test window ends inside the dataset.
    """
    if min(train_days, block_days, eval_days) <= 0:
        raise ValueError("train_days, block_days and eval_days must be positive")
    folds = []
    k = 0
    while True:
        b = ds.t_a + (train_days + k * block_days) * DAY
        end = b + eval_days * DAY
        if end > ds.t_b + 1e-6:
            break
        folds.append(Fold(k, (ds.t_a + k * block_days * DAY, b), (b, min(end, ds.t_b))))
        k += 1
    if not folds:
        span = (ds.t_b - ds.t_a) / DAY
        raise DataError(f"dataset spans {span:.3g} days; need at least {train_days + eval_days} for one fold")
    return folds


def bin_hourly(times, window):
    """Counts per half-open hour ``[h, h + 1)`` of ``window``.

    Returns ``(hour_starts, counts)``. A trailing partial hour is kept and
    logged.
    """
    start, end = map(float, window)
    edges = hour_edges(start, end)
    n = edges.shape[0] - 1
    if n <= 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    if edges[-1] - edges[-2] < HOUR - 1e-9:
        log.info("bin_hourly: last hour of [%s, %s) is partial", start, end)
    t = np.asarray(times, dtype=float)
    t = t[(t >= start) & (t < end)]
    idx = np.searchsorted(edges, t, side="right") - 1
    return edges[:-1].copy(), np.bincount(idx, minlength=n).astype(np.int64)


def _pair(pred, obs, min_len):
    p = np.asarray(pred, dtype=float).ravel()
    o = np.asarray(obs, dtype=float).ravel()
    if p.shape != o.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {o.shape[0]} observations")
    if p.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} values, got {p.shape[0]}")
    return p, o


def mae(pred, obs):
    p, o = _pair(pred, obs, 1)
    return float(np.mean(np.abs(p - o)))


def pearson(pred, obs):
    """Sample correlation; NaN (undefined) when either series is constant."""
    p, o = _pair(pred, obs, 2)
    dp = p - p.mean()
    do = o - o.mean()
    sp = math.sqrt(float(dp @ dp))
    so = math.sqrt(float(do @ do))
    if sp == 0.0 or so == 0.0:
        return math.nan
    return float(np.clip((dp @ do) / (sp * so), -1.0, 1.0))


@dataclass(frozen=True)
class CVConfig:
    train_days: float = 30
    block_days: float = 15
    eval_days: float = 8
    kernel_mode: str = "paper"
    window_s: float = 14400.0
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100
    influence_max_iter: int = 600
    influence_rel_tol: float = 1e-8
    n_realizations: int = 30
    future_integral: str = "rate"
    phat_contributors: str = "history"
    early_window_s: float = 3600.0


def predict_window(kind, train, cal, horizon, config, seed):
    """Fit ``kind`` on ``train`` and return ``(hour_starts, predicted)`` over ``horizon``."""
    from .background import FitOptions, fit_beta
    from .baselines import fit_nhpp, fit_retweet_regression, predict_nhpp, predict_regression_baseline
    from .events import empirical_distributions
    from .influence_fit import InfluenceOptions
    from .intensity import fit_hawkes
    from .simulate import forecast

    opts = FitOptions(config.ridge, config.tol, config.max_iter)
    edges = hour_edges(*horizon)
    if kind == "hawkes":
        iopts = InfluenceOptions(config.influence_max_iter, config.influence_rel_tol, seed=seed % 2**32)
        model = fit_hawkes(train, cal, config.kernel_mode, config.window_s, opts, iopts, config.phat_contributors)
        fc = forecast(model, train, cal, horizon, config.n_realizations, seed, config.future_integral)
        return fc.hour_starts, fc.predicted
    if kind == "nhpp":
        return edges[:-1], predict_nhpp(fit_nhpp(train, cal, opts), cal, horizon)
    if kind == "regression":
        bg = fit_beta(train, cal, opts)
        reg = fit_retweet_regression(train, config.early_window_s)
        dists = empirical_distributions(train, {})
        return edges[:-1], predict_regression_baseline(bg, reg, dists, cal, horizon, seed)
    raise ValueError(f"model kind must be one of {MODEL_KINDS}, got {kind!r}")


@dataclass(frozen=True)
class FoldResult:
    fold: int
    model: str
    mae: float
    pearson: float
    train_start: float
    test_start: float
    error: str = ""


@dataclass(frozen=True, eq=False)
class CVResult:
    model: str
    folds: list
    series: list = field(default_factory=list)
    seed: int = 0

    def _values(self, name):
        return np.array([getattr(r, name) for r in self.folds if not r.error and math.isfinite(getattr(r, name))])

    def summary(self, name):
        """``(mean, sd, n_used)`` over successful folds with a defined metric."""
        v = self._values(name)
        if v.size == 0:
            return math.nan, math.nan, 0
        sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        return float(np.mean(v)), sd, int(v.size)

    @property
    def n_failed(self):
        return sum(1 for r in self.folds if r.error)

    @property
    def n_undefined_pearson(self):
        return sum(1 for r in self.folds if not r.error and not math.isfinite(r.pearson))


def run_cv(ds, cal, model_kind, config=None, seed=0):
    """Fit and score ``model_kind`` on every fold of ``ds``.

    ``model_kind`` is one of ``MODEL_KINDS`` or a callable
    ``f(train, cal, horizon, config, seed) -> predicted`` returning hourly
    values over ``horizon``. Fit or forecast failures are recorded on the fold
    and excluded from the summary rather than aborting the run.
    """
    config = config or CVConfig()
    if callable(model_kind):
        name = getattr(model_kind, "__name__", "custom")
        predict = model_kind
    elif model_kind in MODEL_KINDS:
        name = model_kind
        predict = lambda train, cal_, horizon, cfg, s: predict_window(model_kind, train, cal_, horizon, cfg, s)[1]
    else:
        raise ValueError(f"model kind must be one of {MODEL_KINDS}, got {model_kind!r}")
    folds = make_folds(ds, config.train_days, config.block_days, config.eval_days)
    seeds = derive_seeds(seed, len(folds))
    results, series = [], []
    for fold, fseed in zip(folds, seeds):
        train = ds.window(*fold.train)
        hours, observed = bin_hourly(ds.event_times, fold.test)
        try:
            predicted = predict(train, cal, fold.test, config, fseed)
        except (PosHawkesError, ArithmeticError, ValueError) as exc:
            log.warning("fold %d (%s) failed: %s", fold.index, name, exc)
            results.append(FoldResult(fold.index, name, math.nan, math.nan, fold.train[0], fold.test[0],
                                      f"{type(exc).__name__}: {exc}"))
            continue
        results.append(FoldResult(fold.index, name, mae(predicted, observed), pearson(predicted, observed),
                                  fold.train[0], fold.test[0]))
        series.append(ForecastSeries(hours, np.asarray(predicted, float), observed, fold.index))
    return CVResult(name, results, series, seed)


def folds_csv(results, cal=None):
    """Per-fold rows ``fold,model,mae,pearson,train_start,test_start`` as CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FOLD_HEADER)
    for res in results:
        for r in res.folds:
            stamp = (lambda t: cal.local(t).isoformat()) if cal is not None else repr
            w.writerow([r.fold, r.model, repr(r.mae), repr(r.pearson), stamp(r.train_start), stamp(r.test_start)])
    return buf.getvalue()


def summary_table(results):
    lines = [f"{'model':<11} {'MAE mean':>10} {'MAE sd':>9} {'r mean':>8} {'r sd':>7}  notes"]
    for res in results:
        m_mean, m_sd, _ = res.summary("mae")
        r_mean, r_sd, r_n = res.summary("pearson")
        notes = []
        if res.n_failed:
            notes.append(f"{res.n_failed} fold(s) failed")
        if res.n_undefined_pearson:
            notes.append(f"{res.n_undefined_pearson} undefined Pearson excluded")
        lines.append(f"{res.model:<11} {m_mean:10.3f} {m_sd:9.3f} {r_mean:8.3f} {r_sd:7.3f}  {'; '.join(notes)}")
    return "\n".join(lines)
