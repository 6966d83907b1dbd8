"""Log-linear background rate ``mu(t) = exp(beta . C(t))`` and its fit.

The fit maximises the Poisson part of the log-likelihood with the integral
discretised over the hourly partition (covariates evaluated at cell
midpoints). The objective is convex; a damped Newton method with
backtracking converges in a handful of steps.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .covariates import COVARIATE_NAMES, N_COVARIATES, covariate_matrix, covariate_vector, hourly_partition
from .errors import DataError, FitError

MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class FitOptions:
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100


@dataclass(frozen=True, eq=False)
class BackgroundModel:
    beta: np.ndarray
    ridge: float = 1e-6
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (N_COVARIATES,) or not np.all(np.isfinite(beta)):
            raise ValueError(f"beta must be {N_COVARIATES} finite values, got {beta}")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        object.__setattr__(self, "beta", beta)

    def named(self):
        return dict(zip(COVARIATE_NAMES, map(float, self.beta)))


def _checked_exp(z):
    z = np.asarray(z, dtype=float)
    if np.any(z > MAX_EXPONENT):
        bad = float(z[np.argmax(z)]) if z.ndim else float(z)
        raise FitError(f"exp(beta . C) overflows: beta . C = {bad:.6g}")
    return np.exp(z)


def mu(model, cal, t):
    """Background intensity at ``t`` (scalar) in events per second."""
    return float(_checked_exp(model.beta @ covariate_vector(cal, t)))


def mu_values(model, cal, times):
    return _checked_exp(covariate_matrix(cal, times) @ model.beta)


def identifiable(beta):
    """Coefficient combinations that the am + pm = 1 collinearity leaves identified."""
    b = dict(zip(COVARIATE_NAMES, map(float, beta)))
    return {
        "intercept+pm": b["intercept"] + b["pm"],
        "am-pm": b["am"] - b["pm"],
        "dow": b["dow"],
        "protest": b["protest"],
        "team_a": b["team_a"],
        "team_b": b["team_b"],
    }


class PoissonDesign:
    """Sufficient statistics of a log-linear Poisson fit over a partition.

    ``event_sum`` is ``sum_i C(t_i)``; ``X`` and ``widths`` are the cell
    covariates and lengths.
    """

    def __init__(self, event_sum, X, widths, ridge=0.0, mask=None):
        self.event_sum = np.asarray(event_sum, dtype=float)
        self.X = np.asarray(X, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        self.ridge = float(ridge)
        self.mask = np.ones(N_COVARIATES, bool) if mask is None else np.asarray(mask, bool)

    @classmethod
    def from_times(cls, cal, times, t_a, t_b, ridge=0.0, mask=None):
        times = np.asarray(times, dtype=float)
        if times.size == 0:
            raise DataError("no events to fit")
        part = hourly_partition(cal, t_a, t_b)
        rows = part.covariates[part.cell_of(times)]
        return cls(rows.sum(axis=0), part.covariates, part.widths, ridge, mask)

    def _full(self, beta):
        full = np.zeros(N_COVARIATES)
        full[self.mask] = beta
        return full

    def value_grad(self, beta):
        """Negative log-likelihood plus ridge, and its gradient (masked coordinates)."""
        full = self._full(beta)
        rate = _checked_exp(self.X @ full) * self.widths
        f = -full @ self.event_sum + rate.sum() + self.ridge * full @ full
        g = self.X.T @ rate - self.event_sum + 2.0 * self.ridge * full
        return float(f), g[self.mask]

    def hessian(self, beta):
        full = self._full(beta)
        rate = _checked_exp(self.X @ full) * self.widths
        Xm = self.X[:, self.mask]
        return (Xm * rate[:, None]).T @ Xm + 2.0 * self.ridge * np.eye(int(self.mask.sum()))

    def minimize(self, tol=1e-8, max_iter=100, beta0=None):
        """Damped Newton with Armijo backtracking.

        Converged when the gradient's max-norm is below
        ``tol * max(1, |event_sum|_inf)``.
        """
        n_free = int(self.mask.sum())
        if beta0 is None:
            beta = np.zeros(n_free)
            total = float(self.widths.sum())
            n = float(self.event_sum[0]) if self.mask[0] else 1.0
            if self.mask[0]:
                beta[0] = math.log(max(n, 1e-300) / total)
        else:
            beta = np.asarray(beta0, dtype=float)[self.mask].copy()
        scale = max(1.0, float(np.max(np.abs(self.event_sum))))
        f, g = self.value_grad(beta)
        for it in range(max_iter):
            if np.max(np.abs(g)) <= tol * scale:
                return self._full(beta), it
            H = self.hessian(beta)
            step = np.linalg.lstsq(H, -g, rcond=None)[0]
            slope = float(g @ step)
            if slope >= 0:
                step, slope = -g, -float(g @ g)
            t = 1.0
            while True:
                cand = beta + t * step
                try:
                    f_new, g_new = self.value_grad(cand)
                except FitError:
                    f_new, g_new = math.inf, None
                if f_new <= f + 1e-4 * t * slope:
                    break
                # objective differences below round-off: accept if the gradient shrinks
                if g_new is not None and f_new <= f + 1e-13 * abs(f) and np.max(np.abs(g_new)) < np.max(np.abs(g)):
                    break
                t *= 0.5
                if t < 1e-12:
                    raise FitError("line search failed", last_iterate=self._full(beta), grad_norm=float(np.max(np.abs(g))))
            beta, f, g = cand, f_new, g_new
        if np.max(np.abs(g)) <= tol * scale:
            return self._full(beta), max_iter
        raise FitError(
            f"background fit did not converge in {max_iter} iterations (|grad|_inf={np.max(np.abs(g)):.3g})",
            last_iterate=self._full(beta),
            grad_norm=float(np.max(np.abs(g))),
        )


def background_objective(ds, cal, beta, ridge=1e-6):
    """(negative log-likelihood, gradient) of the background part for originals only."""
    if len(ds.cascades) == 0:
        raise DataError("dataset has no original posts")
    design = PoissonDesign.from_times(cal, ds.origin_times, ds.t_a, ds.t_b, ridge)
    return design.value_grad(np.asarray(beta, dtype=float))


def fit_beta(ds, cal, opts=None, mask=None):
    """Fit beta on the original posts of ``ds``.

    ``mask`` restricts the fit to a subset of covariates (others fixed at 0).
    """
    opts = opts or FitOptions()
    if len(ds.cascades) == 0:
        raise DataError("cannot fit background: dataset has no original posts")
    design = PoissonDesign.from_times(cal, ds.origin_times, ds.t_a, ds.t_b, opts.ridge, mask)
    beta, iters = design.minimize(opts.tol, opts.max_iter)
    _, g = design.value_grad(beta[design.mask])
    return BackgroundModel(
        beta,
        opts.ridge,
        {"iterations": iters, "grad_inf": float(np.max(np.abs(g))), "n_events": len(ds.cascades)},
    )
