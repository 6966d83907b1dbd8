"""Memory kernel, influence function and their bounds.

The delay kernel is piecewise: constant for the first five minutes after a
post, then a power-law tail. Two tail constants are supported:

``KernelMode.PAPER``
    the published coefficient ``5.44e-7``. The kernel then drops by a factor
    of about 1.4e6 at ``s = 300`` and integrates to ~0.1947.
``KernelMode.CONTINUOUS``
    the coefficient that makes the kernel continuous at ``s = 300``
    (``6.49e-4 * 300**1.242``), integrating to ~0.99925.

All times are in seconds.

The numeric work is done by a backend: the compiled ``_core`` extension when
importable, otherwise the numpy module ``_pycore``. Set the environment
variable ``POSHAWKES_BACKEND=python`` to force the fallback.
"""

import enum
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _pycore

HEAD = _pycore.HEAD
BREAK = _pycore.BREAK
EXPONENT = _pycore.EXPONENT
PAPER_TAIL = 5.44e-7
CONTINUOUS_TAIL = HEAD * BREAK**EXPONENT
DAY = 86400.0


def _load_backend(name=None):
    name = (name or os.environ.get("POSHAWKES_BACKEND", "auto")).lower()
    if name in ("python", "numpy"):
        return _pycore
    try:
        from . import _core
    except ImportError:
        if name == "cython":
            raise
        return _pycore
    return _core


core = _load_backend()


def backend_name():
    return "python" if core is _pycore else "cython"


def set_backend(name):
    """Switch the kernel backend (``"cython"``, ``"python"`` or ``"auto"``)."""
    global core
    core = _load_backend(name)
    return backend_name()


class KernelMode(str, enum.Enum):
    PAPER = "paper"
    CONTINUOUS = "continuous"

    @property
    def tail(self):
        return PAPER_TAIL if self is KernelMode.PAPER else CONTINUOUS_TAIL

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"kernel_mode must be 'paper' or 'continuous', got {value!r}") from None


def psi(s, mode=KernelMode.PAPER):
    """Delay kernel; returns a float for scalar input."""
    tail = KernelMode.parse(mode).tail
    if np.ndim(s) == 0:
        s = float(s)
        if s < 0.0:
            return 0.0
        if s <= BREAK:
            return HEAD
        return tail * s ** (-EXPONENT)
    return _pycore.psi(s, tail)


def psi_cdf(s, mode=KernelMode.PAPER):
    """``integral_0^s psi``; zero for non-positive ``s``."""
    tail = KernelMode.parse(mode).tail
    if np.ndim(s) == 0:
        return float(_pycore.psi_cdf(np.array([s]), tail)[0])
    return _pycore.psi_cdf(s, tail)


def psi_integral(a, b, mode=KernelMode.PAPER):
    """Exact ``integral_a^b psi(s) ds`` for ``a <= b`` (vectorised)."""
    if np.any(np.asarray(a) > np.asarray(b)):
        raise ValueError("psi_integral requires a <= b")
    return psi_cdf(b, mode) - psi_cdf(a, mode)


def psi_mass(mode=KernelMode.PAPER):
    """Total integral of the kernel over ``[0, inf)``."""
    tail = KernelMode.parse(mode).tail
    return HEAD * BREAK + tail * BREAK ** (1.0 - EXPONENT) / (EXPONENT - 1.0)


@dataclass(frozen=True)
class InfluenceParams:
    """Parameters of the damped circadian influence of one original post.

    ``period`` is one day in production. It is a field only so that shape
    checks can run on an abstract time axis.
    """

    p0: float
    r0: float
    phi0: float
    tau_m: float
    period: float = DAY

    def __post_init__(self):
        if not self.p0 > 0:
            raise ValueError(f"p0 must be positive, got {self.p0}")
        if not self.tau_m > 0:
            raise ValueError(f"tau_m must be positive, got {self.tau_m}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")


def influence_bracket(params, S, t):
    return 1.0 - S * params.r0 * np.sin(2.0 * math.pi * (np.asarray(t, dtype=float) + params.phi0) / params.period)


def influence(params, S, t0, t):
    """Influence ``p_i(t)`` of an original with PoS ``S`` posted at ``t0``.

    Negative values of the oscillating bracket are clamped to zero.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < t0):
        raise ValueError("influence is undefined before the origin time")
    br = np.maximum(influence_bracket(params, S, t), 0.0)
    out = params.p0 * br * np.exp(-(t - t0) / params.tau_m)
    return float(out) if out.ndim == 0 else out


def influence_envelope(params, S, t0, t):
    """Non-increasing upper bound ``p0 (1 + |S r0|) exp(-(t - t0)/tau_m)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < t0):
        raise ValueError("envelope is undefined before the origin time")
    out = params.p0 * (1.0 + abs(S * params.r0)) * np.exp(-(t - t0) / params.tau_m)
    return float(out) if out.ndim == 0 else out
