"""Pure numpy implementation of the hot kernels.

This module mirrors ``_core.pyx`` function by function. It is the fallback
used when the compiled extension is missing, and the reference the compiled
version is tested against.
"""

import math

import numpy as np

HEAD = 6.49e-4
BREAK = 300.0
EXPONENT = 1.242

_TWO_PI = 2.0 * math.pi
_CHUNK = 1 << 20


def psi(s, tail):
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    head = (s >= 0.0) & (s <= BREAK)
    out[head] = HEAD
    far = s > BREAK
    out[far] = tail * s[far] ** (-EXPONENT)
    return out


def psi_cdf(s, tail):
    """Antiderivative of ``psi`` anchored at zero (0 for s <= 0)."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    head = (s > 0.0) & (s <= BREAK)
    out[head] = HEAD * s[head]
    far = s > BREAK
    g = EXPONENT - 1.0
    out[far] = HEAD * BREAK + tail * (BREAK ** (-g) - s[far] ** (-g)) / g
    return out


def _bracket(t, S, r0, phi0, period):
    return 1.0 - S * r0 * np.sin(_TWO_PI * (t + phi0) / period)


def excitation(times, t0, S, p0, ptr, mt, md, r0, phi0, tau, period, tail, envelope):
    """Sum of cascade excitations at each query time.

    With ``envelope`` false this is ``sum_i p_i(t) sum_{j, t_j < t} d_j psi(t - t_j)``
    using the clamped influence. With ``envelope`` true every influence is
    replaced by its decreasing upper envelope and members posting exactly at
    ``t`` are included, which gives a bound valid until the next event.
    """
    times = np.asarray(times, dtype=np.float64)
    out = np.zeros(times.shape[0])
    n_members = mt.shape[0]
    if n_members == 0 or times.shape[0] == 0:
        return out
    owner = np.repeat(np.arange(t0.shape[0]), np.diff(ptr))
    own_t0 = t0[owner]
    own_S = S[owner].astype(np.float64)
    own_p0 = p0[owner]
    step = max(1, _CHUNK // n_members)
    for lo in range(0, times.shape[0], step):
        t = times[lo:lo + step, None]
        s = t - mt[None, :]
        if envelope:
            k = np.where(s >= 0.0, psi(s, tail), 0.0)
            infl = own_p0 * (1.0 + np.abs(own_S * r0)) * np.exp(-np.maximum(t - own_t0, 0.0) / tau)
            active = t >= own_t0
        else:
            k = np.where(s > 0.0, psi(s, tail), 0.0)
            br = np.maximum(_bracket(t, own_S, r0, phi0, period), 0.0)
            infl = own_p0 * br * np.exp(-np.maximum(t - own_t0, 0.0) / tau)
            active = t > own_t0
        contrib = np.where(active & (k > 0.0), infl * md[None, :] * k, 0.0)
        out[lo:lo + step] = contrib.sum(axis=1)
    return out


def future_term(times, t0, S, p0, r0, phi0, tau, period, tail, mean_d, t_b, mode):
    """Added intensity of sampled future originals.

    ``mode`` 0 integrates psi from ``t_b`` (literal lower limit), 1 from
    ``max(t_b, t0)`` (causal), 2 uses the kernel density ``psi(t - t0)``.
    Only origins with ``t0 < t`` contribute.
    """
    times = np.asarray(times, dtype=np.float64)
    out = np.zeros(times.shape[0])
    n = t0.shape[0]
    if n == 0 or times.shape[0] == 0:
        return out
    Sf = S.astype(np.float64)
    step = max(1, _CHUNK // n)
    for lo in range(0, times.shape[0], step):
        t = times[lo:lo + step, None]
        active = t > t0[None, :]
        br = np.maximum(_bracket(t, Sf, r0, phi0, period), 0.0)
        infl = p0 * br * np.exp(-np.maximum(t - t0, 0.0) / tau)
        if mode == 0:
            w = psi_cdf(t - t_b, tail)
        elif mode == 1:
            w = psi_cdf(t - np.maximum(t0, t_b), tail)
        else:
            w = psi(t - t0, tail)
        contrib = np.where(active, infl * w, 0.0)
        out[lo:lo + step] = mean_d * contrib.sum(axis=1)
    return out


def compensator(t0, S, p0, ptr, mt, md, r0, phi0, tau, period, tail, window, t_end):
    """Excitation part of the compensator over ``[t0_i, t_end]``.

    Influence is frozen at the midpoint of consecutive ``window``-wide
    blocks starting at each origin; the kernel part is integrated exactly.
    """
    total = 0.0
    for c in range(t0.shape[0]):
        start = t0[c]
        if start >= t_end:
            continue
        n_win = int(math.ceil((t_end - start) / window))
        edges = start + window * np.arange(n_win + 1)
        edges[-1] = t_end
        lo, hi = edges[:-1], edges[1:]
        mid = 0.5 * (lo + hi)
        br = np.maximum(_bracket(mid, float(S[c]), r0, phi0, period), 0.0)
        infl = p0[c] * br * np.exp(-(mid - start) / tau)
        m_t = mt[ptr[c]:ptr[c + 1]]
        m_d = md[ptr[c]:ptr[c + 1]]
        mass = psi_cdf(hi[:, None] - m_t[None, :], tail) - psi_cdf(lo[:, None] - m_t[None, :], tail)
        total += float(np.sum(infl * (mass @ m_d)))
    return total


class _Uniforms:
    def __init__(self, rng, size=512):
        self.rng = rng
        self.size = size
        self.buf = rng.random(size)
        self.i = 0

    def next(self):
        if self.i == self.size:
            self.buf = self.rng.random(self.size)
            self.i = 0
        u = self.buf[self.i]
        self.i += 1
        return u


def simulate_cascade(t0, d0, p0, S, r0, phi0, tau, period, tail, t_end, pool, rng, max_size):
    """Ogata thinning of a single self-exciting cascade.

    Every accepted retweet joins the member set and excites further retweets.
    Follower counts of new members are drawn uniformly from ``pool``.
    Returns ``(times, followers)`` of the retweets only.
    """
    unif = _Uniforms(rng)
    m_t = [t0]
    m_d = [float(d0)]
    n_pool = pool.shape[0]
    amp = 1.0 + abs(S * r0)
    t = t0
    while True:
        k = 0.0
        for tj, dj in zip(m_t, m_d):
            s = t - tj
            if s >= 0.0:
                k += dj * (HEAD if s <= BREAK else tail * s ** (-EXPONENT))
        bound = p0 * amp * math.exp(-(t - t0) / tau) * k
        if bound <= 0.0:
            break
        t = t - math.log(1.0 - unif.next()) / bound
        if t > t_end:
            break
        k = 0.0
        for tj, dj in zip(m_t, m_d):
            s = t - tj
            if s > 0.0:
                k += dj * (HEAD if s <= BREAK else tail * s ** (-EXPONENT))
        br = 1.0 - S * r0 * math.sin(_TWO_PI * (t + phi0) / period)
        lam = p0 * max(br, 0.0) * math.exp(-(t - t0) / tau) * k
        if lam > bound * (1.0 + 1e-9):
            raise ArithmeticError("thinning bound violated in cascade simulation")
        if unif.next() * bound <= lam:
            idx = min(int(unif.next() * n_pool), n_pool - 1)
            m_t.append(t)
            m_d.append(float(pool[idx]))
            if len(m_t) - 1 > max_size:
                raise OverflowError(f"cascade exceeded {max_size} retweets")
    return np.array(m_t[1:], dtype=np.float64), np.array(m_d[1:], dtype=np.float64)
