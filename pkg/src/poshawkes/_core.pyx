# cython: language_level=3
"""Compiled hot kernels. Function-for-function twin of ``_pycore``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sin, pow, fabs, ceil, M_PI

cnp.import_array()

cdef double HEAD = 6.49e-4
cdef double BREAK = 300.0
cdef double EXPONENT = 1.242


cdef inline double _psi(double s, double tail) nogil:
    if s < 0.0:
        return 0.0
    if s <= BREAK:
        return HEAD
    return tail * pow(s, -EXPONENT)


cdef inline double _psi_cdf(double s, double tail) nogil:
    cdef double g = EXPONENT - 1.0
    if s <= 0.0:
        return 0.0
    if s <= BREAK:
        return HEAD * s
    return HEAD * BREAK + tail * (pow(BREAK, -g) - pow(s, -g)) / g


def psi(s, double tail):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(s, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(x.shape[0])
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = _psi(x[i], tail)
    return out.reshape(np.shape(s))


def psi_cdf(s, double tail):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(s, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(x.shape[0])
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = _psi_cdf(x[i], tail)
    return out.reshape(np.shape(s))


def excitation(times, double[::1] t0, long[::1] S, double[::1] p0, long[::1] ptr,
               double[::1] mt, double[::1] md, double r0, double phi0, double tau,
               double period, double tail, bint envelope):
    cdef double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t n_t = ts.shape[0], n_c = t0.shape[0]
    out_arr = np.zeros(n_t)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t q, c, j
    cdef double t, infl, k, s, br
    with nogil:
        for q in range(n_t):
            t = ts[q]
            for c in range(n_c):
                if envelope:
                    if t0[c] > t:
                        break
                    infl = p0[c] * (1.0 + fabs(S[c] * r0)) * exp(-(t - t0[c]) / tau)
                else:
                    if t0[c] >= t:
                        break
                    br = 1.0 - S[c] * r0 * sin(2.0 * M_PI * (t + phi0) / period)
                    if br <= 0.0:
                        continue
                    infl = p0[c] * br * exp(-(t - t0[c]) / tau)
                if infl == 0.0:
                    continue
                k = 0.0
                for j in range(ptr[c], ptr[c + 1]):
                    s = t - mt[j]
                    if s > 0.0 or (envelope and s == 0.0):
                        k += md[j] * _psi(s, tail)
                out[q] += infl * k
    return out_arr


def future_term(times, double[::1] t0, long[::1] S, double[::1] p0, double r0, double phi0,
                double tau, double period, double tail, double mean_d, double t_b, int mode):
    cdef double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t n_t = ts.shape[0], n = t0.shape[0]
    out_arr = np.zeros(n_t)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t q, i
    cdef double t, br, w, acc, lower
    with nogil:
        for q in range(n_t):
            t = ts[q]
            acc = 0.0
            for i in range(n):
                if t0[i] >= t:
                    continue
                br = 1.0 - S[i] * r0 * sin(2.0 * M_PI * (t + phi0) / period)
                if br <= 0.0:
                    continue
                if mode == 0:
                    w = _psi_cdf(t - t_b, tail)
                elif mode == 1:
                    lower = t0[i] if t0[i] > t_b else t_b
                    w = _psi_cdf(t - lower, tail)
                else:
                    w = _psi(t - t0[i], tail)
                acc += p0[i] * br * exp(-(t - t0[i]) / tau) * w
            out[q] = mean_d * acc
    return out_arr


def compensator(double[::1] t0, long[::1] S, double[::1] p0, long[::1] ptr, double[::1] mt,
                double[::1] md, double r0, double phi0, double tau, double period,
                double tail, double window, double t_end):
    cdef Py_ssize_t c, w, j, n_win
    cdef double start, lo, hi, mid, br, infl, mass, total = 0.0
    with nogil:
        for c in range(t0.shape[0]):
            start = t0[c]
            if start >= t_end:
                continue
            n_win = <Py_ssize_t> ceil((t_end - start) / window)
            for w in range(n_win):
                lo = start + window * w
                hi = t_end if w == n_win - 1 else start + window * (w + 1)
                mid = 0.5 * (lo + hi)
                br = 1.0 - S[c] * r0 * sin(2.0 * M_PI * (mid + phi0) / period)
                if br <= 0.0:
                    continue
                infl = p0[c] * br * exp(-(mid - start) / tau)
                mass = 0.0
                for j in range(ptr[c], ptr[c + 1]):
                    mass += md[j] * (_psi_cdf(hi - mt[j], tail) - _psi_cdf(lo - mt[j], tail))
                total += infl * mass
    return total


cdef class _Uniforms:
    cdef object rng
    cdef double[::1] buf
    cdef Py_ssize_t i, size

    def __init__(self, rng, Py_ssize_t size=512):
        self.rng = rng
        self.size = size
        self.buf = rng.random(size)
        self.i = 0

    cdef double next(self):
        if self.i == self.size:
            self.buf = self.rng.random(self.size)
            self.i = 0
        cdef double u = self.buf[self.i]
        self.i += 1
        return u


def simulate_cascade(double t0, double d0, double p0, long S, double r0, double phi0,
                     double tau, double period, double tail, double t_end,
                     double[::1] pool, rng, long max_size):
    cdef _Uniforms unif = _Uniforms(rng)
    cdef Py_ssize_t cap = 64, n = 1, j, idx
    cdef Py_ssize_t n_pool = pool.shape[0]
    mt_arr = np.empty(cap)
    md_arr = np.empty(cap)
    cdef double[::1] m_t = mt_arr
    cdef double[::1] m_d = md_arr
    m_t[0] = t0
    m_d[0] = d0
    cdef double amp = 1.0 + fabs(S * r0)
    cdef double t = t0, k, s, bound, lam, br
    while True:
        k = 0.0
        for j in range(n):
            s = t - m_t[j]
            if s >= 0.0:
                k += m_d[j] * _psi(s, tail)
        bound = p0 * amp * exp(-(t - t0) / tau) * k
        if bound <= 0.0:
            break
        t = t - log(1.0 - unif.next()) / bound
        if t > t_end:
            break
        k = 0.0
        for j in range(n):
            s = t - m_t[j]
            if s > 0.0:
                k += m_d[j] * _psi(s, tail)
        br = 1.0 - S * r0 * sin(2.0 * M_PI * (t + phi0) / period)
        if br < 0.0:
            br = 0.0
        lam = p0 * br * exp(-(t - t0) / tau) * k
        if lam > bound * (1.0 + 1e-9):
            raise ArithmeticError("thinning bound violated in cascade simulation")
        if unif.next() * bound <= lam:
            idx = <Py_ssize_t> (unif.next() * n_pool)
            if idx > n_pool - 1:
                idx = n_pool - 1
            if n == cap:
                cap *= 2
                mt_arr = np.resize(mt_arr, cap)
                md_arr = np.resize(md_arr, cap)
                m_t = mt_arr
                m_d = md_arr
            m_t[n] = t
            m_d[n] = pool[idx]
            n += 1
            if n - 1 > max_size:
                raise OverflowError(f"cascade exceeded {max_size} retweets")
    return np.array(mt_arr[1:n]), np.array(md_arr[1:n])
